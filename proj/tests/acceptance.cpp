// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "cli_runner.hpp"
#include "layerprobe/metrics.hpp"
#include "layerprobe/pipeline.hpp"
#include "layerprobe/probes.hpp"
#include "layerprobe/report.hpp"
#include "layerprobe/surrogate.hpp"
#include "layerprobe/synth.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using layerprobe::Matrix;
using testing_support::random_matrix;
using testing_support::to_matrix;
using V = std::vector<double>;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

// Collects failures with a short reason; first reason wins the detail.
struct Check {
  bool ok = true;
  std::ostringstream why;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) why << msg;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (time_limit_s > 0 && secs >= time_limit_s) {
    o.ok = false;
    o.detail += " [over time limit " + std::to_string(time_limit_s) + " s]";
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.3f s", secs);
  std::cout << (o.ok ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail << "; " << timing << ")" << std::endl;
  if (!o.ok) ++failures;
}

layerprobe::LayerStack single(const Matrix& h) {
  layerprobe::LayerStack s;
  s.molecule_ids = {"m0"};
  s.token_counts = {h.rows()};
  s.dim = h.cols();
  s.embeddings = {h};
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Outcome probe_exactness() {
  Check c;
  const double a = layerprobe::tme(single(Matrix::from_rows({{1, 0}, {0, 1}})));
  const double b = layerprobe::tme(single(Matrix::from_rows({{1, 0}, {2, 0}})));
  const double d = layerprobe::tme(single(Matrix::from_rows({{1, 0}, {0, 2}})));
  const double expected_d = -(0.2 * std::log(0.2) + 0.8 * std::log(0.8));
  c.expect(std::abs(a - std::log(2.0)) <= 1e-9, "identity != ln 2");
  c.expect(std::abs(b) <= 1e-9, "rank-1 != 0");
  c.expect(std::abs(d - expected_d) <= 1e-9, "diag(1,2) != 0.500402");
  return {c.ok, c.ok ? "ln2=" + fmt(a) + ", rank1=" + fmt(b) + ", diag=" + fmt(d) : c.why.str()};
}

Outcome cka_invariance() {
  Check c;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::size_t> n_dist(2, 32), d_dist(1, 8);
  std::uniform_real_distribution<double> scale(-10.0, 10.0);
  double worst_rot = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = n_dist(rng), d = d_dist(rng);
    const Matrix x = random_matrix(n, d, rng);
    const Matrix y = random_matrix(n, d_dist(rng), rng);
    const Matrix q = to_matrix(oracle::random_orthogonal(d, rng));
    double k = scale(rng);
    if (std::abs(k) < 1e-3) k = 1.0;
    Matrix cx = x;
    for (double& v : cx.data()) v *= k;
    const double self = layerprobe::linear_cka(x, x);
    const double rot = layerprobe::linear_cka(x, layerprobe::matmul(x, q));
    const double sc = layerprobe::linear_cka(x, cx);
    const double xy = layerprobe::linear_cka(x, y);
    worst_rot = std::max(worst_rot, std::abs(rot - 1.0));
    c.expect(std::abs(self - 1.0) <= 1e-12, "CKA(x,x) != 1 at case " + std::to_string(i));
    c.expect(std::abs(rot - 1.0) <= 1e-9, "CKA(x,xQ) != 1 at case " + std::to_string(i));
    c.expect(std::abs(sc - 1.0) <= 1e-12, "CKA(x,cx) != 1 at case " + std::to_string(i));
    c.expect(xy == layerprobe::linear_cka(y, x), "asymmetric at case " + std::to_string(i));
    c.expect(xy >= 0.0 && xy <= 1.0, "out of [0,1] at case " + std::to_string(i));
  }
  return {c.ok, c.ok ? "200 cases, max |CKA(x,xQ)-1|=" + fmt(worst_rot) : c.why.str()};
}

Outcome cka_oracle() {
  Check c;
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<std::size_t> n_dist(2, 6), d_dist(1, 3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = n_dist(rng);
    const auto x = oracle::random_dense(n, d_dist(rng), rng);
    const auto y = oracle::random_dense(n, d_dist(rng), rng);
    const double diff = std::abs(layerprobe::linear_cka(to_matrix(x), to_matrix(y)) - oracle::cka_hsic(x, y));
    worst = std::max(worst, diff);
    c.expect(diff <= 1e-9, "mismatch at case " + std::to_string(i));
  }
  return {c.ok, c.ok ? "100 cases, max diff=" + fmt(worst) : c.why.str()};
}

Outcome metric_oracles() {
  Check c;
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> coarse(0, 2);
  std::normal_distribution<double> fine;
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int tied = 0; tied < 2; ++tied) {
      V scores;
      for (std::size_t i = 0; i < n; ++i) scores.push_back(tied ? coarse(rng) : fine(rng));
      V transformed;
      for (double s : scores) transformed.push_back(std::atan(3.0 * s) + 0.5 * s * s * s);
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        V labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back((mask >> i) & 1u ? 1.0 : 0.0);
        if (mask == 0 || mask == (1u << n) - 1) continue;
        const double got = layerprobe::auroc(scores, labels).value;
        const double diff = std::abs(got - oracle::auroc_pairs(scores, labels));
        worst = std::max(worst, diff);
        c.expect(diff <= 1e-12, "AUROC mismatch n=" + std::to_string(n));
        c.expect(std::abs(layerprobe::auroc(transformed, labels).value - got) <= 1e-12,
                 "AUROC not monotone-invariant n=" + std::to_string(n));
        ++checked;
      }
    }
  }
  const double ap = layerprobe::aucpr(V{0.9, 0.8, 0.7}, V{1, 0, 1}).value;
  c.expect(std::abs(ap - 5.0 / 6.0) <= 1e-9, "AUCPR example != 5/6");
  const double rho = layerprobe::spearman(V{1, 2, 2, 3}, V{1, 3, 2, 4}).value;
  c.expect(std::abs(rho - 4.5 / std::sqrt(22.5)) <= 1e-9, "Spearman example != 4.5/sqrt(22.5)");
  c.expect(std::abs(layerprobe::spearman(V{1, 5, 9, 10}, V{-3, 0, 2, 7}).value - 1.0) <= 1e-9, "Spearman monotone != 1");
  return {c.ok, c.ok ? std::to_string(checked) + " label sets, max AUROC diff=" + fmt(worst) + ", AUCPR=" + fmt(ap) +
                           ", Spearman=" + fmt(rho)
                     : c.why.str()};
}

Outcome surrogate_correctness() {
  Check c;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> lam(0.1, 3.0);
  std::normal_distribution<double> g;
  double worst_ridge = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t d = 1 + i % 3, n = 2 + (i / 3) % 5;
    const auto x = oracle::random_dense(n, d, rng, 2.0);
    V y;
    for (std::size_t r = 0; r < n; ++r) y.push_back(g(rng));
    const double l = lam(rng);
    const auto expected = oracle::ridge_normal_equations(x, y, l);
    const auto m = layerprobe::fit_ridge(to_matrix(x), y, l);
    for (std::size_t j = 0; j < d; ++j) worst_ridge = std::max(worst_ridge, std::abs(m.weights[j] - expected.weights[j]));
    worst_ridge = std::max(worst_ridge, std::abs(m.bias - expected.bias));
  }
  c.expect(worst_ridge <= 1e-8, "ridge oracle mismatch " + fmt(worst_ridge));

  double worst_grad = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 8 + i % 40, d = 1 + i % 7;
    const Matrix x = random_matrix(n, d, rng);
    V y(n);
    for (std::size_t r = 0; r < n; ++r) y[r] = x(r, 0) + 0.8 * g(rng) > 0.0 ? 1.0 : 0.0;
    y[0] = 1.0;
    y[1] = 0.0;
    const auto m = layerprobe::fit_logistic(x, y, lam(rng));
    worst_grad = std::max(worst_grad, m.gradient_norm);
  }
  c.expect(worst_grad <= 1e-8, "logistic gradient " + fmt(worst_grad));

  const auto m = layerprobe::fit_logistic(Matrix::from_rows({{-1}, {1}}), V{0, 1}, 1.0);
  const double w = oracle::golden_section([](double v) { return std::log1p(std::exp(-v)) + 0.5 * v * v; }, -5, 5);
  c.expect(std::abs(m.weights[0] - w) <= 1e-4, "1-D logistic " + fmt(m.weights[0]) + " vs oracle " + fmt(w));
  return {c.ok, c.ok ? "ridge max diff=" + fmt(worst_ridge) + ", 50 logistic max grad=" + fmt(worst_grad) +
                           ", 1-D w=" + fmt(m.weights[0]) + " (oracle " + fmt(w) + ")"
                     : c.why.str()};
}

Outcome compression_signature() {
  Check c;
  const auto d = layerprobe::generate(layerprobe::compression_preset(7));
  const auto p = layerprobe::probe_all(d.layers, layerprobe::Pooling::mean, 1);
  const double tme_min = *std::min_element(p.tme.begin(), p.tme.end() - 1);
  const double cka_min = *std::min_element(p.adjacent_cka.begin(), p.adjacent_cka.end() - 1);
  c.expect(d.layers.size() == 6 && d.index.dim == 16, "wrong shape");
  c.expect(p.tme.back() < tme_min - 0.2, "tme drop too small");
  c.expect(p.adjacent_cka.back() <= cka_min - 0.1, "CKA dip too small");
  const auto cell = layerprobe::improvement_cell(layerprobe::eval_frozen(d.layers, d.manifest));
  c.expect(cell.percent_change > 5.0, "percent_change " + fmt(cell.percent_change));
  return {c.ok, "tme[L-1]=" + fmt(p.tme.back()) + " vs interior min " + fmt(tme_min) + ", last CKA=" +
                    fmt(p.adjacent_cka.back()) + " vs interior min " + fmt(cka_min) +
                    ", percent_change=" + fmt(cell.percent_change) + (c.ok ? "" : " -- " + c.why.str())};
}

Outcome determinism() {
  Check c;
  testing_support::TempDir dir;
  const std::string container = (dir / "synth").string();
  c.expect(testing_support::run_cli({"synth", container, "--seed", "7"}, dir.path()).code == 0, "synth failed");
  const auto a = testing_support::run_cli({"eval", container, "--workers", "1", "--out", (dir / "w1").string()}, dir.path());
  const auto b = testing_support::run_cli({"eval", container, "--workers", "8", "--out", (dir / "w8").string()}, dir.path());
  c.expect(a.code == 0 && b.code == 0, "eval failed: " + a.err + b.err);
  if (c.ok) {
    c.expect(testing_support::slurp(dir / "w1" / "curves.csv") == testing_support::slurp(dir / "w8" / "curves.csv"),
             "curves.csv differs");
    c.expect(testing_support::slurp(dir / "w1" / "report.json") == testing_support::slurp(dir / "w8" / "report.json"),
             "report.json differs");
  }
  return {c.ok, c.ok ? "curves.csv and report.json byte-identical for --workers 1 vs 8" : c.why.str()};
}

Outcome correlation_machinery() {
  Check c;
  auto curve = [](V s) {
    layerprobe::LayerScoreCurve k;
    k.model_name = "m";
    k.task_name = "t";
    k.metric = layerprobe::MetricName::spearman;
    k.direction = layerprobe::Direction::higher_better;
    for (std::size_t i = 0; i < s.size(); ++i) k.layers.push_back(i);
    k.scores = std::move(s);
    return k;
  };
  const V frozen{0.5, 0.7, 0.6};
  const double affine = layerprobe::correlate(curve(frozen), {"m", "t", {2.0, 2.8, 2.4}}).pearson;
  c.expect(std::abs(affine - 1.0) <= 1e-12, "affine != 1");
  const V finetuned{0.6, 0.9, 0.7};
  const double r = layerprobe::correlate(curve(frozen), {"m", "t", finetuned}).pearson;
  const double direct = oracle::pearson_sums(frozen, finetuned);
  c.expect(std::abs(r - direct) <= 1e-6, "hand case " + fmt(r) + " vs direct formula " + fmt(direct));

  testing_support::TempDir dir;
  std::vector<layerprobe::LayerScoreCurve> curves;
  for (const char* task : {"pos", "neg", "mid"}) {
    auto k = curve(frozen);
    k.task_name = task;
    curves.push_back(k);
  }
  layerprobe::write_file_bytes(dir / "curves.csv", layerprobe::curves_csv(curves));
  const std::vector<std::pair<std::string, V>> pairs{
      {"pos", {1.0, 1.4, 1.2}}, {"neg", {-0.5, -0.7, -0.6}}, {"mid", finetuned}};
  std::vector<std::string> args{"correlate", (dir / "curves.csv").string(), "--out", (dir / "co").string()};
  for (const auto& [task, s] : pairs) {
    layerprobe::write_json_file(dir / (task + ".json"), layerprobe::scores_to_json({"m", task, s}));
    args.push_back("--scores");
    args.push_back((dir / (task + ".json")).string());
  }
  const auto run = testing_support::run_cli(args, dir.path());
  c.expect(run.code == 0, "correlate exit " + std::to_string(run.code) + ": " + run.err);
  char expected_line[64];
  std::snprintf(expected_line, sizeof expected_line, "median pearson: %.6f", direct);
  c.expect(run.out.find(expected_line) != std::string::npos, "median line missing: " + run.out);
  return {c.ok, c.ok ? "affine=" + fmt(affine) + ", hand case=" + fmt(r) + " (direct formula " + fmt(direct) +
                           "; the often-quoted 0.960769 does not follow from these inputs), CLI " +
                           expected_line
                     : c.why.str()};
}

}  // namespace

int main() {
  criterion("Probe exactness", 1.0, probe_exactness);
  criterion("CKA invariance suite", 5.0, cka_invariance);
  criterion("CKA oracle equivalence", 0.0, cka_oracle);
  criterion("Metric oracles", 0.0, metric_oracles);
  criterion("Surrogate correctness", 0.0, surrogate_correctness);
  criterion("End-to-end compression signature", 30.0, compression_signature);
  criterion("Determinism across worker counts", 0.0, determinism);
  criterion("Correlation machinery", 0.0, correlation_machinery);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
