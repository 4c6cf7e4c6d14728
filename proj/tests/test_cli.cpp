#include <gtest/gtest.h>

#include <cmath>

#include "cli_runner.hpp"
#include "layerprobe/report.hpp"
#include "layerprobe/synth.hpp"

using testing_support::run_cli;
using testing_support::slurp;
using testing_support::TempDir;

namespace fs = std::filesystem;

namespace {

std::string synth_small(const TempDir& dir, const std::string& name, std::vector<std::string> extra = {}) {
  const std::string path = (dir / name).string();
  std::vector<std::string> args{"synth", path, "--molecules", "50", "--dim", "6", "--num-layers", "5"};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto r = run_cli(args, dir.path());
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

void write_scores(const fs::path& path, const std::string& model, const std::string& task, const std::vector<double>& s) {
  layerprobe::write_json_file(path, layerprobe::scores_to_json({model, task, s}));
}

}  // namespace

TEST(Cli, ProbeMissingIndexNamesTheFile) {
  TempDir dir;
  fs::create_directories(dir / "empty");
  const auto r = run_cli({"probe", (dir / "empty").string(), "--out", (dir / "out").string()}, dir.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("index.json"), std::string::npos) << r.err;
}

TEST(Cli, ProbeIdentityStackHasUnitCka) {
  TempDir dir;
  const auto c = synth_small(dir, "c", {"--transforms", "identity,identity,identity,identity"});
  const auto r = run_cli({"probe", c, "--out", (dir / "out").string()}, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = layerprobe::parse_csv(slurp(dir / "out" / "probes.csv"));
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) EXPECT_EQ(rows[i][3], "1") << i;
  EXPECT_EQ(rows.back()[3], "");
  EXPECT_TRUE(fs::exists(dir / "out" / "probes.svg"));
}

TEST(Cli, ProbeLayerSubset) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  const auto r = run_cli({"probe", c, "--layers", "0..3", "--out", (dir / "out").string()}, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = layerprobe::parse_csv(slurp(dir / "out" / "probes.csv"));
  EXPECT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows.back()[0], "3");
  const auto bad = run_cli({"probe", c, "--layers", "2..9", "--out", (dir / "out").string()}, dir.path());
  EXPECT_EQ(bad.code, 1);
}

TEST(Cli, EvalPlantedSignalPrefersIntermediate) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  const auto r = run_cli({"eval", c, "--out", (dir / "out").string()}, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fraction preferring a non-final layer: 1.0000"), std::string::npos) << r.out;
  for (const char* f : {"curves.csv", "improvement.csv", "report.json", "curves.svg", "improvement.svg"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
}

TEST(Cli, EvalOneInvalidManifest) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  auto m = layerprobe::load_manifest(fs::path(c) / "manifest.json");
  m.task_name = "broken";
  m.labels.erase(m.labels.begin());
  auto doc = layerprobe::manifest_to_json(m);
  layerprobe::write_json_file(dir / "broken.json", doc);
  const auto r = run_cli({"eval", c, (fs::path(c) / "manifest.json").string(), (dir / "broken.json").string(), "--out",
                          (dir / "out").string()},
                         dir.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("synth-task"), std::string::npos) << r.out;
  EXPECT_NE(r.err.find("broken"), std::string::npos) << r.err;
  const auto curves = layerprobe::parse_curves_csv(slurp(dir / "out" / "curves.csv"));
  ASSERT_EQ(curves.size(), 1u);
  EXPECT_EQ(curves[0].task_name, "synth-task");
}

TEST(Cli, EvalHugeLambdaFlattensCurves) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  const auto r = run_cli({"eval", c, "--lambda", "1e9", "--out", (dir / "out").string()}, dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto curves = layerprobe::parse_curves_csv(slurp(dir / "out" / "curves.csv"));
  ASSERT_EQ(curves.size(), 1u);
  for (double s : curves[0].scores) EXPECT_NEAR(s, curves[0].scores[0], 1e-6);
}

TEST(Cli, EvalNumericalFailureExitsTwo) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  auto m = layerprobe::load_manifest(fs::path(c) / "manifest.json");
  m.metric = layerprobe::MetricName::spearman;
  for (const auto& [id, s] : m.split)
    if (s == layerprobe::Split::test) m.labels[id] = 1.0;
  layerprobe::write_manifest(dir / "flat.json", m);
  const auto r = run_cli({"eval", c, (dir / "flat.json").string(), "--out", (dir / "out").string()}, dir.path());
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_NE(r.err.find("zero rank variance"), std::string::npos) << r.err;
}

TEST(Cli, EvalIsIdempotentAcrossWorkerCounts) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  ASSERT_EQ(run_cli({"eval", c, "--workers", "1", "--out", (dir / "a").string()}, dir.path()).code, 0);
  ASSERT_EQ(run_cli({"eval", c, "--workers", "4", "--out", (dir / "b").string()}, dir.path()).code, 0);
  for (const char* f : {"curves.csv", "improvement.csv", "report.json", "curves.svg", "improvement.svg"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(run_cli({"probe", c, "--out", (dir / "p1").string()}, dir.path()).code, 0);
  ASSERT_EQ(run_cli({"probe", c, "--workers", "3", "--out", (dir / "p2").string()}, dir.path()).code, 0);
  for (const char* f : {"probes.csv", "probes.json", "probes.svg"}) EXPECT_EQ(slurp(dir / "p1" / f), slurp(dir / "p2" / f));
}

TEST(Cli, CorrelateEqualScoresAndEmptyIntersection) {
  TempDir dir;
  const auto c = synth_small(dir, "c");
  ASSERT_EQ(run_cli({"eval", c, "--out", (dir / "ev").string()}, dir.path()).code, 0);
  const auto curve = layerprobe::parse_curves_csv(slurp(dir / "ev" / "curves.csv")).at(0);
  write_scores(dir / "same.json", curve.model_name, curve.task_name, curve.scores);
  auto r = run_cli({"correlate", (dir / "ev").string(), "--scores", (dir / "same.json").string(), "--out",
                    (dir / "co").string()},
                   dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("median pearson: 1.000000"), std::string::npos) << r.out;
  const auto rows = layerprobe::parse_csv(slurp(dir / "co" / "correlations.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(layerprobe::parse_double(rows[1][2]), 1.0, 1e-12);

  write_scores(dir / "other.json", "nobody", "nothing", curve.scores);
  r = run_cli({"correlate", (dir / "ev").string(), "--scores", (dir / "other.json").string(), "--out",
               (dir / "co2").string()},
              dir.path());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("unmatched"), std::string::npos) << r.err;
}

TEST(Cli, CorrelateThreePairMedian) {
  TempDir dir;
  const std::vector<double> frozen{0.5, 0.7, 0.6};
  std::vector<layerprobe::LayerScoreCurve> curves;
  for (const char* task : {"pos", "neg", "mid"}) {
    layerprobe::LayerScoreCurve c;
    c.model_name = "m";
    c.task_name = task;
    c.metric = layerprobe::MetricName::spearman;
    c.direction = layerprobe::Direction::higher_better;
    c.layers = {0, 1, 2};
    c.scores = frozen;
    curves.push_back(c);
  }
  layerprobe::write_file_bytes(dir / "curves.csv", layerprobe::curves_csv(curves));
  write_scores(dir / "pos.json", "m", "pos", {1.0, 1.4, 1.2});
  write_scores(dir / "neg.json", "m", "neg", {-0.5, -0.7, -0.6});
  write_scores(dir / "mid.json", "m", "mid", {0.6, 0.9, 0.7});
  const auto r = run_cli({"correlate", (dir / "curves.csv").string(), "--scores", (dir / "pos.json").string(),
                          "--scores", (dir / "neg.json").string(), "--scores", (dir / "mid.json").string(), "--out",
                          (dir / "co").string()},
                         dir.path());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("median pearson: 0.981981"), std::string::npos) << r.out;
}

TEST(Cli, BadArguments) {
  TempDir dir;
  EXPECT_EQ(run_cli({}, dir.path()).code, 1);
  EXPECT_EQ(run_cli({"probe"}, dir.path()).code, 1);
  EXPECT_EQ(run_cli({"eval", "x", "--workers", "0"}, dir.path()).code, 1);
  EXPECT_EQ(run_cli({"probe", "x", "--pooling", "max"}, dir.path()).code, 1);
  EXPECT_EQ(run_cli({"--help"}, dir.path()).code, 0);
}
