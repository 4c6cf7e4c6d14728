#pragma once

// Downstream predictors fitted on frozen pooled embeddings: ridge regression
// for regression tasks and L2-regularised logistic regression (IRLS) for
// binary classification. Both standardise features on the training rows.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"

namespace layerprobe {

enum class SurrogateKind { ridge, logistic };

inline constexpr double kDefaultRidgeLambda = 1.0;
inline constexpr double kDefaultLogisticLambda = 1.0;

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // > 0; constant features get 1

  static Standardizer identity(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }

  // Population mean/std of each column.
  static Standardizer fit(const Matrix& x) {
    const std::size_t d = x.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const auto n = static_cast<double>(x.rows());
    for (std::size_t j = 0; j < d; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) m += x(i, j);
      m /= n;
      double v = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) v += (x(i, j) - m) * (x(i, j) - m);
      const double sd = std::sqrt(v / n);
      s.mean[j] = m;
      s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) {
      throw InputError("feature dimension mismatch: model has " + std::to_string(mean.size()) + ", input has " +
                       std::to_string(x.cols()));
    }
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / scale[j];
    return out;
  }
};

struct SurrogateModel {
  SurrogateKind kind = SurrogateKind::ridge;
  std::vector<double> weights;
  double bias = 0.0;
  double lambda = 0.0;
  Standardizer standardizer;

  // Logistic only: Newton iterations taken, final gradient ∞-norm, and the
  // objective after each accepted step (first entry is the starting point).
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loss_trace;
};

struct FitOptions {
  // false: raw features, no target centering and no bias term.
  bool standardize = true;
};

namespace detail {

inline void check_fit_inputs(const Matrix& x, std::span<const double> y, double lambda, const char* what) {
  if (x.rows() != y.size()) {
    throw InputError(std::string(what) + ": " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) +
                     " targets");
  }
  if (x.rows() < 2) throw InputError(std::string(what) + ": train too small (need at least 2 rows)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError(std::string(what) + ": lambda must be >= 0");
}

inline std::vector<double> linear_scores(const Matrix& xs, std::span<const double> w, double bias) {
  std::vector<double> z(xs.rows(), bias);
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto row = xs.row(i);
    double s = bias;
    for (std::size_t j = 0; j < w.size(); ++j) s += row[j] * w[j];
    z[i] = s;
  }
  return z;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double logistic_objective(const Matrix& xs, std::span<const double> y, std::span<const double> w, double bias,
                                 double lambda) {
  const auto z = linear_scores(xs, w, bias);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) loss += softplus(z[i]) - y[i] * z[i];
  loss /= static_cast<double>(z.size());
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return loss + 0.5 * lambda * reg;
}

}  // namespace detail

// Solves (X̃ᵀX̃ + λI)w = X̃ᵀỹ by Cholesky; bias restores the target mean.
inline SurrogateModel fit_ridge(const Matrix& x, std::span<const double> y, double lambda, FitOptions opts = {}) {
  detail::check_fit_inputs(x, y, lambda, "ridge");
  const std::size_t d = x.cols();
  SurrogateModel model;
  model.kind = SurrogateKind::ridge;
  model.lambda = lambda;
  model.standardizer = opts.standardize ? Standardizer::fit(x) : Standardizer::identity(d);
  const Matrix xs = opts.standardize ? model.standardizer.apply(x) : x;

  double y_mean = 0.0;
  if (opts.standardize) {
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(y.size());
  }
  Matrix yc(y.size(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) yc(i, 0) = y[i] - y_mean;

  Matrix a = matmul_tn(xs, xs);
  for (std::size_t j = 0; j < d; ++j) a(j, j) += lambda;
  const Matrix w = cholesky_solve(a, matmul_tn(xs, yc));
  model.weights.assign(w.data().begin(), w.data().end());
  model.bias = y_mean;
  return model;
}

// Minimises mean logistic loss + (λ/2)‖w‖² by Newton/IRLS with step halving.
// The bias is not regularised.
inline SurrogateModel fit_logistic(const Matrix& x, std::span<const double> y, double lambda, FitOptions opts = {}) {
  constexpr int kMaxIterations = 100;
  constexpr int kMaxHalvings = 30;
  constexpr double kGradientTolerance = 1e-8;

  detail::check_fit_inputs(x, y, lambda, "logistic");
  if (!(lambda > 0.0)) throw InputError("logistic: lambda must be > 0");
  std::size_t pos = 0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw InputError("logistic: non-binary label " + std::to_string(v));
    if (v == 1.0) ++pos;
  }
  if (pos == 0 || pos == y.size()) throw InputError("logistic: single-class training data");

  const std::size_t d = x.cols();
  const std::size_t n = x.rows();
  const auto nd = static_cast<double>(n);
  SurrogateModel model;
  model.kind = SurrogateKind::logistic;
  model.lambda = lambda;
  model.standardizer = opts.standardize ? Standardizer::fit(x) : Standardizer::identity(d);
  const Matrix xs = opts.standardize ? model.standardizer.apply(x) : x;

  std::vector<double> w(d, 0.0);
  double bias = 0.0;
  double loss = detail::logistic_objective(xs, y, w, bias, lambda);
  model.loss_trace.push_back(loss);

  // Parameter vector is [w, bias]; gradient and Hessian follow that layout.
  std::vector<double> grad(d + 1);
  for (int iter = 0;; ++iter) {
    const auto z = detail::linear_scores(xs, w, bias);
    std::vector<double> p(n), weight(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = detail::sigmoid(z[i]);
      weight[i] = p[i] * (1.0 - p[i]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = p[i] - y[i];
      const auto row = xs.row(i);
      for (std::size_t j = 0; j < d; ++j) grad[j] += row[j] * r;
      grad[d] += r;
    }
    double gnorm = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      grad[j] /= nd;
      if (j < d) grad[j] += lambda * w[j];
      gnorm = std::max(gnorm, std::abs(grad[j]));
    }
    model.gradient_norm = gnorm;
    model.iterations = iter;
    if (gnorm <= kGradientTolerance) break;
    if (iter == kMaxIterations) {
      throw NumericalError("logistic: IRLS did not converge in " + std::to_string(kMaxIterations) +
                           " iterations (gradient norm " + std::to_string(gnorm) + ")");
    }

    Matrix hess(d + 1, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = xs.row(i);
      const double wi = weight[i] / nd;
      for (std::size_t a = 0; a < d; ++a) {
        const double ra = row[a] * wi;
        for (std::size_t b = 0; b <= a; ++b) hess(a, b) += ra * row[b];
        hess(d, a) += ra;
      }
      hess(d, d) += wi;
    }
    for (std::size_t a = 0; a <= d; ++a)
      for (std::size_t b = 0; b < a; ++b) hess(b, a) = hess(a, b);
    for (std::size_t a = 0; a < d; ++a) hess(a, a) += lambda;

    Matrix rhs(d + 1, 1);
    for (std::size_t j = 0; j <= d; ++j) rhs(j, 0) = grad[j];
    const Matrix step = cholesky_solve(hess, rhs);

    double t = 1.0;
    bool accepted = false;
    std::vector<double> w_try(d);
    for (int h = 0; h <= kMaxHalvings; ++h, t *= 0.5) {
      for (std::size_t j = 0; j < d; ++j) w_try[j] = w[j] - t * step(j, 0);
      const double b_try = bias - t * step(d, 0);
      const double loss_try = detail::logistic_objective(xs, y, w_try, b_try, lambda);
      if (loss_try <= loss) {
        w = w_try;
        bias = b_try;
        loss = loss_try;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw NumericalError("logistic: line search failed to decrease the loss (gradient norm " +
                           std::to_string(gnorm) + ")");
    }
    model.loss_trace.push_back(loss);
  }
  model.weights = std::move(w);
  model.bias = bias;
  return model;
}

inline std::vector<double> predict(const SurrogateModel& model, const Matrix& x) {
  if (x.cols() != model.weights.size()) {
    throw InputError("predict: input has " + std::to_string(x.cols()) + " features, model expects " +
                     std::to_string(model.weights.size()));
  }
  auto z = detail::linear_scores(model.standardizer.apply(x), model.weights, model.bias);
  if (model.kind == SurrogateKind::logistic) {
    for (double& v : z) v = detail::sigmoid(v);
  }
  return z;
}

}  // namespace layerprobe
