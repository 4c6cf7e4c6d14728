#pragma once

// Task metrics (MAE, Spearman, AUROC, AUCPR) and Pearson correlation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/types.hpp"

namespace layerprobe {

struct MetricValue {
  MetricName name = MetricName::mae;
  double value = 0.0;
  Direction direction = Direction::lower_better;
};

namespace detail {

inline void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw InputError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw InputError(std::string(what) + ": empty input");
}

// Counts positives/negatives, rejecting anything but 0/1.
inline std::pair<std::size_t, std::size_t> class_counts(std::span<const double> labels, const char* what) {
  std::size_t pos = 0, neg = 0;
  for (double y : labels) {
    if (y == 1.0) {
      ++pos;
    } else if (y == 0.0) {
      ++neg;
    } else {
      throw InputError(std::string(what) + ": non-binary label " + std::to_string(y));
    }
  }
  return {pos, neg};
}

inline double correlation(std::span<const double> a, std::span<const double> b, const char* what) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) throw NumericalError(std::string(what));
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

}  // namespace detail

// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline MetricValue mae(std::span<const double> pred, std::span<const double> truth) {
  detail::require_same_length(pred, truth, "MAE");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return {MetricName::mae, s / static_cast<double>(pred.size()), Direction::lower_better};
}

inline MetricValue pearson(std::span<const double> a, std::span<const double> b) {
  detail::require_same_length(a, b, "Pearson");
  if (a.size() < 2) throw InputError("Pearson: need at least 2 points");
  return {MetricName::pearson, detail::correlation(a, b, "Pearson: constant input"), Direction::higher_better};
}

inline MetricValue spearman(std::span<const double> pred, std::span<const double> truth) {
  detail::require_same_length(pred, truth, "Spearman");
  if (pred.size() < 2) throw InputError("Spearman: need at least 2 points");
  const auto rp = average_ranks(pred);
  const auto rt = average_ranks(truth);
  return {MetricName::spearman, detail::correlation(rp, rt, "Spearman: zero rank variance"),
          Direction::higher_better};
}

// Mann–Whitney form with average ranks for ties.
inline MetricValue auroc(std::span<const double> scores, std::span<const double> labels) {
  detail::require_same_length(scores, labels, "AUROC");
  const auto [pos, neg] = detail::class_counts(labels, "AUROC");
  if (pos == 0 || neg == 0) throw InputError("AUROC: labels contain a single class");
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1.0) rank_sum += ranks[i];
  const auto np = static_cast<double>(pos);
  const auto nn = static_cast<double>(neg);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return {MetricName::auroc, std::clamp(u / (np * nn), 0.0, 1.0), Direction::higher_better};
}

// Average precision. Tied scores form one threshold step.
inline MetricValue aucpr(std::span<const double> scores, std::span<const double> labels) {
  detail::require_same_length(scores, labels, "AUCPR");
  const auto [pos, neg] = detail::class_counts(labels, "AUCPR");
  if (pos == 0) throw InputError("AUCPR: no positive labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto total_pos = static_cast<double>(pos);
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) {
      if (labels[order[j]] == 1.0) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return {MetricName::aucpr, std::clamp(ap, 0.0, 1.0), Direction::higher_better};
}

// `pred` holds regression predictions or positive-class probabilities.
inline MetricValue compute_metric(MetricName name, std::span<const double> pred, std::span<const double> truth) {
  switch (name) {
    case MetricName::mae: return mae(pred, truth);
    case MetricName::spearman: return spearman(pred, truth);
    case MetricName::auroc: return auroc(pred, truth);
    case MetricName::aucpr: return aucpr(pred, truth);
    case MetricName::pearson: return pearson(pred, truth);
  }
  throw InputError("unknown metric");
}

}  // namespace layerprobe
