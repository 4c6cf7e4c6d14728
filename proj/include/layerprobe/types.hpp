#pragma once

#include <string>
#include <string_view>

#include "layerprobe/error.hpp"

namespace layerprobe {

enum class Pooling { mean, cls };
enum class TaskKind { regression, binary_classification };
enum class MetricName { mae, spearman, auroc, aucpr, pearson };
enum class Direction { lower_better, higher_better };
enum class Split { train, valid, test };

inline std::string_view to_string(Pooling p) { return p == Pooling::mean ? "mean" : "cls"; }

inline Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::mean;
  if (s == "cls") return Pooling::cls;
  throw InputError("unknown pooling '" + std::string(s) + "' (expected mean or cls)");
}

inline std::string_view to_string(TaskKind k) {
  return k == TaskKind::regression ? "regression" : "binary-classification";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "regression") return TaskKind::regression;
  if (s == "binary-classification") return TaskKind::binary_classification;
  throw InputError("unknown task_kind '" + std::string(s) + "'");
}

inline std::string_view to_string(MetricName m) {
  switch (m) {
    case MetricName::mae: return "MAE";
    case MetricName::spearman: return "SPEARMAN";
    case MetricName::auroc: return "AUROC";
    case MetricName::aucpr: return "AUCPR";
    case MetricName::pearson: return "PEARSON";
  }
  return "?";
}

// Task metrics only; PEARSON is not a valid manifest metric.
inline MetricName parse_task_metric(std::string_view s) {
  if (s == "MAE") return MetricName::mae;
  if (s == "SPEARMAN") return MetricName::spearman;
  if (s == "AUROC") return MetricName::auroc;
  if (s == "AUCPR") return MetricName::aucpr;
  throw InputError("unknown metric '" + std::string(s) + "'");
}

constexpr Direction direction_of(MetricName m) {
  return m == MetricName::mae ? Direction::lower_better : Direction::higher_better;
}

inline std::string_view to_string(Direction d) {
  return d == Direction::lower_better ? "lower-better" : "higher-better";
}

inline Direction parse_direction(std::string_view s) {
  if (s == "lower-better") return Direction::lower_better;
  if (s == "higher-better") return Direction::higher_better;
  throw InputError("unknown direction '" + std::string(s) + "'");
}

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw InputError("unknown split '" + std::string(s) + "'");
}

// Strictly better under the direction; equal scores are never better.
constexpr bool is_better(double candidate, double reference, Direction d) {
  return d == Direction::higher_better ? candidate > reference : candidate < reference;
}

}  // namespace layerprobe
