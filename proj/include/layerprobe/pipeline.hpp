#pragma once

// Frozen-embedding evaluation per layer, best-intermediate vs final-layer
// improvement cells, and frozen-vs-finetuned score correlation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"
#include "layerprobe/metrics.hpp"
#include "layerprobe/parallel.hpp"
#include "layerprobe/pooling.hpp"
#include "layerprobe/probes.hpp"
#include "layerprobe/surrogate.hpp"
#include "layerprobe/tensorio.hpp"
#include "layerprobe/types.hpp"

namespace layerprobe {

struct LayerScoreCurve {
  std::string model_name;
  std::string task_name;
  MetricName metric = MetricName::mae;
  Direction direction = Direction::lower_better;
  std::vector<std::size_t> layers;  // container layer index per score
  std::vector<double> scores;
  std::size_t best_layer = 0;                       // layer index, not position
  std::optional<std::size_t> best_nonfinal_layer;  // empty for single-layer curves

  std::size_t num_layers() const noexcept { return scores.size(); }
  double score_at_layer(std::size_t layer) const {
    const auto it = std::find(layers.begin(), layers.end(), layer);
    if (it == layers.end()) throw InputError("curve has no layer " + std::to_string(layer));
    return scores[static_cast<std::size_t>(it - layers.begin())];
  }
};

enum class Winner { intermediate, final, tie };

inline std::string_view to_string(Winner w) {
  switch (w) {
    case Winner::intermediate: return "intermediate";
    case Winner::final: return "final";
    case Winner::tie: return "tie";
  }
  return "?";
}

inline Winner parse_winner(std::string_view s) {
  if (s == "intermediate") return Winner::intermediate;
  if (s == "final") return Winner::final;
  if (s == "tie") return Winner::tie;
  throw InputError("unknown winner '" + std::string(s) + "'");
}

struct Improvement {
  double percent_change = 0.0;
  Winner winner = Winner::tie;
};

struct ImprovementCell {
  std::string model_name;
  std::string task_name;
  MetricName metric = MetricName::mae;
  double final_score = 0.0;
  double best_nonfinal_score = 0.0;
  std::size_t best_nonfinal_layer = 0;
  double percent_change = 0.0;
  Winner winner = Winner::tie;
};

struct ImprovementSummary {
  std::vector<ImprovementCell> cells;
  double fraction_intermediate = 0.0;  // cells with percent_change > 0
  double mean_percent_change = 0.0;
  std::map<std::string, double> per_model_mean;
  std::map<std::string, double> per_task_mean;
};

struct CorrelationResult {
  std::string model_name;
  std::string task_name;
  double pearson = 0.0;
  std::vector<std::pair<double, double>> points;  // (frozen, finetuned) per layer

  std::size_t num_layers() const noexcept { return points.size(); }
};

struct EvalOptions {
  double ridge_lambda = kDefaultRidgeLambda;
  double logistic_lambda = kDefaultLogisticLambda;
  std::optional<Pooling> pooling_override;
  std::size_t workers = 1;
  std::string model_name;
};

// Positions (in stack order) of the train and test molecules of a task.
struct SplitRows {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<double> y_train;
  std::vector<double> y_test;
};

inline SplitRows select_rows(const LayerStack& stack, const TaskManifest& manifest) {
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < stack.size(); ++i) position.emplace(stack.molecule_ids[i], i);
  std::vector<std::string> missing;
  for (const auto& [id, _] : manifest.split)
    if (!position.contains(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw InputError("task '" + manifest.task_name + "': molecules missing from stack: " + list);
  }
  SplitRows rows;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto it = manifest.split.find(stack.molecule_ids[i]);
    if (it == manifest.split.end()) continue;
    const double y = manifest.labels.at(it->first);
    if (it->second == Split::train) {
      rows.train.push_back(i);
      rows.y_train.push_back(y);
    } else if (it->second == Split::test) {
      rows.test.push_back(i);
      rows.y_test.push_back(y);
    }
  }
  if (rows.train.size() < 2) throw InputError("task '" + manifest.task_name + "': train too small (need >= 2)");
  if (rows.test.empty()) throw InputError("task '" + manifest.task_name + "': empty test split");
  return rows;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) std::ranges::copy(m.row(rows[i]), out.row(i).begin());
  return out;
}

// Pool, fit on train rows, predict test rows, score.
inline double score_layer(const LayerStack& stack, const TaskManifest& manifest, const SplitRows& rows,
                          const EvalOptions& options) {
  const PooledMatrix pooled = pool(stack, options.pooling_override.value_or(manifest.pooling));
  const Matrix x_train = gather_rows(pooled.vectors, rows.train);
  const Matrix x_test = gather_rows(pooled.vectors, rows.test);
  const SurrogateModel model = manifest.task_kind == TaskKind::regression
                                   ? fit_ridge(x_train, rows.y_train, options.ridge_lambda)
                                   : fit_logistic(x_train, rows.y_train, options.logistic_lambda);
  return compute_metric(manifest.metric, predict(model, x_test), rows.y_test).value;
}

// Fills best_layer / best_nonfinal_layer; ties go to the smaller index.
inline void assign_best_layers(LayerScoreCurve& curve) {
  if (curve.scores.empty()) throw InputError("curve has no scores");
  auto argbest = [&](std::size_t count) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < count; ++k)
      if (is_better(curve.scores[k], curve.scores[best], curve.direction)) best = k;
    return best;
  };
  curve.best_layer = curve.layers[argbest(curve.scores.size())];
  curve.best_nonfinal_layer.reset();
  if (curve.scores.size() >= 2) curve.best_nonfinal_layer = curve.layers[argbest(curve.scores.size() - 1)];
}

inline void check_same_molecules(const std::vector<LayerStack>& layers) {
  if (layers.empty()) throw InputError("no layers to evaluate");
  for (const auto& l : layers) {
    if (l.molecule_ids != layers[0].molecule_ids) {
      throw InputError("layer " + std::to_string(l.layer_index) + " has a different molecule order than layer " +
                       std::to_string(layers[0].layer_index));
    }
  }
}

inline LayerScoreCurve make_curve(const std::vector<LayerStack>& layers, const TaskManifest& manifest,
                                  const EvalOptions& options) {
  LayerScoreCurve curve;
  curve.model_name = options.model_name;
  curve.task_name = manifest.task_name;
  curve.metric = manifest.metric;
  curve.direction = manifest.metric_direction();
  for (const auto& l : layers) curve.layers.push_back(l.layer_index);
  curve.scores.assign(layers.size(), 0.0);
  return curve;
}

inline LayerScoreCurve eval_frozen(const std::vector<LayerStack>& layers, const TaskManifest& manifest,
                                   const EvalOptions& options = {}) {
  check_same_molecules(layers);
  const SplitRows rows = select_rows(layers[0], manifest);
  LayerScoreCurve curve = make_curve(layers, manifest, options);
  parallel_for(layers.size(), options.workers, [&](std::size_t k) {
    try {
      curve.scores[k] = score_layer(layers[k], manifest, rows, options);
    } catch (const std::exception& e) {
      rethrow_with_context(e, "task '" + manifest.task_name + "' layer " + std::to_string(layers[k].layer_index) + ": ");
    }
  });
  assign_best_layers(curve);
  return curve;
}

struct TaskOutcome {
  std::string task_name;
  std::optional<LayerScoreCurve> curve;
  std::string error;
  bool numerical_error = false;
};

// Evaluates every (task, layer) pair on one pool. A failing task does not
// stop the others; its first error (lowest layer) is recorded.
inline std::vector<TaskOutcome> eval_tasks(const std::vector<LayerStack>& layers,
                                           const std::vector<TaskManifest>& manifests, const EvalOptions& options) {
  check_same_molecules(layers);
  const std::size_t num_layers = layers.size();
  std::vector<TaskOutcome> outcomes(manifests.size());
  std::vector<std::optional<SplitRows>> rows(manifests.size());
  std::vector<LayerScoreCurve> curves(manifests.size());
  std::vector<std::string> errors(manifests.size() * num_layers);
  std::vector<char> numerical(manifests.size() * num_layers, 0);

  for (std::size_t t = 0; t < manifests.size(); ++t) {
    outcomes[t].task_name = manifests[t].task_name;
    try {
      rows[t] = select_rows(layers[0], manifests[t]);
      curves[t] = make_curve(layers, manifests[t], options);
    } catch (const std::exception& e) {
      outcomes[t].error = e.what();
      outcomes[t].numerical_error = dynamic_cast<const NumericalError*>(&e) != nullptr;
    }
  }

  parallel_for(manifests.size() * num_layers, options.workers, [&](std::size_t job) {
    const std::size_t t = job / num_layers;
    const std::size_t k = job % num_layers;
    if (!rows[t]) return;
    try {
      curves[t].scores[k] = score_layer(layers[k], manifests[t], *rows[t], options);
    } catch (const NumericalError& e) {
      errors[job] = "layer " + std::to_string(layers[k].layer_index) + ": " + e.what();
      numerical[job] = 1;
    } catch (const std::exception& e) {
      errors[job] = "layer " + std::to_string(layers[k].layer_index) + ": " + e.what();
    }
  });

  for (std::size_t t = 0; t < manifests.size(); ++t) {
    if (!rows[t]) continue;
    for (std::size_t k = 0; k < num_layers; ++k) {
      const std::size_t job = t * num_layers + k;
      if (!errors[job].empty()) {
        outcomes[t].error = errors[job];
        outcomes[t].numerical_error = numerical[job] != 0;
        break;
      }
    }
    if (outcomes[t].error.empty()) {
      assign_best_layers(curves[t]);
      outcomes[t].curve = std::move(curves[t]);
    }
  }
  return outcomes;
}

// Positive iff the best non-final layer is strictly better than the final
// layer under the task direction. Denominator is |final|.
inline Improvement percent_change(double final_score, double best_nonfinal_score, Direction direction) {
  if (!std::isfinite(final_score) || !std::isfinite(best_nonfinal_score)) {
    throw InputError("percent_change: non-finite score");
  }
  if (final_score == 0.0) throw NumericalError("undefined relative change (final score is 0)");
  const double diff = direction == Direction::higher_better ? best_nonfinal_score - final_score
                                                            : final_score - best_nonfinal_score;
  Improvement out;
  out.percent_change = 100.0 * diff / std::abs(final_score);
  out.winner = diff > 0.0 ? Winner::intermediate : (diff < 0.0 ? Winner::final : Winner::tie);
  return out;
}

inline ImprovementCell improvement_cell(const LayerScoreCurve& curve) {
  if (!curve.best_nonfinal_layer) {
    throw InputError("curve " + curve.model_name + "/" + curve.task_name + " has no non-final layer");
  }
  ImprovementCell cell;
  cell.model_name = curve.model_name;
  cell.task_name = curve.task_name;
  cell.metric = curve.metric;
  cell.final_score = curve.scores.back();
  cell.best_nonfinal_layer = *curve.best_nonfinal_layer;
  cell.best_nonfinal_score = curve.score_at_layer(cell.best_nonfinal_layer);
  const Improvement imp = percent_change(cell.final_score, cell.best_nonfinal_score, curve.direction);
  cell.percent_change = imp.percent_change;
  cell.winner = imp.winner;
  return cell;
}

inline ImprovementSummary summarize(std::vector<ImprovementCell> cells) {
  ImprovementSummary s;
  s.cells = std::move(cells);
  if (s.cells.empty()) return s;
  std::map<std::string, std::pair<double, std::size_t>> by_model, by_task;
  double total = 0.0;
  std::size_t wins = 0;
  for (const auto& c : s.cells) {
    total += c.percent_change;
    if (c.percent_change > 0.0) ++wins;
    auto& m = by_model[c.model_name];
    m.first += c.percent_change;
    ++m.second;
    auto& t = by_task[c.task_name];
    t.first += c.percent_change;
    ++t.second;
  }
  const auto n = static_cast<double>(s.cells.size());
  s.fraction_intermediate = static_cast<double>(wins) / n;
  s.mean_percent_change = total / n;
  for (const auto& [k, v] : by_model) s.per_model_mean[k] = v.first / static_cast<double>(v.second);
  for (const auto& [k, v] : by_task) s.per_task_mean[k] = v.first / static_cast<double>(v.second);
  return s;
}

inline ImprovementSummary improvement_matrix(const std::vector<LayerScoreCurve>& curves) {
  if (curves.empty()) throw InputError("improvement_matrix needs at least one curve");
  std::vector<ImprovementCell> cells;
  cells.reserve(curves.size());
  for (const auto& c : curves) cells.push_back(improvement_cell(c));
  return summarize(std::move(cells));
}

inline CorrelationResult correlate(const LayerScoreCurve& frozen, const ExternalScoreFile& finetuned) {
  if (frozen.scores.size() != finetuned.scores.size()) {
    throw InputError("correlate " + frozen.model_name + "/" + frozen.task_name + ": layer count mismatch (" +
                     std::to_string(frozen.scores.size()) + " frozen vs " + std::to_string(finetuned.scores.size()) +
                     " finetuned)");
  }
  CorrelationResult out;
  out.model_name = frozen.model_name;
  out.task_name = frozen.task_name;
  out.pearson = pearson(frozen.scores, finetuned.scores).value;
  for (std::size_t i = 0; i < frozen.scores.size(); ++i) out.points.emplace_back(frozen.scores[i], finetuned.scores[i]);
  return out;
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace layerprobe
