#pragma once

// On-disk container: one `layer_<k>.npy` per layer holding every molecule's
// token rows back to back, plus `index.json` with ids and token counts.
// Task manifests and external score files are plain JSON.
//
// When pooling is "cls" the exporter must write the CLS token as the first
// row of each molecule's block.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "layerprobe/error.hpp"
#include "layerprobe/linalg.hpp"
#include "layerprobe/npy.hpp"
#include "layerprobe/types.hpp"

namespace layerprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct ContainerIndex {
  std::vector<std::string> molecule_ids;
  std::vector<std::size_t> token_counts;
  std::size_t dim = 0;
  std::size_t num_layers = 0;
  std::string model_name;
  Pooling pooling_default = Pooling::mean;

  friend bool operator==(const ContainerIndex&, const ContainerIndex&) = default;
};

// All token matrices of one layer, one T_i x d block per molecule.
struct LayerStack {
  std::size_t layer_index = 0;
  std::vector<std::string> molecule_ids;
  std::vector<std::size_t> token_counts;
  std::vector<Matrix> embeddings;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return molecule_ids.size(); }
};

struct TaskManifest {
  std::string task_name;
  TaskKind task_kind = TaskKind::regression;
  MetricName metric = MetricName::mae;
  Pooling pooling = Pooling::mean;
  std::map<std::string, double> labels;
  std::map<std::string, Split> split;

  Direction metric_direction() const { return direction_of(metric); }

  friend bool operator==(const TaskManifest&, const TaskManifest&) = default;
};

struct ExternalScoreFile {
  std::string model_name;
  std::string task_name;
  std::vector<double> scores;  // indexed by layer
};

inline fs::path layer_file(const fs::path& dir, std::size_t layer) {
  return dir / ("layer_" + std::to_string(layer) + ".npy");
}

inline json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing file " + path.string());
  try {
    return json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": invalid JSON: " + e.what());
  }
}

inline void write_json_file(const fs::path& path, const json& doc) {
  write_file_bytes(path, doc.dump(2) + "\n");
}

// ---- index.json ---------------------------------------------------------

inline ContainerIndex index_from_json(const json& j) {
  ContainerIndex idx;
  try {
    idx.molecule_ids = j.at("molecule_ids").get<std::vector<std::string>>();
    idx.token_counts = j.at("token_counts").get<std::vector<std::size_t>>();
    idx.dim = j.at("dim").get<std::size_t>();
    idx.num_layers = j.at("num_layers").get<std::size_t>();
    idx.model_name = j.value("model_name", std::string{});
    idx.pooling_default = parse_pooling(j.value("pooling_default", std::string{"mean"}));
  } catch (const json::exception& e) {
    throw InputError(std::string("index.json: ") + e.what());
  }
  if (idx.molecule_ids.empty()) throw InputError("index.json: empty stack");
  if (idx.molecule_ids.size() != idx.token_counts.size()) {
    throw InputError("index.json: molecule_ids and token_counts differ in length");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < idx.molecule_ids.size(); ++i) {
    if (!seen.insert(idx.molecule_ids[i]).second) {
      throw InputError("index.json: duplicate molecule id '" + idx.molecule_ids[i] + "'");
    }
    if (idx.token_counts[i] == 0) {
      throw InputError("index.json: molecule '" + idx.molecule_ids[i] + "' has zero tokens");
    }
  }
  if (idx.dim == 0) throw InputError("index.json: dim must be positive");
  if (idx.num_layers == 0) throw InputError("index.json: num_layers must be positive");
  return idx;
}

inline json index_to_json(const ContainerIndex& idx) {
  return json{{"molecule_ids", idx.molecule_ids},
              {"token_counts", idx.token_counts},
              {"dim", idx.dim},
              {"num_layers", idx.num_layers},
              {"model_name", idx.model_name},
              {"pooling_default", std::string(to_string(idx.pooling_default))}};
}

inline ContainerIndex load_index(const fs::path& dir) {
  const fs::path path = dir / "index.json";
  if (!fs::exists(path)) throw InputError("missing file " + path.string());
  return index_from_json(read_json_file(path));
}

// ---- layer stacks -------------------------------------------------------

// Slices a concatenated ΣT_i x d matrix into per-molecule blocks.
inline LayerStack slice_layer(const ContainerIndex& idx, std::size_t layer_index, const Matrix& rows) {
  if (idx.token_counts.empty()) throw InputError("empty stack");
  std::size_t total = 0;
  for (std::size_t t : idx.token_counts) total += t;
  if (total != rows.rows()) {
    throw InputError("layer " + std::to_string(layer_index) + ": row count mismatch (token_counts sum to " +
                     std::to_string(total) + ", file has " + std::to_string(rows.rows()) + ")");
  }
  if (rows.cols() != idx.dim) {
    throw InputError("layer " + std::to_string(layer_index) + ": file has " + std::to_string(rows.cols()) +
                     " columns, index says dim " + std::to_string(idx.dim));
  }
  LayerStack stack;
  stack.layer_index = layer_index;
  stack.molecule_ids = idx.molecule_ids;
  stack.token_counts = idx.token_counts;
  stack.dim = idx.dim;
  stack.embeddings.reserve(idx.token_counts.size());
  std::size_t offset = 0;
  for (std::size_t t : idx.token_counts) {
    stack.embeddings.push_back(rows.row_block(offset, t));
    offset += t;
  }
  return stack;
}

inline LayerStack load_layer_stack(const fs::path& dir, const ContainerIndex& idx, std::size_t layer_index) {
  if (layer_index >= idx.num_layers) {
    throw InputError("layer " + std::to_string(layer_index) + " out of range (container has " +
                     std::to_string(idx.num_layers) + " layers)");
  }
  const fs::path path = layer_file(dir, layer_index);
  if (!fs::exists(path)) throw InputError("missing file " + path.string());
  return slice_layer(idx, layer_index, read_npy(path));
}

inline LayerStack load_layer_stack(const fs::path& dir, std::size_t layer_index) {
  return load_layer_stack(dir, load_index(dir), layer_index);
}

// Concatenates token rows back into the on-disk layout.
inline Matrix concat_tokens(const LayerStack& stack) {
  std::size_t total = 0;
  for (const auto& e : stack.embeddings) total += e.rows();
  Matrix out(total, stack.dim);
  std::size_t r = 0;
  for (const auto& e : stack.embeddings) {
    if (e.cols() != stack.dim) throw InputError("embedding width does not match stack dim");
    for (std::size_t i = 0; i < e.rows(); ++i, ++r) std::copy(e.row(i).begin(), e.row(i).end(), out.row(r).begin());
  }
  return out;
}

inline void write_container(const fs::path& dir, const ContainerIndex& idx, const std::vector<LayerStack>& layers,
                            NpyDtype dtype = NpyDtype::f64) {
  fs::create_directories(dir);
  write_json_file(dir / "index.json", index_to_json(idx));
  for (const auto& layer : layers) write_npy(layer_file(dir, layer.layer_index), concat_tokens(layer), dtype);
}

// ---- manifests ----------------------------------------------------------

inline void validate_manifest(const TaskManifest& m) {
  for (const auto& [id, _] : m.labels) {
    if (!m.split.contains(id)) throw InputError("manifest '" + m.task_name + "': split missing id '" + id + "'");
  }
  for (const auto& [id, _] : m.split) {
    if (!m.labels.contains(id)) throw InputError("manifest '" + m.task_name + "': labels missing id '" + id + "'");
  }
  const bool binary = m.task_kind == TaskKind::binary_classification || m.metric == MetricName::auroc ||
                      m.metric == MetricName::aucpr;
  for (const auto& [id, y] : m.labels) {
    if (!std::isfinite(y)) throw InputError("manifest '" + m.task_name + "': non-finite label for id '" + id + "'");
    if (binary && y != 0.0 && y != 1.0) {
      throw InputError("manifest '" + m.task_name + "': non-binary label for id '" + id + "'");
    }
  }
  bool has_train = false, has_test = false;
  for (const auto& [_, s] : m.split) {
    has_train = has_train || s == Split::train;
    has_test = has_test || s == Split::test;
  }
  if (!has_train) throw InputError("manifest '" + m.task_name + "': empty train split");
  if (!has_test) throw InputError("manifest '" + m.task_name + "': empty test split");
}

inline TaskManifest manifest_from_json(const json& j) {
  TaskManifest m;
  try {
    m.task_name = j.at("task_name").get<std::string>();
    m.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
    m.metric = parse_task_metric(j.at("metric").get<std::string>());
    m.pooling = parse_pooling(j.value("pooling", std::string{"mean"}));
    for (const auto& [id, v] : j.at("labels").items()) {
      if (!v.is_number()) throw InputError("manifest: label for '" + id + "' is not a number");
      m.labels[id] = v.get<double>();
    }
    for (const auto& [id, v] : j.at("split").items()) m.split[id] = parse_split(v.get<std::string>());
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

inline json manifest_to_json(const TaskManifest& m) {
  json labels = json::object();
  for (const auto& [id, y] : m.labels) labels[id] = y;
  json split = json::object();
  for (const auto& [id, s] : m.split) split[id] = std::string(to_string(s));
  return json{{"task_name", m.task_name},
              {"task_kind", std::string(to_string(m.task_kind))},
              {"metric", std::string(to_string(m.metric))},
              {"pooling", std::string(to_string(m.pooling))},
              {"labels", labels},
              {"split", split}};
}

inline TaskManifest load_manifest(const fs::path& path) {
  try {
    return manifest_from_json(read_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const fs::path& path, const TaskManifest& m) {
  write_json_file(path, manifest_to_json(m));
}

// ---- external score files -----------------------------------------------

namespace detail {

inline double score_value(const std::string& key, const json& v) {
  double x = 0.0;
  if (v.is_number()) {
    x = v.get<double>();
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    x = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw InputError("score for layer " + key + " is not a number");
  } else {
    throw InputError("score for layer " + key + " is not a number");
  }
  if (!std::isfinite(x)) throw InputError("non-finite score for layer " + key);
  return x;
}

}  // namespace detail

// Accepts either the full document {"model_name", "task_name", "scores": {...}}
// or a bare {"<layer>": score} object.
inline ExternalScoreFile scores_from_json(const json& j) {
  if (!j.is_object()) throw InputError("score file must be a JSON object");
  ExternalScoreFile out;
  const json* map = &j;
  if (j.contains("scores")) {
    out.model_name = j.value("model_name", std::string{});
    out.task_name = j.value("task_name", std::string{});
    map = &j.at("scores");
    if (!map->is_object()) throw InputError("'scores' must be an object");
  }
  std::map<std::size_t, double> by_layer;
  for (const auto& [key, v] : map->items()) {
    std::size_t layer = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), layer);
    if (ec != std::errc{} || ptr != key.data() + key.size()) {
      throw InputError("score key '" + key + "' is not a layer index");
    }
    by_layer[layer] = detail::score_value(key, v);
  }
  if (by_layer.empty()) throw InputError("score file has no scores");
  std::size_t expected = 0;
  for (const auto& [layer, score] : by_layer) {
    if (layer != expected) throw InputError("gap at layer " + std::to_string(expected));
    out.scores.push_back(score);
    ++expected;
  }
  return out;
}

inline json scores_to_json(const ExternalScoreFile& s) {
  json scores = json::object();
  for (std::size_t i = 0; i < s.scores.size(); ++i) scores[std::to_string(i)] = s.scores[i];
  return json{{"model_name", s.model_name}, {"task_name", s.task_name}, {"scores", scores}};
}

inline ExternalScoreFile load_scores(const fs::path& path) {
  try {
    return scores_from_json(read_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace layerprobe
