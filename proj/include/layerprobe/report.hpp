#pragma once

// CSV / JSON / SVG emission for probe reports, layer curves, improvement
// cells and correlations, plus readers for what later subcommands consume.

#include <charconv>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "layerprobe/error.hpp"
#include "layerprobe/pipeline.hpp"
#include "layerprobe/probes.hpp"
#include "layerprobe/svg.hpp"
#include "layerprobe/tensorio.hpp"

namespace layerprobe {

inline constexpr std::string_view kToolName = "layerprobe";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct ReportMetadata {
  double ridge_lambda = kDefaultRidgeLambda;
  double logistic_lambda = kDefaultLogisticLambda;
  std::optional<Pooling> pooling_override;

  friend bool operator==(const ReportMetadata&, const ReportMetadata&) = default;
};

struct Report {
  ReportMetadata metadata;
  std::vector<LayerScoreCurve> curves;
  std::optional<ImprovementSummary> improvement;
  std::optional<ProbeReport> probes;
  std::vector<CorrelationResult> correlations;
};

// ---- number / CSV helpers ----------------------------------------------

// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw InputError("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- CSV writers ---------------------------------------------------------

inline std::string probes_csv(const ProbeReport& p) {
  std::string out = "layer,depth_percent,tme,cka_to_next\n";
  for (std::size_t k = 0; k < p.num_layers(); ++k) {
    out += std::to_string(p.layers[k]) + "," + format_double(p.depth_percent[k]) + "," + format_double(p.tme[k]) + ",";
    if (k < p.adjacent_cka.size()) out += format_double(p.adjacent_cka[k]);
    out += "\n";
  }
  return out;
}

inline std::string curves_csv(const std::vector<LayerScoreCurve>& curves) {
  std::string out = "model,task,metric,direction,layer,depth_percent,score\n";
  for (const auto& c : curves) {
    const auto depth = depth_percent(c.num_layers());
    for (std::size_t k = 0; k < c.num_layers(); ++k) {
      out += csv_field(c.model_name) + "," + csv_field(c.task_name) + "," + std::string(to_string(c.metric)) + "," +
             std::string(to_string(c.direction)) + "," + std::to_string(c.layers[k]) + "," + format_double(depth[k]) +
             "," + format_double(c.scores[k]) + "\n";
    }
  }
  return out;
}

inline std::string improvement_csv(const std::vector<ImprovementCell>& cells) {
  std::string out = "model,task,metric,final_score,best_nonfinal_score,best_nonfinal_layer,percent_change,winner\n";
  for (const auto& c : cells) {
    out += csv_field(c.model_name) + "," + csv_field(c.task_name) + "," + std::string(to_string(c.metric)) + "," +
           format_double(c.final_score) + "," + format_double(c.best_nonfinal_score) + "," +
           std::to_string(c.best_nonfinal_layer) + "," + format_double(c.percent_change) + "," +
           std::string(to_string(c.winner)) + "\n";
  }
  return out;
}

inline std::string correlations_csv(const std::vector<CorrelationResult>& results) {
  std::string out = "model,task,pearson,n_layers\n";
  for (const auto& r : results) {
    out += csv_field(r.model_name) + "," + csv_field(r.task_name) + "," + format_double(r.pearson) + "," +
           std::to_string(r.num_layers()) + "\n";
  }
  return out;
}

// Rebuilds curves from curves.csv, grouping rows by (model, task) in order of
// first appearance and recomputing the best-layer fields.
inline std::vector<LayerScoreCurve> parse_curves_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"model", "task", "metric", "direction", "layer",
                                                         "depth_percent", "score"}) {
    throw InputError("curves.csv: unexpected header");
  }
  std::vector<LayerScoreCurve> curves;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != 7) throw InputError("curves.csv: row " + std::to_string(r + 1) + " has " +
                                          std::to_string(row.size()) + " fields");
    auto it = std::find_if(curves.begin(), curves.end(),
                           [&](const LayerScoreCurve& c) { return c.model_name == row[0] && c.task_name == row[1]; });
    if (it == curves.end()) {
      LayerScoreCurve c;
      c.model_name = row[0];
      c.task_name = row[1];
      c.metric = parse_task_metric(row[2]);
      c.direction = parse_direction(row[3]);
      curves.push_back(std::move(c));
      it = curves.end() - 1;
    }
    std::size_t layer = 0;
    const auto [ptr, ec] = std::from_chars(row[4].data(), row[4].data() + row[4].size(), layer);
    if (ec != std::errc{} || ptr != row[4].data() + row[4].size()) {
      throw InputError("curves.csv: bad layer '" + row[4] + "'");
    }
    it->layers.push_back(layer);
    it->scores.push_back(parse_double(row[6]));
  }
  for (auto& c : curves) assign_best_layers(c);
  return curves;
}

// ---- JSON ----------------------------------------------------------------

inline json probe_report_to_json(const ProbeReport& p) {
  return json{{"model_name", p.model_name},   {"num_layers", p.num_layers()},     {"layers", p.layers},
              {"tme", p.tme},                 {"adjacent_cka", p.adjacent_cka}, {"depth_percent", p.depth_percent},
              {"molecule_count", p.molecule_count}, {"entropy_unit", "nats"}};
}

inline ProbeReport probe_report_from_json(const json& j) {
  ProbeReport p;
  p.model_name = j.at("model_name").get<std::string>();
  p.layers = j.at("layers").get<std::vector<std::size_t>>();
  p.tme = j.at("tme").get<std::vector<double>>();
  p.adjacent_cka = j.at("adjacent_cka").get<std::vector<double>>();
  p.depth_percent = j.at("depth_percent").get<std::vector<double>>();
  p.molecule_count = j.at("molecule_count").get<std::size_t>();
  return p;
}

inline json curve_to_json(const LayerScoreCurve& c) {
  json j{{"model_name", c.model_name},
         {"task_name", c.task_name},
         {"metric", std::string(to_string(c.metric))},
         {"direction", std::string(to_string(c.direction))},
         {"layers", c.layers},
         {"depth_percent", depth_percent(c.num_layers())},
         {"scores", c.scores},
         {"best_layer", c.best_layer}};
  j["best_nonfinal_layer"] = c.best_nonfinal_layer ? json(*c.best_nonfinal_layer) : json(nullptr);
  return j;
}

inline LayerScoreCurve curve_from_json(const json& j) {
  LayerScoreCurve c;
  c.model_name = j.at("model_name").get<std::string>();
  c.task_name = j.at("task_name").get<std::string>();
  c.metric = parse_task_metric(j.at("metric").get<std::string>());
  c.direction = parse_direction(j.at("direction").get<std::string>());
  c.layers = j.at("layers").get<std::vector<std::size_t>>();
  c.scores = j.at("scores").get<std::vector<double>>();
  c.best_layer = j.at("best_layer").get<std::size_t>();
  if (!j.at("best_nonfinal_layer").is_null()) c.best_nonfinal_layer = j.at("best_nonfinal_layer").get<std::size_t>();
  return c;
}

inline json cell_to_json(const ImprovementCell& c) {
  return json{{"model_name", c.model_name},
              {"task_name", c.task_name},
              {"metric", std::string(to_string(c.metric))},
              {"final_score", c.final_score},
              {"best_nonfinal_score", c.best_nonfinal_score},
              {"best_nonfinal_layer", c.best_nonfinal_layer},
              {"percent_change", c.percent_change},
              {"winner", std::string(to_string(c.winner))}};
}

inline ImprovementCell cell_from_json(const json& j) {
  ImprovementCell c;
  c.model_name = j.at("model_name").get<std::string>();
  c.task_name = j.at("task_name").get<std::string>();
  c.metric = parse_task_metric(j.at("metric").get<std::string>());
  c.final_score = j.at("final_score").get<double>();
  c.best_nonfinal_score = j.at("best_nonfinal_score").get<double>();
  c.best_nonfinal_layer = j.at("best_nonfinal_layer").get<std::size_t>();
  c.percent_change = j.at("percent_change").get<double>();
  c.winner = parse_winner(j.at("winner").get<std::string>());
  return c;
}

inline json summary_to_json(const ImprovementSummary& s) {
  json cells = json::array();
  for (const auto& c : s.cells) cells.push_back(cell_to_json(c));
  return json{{"cells", cells},
              {"fraction_intermediate", s.fraction_intermediate},
              {"mean_percent_change", s.mean_percent_change},
              {"per_model_mean", s.per_model_mean},
              {"per_task_mean", s.per_task_mean}};
}

inline ImprovementSummary summary_from_json(const json& j) {
  ImprovementSummary s;
  for (const auto& c : j.at("cells")) s.cells.push_back(cell_from_json(c));
  s.fraction_intermediate = j.at("fraction_intermediate").get<double>();
  s.mean_percent_change = j.at("mean_percent_change").get<double>();
  s.per_model_mean = j.at("per_model_mean").get<std::map<std::string, double>>();
  s.per_task_mean = j.at("per_task_mean").get<std::map<std::string, double>>();
  return s;
}

inline json correlation_to_json(const CorrelationResult& r) {
  json points = json::array();
  for (const auto& [f, t] : r.points) points.push_back(json::array({f, t}));
  return json{{"model_name", r.model_name}, {"task_name", r.task_name}, {"pearson", r.pearson},
              {"n_layers", r.num_layers()}, {"points", points}};
}

inline CorrelationResult correlation_from_json(const json& j) {
  CorrelationResult r;
  r.model_name = j.at("model_name").get<std::string>();
  r.task_name = j.at("task_name").get<std::string>();
  r.pearson = j.at("pearson").get<double>();
  for (const auto& p : j.at("points")) r.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return r;
}

inline json report_to_json(const Report& r) {
  json meta{{"tool", kToolName},
            {"version", kToolVersion},
            {"entropy_unit", "nats"},
            {"percent_change_formula",
             "higher-better: 100*(best_nonfinal-final)/|final|; lower-better: 100*(final-best_nonfinal)/|final|"},
            {"final_layer", "last exported layer index"},
            {"surrogate",
             "ridge regression (regression tasks) or L2 logistic regression via IRLS (binary tasks) on "
             "train-standardized features; validation split unused"},
            {"ridge_lambda", r.metadata.ridge_lambda},
            {"logistic_lambda", r.metadata.logistic_lambda},
            {"pooling_override",
             r.metadata.pooling_override ? json(std::string(to_string(*r.metadata.pooling_override))) : json(nullptr)},
            {"auroc", "Mann-Whitney with average ranks"},
            {"aucpr", "average precision, tied scores as one threshold"}};
  json curves = json::array();
  for (const auto& c : r.curves) curves.push_back(curve_to_json(c));
  json correlations = json::array();
  for (const auto& c : r.correlations) correlations.push_back(correlation_to_json(c));
  return json{{"metadata", meta},
              {"curves", curves},
              {"improvement", r.improvement ? summary_to_json(*r.improvement) : json(nullptr)},
              {"probes", r.probes ? probe_report_to_json(*r.probes) : json(nullptr)},
              {"correlations", correlations}};
}

inline Report report_from_json(const json& j) {
  try {
    Report r;
    const auto& meta = j.at("metadata");
    r.metadata.ridge_lambda = meta.at("ridge_lambda").get<double>();
    r.metadata.logistic_lambda = meta.at("logistic_lambda").get<double>();
    if (!meta.at("pooling_override").is_null()) {
      r.metadata.pooling_override = parse_pooling(meta.at("pooling_override").get<std::string>());
    }
    for (const auto& c : j.at("curves")) r.curves.push_back(curve_from_json(c));
    if (!j.at("improvement").is_null()) r.improvement = summary_from_json(j.at("improvement"));
    if (!j.at("probes").is_null()) r.probes = probe_report_from_json(j.at("probes"));
    for (const auto& c : j.at("correlations")) r.correlations.push_back(correlation_from_json(c));
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("report.json: ") + e.what());
  }
}

// ---- SVG figures -------------------------------------------------------

inline std::string probes_svg(const ProbeReport& p) {
  svg::Series tme{"TME (nats)", p.depth_percent, p.tme};
  svg::Series cka{"adjacent CKA", {}, p.adjacent_cka};
  for (std::size_t k = 0; k < p.adjacent_cka.size(); ++k) cka.x.push_back(p.depth_percent[k]);
  const std::string title = p.model_name.empty() ? "Layer probes" : "Layer probes: " + p.model_name;
  return svg::line_chart(title, "depth (%)", "value", {tme, cka});
}

inline std::string curves_svg(const std::vector<LayerScoreCurve>& curves) {
  std::vector<svg::Series> series;
  for (const auto& c : curves) {
    series.push_back({c.model_name + "/" + c.task_name + " (" + std::string(to_string(c.metric)) + ")",
                      depth_percent(c.num_layers()), c.scores});
  }
  return svg::line_chart("Frozen-embedding score by layer", "depth (%)", "test metric", series);
}

inline std::string improvement_svg(const ImprovementSummary& s) {
  std::vector<std::string> labels;
  std::vector<double> values;
  for (const auto& c : s.cells) {
    labels.push_back(c.model_name + "/" + c.task_name);
    values.push_back(c.percent_change);
  }
  return svg::bar_chart("Best intermediate layer vs final layer", "improvement (%)", labels, values);
}

inline std::string correlations_svg(const std::vector<CorrelationResult>& results) {
  std::vector<double> values;
  for (const auto& r : results) values.push_back(r.pearson);
  return svg::histogram("Frozen vs finetuned layer-score correlation", "Pearson r", values, -1.0, 1.0, 20);
}

inline std::string correlation_scatter_svg(const std::vector<CorrelationResult>& results) {
  std::vector<svg::Series> series;
  for (const auto& r : results) {
    svg::Series s{r.model_name + "/" + r.task_name, {}, {}};
    for (const auto& [f, t] : r.points) {
      s.x.push_back(f);
      s.y.push_back(t);
    }
    series.push_back(std::move(s));
  }
  return svg::scatter_chart("Frozen vs finetuned scores per layer", "frozen score", "finetuned score", series);
}

// ---- emission ------------------------------------------------------------

inline void write_probe_outputs(const fs::path& out_dir, const ProbeReport& p) {
  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "probes.csv", probes_csv(p));
  write_json_file(out_dir / "probes.json", probe_report_to_json(p));
  write_file_bytes(out_dir / "probes.svg", probes_svg(p));
}

inline void write_eval_outputs(const fs::path& out_dir, const Report& r) {
  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "curves.csv", curves_csv(r.curves));
  write_file_bytes(out_dir / "improvement.csv",
                   improvement_csv(r.improvement ? r.improvement->cells : std::vector<ImprovementCell>{}));
  write_json_file(out_dir / "report.json", report_to_json(r));
  write_file_bytes(out_dir / "curves.svg", curves_svg(r.curves));
  if (r.improvement) write_file_bytes(out_dir / "improvement.svg", improvement_svg(*r.improvement));
}

inline void write_correlation_outputs(const fs::path& out_dir, const std::vector<CorrelationResult>& results) {
  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "correlations.csv", correlations_csv(results));
  write_file_bytes(out_dir / "correlations.svg", correlations_svg(results));
  write_file_bytes(out_dir / "correlation_scatter.svg", correlation_scatter_svg(results));
}

// Writes every CSV (header-only when a section is empty), report.json and
// one SVG per figure family.
inline void emit_report(const Report& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_eval_outputs(out_dir, r);
  if (r.probes) {
    write_file_bytes(out_dir / "probes.csv", probes_csv(*r.probes));
    write_file_bytes(out_dir / "probes.svg", probes_svg(*r.probes));
  } else {
    write_file_bytes(out_dir / "probes.csv", "layer,depth_percent,tme,cka_to_next\n");
  }
  write_correlation_outputs(out_dir, r.correlations);
}

}  // namespace layerprobe
