#pragma once

// Subcommand implementations behind tools/layerprobe. Argument parsing lives
// in the tool; these take a validated RunConfig and streams so they can be
// driven from tests.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "layerprobe/error.hpp"
#include "layerprobe/pipeline.hpp"
#include "layerprobe/probes.hpp"
#include "layerprobe/report.hpp"
#include "layerprobe/synth.hpp"
#include "layerprobe/tensorio.hpp"

namespace layerprobe::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNumericalError = 2 };

struct SynthConfig {
  std::size_t molecules = 200;
  std::size_t dim = 16;
  std::size_t num_layers = 6;
  std::size_t token_min = 6;
  std::size_t token_max = 14;
  std::optional<std::string> transforms;
  std::optional<std::size_t> target_layer;
  std::vector<std::size_t> target_dims = {2, 3, 4, 5};
  double target_noise = 0.05;
  bool no_target = false;
  TaskKind task_kind = TaskKind::regression;
  std::string model_name = "synth";
};

struct RunConfig {
  fs::path input;                   // container dir (probe/eval/synth) or eval output (correlate)
  std::vector<fs::path> manifests;  // eval; defaults to <container>/manifest.json
  std::optional<Pooling> pooling;
  std::optional<double> lambda;
  std::size_t workers = 1;
  fs::path out_dir = "out";
  std::optional<std::string> layers;  // "a..b" or "k"
  std::vector<fs::path> scores;
  std::uint64_t seed = 7;
  SynthConfig synth;
};

// Inclusive "a..b" or a single index.
inline std::vector<std::size_t> parse_layer_range(const std::string& text, std::size_t num_layers) {
  auto parse_index = [&](std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      throw InputError("invalid --layers value '" + text + "' (expected A..B or K)");
    }
    return v;
  };
  const auto dots = text.find("..");
  const std::size_t first = parse_index(std::string_view(text).substr(0, dots));
  const std::size_t last = dots == std::string::npos ? first : parse_index(std::string_view(text).substr(dots + 2));
  if (first > last) throw InputError("invalid --layers range '" + text + "' (start after end)");
  if (last >= num_layers) {
    throw InputError("--layers " + text + " exceeds container (" + std::to_string(num_layers) + " layers)");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = first; k <= last; ++k) out.push_back(k);
  return out;
}

inline void validate(const RunConfig& cfg) {
  if (cfg.workers < 1) throw InputError("--workers must be >= 1");
  if (cfg.lambda && !(*cfg.lambda > 0.0)) throw InputError("--lambda must be > 0");
}

struct LoadedContainer {
  ContainerIndex index;
  std::vector<LayerStack> layers;
};

inline LoadedContainer load_container(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.input)) throw InputError("container directory not found: " + cfg.input.string());
  LoadedContainer c;
  c.index = load_index(cfg.input);
  std::vector<std::size_t> which;
  if (cfg.layers) {
    which = parse_layer_range(*cfg.layers, c.index.num_layers);
  } else {
    for (std::size_t k = 0; k < c.index.num_layers; ++k) which.push_back(k);
  }
  c.layers.resize(which.size());
  parallel_for(which.size(), cfg.workers,
               [&](std::size_t i) { c.layers[i] = load_layer_stack(cfg.input, c.index, which[i]); });
  return c;
}

template <typename Body>
int run_guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

inline std::string fixed(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

inline int cmd_probe(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    validate(cfg);
    const LoadedContainer c = load_container(cfg);
    const Pooling strategy = cfg.pooling.value_or(c.index.pooling_default);
    const ProbeReport report = probe_all(c.layers, strategy, cfg.workers, c.index.model_name);
    write_probe_outputs(cfg.out_dir, report);
    out << "layer  depth%   TME(nats)  CKA->next\n";
    for (std::size_t k = 0; k < report.num_layers(); ++k) {
      out << std::setw(5) << report.layers[k] << "  " << std::setw(6) << fixed(report.depth_percent[k], 1) << "  "
          << std::setw(9) << fixed(report.tme[k]) << "  "
          << (k < report.adjacent_cka.size() ? fixed(report.adjacent_cka[k]) : std::string("-")) << '\n';
    }
    out << "molecules: " << report.molecule_count << '\n';
    return kOk;
  });
}

inline int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    validate(cfg);
    const LoadedContainer c = load_container(cfg);
    std::vector<fs::path> manifest_paths = cfg.manifests;
    if (manifest_paths.empty()) manifest_paths.push_back(cfg.input / "manifest.json");

    std::vector<TaskManifest> manifests;
    bool input_failure = false, numerical_failure = false;
    std::vector<std::string> failures;
    for (const auto& path : manifest_paths) {
      try {
        manifests.push_back(load_manifest(path));
      } catch (const std::exception& e) {
        failures.push_back(path.string() + ": " + e.what());
        input_failure = true;
      }
    }

    EvalOptions options;
    options.workers = cfg.workers;
    options.pooling_override = cfg.pooling;
    options.model_name = c.index.model_name;
    if (cfg.lambda) options.ridge_lambda = options.logistic_lambda = *cfg.lambda;

    Report report;
    report.metadata.ridge_lambda = options.ridge_lambda;
    report.metadata.logistic_lambda = options.logistic_lambda;
    report.metadata.pooling_override = cfg.pooling;

    std::vector<ImprovementCell> cells;
    for (auto& outcome : eval_tasks(c.layers, manifests, options)) {
      if (!outcome.curve) {
        failures.push_back("task '" + outcome.task_name + "': " + outcome.error);
        (outcome.numerical_error ? numerical_failure : input_failure) = true;
        continue;
      }
      if (outcome.curve->num_layers() >= 2) {
        try {
          cells.push_back(improvement_cell(*outcome.curve));
        } catch (const NumericalError& e) {
          failures.push_back("task '" + outcome.task_name + "': " + e.what());
          numerical_failure = true;
        }
      }
      report.curves.push_back(std::move(*outcome.curve));
    }
    report.improvement = summarize(std::move(cells));
    write_eval_outputs(cfg.out_dir, report);

    out << "task                              metric     final   best-nonfinal (layer)   change%\n";
    for (const auto& cell : report.improvement->cells) {
      std::ostringstream line;
      line << std::left << std::setw(34) << cell.task_name << std::setw(9) << to_string(cell.metric) << std::right
           << std::setw(8) << fixed(cell.final_score) << "  " << std::setw(8) << fixed(cell.best_nonfinal_score)
           << " (" << cell.best_nonfinal_layer << ")" << std::setw(16) << fixed(cell.percent_change, 2);
      out << line.str() << '\n';
    }
    out << "tasks evaluated: " << report.curves.size() << ", failed: " << failures.size() << '\n';
    out << "fraction preferring a non-final layer: " << fixed(report.improvement->fraction_intermediate) << '\n';
    out << "mean percent change: " << fixed(report.improvement->mean_percent_change, 3) << '\n';
    for (const auto& f : failures) err << "failed: " << f << '\n';
    if (input_failure) return int{kInputError};
    if (numerical_failure) return int{kNumericalError};
    return int{kOk};
  });
}

inline int cmd_correlate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    validate(cfg);
    if (cfg.scores.empty()) throw InputError("correlate needs at least one --scores file");
    const fs::path curves_path = fs::is_directory(cfg.input) ? cfg.input / "curves.csv" : cfg.input;
    if (!fs::exists(curves_path)) throw InputError("missing file " + curves_path.string());
    const auto curves = parse_curves_csv(read_file_bytes(curves_path));

    std::vector<CorrelationResult> results;
    std::vector<bool> curve_matched(curves.size(), false);
    bool numerical_failure = false;
    for (const auto& path : cfg.scores) {
      const ExternalScoreFile scores = load_scores(path);
      const auto it = std::find_if(curves.begin(), curves.end(), [&](const LayerScoreCurve& c) {
        return c.model_name == scores.model_name && c.task_name == scores.task_name;
      });
      if (it == curves.end()) {
        err << "unmatched score file " << path.string() << " (model '" << scores.model_name << "', task '"
            << scores.task_name << "')\n";
        continue;
      }
      curve_matched[static_cast<std::size_t>(it - curves.begin())] = true;
      try {
        results.push_back(correlate(*it, scores));
      } catch (const NumericalError& e) {
        err << "failed: " << path.string() << ": " << e.what() << '\n';
        numerical_failure = true;
      }
    }
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (!curve_matched[i]) {
        err << "no finetuned scores for model '" << curves[i].model_name << "', task '" << curves[i].task_name
            << "'\n";
      }
    }
    write_correlation_outputs(cfg.out_dir, results);
    if (results.empty()) {
      if (numerical_failure) return int{kNumericalError};
      throw InputError("no (model, task) pairs matched between curves and score files");
    }
    std::vector<double> values;
    for (const auto& r : results) {
      out << r.model_name << '\t' << r.task_name << "\tpearson=" << fixed(r.pearson, 6) << "\tlayers=" << r.num_layers()
          << '\n';
      values.push_back(r.pearson);
    }
    out << "median pearson: " << fixed(median(values), 6) << '\n';
    return numerical_failure ? int{kNumericalError} : int{kOk};
  });
}

inline SynthSpec synth_spec_from(const RunConfig& cfg) {
  const SynthConfig& s = cfg.synth;
  if (s.num_layers < 2) throw InputError("synth: --num-layers must be >= 2");
  SynthSpec spec;
  spec.seed = cfg.seed;
  spec.n_molecules = s.molecules;
  spec.dim = s.dim;
  spec.num_layers = s.num_layers;
  spec.token_min = s.token_min;
  spec.token_max = s.token_max;
  spec.task_kind = s.task_kind;
  spec.model_name = s.model_name;
  if (cfg.pooling) spec.pooling = *cfg.pooling;
  if (s.transforms) {
    spec.transforms = parse_transforms(*s.transforms);
  } else {
    spec.transforms.assign(s.num_layers - 2, LayerTransform::noise(0.1));
    spec.transforms.push_back(LayerTransform::rank_compress(std::min<std::size_t>(2, s.dim)));
  }
  if (!s.no_target) spec.target = PlantedTarget{s.target_layer.value_or(s.num_layers - 2), s.target_dims, s.target_noise};
  return spec;
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const SynthData data = generate(synth_spec_from(cfg));
    write_synth_container(cfg.input, data);
    out << "wrote " << data.layers.size() << " layers x " << data.index.molecule_ids.size() << " molecules (dim "
        << data.index.dim << ") to " << cfg.input.string() << '\n';
    return int{kOk};
  });
}

}  // namespace layerprobe::cli
