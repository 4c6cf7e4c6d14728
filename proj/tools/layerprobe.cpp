// layerprobe: layer-wise representation diagnostics.
//
//   layerprobe probe     CONTAINER [--layers A..B] [--pooling mean|cls] [--out DIR] [--workers N]
//   layerprobe eval      CONTAINER [MANIFEST...] [--lambda F] [--pooling mean|cls] [--layers A..B] [--out DIR] [--workers N]
//   layerprobe correlate EVAL_DIR|curves.csv --scores FILE [--scores FILE...] [--out DIR]
//   layerprobe synth     CONTAINER [--seed N] [synthetic-data options]

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "layerprobe/cli.hpp"

namespace {

using layerprobe::cli::RunConfig;

void add_common(CLI::App* cmd, RunConfig& cfg, std::string& pooling) {
  cmd->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--workers", cfg.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--pooling", pooling, "Override pooling (mean or cls)")->check(CLI::IsMember({"mean", "cls"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-wise representation diagnostics for exported encoder embeddings"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string pooling;
  std::string task_kind = "regression";

  auto* probe = app.add_subcommand("probe", "Tokenized-molecule entropy and adjacent-layer CKA per layer");
  probe->add_option("container", cfg.input, "Container directory")->required();
  probe->add_option("--layers", cfg.layers, "Inclusive layer range A..B or single layer K");
  add_common(probe, cfg, pooling);

  auto* eval = app.add_subcommand("eval", "Frozen-embedding evaluation of every layer on each task");
  eval->add_option("container", cfg.input, "Container directory")->required();
  eval->add_option("manifests", cfg.manifests, "Task manifests (default: CONTAINER/manifest.json)");
  eval->add_option("--lambda", cfg.lambda, "Surrogate L2 strength (default 1.0)");
  eval->add_option("--layers", cfg.layers, "Inclusive layer range A..B or single layer K");
  add_common(eval, cfg, pooling);

  auto* corr = app.add_subcommand("correlate", "Correlate frozen layer scores with finetuned scores");
  corr->add_option("curves", cfg.input, "eval output directory or curves.csv")->required();
  corr->add_option("--scores", cfg.scores, "Finetuned score file (repeatable)")->required();
  corr->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Write a synthetic container with a planted target");
  synth->add_option("container", cfg.input, "Output container directory")->required();
  synth->add_option("--seed", cfg.seed, "PRNG seed")->capture_default_str();
  synth->add_option("--molecules", cfg.synth.molecules, "Number of molecules")->capture_default_str();
  synth->add_option("--dim", cfg.synth.dim, "Embedding width")->capture_default_str();
  synth->add_option("--num-layers", cfg.synth.num_layers, "Number of layers")->capture_default_str();
  synth->add_option("--token-min", cfg.synth.token_min, "Minimum tokens per molecule")->capture_default_str();
  synth->add_option("--token-max", cfg.synth.token_max, "Maximum tokens per molecule")->capture_default_str();
  synth->add_option("--transforms", cfg.synth.transforms,
                    "Comma list of identity|rotate|scale:C|compress:R|noise:S (num-layers - 1 entries)");
  synth->add_option("--target-layer", cfg.synth.target_layer, "Layer carrying the planted target");
  synth->add_option("--target-dims", cfg.synth.target_dims, "Coordinates summed into the target")->delimiter(',');
  synth->add_option("--target-noise", cfg.synth.target_noise, "Target noise sigma")->capture_default_str();
  synth->add_flag("--no-target", cfg.synth.no_target, "Random labels instead of a planted target");
  synth->add_option("--task", task_kind, "regression or classification")
      ->check(CLI::IsMember({"regression", "classification"}));
  synth->add_option("--model-name", cfg.synth.model_name, "Model name recorded in index.json");
  synth->add_option("--pooling", pooling, "Pooling recorded in index and manifest")
      ->check(CLI::IsMember({"mean", "cls"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : layerprobe::cli::kInputError;
  }

  if (!pooling.empty()) cfg.pooling = layerprobe::parse_pooling(pooling);
  cfg.synth.task_kind =
      task_kind == "classification" ? layerprobe::TaskKind::binary_classification : layerprobe::TaskKind::regression;

  if (probe->parsed()) return layerprobe::cli::cmd_probe(cfg, std::cout, std::cerr);
  if (eval->parsed()) return layerprobe::cli::cmd_eval(cfg, std::cout, std::cerr);
  if (corr->parsed()) return layerprobe::cli::cmd_correlate(cfg, std::cout, std::cerr);
  return layerprobe::cli::cmd_synth(cfg, std::cout, std::cerr);
}
