#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isilab/cli.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "experiment config file")->required();
  sub->add_option("--seed", args.seed, "master seed override")
      ->each([&args](const std::string&) { args.seed_set = true; });
  sub->add_option("--out", args.out, "output directory override");
}

isilab::ExperimentConfig resolve_config(const CommonArgs& args) {
  isilab::ExperimentConfig cfg = isilab::load_experiment_config(args.config);
  if (args.seed_set) cfg.master_seed = args.seed;
  if (!args.out.empty()) cfg.output_dir = args.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic-volume self-supervised representation laboratory"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate phantom volumes and a split manifest");
  add_common(gen, gen_args);

  CommonArgs train_args;
  std::string method;
  CLI::App* train = app.add_subcommand("train", "run self-supervised training");
  add_common(train, train_args);
  train->add_option("--method", method, "loss to optimize")
      ->required()
      ->check(CLI::IsMember({"isimed", "simclr", "barlow", "reg-isimed"}));

  CommonArgs eval_args;
  std::vector<std::string> eval_checkpoints;
  CLI::App* eval = app.add_subcommand("eval", "probe checkpoints with cross-validated metrics");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", eval_checkpoints, "checkpoint directory (repeatable)")
      ->required();

  CommonArgs analyze_args;
  std::string analyze_checkpoint;
  bool svg = false;
  CLI::App* analyze =
      app.add_subcommand("analyze", "distance-error and spatial-structure analysis");
  add_common(analyze, analyze_args);
  analyze->add_option("--checkpoint", analyze_checkpoint, "checkpoint directory")->required();
  analyze->add_flag("--svg", svg, "also write a projection scatter SVG");

  CLI11_PARSE(app, argc, argv);

  const char* component = "isilab";
  try {
    if (gen->parsed()) {
      component = "gen-data";
      const auto cfg = resolve_config(gen_args);
      const auto result = isilab::cmd_gen_data(cfg);
      std::printf("wrote %zu volumes and %s\n", result.volume_files.size(),
                  result.manifest_file.string().c_str());
    } else if (train->parsed()) {
      component = "train";
      const auto cfg = resolve_config(train_args);
      const auto result = isilab::cmd_train(cfg, isilab::parse_method(method));
      std::printf("final loss %.6f\ncheckpoint %s\nloss history %s\n", result.final_loss,
                  result.checkpoint_dir.string().c_str(), result.loss_csv.string().c_str());
    } else if (eval->parsed()) {
      component = "eval";
      const auto cfg = resolve_config(eval_args);
      std::vector<std::filesystem::path> paths(eval_checkpoints.begin(), eval_checkpoints.end());
      const auto result = isilab::cmd_eval(cfg, paths);
      std::printf("metrics %s\n", result.metrics_csv.string().c_str());
      if (result.ttests_csv)
        std::printf("paired t-tests %s\n", result.ttests_csv->string().c_str());
    } else if (analyze->parsed()) {
      component = "analyze";
      const auto cfg = resolve_config(analyze_args);
      const auto result = isilab::cmd_analyze(cfg, analyze_checkpoint, svg);
      std::printf("median |distance error| %.6f\nquantiles %s\ncorrelation %s\nvariance %s\n",
                  result.stats.q50, result.quantiles_csv.string().c_str(),
                  result.correlation_csv.string().c_str(),
                  result.variance_csv.string().c_str());
      if (result.scatter_svg) std::printf("scatter %s\n", result.scatter_svg->string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: error: %s\n", component, e.what());
    return 1;
  }
  return 0;
}
