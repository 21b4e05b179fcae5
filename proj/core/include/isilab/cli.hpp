#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isilab/eval.hpp"
#include "isilab/train.hpp"
#include "isilab/volume.hpp"

namespace isilab {

struct SplitCounts {
  std::int64_t train = 20;
  std::int64_t val = 5;
  std::int64_t test = 5;
};

struct EvalConfig {
  std::int64_t n_per_class = 50;
  std::int64_t k_folds = 10;
  std::int64_t probe_steps = 200;
  double probe_lr = 0.01;
};

struct ExperimentConfig {
  PhantomConfig phantom;
  SplitCounts splits;
  TrainConfig train;
  EvalConfig eval;
  std::filesystem::path output_dir = "runs/out";
  std::uint64_t master_seed = 0;
};

void validate(const ExperimentConfig& config);

// Parses an INI-style experiment file: top-level `key = value` pairs plus
// [phantom], [splits], [train], [train.loss], [train.encoder],
// [train.augment], and [eval] sections whose keys mirror the struct fields.
// Lists (shape, ranges, conv_channels) are space-separated. Unknown sections,
// unknown keys, duplicates, and malformed values raise ConfigParseError with
// the offending line. The encoder input size is always derived from
// train.patch_size and is not a config key.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Every command derives its working seed from the master seed and its own
// name, so one master seed reproducibly drives the whole pipeline while
// commands stay decoupled from each other.
std::uint64_t component_seed(std::uint64_t master_seed, std::string_view component);

std::string method_name(LossMethod method);            // e.g. "reg-isimed"
LossMethod parse_method(std::string_view name);        // inverse, InvalidConfig on junk

struct GenDataResult {
  std::vector<std::filesystem::path> volume_files;
  std::filesystem::path manifest_file;
};

struct TrainCmdResult {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path loss_csv;
  double final_loss = 0.0;
};

struct EvalCmdResult {
  std::filesystem::path metrics_csv;
  std::optional<std::filesystem::path> ttests_csv;  // set when >= 2 checkpoints
  std::vector<std::pair<std::string, std::vector<MetricsRecord>>> per_model;
};

struct AnalyzeCmdResult {
  std::filesystem::path quantiles_csv;
  std::filesystem::path correlation_csv;
  std::filesystem::path variance_csv;
  std::optional<std::filesystem::path> scatter_svg;
  DistanceErrorStats stats;
  std::vector<double> correlations;  // 3 components x 3 spatial axes
};

// Generates every subject deterministically, rescales intensities to the
// 5th/95th percentile window [-1, 1], crops to the foreground box, and writes
// volumes plus a JSON manifest mapping subject id to split. Subjects never
// straddle splits. All files are written via temp-then-rename.
GenDataResult cmd_gen_data(const ExperimentConfig& config);

// Trains the requested method on the training split and writes a checkpoint
// directory plus the loss history CSV. Missing gen-data artifacts raise
// MissingData.
TrainCmdResult cmd_train(const ExperimentConfig& config, LossMethod method);

// Samples a balanced labeled patch set from the test split, embeds it with
// each checkpoint's frozen backbone, and runs stratified k-fold probing. One
// metrics CSV holds the per-fold rows plus one summary row per model; with
// two or more checkpoints a paired t-test table over the fold columns is
// written as well. The patch set and fold assignment depend only on the
// config, so fold metrics are paired across checkpoints.
EvalCmdResult cmd_eval(const ExperimentConfig& config,
                       const std::vector<std::filesystem::path>& checkpoints);

// Samples a fresh patch batch from the test split, compares latent to
// physical distances, and writes distance-error quantiles, the
// principal-component spatial-correlation table, the explained-variance
// table, and optionally an SVG scatter of each component against each axis.
AnalyzeCmdResult cmd_analyze(const ExperimentConfig& config,
                             const std::filesystem::path& checkpoint, bool svg);

}  // namespace isilab
