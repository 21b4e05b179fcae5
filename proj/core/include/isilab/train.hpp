#pragma once

#include <filesystem>
#include <vector>

#include "isilab/augment.hpp"
#include "isilab/losses.hpp"
#include "isilab/nn.hpp"
#include "isilab/volume.hpp"

namespace isilab {

struct TrainConfig {
  std::int64_t epochs = 50;
  std::int64_t steps_per_epoch = 20;
  std::int64_t volumes_per_batch = 64;
  std::int64_t patches_per_volume = 16;
  std::int64_t patch_size = 32;
  double lr0 = 0.001;
  double lr_gamma = 0.9;
  LossConfig loss;
  EncoderConfig encoder;
  AugmentConfig augment;
  bool augment_isimed = false;  // distance regression trains on raw patches
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct LossRecord {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LossRecord> history;  // one record per optimization step
};

// Full SSL optimization over the given training volumes: per step, draw a
// seeded subset of volumes, sample patches from it, build the method's loss,
// and take one AdamW step at the epoch's decayed learning rate. Deterministic
// given the config. Throws NonFiniteLoss with the offending global step.
TrainResult train(const TrainConfig& config, const std::vector<Volume>& volumes);

// history rows as "epoch,step,loss,lr" with round-trip-exact formatting
void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path);

}  // namespace isilab
