#include "isilab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "isilab/errors.hpp"
#include "isilab/optim.hpp"

namespace isilab {

void validate(const TrainConfig& config) {
  if (config.epochs <= 0 || config.steps_per_epoch <= 0)
    throw InvalidConfig("epochs and steps_per_epoch must be positive");
  if (config.volumes_per_batch <= 0 || config.patches_per_volume <= 0)
    throw InvalidConfig("batch composition counts must be positive");
  if (config.patch_size <= 0) throw InvalidConfig("patch_size must be positive");
  if (config.lr0 < 0.0) throw InvalidConfig("lr0 must be nonnegative");
  if (config.lr_gamma <= 0.0) throw InvalidConfig("lr_gamma must be positive");
  if (config.patch_size != config.encoder.input_patch)
    throw InvalidConfig("patch_size must equal the encoder input_patch");
  validate(config.loss);
  validate(config.encoder);
  const bool uses_views = config.loss.method != LossMethod::isimed || config.augment_isimed;
  if (uses_views) validate(config.augment, config.patch_size);
}

namespace {

Tensor rows_to_tensor(const std::vector<std::vector<float>>& rows) {
  const auto n = static_cast<std::int64_t>(rows.size());
  const auto k = static_cast<std::int64_t>(rows.front().size());
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n * k));
  for (const auto& row : rows)
    for (float v : row) values.push_back(static_cast<double>(v));
  return make_tensor({n, k}, std::move(values));
}

std::vector<Volume> pick_volume_subset(const std::vector<Volume>& volumes, std::int64_t count,
                                       std::uint64_t seed) {
  std::vector<std::size_t> indices(volumes.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  Rng rng(seed);
  for (std::int64_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(i, static_cast<std::int64_t>(indices.size()) - 1));
    std::swap(indices[static_cast<std::size_t>(i)], indices[j]);
  }
  indices.resize(static_cast<std::size_t>(count));
  std::sort(indices.begin(), indices.end());
  std::vector<Volume> subset;
  subset.reserve(indices.size());
  for (auto i : indices) subset.push_back(volumes[i]);
  return subset;
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<Volume>& volumes) {
  validate(config);
  if (volumes.empty()) throw MissingData("training requires at least one volume");
  if (config.volumes_per_batch > static_cast<std::int64_t>(volumes.size()))
    throw InvalidConfig("volumes_per_batch exceeds the available training subjects");

  const LossMethod method = config.loss.method;
  TrainResult result{init_model(config.encoder, method == LossMethod::reg_isimed), {}};
  Model& model = result.model;
  OptimizerState opt = make_optimizer(config.lr0);
  result.history.reserve(static_cast<std::size_t>(config.epochs * config.steps_per_epoch));

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    opt.lr = exp_lr(config.lr0, config.lr_gamma, epoch);
    for (std::int64_t step = 0; step < config.steps_per_epoch; ++step) {
      const std::int64_t global_step = epoch * config.steps_per_epoch + step;
      const std::uint64_t step_seed = mix_seed(config.seed, static_cast<std::uint64_t>(global_step));

      const auto subset =
          pick_volume_subset(volumes, config.volumes_per_batch, mix_seed(step_seed, 1));
      const auto batch = sample_patch_batch(subset, config.patches_per_volume, config.patch_size,
                                            CoordinateMode::millimeter, mix_seed(step_seed, 2));
      Rng aug_rng(mix_seed(step_seed, 3));

      Tensor loss;
      if (method == LossMethod::isimed) {
        const auto d_physical = physical_distance_matrix(batch);
        std::vector<std::vector<float>> rows;
        rows.reserve(batch.patches.size());
        for (const auto& p : batch.patches)
          rows.push_back(config.augment_isimed
                             ? augment_view(p.data, p.size, config.augment, aug_rng)
                             : p.data);
        loss = isimed_loss(pairwise_distance(forward_encoder(model, rows_to_tensor(rows))),
                           d_physical);
      } else {
        std::vector<std::vector<float>> rows1, rows2;
        rows1.reserve(batch.patches.size());
        rows2.reserve(batch.patches.size());
        for (const auto& p : batch.patches) {
          auto views = make_views(p, config.augment, aug_rng);
          rows1.push_back(std::move(views.view1));
          rows2.push_back(std::move(views.view2));
        }
        Tensor z1 = forward_encoder(model, rows_to_tensor(rows1));
        Tensor z2 = forward_encoder(model, rows_to_tensor(rows2));
        if (method == LossMethod::simclr) {
          loss = ntxent_loss(z1, z2, config.loss.tau);
        } else if (method == LossMethod::barlow) {
          loss = barlow_twins_loss(z1, z2, config.loss.lambda_bt);
        } else {
          loss = reg_isimed_loss(model, z1, z2, physical_distance_matrix(batch), config.loss);
        }
      }

      const double value = loss.scalar();
      if (!std::isfinite(value))
        throw NonFiniteLoss(global_step, "training loss diverged");
      backward(loss);
      adamw_step(model.params, opt);
      result.history.push_back({epoch, step, value, opt.lr});
    }
  }
  return result;
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,step,loss,lr\n";
  char buf[64];
  for (const auto& rec : history) {
    out << rec.epoch << ',' << rec.step << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", rec.loss);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", rec.lr);
    out << buf << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace isilab
