#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isilab/volume.hpp"

namespace isilab {

struct Patch {
  std::vector<float> data;  // s^3 values, same axis order as Volume
  std::array<std::int64_t, 3> origin{0, 0, 0};
  std::int64_t size = 0;
  std::string volume_ref;
  std::optional<int> label;
};

enum class CoordinateMode { voxel, millimeter };

struct PatchBatch {
  std::vector<Patch> patches;
  std::vector<std::array<double, 3>> centers;
  CoordinateMode coordinate_mode = CoordinateMode::voxel;

  std::int64_t size() const { return static_cast<std::int64_t>(patches.size()); }
};

struct DistanceMatrix {
  std::int64_t n = 0;
  std::vector<double> values;  // row-major n x n

  double at(std::int64_t i, std::int64_t j) const { return values[i * n + j]; }
  double& at(std::int64_t i, std::int64_t j) { return values[i * n + j]; }
};

// Extract the cubic sub-block with low corner `origin`.
Patch extract_patch(const Volume& v, const std::array<std::int64_t, 3>& origin,
                    std::int64_t size);

// Uniform origins over the valid box, patches_per_volume from each volume in
// order; deterministic per (rng_seed, volume index).
PatchBatch sample_patch_batch(const std::vector<Volume>& volumes,
                              std::int64_t patches_per_volume, std::int64_t patch_size,
                              CoordinateMode mode, std::uint64_t rng_seed);

DistanceMatrix physical_distance_matrix(const PatchBatch& batch);

// Balanced downstream dataset: n_per_class patches whose mask overlap is
// positive (label 1) and n_per_class without any mask voxel (label 0).
std::vector<Patch> sample_labeled_patches(const std::vector<Volume>& volumes,
                                          std::int64_t patch_size, std::int64_t n_per_class,
                                          std::uint64_t rng_seed,
                                          std::int64_t attempt_budget = 100000);

}  // namespace isilab
