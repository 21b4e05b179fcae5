#include "isilab/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "isilab/errors.hpp"
#include "isilab/rng.hpp"

namespace isilab {

Patch extract_patch(const Volume& v, const std::array<std::int64_t, 3>& origin,
                    std::int64_t size) {
  for (int k = 0; k < 3; ++k)
    if (origin[k] < 0 || origin[k] + size > v.shape[k])
      throw ShapeMismatch("patch extends outside volume " + v.subject_id);
  Patch p;
  p.origin = origin;
  p.size = size;
  p.volume_ref = v.subject_id;
  p.data.resize(static_cast<std::size_t>(size * size * size));
  std::size_t dst = 0;
  for (std::int64_t s = 0; s < size; ++s)
    for (std::int64_t c = 0; c < size; ++c) {
      const auto src = v.index(origin[0] + s, origin[1] + c, origin[2]);
      std::copy_n(v.data.begin() + src, size, p.data.begin() + static_cast<std::ptrdiff_t>(dst));
      dst += static_cast<std::size_t>(size);
    }
  return p;
}

static std::array<double, 3> patch_center(const Patch& p, const std::array<double, 3>& spacing,
                                          CoordinateMode mode) {
  std::array<double, 3> center;
  for (int k = 0; k < 3; ++k) {
    center[k] = static_cast<double>(p.origin[k]) + static_cast<double>(p.size - 1) / 2.0;
    if (mode == CoordinateMode::millimeter) center[k] *= spacing[k];
  }
  return center;
}

PatchBatch sample_patch_batch(const std::vector<Volume>& volumes,
                              std::int64_t patches_per_volume, std::int64_t patch_size,
                              CoordinateMode mode, std::uint64_t rng_seed) {
  if (patches_per_volume <= 0 || patch_size <= 0)
    throw InvalidConfig("patches_per_volume and patch_size must be positive");
  PatchBatch batch;
  batch.coordinate_mode = mode;
  batch.patches.reserve(volumes.size() * static_cast<std::size_t>(patches_per_volume));
  for (std::size_t vi = 0; vi < volumes.size(); ++vi) {
    const Volume& v = volumes[vi];
    for (int k = 0; k < 3; ++k)
      if (v.shape[k] < patch_size)
        throw VolumeTooSmall("volume " + v.subject_id + " is smaller than the patch size");
    Rng rng(mix_seed(rng_seed, static_cast<std::uint64_t>(vi)));
    for (std::int64_t i = 0; i < patches_per_volume; ++i) {
      std::array<std::int64_t, 3> origin;
      for (int k = 0; k < 3; ++k) origin[k] = rng.uniform_int(0, v.shape[k] - patch_size);
      batch.patches.push_back(extract_patch(v, origin, patch_size));
      batch.centers.push_back(patch_center(batch.patches.back(), v.spacing, mode));
    }
  }
  return batch;
}

DistanceMatrix physical_distance_matrix(const PatchBatch& batch) {
  const std::int64_t n = batch.size();
  if (n == 0) throw InvalidConfig("distance matrix of an empty batch");
  DistanceMatrix d;
  d.n = n;
  d.values.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double diff = batch.centers[i][k] - batch.centers[j][k];
        sum += diff * diff;
      }
      const double dist = std::sqrt(sum);
      d.at(i, j) = dist;
      d.at(j, i) = dist;
    }
  return d;
}

namespace {

// 3D summed-area table over the mask; table is (shape+1)^3 with a zero border
struct MaskIntegral {
  std::array<std::int64_t, 3> shape;
  std::vector<std::int64_t> table;

  explicit MaskIntegral(const Volume& v) : shape(v.shape) {
    const std::int64_t S = shape[0] + 1, C = shape[1] + 1, A = shape[2] + 1;
    table.assign(static_cast<std::size_t>(S * C * A), 0);
    auto at = [&](std::int64_t s, std::int64_t c, std::int64_t a) -> std::int64_t& {
      return table[static_cast<std::size_t>((s * C + c) * A + a)];
    };
    for (std::int64_t s = 1; s < S; ++s)
      for (std::int64_t c = 1; c < C; ++c) {
        std::int64_t row = 0;
        for (std::int64_t a = 1; a < A; ++a) {
          row += v.mask[static_cast<std::size_t>(v.index(s - 1, c - 1, a - 1))];
          at(s, c, a) = row + at(s - 1, c, a) + at(s, c - 1, a) - at(s - 1, c - 1, a);
        }
      }
  }

  std::int64_t box_sum(const std::array<std::int64_t, 3>& origin, std::int64_t size) const {
    const std::int64_t C = shape[1] + 1, A = shape[2] + 1;
    auto at = [&](std::int64_t s, std::int64_t c, std::int64_t a) {
      return table[static_cast<std::size_t>((s * C + c) * A + a)];
    };
    const std::int64_t s0 = origin[0], c0 = origin[1], a0 = origin[2];
    const std::int64_t s1 = s0 + size, c1 = c0 + size, a1 = a0 + size;
    return at(s1, c1, a1) - at(s0, c1, a1) - at(s1, c0, a1) - at(s1, c1, a0) +
           at(s0, c0, a1) + at(s0, c1, a0) + at(s1, c0, a0) - at(s0, c0, a0);
  }
};

}  // namespace

std::vector<Patch> sample_labeled_patches(const std::vector<Volume>& volumes,
                                          std::int64_t patch_size, std::int64_t n_per_class,
                                          std::uint64_t rng_seed, std::int64_t attempt_budget) {
  if (volumes.empty()) throw MissingData("no volumes to sample from");
  if (n_per_class <= 0 || patch_size <= 0)
    throw InvalidConfig("n_per_class and patch_size must be positive");
  for (const Volume& v : volumes) {
    if (!v.has_mask()) throw MissingData("volume " + v.subject_id + " carries no mask");
    for (int k = 0; k < 3; ++k)
      if (v.shape[k] < patch_size)
        throw VolumeTooSmall("volume " + v.subject_id + " is smaller than the patch size");
  }

  std::vector<MaskIntegral> integrals;
  integrals.reserve(volumes.size());
  for (const Volume& v : volumes) integrals.emplace_back(v);

  Rng rng(rng_seed);
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(2 * n_per_class));
  for (const int wanted : {1, 0}) {
    std::int64_t found = 0, attempts = 0;
    while (found < n_per_class) {
      if (attempts >= attempt_budget) throw ClassExhausted(wanted, attempts);
      ++attempts;
      const auto vi = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(volumes.size()) - 1));
      const Volume& v = volumes[vi];
      std::array<std::int64_t, 3> origin;
      for (int k = 0; k < 3; ++k) origin[k] = rng.uniform_int(0, v.shape[k] - patch_size);
      const int label = integrals[vi].box_sum(origin, patch_size) > 0 ? 1 : 0;
      if (label != wanted) continue;
      out.push_back(extract_patch(v, origin, patch_size));
      out.back().label = label;
      ++found;
    }
  }
  return out;
}

}  // namespace isilab
