#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace isilab {

// 3D scalar grid; axes ordered (sagittal, coronal, axial) with sagittal-major
// storage: index (s, c, a) lives at (s * shape[1] + c) * shape[2] + a.
struct Volume {
  std::array<std::int64_t, 3> shape{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::string subject_id;
  std::vector<float> data;
  std::vector<std::uint8_t> mask;  // empty when the volume carries no labels

  std::int64_t voxel_count() const { return shape[0] * shape[1] * shape[2]; }
  bool has_mask() const { return !mask.empty(); }

  std::int64_t index(std::int64_t s, std::int64_t c, std::int64_t a) const {
    return (s * shape[1] + c) * shape[2] + a;
  }
  float& at(std::int64_t s, std::int64_t c, std::int64_t a) { return data[index(s, c, a)]; }
  float at(std::int64_t s, std::int64_t c, std::int64_t a) const { return data[index(s, c, a)]; }
};

struct IntInterval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

struct RealInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct PhantomConfig {
  std::array<std::int64_t, 3> shape{64, 64, 64};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::int64_t n_organs = 6;
  double organ_jitter = 0.05;        // fraction of shape
  IntInterval lesion_count_range{2, 5};
  RealInterval lesion_radius_range{2.5, 5.5};  // voxels
  double noise_std = 0.05;
  std::uint64_t seed = 0;
};

void validate(const PhantomConfig& config);

// Sum of Gaussian organs at canonical per-anatomy positions (from
// config.seed), jittered per subject, plus noise and optional bright
// spherical lesions recorded in the mask.
Volume generate_phantom(const PhantomConfig& config, std::uint64_t subject_seed);

// Affine map sending the p_lo percentile to t_lo and the p_hi percentile to
// t_hi; values outside the window extrapolate linearly (no clipping).
Volume scale_intensity_percentiles(const Volume& v, double p_lo, double p_hi, double t_lo,
                                   double t_hi);

// Minimal bounding box of voxels strictly above threshold.
Volume crop_foreground(const Volume& v, double threshold);
Volume crop_foreground(const Volume& v);  // threshold = minimum voxel value

void write_volume(const Volume& v, const std::string& path);
Volume read_volume(const std::string& path);

// linear-interpolation quantile of the voxel values, p in [0, 100]
double percentile(const std::vector<float>& values, double p);

}  // namespace isilab
