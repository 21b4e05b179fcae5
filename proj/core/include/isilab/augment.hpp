#pragma once

#include <cstdint>
#include <vector>

#include "isilab/rng.hpp"
#include "isilab/sampling.hpp"
#include "isilab/volume.hpp"

namespace isilab {

struct AugmentConfig {
  std::int64_t dropout_holes = 6;
  IntInterval fg_cut_range{3, 10};   // cutout cube edge, voxels
  IntInterval bg_keep_range{3, 21};  // preserved cube edge, voxels
  double shuffle_prob = 0.8;
  std::int64_t shuffle_block = 4;
  double fill_value = 0.0;
};

void validate(const AugmentConfig& config, std::int64_t patch_edge);

enum class DropoutMode { foreground, background };

// foreground: dropout_holes cubes are filled with fill_value.
// background: dropout_holes cubes survive; everything else is filled.
void coarse_dropout(std::vector<float>& values, std::int64_t patch_edge, DropoutMode mode,
                    const AugmentConfig& config, Rng& rng);

// With probability shuffle_prob, permute voxels within each shuffle_block^3
// cell (partial cells at the high faces shuffle within themselves). The voxel
// multiset is preserved exactly.
void coarse_shuffle(std::vector<float>& values, std::int64_t patch_edge,
                    const AugmentConfig& config, Rng& rng);

// One augmented view: a fair coin picks the dropout mode, then shuffling.
std::vector<float> augment_view(const std::vector<float>& values, std::int64_t patch_edge,
                                const AugmentConfig& config, Rng& rng);

struct ViewPair {
  std::vector<float> view1;
  std::vector<float> view2;
};

// Two independently augmented views of the same source patch, drawn from one
// rng stream (view1 consumes its draws first).
ViewPair make_views(const Patch& patch, const AugmentConfig& config, Rng& rng);

}  // namespace isilab
