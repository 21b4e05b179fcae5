#include "isilab/augment.hpp"

#include <algorithm>

#include "isilab/errors.hpp"

namespace isilab {

void validate(const AugmentConfig& config, std::int64_t patch_edge) {
  if (config.dropout_holes < 0) throw InvalidConfig("dropout_holes must be nonnegative");
  for (const auto* range : {&config.fg_cut_range, &config.bg_keep_range}) {
    if (range->lo < 1 || range->lo > range->hi)
      throw InvalidConfig("cube edge ranges must satisfy 1 <= lo <= hi");
    if (range->hi > patch_edge)
      throw InvalidConfig("cube edge ranges must fit inside the patch");
  }
  if (config.shuffle_prob < 0.0 || config.shuffle_prob > 1.0)
    throw InvalidConfig("shuffle_prob must lie in [0,1]");
  if (config.shuffle_block < 1) throw InvalidConfig("shuffle_block must be positive");
}

namespace {

struct Cube {
  std::int64_t o0, o1, o2, edge;
};

Cube draw_cube(std::int64_t patch_edge, const IntInterval& edge_range, Rng& rng) {
  Cube c;
  c.edge = rng.uniform_int(edge_range.lo, edge_range.hi);
  c.o0 = rng.uniform_int(0, patch_edge - c.edge);
  c.o1 = rng.uniform_int(0, patch_edge - c.edge);
  c.o2 = rng.uniform_int(0, patch_edge - c.edge);
  return c;
}

}  // namespace

void coarse_dropout(std::vector<float>& values, std::int64_t patch_edge, DropoutMode mode,
                    const AugmentConfig& config, Rng& rng) {
  validate(config, patch_edge);
  const auto s = patch_edge;
  if (static_cast<std::int64_t>(values.size()) != s * s * s)
    throw ShapeMismatch("patch value count does not match the patch edge");
  const float fill = static_cast<float>(config.fill_value);
  const auto& range =
      mode == DropoutMode::foreground ? config.fg_cut_range : config.bg_keep_range;
  std::vector<Cube> cubes;
  cubes.reserve(static_cast<std::size_t>(config.dropout_holes));
  for (std::int64_t h = 0; h < config.dropout_holes; ++h)
    cubes.push_back(draw_cube(s, range, rng));

  if (mode == DropoutMode::foreground) {
    for (const auto& c : cubes)
      for (std::int64_t i = c.o0; i < c.o0 + c.edge; ++i)
        for (std::int64_t j = c.o1; j < c.o1 + c.edge; ++j)
          std::fill_n(values.begin() + (i * s + j) * s + c.o2, c.edge, fill);
  } else {
    std::vector<std::uint8_t> keep(values.size(), 0);
    for (const auto& c : cubes)
      for (std::int64_t i = c.o0; i < c.o0 + c.edge; ++i)
        for (std::int64_t j = c.o1; j < c.o1 + c.edge; ++j)
          std::fill_n(keep.begin() + (i * s + j) * s + c.o2, c.edge, std::uint8_t{1});
    for (std::size_t v = 0; v < values.size(); ++v)
      if (!keep[v]) values[v] = fill;
  }
}

void coarse_shuffle(std::vector<float>& values, std::int64_t patch_edge,
                    const AugmentConfig& config, Rng& rng) {
  validate(config, patch_edge);
  const auto s = patch_edge;
  if (static_cast<std::int64_t>(values.size()) != s * s * s)
    throw ShapeMismatch("patch value count does not match the patch edge");
  if (rng.uniform() >= config.shuffle_prob) return;

  const auto b = config.shuffle_block;
  std::vector<std::int64_t> cell;
  for (std::int64_t c0 = 0; c0 < s; c0 += b)
    for (std::int64_t c1 = 0; c1 < s; c1 += b)
      for (std::int64_t c2 = 0; c2 < s; c2 += b) {
        cell.clear();
        for (std::int64_t i = c0; i < std::min(c0 + b, s); ++i)
          for (std::int64_t j = c1; j < std::min(c1 + b, s); ++j)
            for (std::int64_t k = c2; k < std::min(c2 + b, s); ++k)
              cell.push_back((i * s + j) * s + k);
        for (std::size_t t = cell.size() - 1; t > 0; --t) {
          const auto other = static_cast<std::size_t>(
              rng.uniform_int(0, static_cast<std::int64_t>(t)));
          std::swap(values[static_cast<std::size_t>(cell[t])],
                    values[static_cast<std::size_t>(cell[other])]);
        }
      }
}

std::vector<float> augment_view(const std::vector<float>& values, std::int64_t patch_edge,
                                const AugmentConfig& config, Rng& rng) {
  std::vector<float> view = values;
  const DropoutMode mode =
      rng.uniform() < 0.5 ? DropoutMode::foreground : DropoutMode::background;
  coarse_dropout(view, patch_edge, mode, config, rng);
  coarse_shuffle(view, patch_edge, config, rng);
  return view;
}

ViewPair make_views(const Patch& patch, const AugmentConfig& config, Rng& rng) {
  ViewPair pair;
  pair.view1 = augment_view(patch.data, patch.size, config, rng);
  pair.view2 = augment_view(patch.data, patch.size, config, rng);
  return pair;
}

}  // namespace isilab
