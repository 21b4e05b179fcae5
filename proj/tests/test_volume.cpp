#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "isilab/errors.hpp"
#include "isilab/rng.hpp"
#include "isilab/volume.hpp"
#include "testutil.hpp"

using namespace isilab;

TEST_CASE("splitmix64 matches the reference first output for state 0") {
  std::uint64_t s = 0;
  CHECK(splitmix64(s) == 0xe220a8397b1dcdafull);
}

TEST_CASE("rng streams are deterministic per seed and distinct across seeds") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff = any_diff || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng uniform_int covers both endpoints and stays in range") {
  Rng rng(7);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.uniform_int(-3, 4);
    REQUIRE(v >= -3);
    REQUIRE(v <= 4);
    saw_lo = saw_lo || v == -3;
    saw_hi = saw_hi || v == 4;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
}

TEST_CASE("rng normal has the requested moments") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 3.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("mix_seed depends on both arguments and their order") {
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(0, 0) != mix_seed(0, 1));
  CHECK(mix_seed(0, 0) != mix_seed(1, 0));
}

static PhantomConfig small_phantom_config() {
  PhantomConfig config;
  config.shape = {24, 20, 28};
  config.n_organs = 4;
  config.lesion_count_range = {1, 3};
  config.lesion_radius_range = {1.5, 3.0};
  config.noise_std = 0.02;
  config.seed = 99;
  return config;
}

TEST_CASE("generate_phantom is bitwise deterministic") {
  const auto config = small_phantom_config();
  const Volume a = generate_phantom(config, 5);
  const Volume b = generate_phantom(config, 5);
  CHECK(a.data == b.data);
  CHECK(a.mask == b.mask);
  CHECK(a.shape == b.shape);
}

TEST_CASE("generate_phantom with an empty lesion range yields an all-zero mask") {
  auto config = small_phantom_config();
  config.lesion_count_range = {0, 0};
  const Volume v = generate_phantom(config, 3);
  REQUIRE(v.has_mask());
  bool all_zero = true;
  for (auto m : v.mask) all_zero = all_zero && m == 0;
  CHECK(all_zero);
}

TEST_CASE("generate_phantom with lesions marks mask voxels and brightens them") {
  const auto config = small_phantom_config();
  const Volume v = generate_phantom(config, 12);
  std::int64_t marked = 0;
  for (auto m : v.mask) marked += m;
  CHECK(marked > 0);
}

TEST_CASE("noise-free jitter-free subjects share one anatomy, matching direct evaluation") {
  auto config = small_phantom_config();
  config.noise_std = 0.0;
  config.organ_jitter = 0.0;
  config.lesion_count_range = {0, 0};
  const Volume a = generate_phantom(config, 1);
  const Volume b = generate_phantom(config, 2);
  CHECK(a.data == b.data);

  // independent oracle: replay the anatomy draws, then evaluate the Gaussian
  // sum directly at every voxel
  const double min_extent = 20.0;
  Rng anatomy(config.seed);
  struct O {
    double cs, cc, ca, sigma, amp;
  };
  std::vector<O> organs;
  for (int i = 0; i < config.n_organs; ++i) {
    O o;
    o.cs = anatomy.uniform(0.15, 0.85) * (config.shape[0] - 1);
    o.cc = anatomy.uniform(0.15, 0.85) * (config.shape[1] - 1);
    o.ca = anatomy.uniform(0.15, 0.85) * (config.shape[2] - 1);
    o.sigma = anatomy.uniform(0.10, 0.22) * min_extent;
    o.amp = anatomy.uniform(0.5, 1.5);
    organs.push_back(o);
  }
  double max_err = 0.0;
  for (std::int64_t s = 0; s < config.shape[0]; ++s)
    for (std::int64_t c = 0; c < config.shape[1]; ++c)
      for (std::int64_t x = 0; x < config.shape[2]; ++x) {
        double expect = 0.0;
        for (const auto& o : organs) {
          const double d2 = (s - o.cs) * (s - o.cs) + (c - o.cc) * (c - o.cc) +
                            (x - o.ca) * (x - o.ca);
          expect += o.amp * std::exp(-d2 / (2.0 * o.sigma * o.sigma));
        }
        max_err = std::max(max_err,
                           std::abs(expect - static_cast<double>(a.at(s, c, x))));
      }
  CHECK(max_err < 1e-5);
}

TEST_CASE("phantom intensity varies with position") {
  auto config = small_phantom_config();
  config.noise_std = 0.0;
  config.lesion_count_range = {0, 0};
  const Volume v = generate_phantom(config, 0);
  float lo = v.data[0], hi = v.data[0];
  for (auto x : v.data) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(hi - lo > 0.1f);
}

TEST_CASE("generate_phantom validates its configuration") {
  auto config = small_phantom_config();
  config.organ_jitter = 0.3;
  CHECK_THROWS_AS(generate_phantom(config, 0), InvalidConfig);
  config = small_phantom_config();
  config.lesion_radius_range = {1.0, 10.0};  // >= min(shape)/4 == 5
  CHECK_THROWS_AS(generate_phantom(config, 0), InvalidConfig);
  config = small_phantom_config();
  config.n_organs = 0;
  CHECK_THROWS_AS(generate_phantom(config, 0), InvalidConfig);
  config = small_phantom_config();
  config.lesion_count_range = {3, 1};
  CHECK_THROWS_AS(generate_phantom(config, 0), InvalidConfig);
}

static Volume volume_from(const std::vector<float>& values) {
  Volume v;
  v.shape = {static_cast<std::int64_t>(values.size()), 1, 1};
  v.subject_id = "t";
  v.data = values;
  return v;
}

TEST_CASE("intensity scaling maps the percentile window onto the target range") {
  std::vector<float> values(101);
  for (int i = 0; i <= 100; ++i) values[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const Volume v = volume_from(values);
  const Volume out = scale_intensity_percentiles(v, 5.0, 95.0, -1.0, 1.0);
  CHECK(out.data[5] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.data[95] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.data[50] == doctest::Approx(0.0).epsilon(1e-12));
  // no clipping: extremes extrapolate past the targets
  CHECK(out.data[0] < -1.0f);
  CHECK(out.data[100] > 1.0f);
}

TEST_CASE("intensity scaling of a constant volume is degenerate") {
  const Volume v = volume_from(std::vector<float>(32, 7.0f));
  CHECK_THROWS_AS(scale_intensity_percentiles(v, 5.0, 95.0, -1.0, 1.0), DegenerateIntensity);
}

TEST_CASE("intensity scaling follows the direct affine formula") {
  const Volume v = volume_from({0.0f, 10.0f, 2.5f});
  const Volume out = scale_intensity_percentiles(v, 0.0, 100.0, -1.0, 1.0);
  CHECK(out.data[2] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("intensity scaling is monotone") {
  Rng rng(5);
  std::vector<float> values(500);
  for (auto& x : values) x = static_cast<float>(rng.normal(0.0, 10.0));
  const Volume out = scale_intensity_percentiles(volume_from(values), 5.0, 95.0, -1.0, 1.0);
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values.size(); j += 7)
      if (values[i] <= values[j]) CHECK(out.data[i] <= out.data[j]);
}

TEST_CASE("intensity scaling rejects a malformed percentile window") {
  const Volume v = volume_from({0.0f, 1.0f, 2.0f});
  CHECK_THROWS_AS(scale_intensity_percentiles(v, 95.0, 5.0, -1.0, 1.0), InvalidConfig);
  CHECK_THROWS_AS(scale_intensity_percentiles(v, -1.0, 95.0, -1.0, 1.0), InvalidConfig);
}

TEST_CASE("percentile interpolates linearly and rejects empty input") {
  CHECK(percentile({1.0f, 2.0f}, 50.0) == doctest::Approx(1.5));
  CHECK(percentile({3.0f, 1.0f, 2.0f}, 0.0) == doctest::Approx(1.0));
  CHECK(percentile({3.0f, 1.0f, 2.0f}, 100.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(percentile({}, 50.0), InvalidConfig);
}

TEST_CASE("crop_foreground finds the bounding box of a corner block") {
  Volume v;
  v.shape = {10, 10, 10};
  v.subject_id = "t";
  v.data.assign(1000, 0.0f);
  for (std::int64_t s = 0; s < 3; ++s)
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t a = 0; a < 3; ++a) v.at(s, c, a) = 1.0f;
  const Volume out = crop_foreground(v);
  CHECK(out.shape == std::array<std::int64_t, 3>{3, 3, 3});
  for (auto x : out.data) CHECK(x == 1.0f);
}

TEST_CASE("crop_foreground of a constant volume is empty at that threshold") {
  Volume v;
  v.shape = {4, 4, 4};
  v.subject_id = "t";
  v.data.assign(64, 2.5f);
  CHECK_THROWS_AS(crop_foreground(v, 2.5), EmptyForeground);
  CHECK_THROWS_AS(crop_foreground(v), EmptyForeground);
}

TEST_CASE("crop_foreground spans disjoint blocks at opposite corners") {
  Volume v;
  v.shape = {8, 9, 10};
  v.subject_id = "t";
  v.data.assign(static_cast<std::size_t>(v.voxel_count()), 0.0f);
  v.at(0, 0, 0) = 1.0f;
  v.at(7, 8, 9) = 1.0f;
  const Volume out = crop_foreground(v);
  CHECK(out.shape == v.shape);
}

TEST_CASE("crop_foreground keeps the mask aligned with the data") {
  auto config = small_phantom_config();
  config.lesion_count_range = {2, 2};
  Volume v = generate_phantom(config, 4);
  const Volume out = crop_foreground(v, -1.0);  // everything is foreground
  CHECK(out.shape == v.shape);
  CHECK(out.mask == v.mask);
}

TEST_CASE("crop_foreground is idempotent for a fixed threshold") {
  const auto config = small_phantom_config();
  const Volume v = generate_phantom(config, 8);
  const double threshold = 0.05;
  const Volume once = crop_foreground(v, threshold);
  const Volume twice = crop_foreground(once, threshold);
  CHECK(once.shape == twice.shape);
  CHECK(once.data == twice.data);
  CHECK(once.mask == twice.mask);
}

TEST_CASE("volume round trip preserves every field exactly") {
  testutil::TempDir dir("isilab_volume");
  const auto config = small_phantom_config();
  const Volume v = generate_phantom(config, 21);
  const auto path = dir.file("phantom.vol");
  write_volume(v, path);
  const Volume r = read_volume(path);
  CHECK(r.shape == v.shape);
  CHECK(r.spacing == v.spacing);
  CHECK(r.subject_id == v.subject_id);
  CHECK(r.data == v.data);
  CHECK(r.mask == v.mask);
}

TEST_CASE("volume round trip without a mask stays maskless") {
  testutil::TempDir dir("isilab_volume");
  Volume v = volume_from({1.0f, 2.0f, 3.0f});
  const auto path = dir.file("tiny.vol");
  write_volume(v, path);
  const Volume r = read_volume(path);
  CHECK_FALSE(r.has_mask());
  CHECK(r.data == v.data);
}

TEST_CASE("reading a truncated payload fails") {
  testutil::TempDir dir("isilab_volume");
  const Volume v = generate_phantom(small_phantom_config(), 2);
  const auto path = dir.file("trunc.vol");
  write_volume(v, path);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 17);
  CHECK_THROWS_AS(read_volume(path), TruncatedData);
}

TEST_CASE("reading a malformed header fails") {
  testutil::TempDir dir("isilab_volume");
  const auto path = dir.file("bad.vol");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not json at all\n";
  }
  CHECK_THROWS_AS(read_volume(path), FormatError);
}

TEST_CASE("reading a header with missing fields fails") {
  testutil::TempDir dir("isilab_volume");
  const auto path = dir.file("missing.vol");
  {
    std::ofstream out(path, std::ios::binary);
    out << "{\"dtype\":\"f32le\"}\n";
  }
  CHECK_THROWS_AS(read_volume(path), FormatError);
}

TEST_CASE("reading a file with trailing bytes fails") {
  testutil::TempDir dir("isilab_volume");
  Volume v = volume_from({1.0f, 2.0f});
  const auto path = dir.file("trail.vol");
  write_volume(v, path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "xx";
  }
  CHECK_THROWS_AS(read_volume(path), FormatError);
}

TEST_CASE("reading a nonexistent file fails") {
  CHECK_THROWS_AS(read_volume("/nonexistent/path/volume.vol"), IoError);
}
