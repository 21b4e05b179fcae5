#include "isilab/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "isilab/errors.hpp"
#include "isilab/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "volume payload is little-endian; big-endian hosts are unsupported");

namespace isilab {

void validate(const PhantomConfig& config) {
  for (int k = 0; k < 3; ++k) {
    if (config.shape[k] <= 0) throw InvalidConfig("phantom shape must be positive");
    if (!(config.spacing[k] > 0.0)) throw InvalidConfig("phantom spacing must be positive");
  }
  if (config.n_organs < 1) throw InvalidConfig("phantom needs at least one organ");
  if (!(config.organ_jitter >= 0.0 && config.organ_jitter <= 0.2))
    throw InvalidConfig("organ_jitter must lie in [0, 0.2]");
  if (!(config.noise_std >= 0.0)) throw InvalidConfig("noise_std must be nonnegative");
  if (config.lesion_count_range.lo < 0 ||
      config.lesion_count_range.lo > config.lesion_count_range.hi)
    throw InvalidConfig("lesion_count_range must satisfy 0 <= lo <= hi");
  const double min_extent =
      static_cast<double>(std::min({config.shape[0], config.shape[1], config.shape[2]}));
  if (!(config.lesion_radius_range.lo > 0.0) ||
      config.lesion_radius_range.lo > config.lesion_radius_range.hi ||
      !(config.lesion_radius_range.hi < min_extent / 4.0))
    throw InvalidConfig("lesion_radius_range must satisfy 0 < lo <= hi < min(shape)/4");
}

namespace {

struct Organ {
  std::array<double, 3> center;
  double sigma;
  double amplitude;
};

}  // namespace

Volume generate_phantom(const PhantomConfig& config, std::uint64_t subject_seed) {
  validate(config);
  const auto& shape = config.shape;
  const double min_extent = static_cast<double>(std::min({shape[0], shape[1], shape[2]}));

  // Canonical anatomy is shared across subjects: it depends only on config.seed.
  Rng anatomy(config.seed);
  std::vector<Organ> organs(static_cast<std::size_t>(config.n_organs));
  for (auto& organ : organs) {
    for (int k = 0; k < 3; ++k)
      organ.center[k] = anatomy.uniform(0.15, 0.85) * static_cast<double>(shape[k] - 1);
    organ.sigma = anatomy.uniform(0.10, 0.22) * min_extent;
    organ.amplitude = anatomy.uniform(0.5, 1.5);
  }

  Rng subject(mix_seed(config.seed, subject_seed));
  for (auto& organ : organs)
    for (int k = 0; k < 3; ++k)
      organ.center[k] +=
          subject.uniform(-1.0, 1.0) * config.organ_jitter * static_cast<double>(shape[k]);

  Volume v;
  v.shape = shape;
  v.spacing = config.spacing;
  v.subject_id = "subject_" + std::to_string(subject_seed);
  v.data.assign(static_cast<std::size_t>(v.voxel_count()), 0.0f);
  v.mask.assign(static_cast<std::size_t>(v.voxel_count()), 0);

  // Separable evaluation: one 1D Gaussian table per organ and axis.
  std::vector<double> field(static_cast<std::size_t>(v.voxel_count()), 0.0);
  std::vector<double> gs, gc, ga;
  for (const auto& organ : organs) {
    const double inv2s2 = 1.0 / (2.0 * organ.sigma * organ.sigma);
    auto table = [&](std::vector<double>& g, int axis) {
      g.resize(static_cast<std::size_t>(shape[axis]));
      for (std::int64_t i = 0; i < shape[axis]; ++i) {
        const double d = static_cast<double>(i) - organ.center[axis];
        g[static_cast<std::size_t>(i)] = std::exp(-d * d * inv2s2);
      }
    };
    table(gs, 0);
    table(gc, 1);
    table(ga, 2);
    std::size_t idx = 0;
    for (std::int64_t s = 0; s < shape[0]; ++s)
      for (std::int64_t c = 0; c < shape[1]; ++c) {
        const double sc = organ.amplitude * gs[static_cast<std::size_t>(s)] *
                          gc[static_cast<std::size_t>(c)];
        for (std::int64_t a = 0; a < shape[2]; ++a) field[idx++] += sc * ga[static_cast<std::size_t>(a)];
      }
  }

  if (config.noise_std > 0.0)
    for (auto& x : field) x += subject.normal(0.0, config.noise_std);

  double max_amplitude = 0.0;
  for (const auto& organ : organs) max_amplitude = std::max(max_amplitude, organ.amplitude);

  const std::int64_t n_lesions =
      subject.uniform_int(config.lesion_count_range.lo, config.lesion_count_range.hi);
  for (std::int64_t l = 0; l < n_lesions; ++l) {
    std::array<double, 3> center;
    for (int k = 0; k < 3; ++k)
      center[k] = subject.uniform(0.0, static_cast<double>(shape[k] - 1));
    const double radius =
        subject.uniform(config.lesion_radius_range.lo, config.lesion_radius_range.hi);
    const double r2 = radius * radius;
    std::array<std::int64_t, 3> lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(center[k] - radius)));
      hi[k] = std::min<std::int64_t>(shape[k] - 1,
                                     static_cast<std::int64_t>(std::floor(center[k] + radius)));
    }
    for (std::int64_t s = lo[0]; s <= hi[0]; ++s)
      for (std::int64_t c = lo[1]; c <= hi[1]; ++c)
        for (std::int64_t a = lo[2]; a <= hi[2]; ++a) {
          const double ds = static_cast<double>(s) - center[0];
          const double dc = static_cast<double>(c) - center[1];
          const double da = static_cast<double>(a) - center[2];
          if (ds * ds + dc * dc + da * da <= r2) {
            const std::size_t i = static_cast<std::size_t>(v.index(s, c, a));
            field[i] += 0.5 * max_amplitude;
            v.mask[i] = 1;
          }
        }
  }

  for (std::size_t i = 0; i < field.size(); ++i) v.data[i] = static_cast<float>(field[i]);
  return v;
}

double percentile(const std::vector<float>& values, double p) {
  if (values.empty()) throw InvalidConfig("percentile of an empty value set");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidConfig("percentile must lie in [0, 100]");
  std::vector<float> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return static_cast<double>(sorted[lo]) * (1.0 - frac) + static_cast<double>(sorted[lo + 1]) * frac;
}

Volume scale_intensity_percentiles(const Volume& v, double p_lo, double p_hi, double t_lo,
                                   double t_hi) {
  if (!(p_lo >= 0.0 && p_lo < p_hi && p_hi <= 100.0))
    throw InvalidConfig("percentile window must satisfy 0 <= p_lo < p_hi <= 100");
  const double q_lo = percentile(v.data, p_lo);
  const double q_hi = percentile(v.data, p_hi);
  if (q_lo == q_hi) throw DegenerateIntensity("percentile window has zero width");
  const double scale = (t_hi - t_lo) / (q_hi - q_lo);
  Volume out = v;
  for (auto& x : out.data)
    x = static_cast<float>(t_lo + (static_cast<double>(x) - q_lo) * scale);
  return out;
}

Volume crop_foreground(const Volume& v, double threshold) {
  std::array<std::int64_t, 3> lo{v.shape[0], v.shape[1], v.shape[2]};
  std::array<std::int64_t, 3> hi{-1, -1, -1};
  std::size_t idx = 0;
  for (std::int64_t s = 0; s < v.shape[0]; ++s)
    for (std::int64_t c = 0; c < v.shape[1]; ++c)
      for (std::int64_t a = 0; a < v.shape[2]; ++a, ++idx)
        if (static_cast<double>(v.data[idx]) > threshold) {
          lo[0] = std::min(lo[0], s);
          lo[1] = std::min(lo[1], c);
          lo[2] = std::min(lo[2], a);
          hi[0] = std::max(hi[0], s);
          hi[1] = std::max(hi[1], c);
          hi[2] = std::max(hi[2], a);
        }
  if (hi[0] < 0) throw EmptyForeground("no voxel exceeds the crop threshold");

  Volume out;
  out.shape = {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  out.spacing = v.spacing;
  out.subject_id = v.subject_id;
  out.data.resize(static_cast<std::size_t>(out.voxel_count()));
  if (v.has_mask()) out.mask.resize(static_cast<std::size_t>(out.voxel_count()));
  for (std::int64_t s = 0; s < out.shape[0]; ++s)
    for (std::int64_t c = 0; c < out.shape[1]; ++c) {
      const std::int64_t src = v.index(s + lo[0], c + lo[1], lo[2]);
      const std::int64_t dst = out.index(s, c, 0);
      std::copy_n(v.data.begin() + src, out.shape[2], out.data.begin() + dst);
      if (v.has_mask()) std::copy_n(v.mask.begin() + src, out.shape[2], out.mask.begin() + dst);
    }
  return out;
}

Volume crop_foreground(const Volume& v) {
  if (v.data.empty()) throw EmptyForeground("volume has no voxels");
  const float m = *std::min_element(v.data.begin(), v.data.end());
  return crop_foreground(v, static_cast<double>(m));
}

void write_volume(const Volume& v, const std::string& path) {
  nlohmann::json header;
  header["dtype"] = "f32le";
  header["has_mask"] = v.has_mask();
  header["shape"] = v.shape;
  header["spacing"] = v.spacing;
  header["subject_id"] = v.subject_id;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(v.data.data()),
            static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  if (v.has_mask())
    out.write(reinterpret_cast<const char*>(v.mask.data()),
              static_cast<std::streamsize>(v.mask.size()));
  if (!out) throw IoError("write failed: " + path);
}

Volume read_volume(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing volume header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed volume header: ") + e.what());
  }

  Volume v;
  try {
    if (header.at("dtype").get<std::string>() != "f32le")
      throw FormatError("unsupported dtype in volume header");
    const auto shape = header.at("shape").get<std::vector<std::int64_t>>();
    const auto spacing = header.at("spacing").get<std::vector<double>>();
    if (shape.size() != 3 || spacing.size() != 3)
      throw FormatError("volume header shape/spacing must have 3 entries");
    std::copy(shape.begin(), shape.end(), v.shape.begin());
    std::copy(spacing.begin(), spacing.end(), v.spacing.begin());
    v.subject_id = header.at("subject_id").get<std::string>();
    for (int k = 0; k < 3; ++k) {
      if (v.shape[k] <= 0) throw FormatError("volume header shape must be positive");
      if (!(v.spacing[k] > 0.0)) throw FormatError("volume header spacing must be positive");
    }
    const bool has_mask = header.at("has_mask").get<bool>();
    v.data.resize(static_cast<std::size_t>(v.voxel_count()));
    if (has_mask) v.mask.resize(static_cast<std::size_t>(v.voxel_count()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed volume header: ") + e.what());
  }

  in.read(reinterpret_cast<char*>(v.data.data()),
          static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != v.data.size() * sizeof(float))
    throw TruncatedData("volume payload shorter than header promises");
  if (v.has_mask()) {
    in.read(reinterpret_cast<char*>(v.mask.data()), static_cast<std::streamsize>(v.mask.size()));
    if (static_cast<std::size_t>(in.gcount()) != v.mask.size())
      throw TruncatedData("volume mask shorter than header promises");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("volume file has trailing bytes");
  return v;
}

}  // namespace isilab
