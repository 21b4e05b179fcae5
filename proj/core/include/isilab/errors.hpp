#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace isilab {

struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateIntensity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyForeground : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TruncatedData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VolumeTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ClassExhausted : std::runtime_error {
  ClassExhausted(int label, std::int64_t attempts)
      : std::runtime_error("could not sample a patch of class " + std::to_string(label) +
                           " after " + std::to_string(attempts) + " attempts"),
        label(label),
        attempts(attempts) {}
  int label;
  std::int64_t attempts;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GraphCycle : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedOp : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroNormRow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteLoss : std::runtime_error {
  NonFiniteLoss(std::int64_t step, const std::string& what_arg)
      : std::runtime_error("non-finite loss at step " + std::to_string(step) + ": " + what_arg),
        step(step) {}
  std::int64_t step;
};

struct SingleClass : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FoldDegenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroVariance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace isilab
