#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace stillness {

/// Microseconds on the stream's own clock. Never the wall clock.
using TimestampUs = std::int64_t;

inline constexpr std::size_t kEmgChannels = 8;
inline constexpr std::size_t kOscillators = 8;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }

  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

}  // namespace stillness
