#pragma once

// Orientation and motion features from fused IMU frames, plus the inverse
// "stillness" gate: any motion above threshold mutes, and sound returns
// along a ramp while the performer stays still.

#include <optional>

#include "stillness/protocol.hpp"
#include "stillness/types.hpp"

namespace stillness::fusion {

/// Intrinsic Z-Y'-X'' (yaw, then pitch, then roll), radians.
/// roll and yaw in (-pi, pi], pitch in [-pi/2, pi/2].
struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
};

/// Throws Error{NonNormalizable} for a zero (or non-finite) quaternion; any
/// other input is renormalized first.
EulerAngles quat_to_euler(const Quaternion& q);

/// Inverse of quat_to_euler (w >= 0 representative).
Quaternion euler_to_quat(const EulerAngles& e);

double vector_magnitude(const Vec3& v);

enum class QomMode { raw, gravity_compensated };

struct QomConfig {
  QomMode mode = QomMode::gravity_compensated;
  double gyro_full_scale_dps = 500.0;
};

/// accel_mag in g, gyro_mag in deg/s.
double compute_qom(double accel_mag, double gyro_mag, const QomConfig& cfg = {});

enum class RampShape { linear, equal_power };

struct GateConfig {
  double threshold = 0.35;
  double ramp_seconds = 30.0;
  RampShape ramp_shape = RampShape::linear;
  bool smoothing = true;
  double smoothing_alpha = 0.2;
};

struct MotionState {
  EulerAngles euler;
  double accel_mag = 0.0;  // g
  double gyro_mag = 0.0;   // deg/s
  double gyro_norm = 0.0;  // gyro_mag / full scale
  double qom = 0.0;        // after smoothing, as compared against the threshold
  double stillness_s = 0.0;
  double master_gain = 0.0;
};

/// Gain as a function of accumulated stillness.
double ramp_gain(double stillness_s, const GateConfig& cfg);

MotionState update_gate(MotionState state, double qom, double dt_s, const GateConfig& cfg = {});

double smooth_ema(double prev, double x, double alpha);

/// Per-performer stream state: feeds ImuFrames through orientation,
/// magnitudes, smoothing and the gate. Time comes only from frame stamps.
class MotionTracker {
 public:
  MotionTracker(QomConfig qom = {}, GateConfig gate = {}, double nominal_rate_hz = 50.0);

  const MotionState& update(const protocol::ImuFrame& frame);

  const MotionState& state() const { return state_; }
  /// Frames whose quaternion could not be normalized; orientation was held.
  std::size_t rejected_orientations() const { return rejected_; }

 private:
  QomConfig qom_cfg_;
  GateConfig gate_cfg_;
  double nominal_dt_s_;
  MotionState state_;
  std::optional<TimestampUs> last_t_;
  std::optional<double> smoothed_;
  std::size_t rejected_ = 0;
};

}  // namespace stillness::fusion
