#include "stillness/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stillness/error.hpp"

namespace stillness::fusion {

EulerAngles quat_to_euler(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::NonNormalizable, "quaternion has zero or non-finite norm");
  }
  const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;

  EulerAngles e;
  e.roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  e.pitch = std::asin(std::clamp(2.0 * (w * y - x * z), -1.0, 1.0));
  e.yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  // atan2 may return exactly -pi; fold onto the half-open range.
  if (e.roll == -std::numbers::pi) e.roll = std::numbers::pi;
  if (e.yaw == -std::numbers::pi) e.yaw = std::numbers::pi;
  return e;
}

Quaternion euler_to_quat(const EulerAngles& e) {
  const double cr = std::cos(e.roll / 2), sr = std::sin(e.roll / 2);
  const double cp = std::cos(e.pitch / 2), sp = std::sin(e.pitch / 2);
  const double cy = std::cos(e.yaw / 2), sy = std::sin(e.yaw / 2);
  Quaternion q{cr * cp * cy + sr * sp * sy, sr * cp * cy - cr * sp * sy,
               cr * sp * cy + sr * cp * sy, cr * cp * sy - sr * sp * cy};
  if (q.w < 0) q = -q;
  return q;
}

double vector_magnitude(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

double compute_qom(double accel_mag, double gyro_mag, const QomConfig& cfg) {
  const double gyro_norm = gyro_mag / cfg.gyro_full_scale_dps;
  if (cfg.mode == QomMode::raw) return accel_mag + gyro_norm;
  return std::abs(accel_mag - 1.0) + gyro_norm;
}

double ramp_gain(double stillness_s, const GateConfig& cfg) {
  const double t = std::min(1.0, stillness_s / cfg.ramp_seconds);
  if (cfg.ramp_shape == RampShape::equal_power) {
    return t >= 1.0 ? 1.0 : std::sin(0.5 * std::numbers::pi * t);
  }
  return t;
}

MotionState update_gate(MotionState state, double qom, double dt_s, const GateConfig& cfg) {
  if (qom > cfg.threshold) {
    state.stillness_s = 0.0;
    state.master_gain = 0.0;
    return state;
  }
  state.stillness_s += dt_s;
  state.master_gain = ramp_gain(state.stillness_s, cfg);
  return state;
}

double smooth_ema(double prev, double x, double alpha) { return alpha * x + (1.0 - alpha) * prev; }

MotionTracker::MotionTracker(QomConfig qom, GateConfig gate, double nominal_rate_hz)
    : qom_cfg_(qom), gate_cfg_(gate), nominal_dt_s_(1.0 / nominal_rate_hz) {}

const MotionState& MotionTracker::update(const protocol::ImuFrame& frame) {
  try {
    state_.euler = quat_to_euler(frame.quat);
  } catch (const Error&) {
    ++rejected_;
  }
  state_.accel_mag = vector_magnitude(frame.accel);
  state_.gyro_mag = vector_magnitude(frame.gyro);
  state_.gyro_norm = state_.gyro_mag / qom_cfg_.gyro_full_scale_dps;

  const double raw = compute_qom(state_.accel_mag, state_.gyro_mag, qom_cfg_);
  double qom = raw;
  if (gate_cfg_.smoothing) {
    qom = smoothed_ ? smooth_ema(*smoothed_, raw, gate_cfg_.smoothing_alpha) : raw;
    smoothed_ = qom;
  }
  state_.qom = qom;

  // The first frame has no predecessor; charge it one nominal period.
  double dt = nominal_dt_s_;
  if (last_t_ && frame.t_us > *last_t_) dt = static_cast<double>(frame.t_us - *last_t_) * 1e-6;
  last_t_ = frame.t_us;

  state_ = update_gate(state_, qom, dt, gate_cfg_);
  return state_;
}

}  // namespace stillness::fusion
