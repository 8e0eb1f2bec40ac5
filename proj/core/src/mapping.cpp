#include "stillness/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stillness/error.hpp"

namespace stillness::mapping {

void MapConfig::validate() const {
  if (!(f_lo > 0.0 && f_lo < f_hi)) throw Error(ErrorKind::InvalidConfig, "need 0 < f_lo < f_hi");
  if (!(spread_max >= 0.0)) throw Error(ErrorKind::InvalidConfig, "spread_max must be >= 0");
  if (!(drive_max >= 1.0)) throw Error(ErrorKind::InvalidConfig, "drive_max must be >= 1");
  if (!(rms_window_s > 0.0)) throw Error(ErrorKind::InvalidConfig, "rms_window_s must be > 0");
}

std::size_t envelope_window(const MapConfig& cfg, double emg_rate_hz) {
  const auto n = static_cast<std::size_t>(std::lround(cfg.rms_window_s * emg_rate_hz));
  return std::max<std::size_t>(n, 1);
}

namespace {

double normalized_rms(double sum_sq, std::size_t window) {
  return std::clamp(std::sqrt(sum_sq / static_cast<double>(window)) / 128.0, 0.0, 1.0);
}

}  // namespace

EmgEnvelopes emg_envelope(std::span<const protocol::EmgFrame> history, const MapConfig& cfg,
                          double emg_rate_hz) {
  const std::size_t window = envelope_window(cfg, emg_rate_hz);
  const std::size_t take = std::min(window, history.size());
  const auto recent = history.last(take);

  EmgEnvelopes out;
  for (std::size_t ch = 0; ch < kEmgChannels; ++ch) {
    double sum_sq = 0.0;
    for (const auto& f : recent) sum_sq += double(f.channels[ch]) * double(f.channels[ch]);
    out.env[ch] = normalized_rms(sum_sq, window);
  }
  return out;
}

EnvelopeFollower::EnvelopeFollower(const MapConfig& cfg, double emg_rate_hz)
    : window_(envelope_window(cfg, emg_rate_hz)), ring_(window_) {}

void EnvelopeFollower::push(const protocol::EmgFrame& frame) {
  ring_[head_] = frame;
  head_ = (head_ + 1) % window_;
  count_ = std::min(count_ + 1, window_);
}

EmgEnvelopes EnvelopeFollower::envelopes() const {
  // Summed from scratch each time so the result matches emg_envelope
  // exactly; the window is only a handful of samples.
  EmgEnvelopes out;
  for (std::size_t ch = 0; ch < kEmgChannels; ++ch) {
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < count_; ++i) {
      const std::size_t idx = (head_ + window_ - count_ + i) % window_;
      const double v = ring_[idx].channels[ch];
      sum_sq += v * v;
    }
    out.env[ch] = normalized_rms(sum_sq, window_);
  }
  return out;
}

OrientationControls map_orientation(const fusion::EulerAngles& euler, const MapConfig& cfg) {
  constexpr double pi = std::numbers::pi;
  const double pitch = std::clamp(euler.pitch, -pi / 2, pi / 2);
  const double yaw = std::clamp(euler.yaw, -pi, pi);
  const double roll = std::clamp(euler.roll, -pi, pi);

  OrientationControls c;
  const double octaves = std::log2(cfg.f_hi / cfg.f_lo);
  const double pos = (pitch + pi / 2) / pi;
  // Pin the endpoints so they come out exactly f_lo and f_hi.
  if (pos <= 0.0) {
    c.base_freq = cfg.f_lo;
  } else if (pos >= 1.0) {
    c.base_freq = cfg.f_hi;
  } else {
    c.base_freq = cfg.f_lo * std::exp2(pos * octaves);
  }
  c.spread = cfg.spread_max * (yaw + pi) / (2 * pi);
  c.drive = 1.0 + (cfg.drive_max - 1.0) * std::abs(roll) / pi;
  return c;
}

AssembledParams assemble_params(const EmgEnvelopes& env, const OrientationControls& controls,
                                double master_gain, double sample_rate) {
  AssembledParams out;
  const double nyquist = 0.5 * sample_rate;
  const double ceiling = 0.45 * sample_rate;
  for (std::size_t k = 0; k < kOscillators; ++k) {
    double f = controls.base_freq * (1.0 + static_cast<double>(k) * controls.spread);
    if (f >= nyquist) {
      // Keep the fan non-decreasing when an earlier partial sits above the ceiling.
      f = k > 0 ? std::max(ceiling, out.params.freqs[k - 1]) : ceiling;
      ++out.clamped;
    }
    out.params.freqs[k] = f;
    out.params.amps[k] = std::clamp(env.env[k], 0.0, 1.0);
  }
  out.params.drive = std::max(1.0, controls.drive);
  out.params.master_gain = std::clamp(master_gain, 0.0, 1.0);
  return out;
}

}  // namespace stillness::mapping
