#pragma once

// Gesture-to-sound mapping: one EMG envelope per oscillator amplitude,
// pitch -> base frequency, yaw -> partial spread, roll -> distortion drive,
// and the stillness gate -> master gain.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "stillness/fusion.hpp"
#include "stillness/protocol.hpp"
#include "stillness/types.hpp"

namespace stillness::mapping {

struct EmgEnvelopes {
  std::array<double, kEmgChannels> env{};
};

struct SynthParams {
  std::array<double, kOscillators> freqs{};
  std::array<double, kOscillators> amps{};
  double drive = 1.0;
  double master_gain = 0.0;

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

struct MapConfig {
  double f_lo = 110.0;
  double f_hi = 880.0;
  double spread_max = 0.5;
  double drive_max = 8.0;
  double rms_window_s = 0.04;

  /// Throws Error{InvalidConfig} when the invariants do not hold.
  void validate() const;
};

/// Number of EMG samples in the RMS window at the given sample rate.
std::size_t envelope_window(const MapConfig& cfg, double emg_rate_hz);

/// Moving RMS over the last `envelope_window` frames of `history` (oldest
/// first), normalized by 128 and clamped to [0, 1]. Short histories are
/// zero-padded.
EmgEnvelopes emg_envelope(std::span<const protocol::EmgFrame> history, const MapConfig& cfg = {},
                          double emg_rate_hz = 200.0);

/// Running version of emg_envelope with a fixed-size ring buffer.
class EnvelopeFollower {
 public:
  explicit EnvelopeFollower(const MapConfig& cfg = {}, double emg_rate_hz = 200.0);

  void push(const protocol::EmgFrame& frame);
  EmgEnvelopes envelopes() const;

 private:
  std::size_t window_;
  std::vector<protocol::EmgFrame> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

struct OrientationControls {
  double base_freq = 0.0;
  double spread = 0.0;
  double drive = 1.0;
};

OrientationControls map_orientation(const fusion::EulerAngles& euler, const MapConfig& cfg = {});

struct AssembledParams {
  SynthParams params;
  /// Partials pulled down to 0.45 x sample rate.
  std::size_t clamped = 0;
};

/// freqs[k] = base * (1 + k * spread); partials at or above Nyquist are
/// clamped rather than rejected.
AssembledParams assemble_params(const EmgEnvelopes& env, const OrientationControls& controls,
                                double master_gain, double sample_rate = 44100.0);

}  // namespace stillness::mapping
