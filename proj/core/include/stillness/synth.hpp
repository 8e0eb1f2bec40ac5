#pragma once

// Offline renderer standing in for the embedded sound engine: eight sine
// oscillators, a normalized tanh waveshaper, a master gain stage, ensemble
// mixdown and 16-bit PCM WAV output.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "stillness/mapping.hpp"
#include "stillness/types.hpp"

namespace stillness::synth {

struct AudioBlock {
  std::vector<float> samples;  // interleaved when channels > 1
  double sample_rate = 44100.0;
  unsigned channels = 1;

  std::size_t frames() const { return channels ? samples.size() / channels : 0; }
};

class OscillatorBank {
 public:
  explicit OscillatorBank(double sample_rate = 44100.0,
                          const std::array<double, kOscillators>& initial_phases = {});

  /// Renders n samples. Parameters move linearly from those of the previous
  /// call to `params` across the block; the first call holds `params`.
  void render(const mapping::SynthParams& params, std::span<float> out);

  double sample_rate() const { return sample_rate_; }
  const std::array<double, kOscillators>& phases() const { return phases_; }

 private:
  double sample_rate_;
  std::array<double, kOscillators> phases_;
  std::optional<mapping::SynthParams> last_;
  std::vector<double> mix_;
};

AudioBlock render_block(OscillatorBank& bank, const mapping::SynthParams& params, std::size_t n);

/// Normalized tanh: tanh(drive * x) / tanh(drive).
double waveshape(double x, double drive);

/// Samplewise mean of equal-length mono blocks.
/// Throws Error{LengthMismatch} / Error{RateMismatch}.
AudioBlock mix_performers(std::span<const AudioBlock> blocks);

/// Constant-power pan of each performer across the stereo field (first
/// performer hard left, last hard right), divided by the performer count.
AudioBlock mix_performers_stereo(std::span<const AudioBlock> blocks);

/// RIFF/WAVE, 16-bit PCM little-endian; s -> round(s * 32767).
std::vector<std::uint8_t> encode_wav(const AudioBlock& block);
void write_wav(const AudioBlock& block, const std::filesystem::path& path);

}  // namespace stillness::synth
