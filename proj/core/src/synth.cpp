#include "stillness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "stillness/error.hpp"

namespace stillness::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double lerp(double a, double b, double t) { return a + (b - a) * t; }

void check_compatible(std::span<const AudioBlock> blocks) {
  for (const auto& b : blocks) {
    if (b.channels != 1) throw Error(ErrorKind::LengthMismatch, "mixdown expects mono blocks");
    if (b.sample_rate != blocks.front().sample_rate) {
      throw Error(ErrorKind::RateMismatch, "performer blocks have different sample rates");
    }
    if (b.samples.size() != blocks.front().samples.size()) {
      throw Error(ErrorKind::LengthMismatch, "performer blocks have different lengths");
    }
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

OscillatorBank::OscillatorBank(double sample_rate,
                               const std::array<double, kOscillators>& initial_phases)
    : sample_rate_(sample_rate), phases_(initial_phases) {
  for (auto& p : phases_) {
    p = std::fmod(p, kTwoPi);
    if (p < 0) p += kTwoPi;
  }
}

double waveshape(double x, double drive) { return std::tanh(drive * x) / std::tanh(drive); }

void OscillatorBank::render(const mapping::SynthParams& params, std::span<float> out) {
  const std::size_t n = out.size();
  if (n == 0) return;
  const mapping::SynthParams from = last_.value_or(params);
  const mapping::SynthParams& to = params;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inc_scale = kTwoPi / sample_rate_;

  mix_.assign(n, 0.0);
  for (std::size_t k = 0; k < kOscillators; ++k) {
    double phase = phases_[k];
    const double f0 = from.freqs[k], f1 = to.freqs[k];
    const double a0 = from.amps[k], a1 = to.amps[k];
    const bool silent = a0 == 0.0 && a1 == 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i + 1) * inv_n;
      if (!silent) mix_[i] += lerp(a0, a1, t) * std::sin(phase);
      phase += lerp(f0, f1, t) * inc_scale;
      if (phase >= kTwoPi) phase -= kTwoPi;
    }
    phases_[k] = phase;
  }

  const bool constant_drive = from.drive == to.drive;
  const double fixed_norm = 1.0 / std::tanh(to.drive);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1) * inv_n;
    const double gain = lerp(from.master_gain, to.master_gain, t);
    const double s = mix_[i] / static_cast<double>(kOscillators);
    double shaped;
    if (constant_drive) {
      shaped = std::tanh(to.drive * s) * fixed_norm;
    } else {
      shaped = waveshape(s, lerp(from.drive, to.drive, t));
    }
    out[i] = static_cast<float>(std::clamp(gain * shaped, -1.0, 1.0));
  }
  last_ = params;
}

AudioBlock render_block(OscillatorBank& bank, const mapping::SynthParams& params, std::size_t n) {
  AudioBlock block;
  block.sample_rate = bank.sample_rate();
  block.samples.resize(n);
  bank.render(params, block.samples);
  return block;
}

AudioBlock mix_performers(std::span<const AudioBlock> blocks) {
  if (blocks.empty()) return {};
  check_compatible(blocks);
  AudioBlock out;
  out.sample_rate = blocks.front().sample_rate;
  out.samples.resize(blocks.front().samples.size());
  const double scale = 1.0 / static_cast<double>(blocks.size());
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    double acc = 0.0;
    for (const auto& b : blocks) acc += b.samples[i];
    out.samples[i] = static_cast<float>(acc * scale);
  }
  return out;
}

AudioBlock mix_performers_stereo(std::span<const AudioBlock> blocks) {
  if (blocks.empty()) return {{}, 44100.0, 2};
  check_compatible(blocks);
  AudioBlock out;
  out.sample_rate = blocks.front().sample_rate;
  out.channels = 2;
  const std::size_t n = blocks.front().samples.size();
  out.samples.assign(2 * n, 0.0f);

  const double scale = 1.0 / static_cast<double>(blocks.size());
  std::vector<std::pair<double, double>> pans;
  for (std::size_t p = 0; p < blocks.size(); ++p) {
    const double pos = blocks.size() == 1 ? 0.5 : double(p) / double(blocks.size() - 1);
    const double angle = pos * std::numbers::pi / 2;
    pans.emplace_back(std::cos(angle) * scale, std::sin(angle) * scale);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double l = 0.0, r = 0.0;
    for (std::size_t p = 0; p < blocks.size(); ++p) {
      l += pans[p].first * blocks[p].samples[i];
      r += pans[p].second * blocks[p].samples[i];
    }
    out.samples[2 * i] = static_cast<float>(l);
    out.samples[2 * i + 1] = static_cast<float>(r);
  }
  return out;
}

std::vector<std::uint8_t> encode_wav(const AudioBlock& block) {
  const std::uint16_t channels = static_cast<std::uint16_t>(std::max(1u, block.channels));
  const auto rate = static_cast<std::uint32_t>(std::lround(block.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(block.samples.size() * 2);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * channels * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : block.samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

void write_wav(const AudioBlock& block, const std::filesystem::path& path) {
  const auto bytes = encode_wav(block);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace stillness::synth
