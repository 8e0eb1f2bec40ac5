#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stillness/error.hpp"
#include "stillness/synth.hpp"

using namespace stillness;
using namespace stillness::synth;
using mapping::SynthParams;

namespace {

SynthParams single(double freq, double amp = 1.0) {
  SynthParams p;
  p.freqs.fill(freq);
  p.amps[0] = amp;
  p.drive = 1.0;
  p.master_gain = 1.0;
  return p;
}

SynthParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(20, 19000), u(0, 1), d(1, 8);
  SynthParams p;
  for (auto& x : p.freqs) x = f(rng);
  for (auto& x : p.amps) x = u(rng);
  p.drive = d(rng);
  p.master_gain = u(rng);
  return p;
}

}  // namespace

TEST(Render, SilentWhenAmpsZero) {
  OscillatorBank bank;
  auto p = single(440, 0.0);
  const auto b = render_block(bank, p, 512);
  for (float s : b.samples) EXPECT_EQ(s, 0.0f);
}

TEST(Render, SilentWhenGainZero) {
  OscillatorBank bank;
  auto p = single(440);
  p.amps.fill(1.0);
  p.master_gain = 0.0;
  const auto b = render_block(bank, p, 512);
  for (float s : b.samples) EXPECT_EQ(s, 0.0f);
}

TEST(Render, SpectralPeakAt440) {
  OscillatorBank bank;
  const auto b = render_block(bank, single(440), 44100);
  const auto mag = oracle::magnitude_spectrum(b.samples);
  const auto top = oracle::peaks(mag, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_NEAR(double(top[0]), 440.0, 1.0);
  EXPECT_GE(20 * std::log10(mag[top[0]] / oracle::median(mag)), 40.0);
}

TEST(Render, AllPartialsVisible) {
  OscillatorBank bank;
  SynthParams p;
  for (std::size_t k = 0; k < 8; ++k) p.freqs[k] = 200.0 * (1.0 + 0.5 * double(k));
  p.amps.fill(1.0);
  p.drive = 1.0;
  p.master_gain = 1.0;
  const auto b = render_block(bank, p, 44100);
  const auto mag = oracle::magnitude_spectrum(b.samples);
  const double floor = oracle::median(mag);
  for (double f : p.freqs) {
    const auto bin = std::size_t(std::lround(f));
    double best = 0;
    for (std::size_t i = bin - 1; i <= bin + 1; ++i) best = std::max(best, mag[i]);
    EXPECT_GE(20 * std::log10(best / floor), 40.0) << f;
  }
}

TEST(Render, BlocksAreContinuous) {
  const auto p = single(523.25);
  OscillatorBank one, two;
  const auto whole = render_block(one, p, 1024);
  auto a = render_block(two, p, 512);
  const auto b = render_block(two, p, 512);
  a.samples.insert(a.samples.end(), b.samples.begin(), b.samples.end());
  EXPECT_EQ(whole.samples, a.samples);
}

TEST(Render, PhasesWrapped) {
  std::mt19937_64 rng(1);
  OscillatorBank bank(44100.0, {100.0, -3.0, 7.0, 0, 0, 0, 0, 0});
  for (double ph : bank.phases()) {
    EXPECT_GE(ph, 0.0);
    EXPECT_LT(ph, 2 * std::numbers::pi);
  }
  for (int i = 0; i < 50; ++i) {
    render_block(bank, random_params(rng), 333);
    for (double ph : bank.phases()) {
      ASSERT_GE(ph, 0.0);
      ASSERT_LT(ph, 2 * std::numbers::pi);
    }
  }
}

TEST(Render, BoundedAndFinite) {
  std::mt19937_64 rng(2);
  OscillatorBank bank;
  for (int i = 0; i < 100; ++i) {
    const auto b = render_block(bank, random_params(rng), 256);
    for (float s : b.samples) {
      ASSERT_TRUE(std::isfinite(s));
      ASSERT_LE(std::abs(s), 1.0f);
    }
  }
}

TEST(Render, Deterministic) {
  std::mt19937_64 r1(3), r2(3);
  OscillatorBank a, b;
  for (int i = 0; i < 20; ++i) {
    ASSERT_EQ(render_block(a, random_params(r1), 300).samples,
              render_block(b, random_params(r2), 300).samples);
  }
}

TEST(Render, GainRampsAcrossBlock) {
  OscillatorBank bank;
  auto p = single(441);
  p.amps.fill(1.0);
  p.freqs.fill(441);
  p.master_gain = 0.0;
  render_block(bank, p, 100);
  p.master_gain = 1.0;
  const auto b = render_block(bank, p, 100);
  // gain climbs from 0 to 1 over the block instead of stepping
  double peak_first = 0, peak_last = 0;
  for (int i = 0; i < 10; ++i) peak_first = std::max(peak_first, double(std::abs(b.samples[i])));
  for (int i = 90; i < 100; ++i) peak_last = std::max(peak_last, double(std::abs(b.samples[i])));
  EXPECT_LT(peak_first, 0.15);
  EXPECT_GT(peak_last, peak_first);
}

TEST(Waveshape, UnitFixedPointAndOddSymmetry) {
  for (double d : {1.0, 2.0, 8.0}) {
    EXPECT_NEAR(waveshape(1.0, d), 1.0, 1e-15);
    EXPECT_EQ(waveshape(-0.3, d), -waveshape(0.3, d));
  }
}

TEST(Mix, SingleAndIdentical) {
  AudioBlock a{{0.5f, -0.25f, 1.0f}};
  EXPECT_EQ(mix_performers(std::vector{a}).samples, a.samples);
  EXPECT_EQ(mix_performers(std::vector{a, a}).samples, a.samples);
}

TEST(Mix, Cancellation) {
  AudioBlock a{{0.5f, -0.25f, 1.0f}}, b{{-0.5f, 0.25f, -1.0f}};
  for (float s : mix_performers(std::vector{a, b}).samples) EXPECT_EQ(s, 0.0f);
}

TEST(Mix, Mismatches) {
  AudioBlock a{{0.0f, 0.0f}}, b{{0.0f}}, c{{0.0f, 0.0f}, 48000.0};
  EXPECT_THROW(mix_performers(std::vector{a, b}), Error);
  EXPECT_THROW(mix_performers(std::vector{a, c}), Error);
}

TEST(Mix, StereoConstantPower) {
  AudioBlock a{{1.0f}}, b{{1.0f}};
  const auto m = mix_performers_stereo(std::vector{a, b});
  ASSERT_EQ(m.channels, 2u);
  ASSERT_EQ(m.samples.size(), 2u);
  // first performer hard left, second hard right, each halved
  EXPECT_NEAR(m.samples[0], 0.5f, 1e-7);
  EXPECT_NEAR(m.samples[1], 0.5f, 1e-7);
}

TEST(Wav, FourZeroSamples) {
  const auto bytes = encode_wav(AudioBlock{std::vector<float>(4, 0.0f)});
  ASSERT_EQ(bytes.size(), 52u);
  const auto w = oracle::read_wav(bytes);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->format, 1);
  EXPECT_EQ(w->channels, 1);
  EXPECT_EQ(w->sample_rate, 44100u);
  EXPECT_EQ(w->bits, 16);
  EXPECT_EQ(w->data_size, 8u);
  for (auto s : w->samples) EXPECT_EQ(s, 0);
}

TEST(Wav, FullScale) {
  const auto bytes = encode_wav(AudioBlock{{1.0f, -1.0f, 0.5f}});
  EXPECT_EQ(bytes[44], 0xff);
  EXPECT_EQ(bytes[45], 0x7f);
  const auto w = oracle::read_wav(bytes);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->samples, (std::vector<std::int16_t>{32767, -32767, 16384}));
}

TEST(Wav, EmptyBlockHeaderOnly) {
  oracle::TempDir dir;
  write_wav(AudioBlock{}, dir / "e.wav");
  const auto bytes = oracle::read_file(dir / "e.wav");
  ASSERT_EQ(bytes.size(), 44u);
  const auto w = oracle::read_wav(bytes);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->data_size, 0u);
}

TEST(Wav, StereoHeader) {
  AudioBlock b{{0.1f, 0.2f}, 48000.0, 2};
  const auto w = oracle::read_wav(encode_wav(b));
  ASSERT_TRUE(w);
  EXPECT_EQ(w->channels, 2);
  EXPECT_EQ(w->sample_rate, 48000u);
}

TEST(Wav, UnwritablePath) {
  EXPECT_THROW(write_wav(AudioBlock{}, "/nonexistent-dir/x.wav"), Error);
}
