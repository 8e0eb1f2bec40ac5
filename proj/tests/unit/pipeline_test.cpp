#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stillness/osc.hpp"
#include "stillness/pipeline.hpp"
#include "stillness/scenario.hpp"

using namespace stillness;
using namespace stillness::pipeline;
using session::SessionRecord;

namespace {

scenario::Scenario two_poses(double seconds = 40.0) {
  scenario::Pose a, b;
  a.duration_s = b.duration_s = seconds;
  a.orientation = {0.0, 0.3, -1.0};
  b.orientation = {1.0, -0.4, 2.0};
  a.tension = {0.8, 0.1, 0, 0, 0, 0, 0, 0};
  b.tension = {0, 0, 0, 0, 0, 0, 0.1, 0.8};
  a.micromotion_amp = b.micromotion_amp = 1.0;
  scenario::Scenario s;
  s.performers = {{{a, b}}};
  return s;
}

struct Run {
  std::vector<Tick> ticks;
  Summary summary;
  synth::AudioBlock audio;
  osc::Bytes osc;
};

Run run_log(const std::vector<SessionRecord>& log, PipelineConfig cfg = {}) {
  Run r;
  osc::CaptureSink sink;
  PerformerPipeline p(cfg, &sink);
  p.on_tick = [&](const Tick& t) { r.ticks.push_back(t); };
  session::VectorSource src(log);
  run(src, p);
  r.summary = p.summary();
  r.audio = p.take_audio();
  r.osc = sink.stream();
  return r;
}

}  // namespace

TEST(Pipeline, CountsAndOscPerTick) {
  const auto log = scenario::generate_scenario(two_poses(), 1)[0];
  const auto r = run_log(log);
  EXPECT_EQ(r.summary.records, log.size());
  EXPECT_EQ(r.summary.imu_frames, 4000u);
  EXPECT_EQ(r.summary.emg_frames, 16000u);
  EXPECT_EQ(r.summary.meta_records, 1u);
  EXPECT_EQ(r.ticks.size(), r.summary.imu_frames);
  EXPECT_EQ(r.summary.osc_messages, 7 * r.summary.imu_frames);
  const auto packets = oracle::split_osc_stream(r.osc);
  ASSERT_TRUE(packets);
  EXPECT_EQ(packets->size(), r.summary.osc_messages);
  for (const auto& pk : *packets) ASSERT_TRUE(oracle::decode_osc(pk));
}

TEST(Pipeline, AudioSpansLog) {
  const auto log = scenario::generate_scenario(two_poses(5.0), 1)[0];
  const auto r = run_log(log);
  const double span_s = double(log.back().t_us - log.front().t_us) * 1e-6;
  EXPECT_NEAR(double(r.audio.samples.size()), span_s * 44100.0, 256.0);
}

TEST(Pipeline, GateMutesOnTransitionAndRecovers) {
  const auto r = run_log(scenario::generate_scenario(two_poses(), 4)[0]);
  EXPECT_EQ(r.summary.gate_mutes, 1u);
  bool full_before = false, muted_at_onset = false, full_after = false;
  for (const auto& t : r.ticks) {
    if (t.t_us < 40'000'000 && t.params.master_gain == 1.0) full_before = true;
    if (t.t_us == 40'000'000 || t.t_us == 40'020'000) muted_at_onset |= t.muted;
    if (t.t_us > 42'000'000 && t.params.master_gain == 1.0) full_after = true;
  }
  EXPECT_TRUE(full_before);
  EXPECT_TRUE(muted_at_onset);
  EXPECT_TRUE(full_after);
  EXPECT_GT(r.summary.still_s, 70.0);
}

TEST(Pipeline, Deterministic) {
  const auto log = scenario::generate_scenario(two_poses(8.0), 2)[0];
  const auto a = run_log(log), b = run_log(log);
  EXPECT_EQ(a.osc, b.osc);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
}

TEST(Pipeline, LogConstantsPreferred) {
  auto meta = session::make_meta();
  meta["scales"]["accel"] = 4096.0;
  std::vector<SessionRecord> log{session::meta_record(0, meta)};
  for (int i = 0; i < 100; ++i) {
    log.push_back(session::imu_record(i * 20'000, {{16384, 0, 0, 0}, {0, 0, 4096}, {0, 0, 0}}));
  }
  const auto r = run_log(log);
  EXPECT_NEAR(r.ticks.back().state.accel_mag, 1.0, 1e-12);
  EXPECT_EQ(r.summary.gate_mutes, 0u);

  PipelineConfig cfg;
  cfg.prefer_log_constants = false;
  const auto ignored = run_log(log, cfg);
  EXPECT_NEAR(ignored.ticks.back().state.accel_mag, 2.0, 1e-12);
}

TEST(Pipeline, EnvelopesFollowTension) {
  const auto r = run_log(scenario::generate_scenario(two_poses(10.0), 3)[0]);
  const auto& early = r.ticks[250];  // 5 s into pose 0
  const auto& late = r.ticks[750];   // 5 s into pose 1
  EXPECT_GT(early.params.amps[0], early.params.amps[7]);
  EXPECT_GT(late.params.amps[7], late.params.amps[0]);
}

TEST(Pipeline, NonNormalizedCounted) {
  std::vector<SessionRecord> log{session::imu_record(0, {}), session::imu_record(20'000, {})};
  const auto r = run_log(log);
  EXPECT_EQ(r.summary.non_normalized, 2u);
  EXPECT_EQ(r.ticks.size(), 2u);
}

TEST(Pipeline, NoAudioWhenDisabled) {
  PipelineConfig cfg;
  cfg.render_audio = false;
  const auto r = run_log(scenario::generate_scenario(two_poses(5.0), 1)[0], cfg);
  EXPECT_TRUE(r.audio.samples.empty());
}

TEST(Pipeline, EmptyInput) {
  const auto r = run_log({});
  EXPECT_EQ(r.summary.records, 0u);
  EXPECT_TRUE(r.audio.samples.empty());
  EXPECT_TRUE(r.osc.empty());
}
