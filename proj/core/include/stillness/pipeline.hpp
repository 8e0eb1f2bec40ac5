#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "stillness/fusion.hpp"
#include "stillness/mapping.hpp"
#include "stillness/osc.hpp"
#include "stillness/protocol.hpp"
#include "stillness/session.hpp"
#include "stillness/synth.hpp"

namespace stillness::pipeline {

struct PipelineConfig {
  protocol::ProtocolConfig protocol;
  mapping::MapConfig map;
  fusion::GateConfig gate;
  fusion::QomConfig qom;
  double sample_rate = 44100.0;
  std::size_t block_size = 256;
  int performer_id = 0;
  bool render_audio = true;
  /// Scale constants from a log's meta record replace protocol.constants.
  bool prefer_log_constants = true;
};

/// One control tick, produced for every IMU frame.
struct Tick {
  TimestampUs t_us = 0;
  fusion::MotionState state;
  mapping::EmgEnvelopes env;
  mapping::SynthParams params;
  bool muted = false;  // qom above threshold on this tick
};

struct Summary {
  std::size_t records = 0;
  std::size_t imu_frames = 0;
  std::size_t emg_frames = 0;
  std::size_t meta_records = 0;
  std::size_t gate_mutes = 0;  // transitions into the muted state
  std::size_t clamped_partials = 0;
  std::size_t non_normalized = 0;
  std::size_t osc_messages = 0;
  double still_s = 0.0;
  std::optional<TimestampUs> first_t_us;
  TimestampUs last_t_us = 0;
};

/// Single-performer chain: raw records in, OSC packets and audio out.
/// Audio time zero is the first record's timestamp; a tick's parameters
/// become the target of every audio block rendered after it.
class PerformerPipeline {
 public:
  explicit PerformerPipeline(PipelineConfig cfg, osc::PacketSink* osc = nullptr);

  void process(const session::SessionRecord& record);
  void process(const protocol::ImuFrame& frame);
  void process(const protocol::EmgFrame& frame);

  /// Renders the remaining audio up to the last timestamp seen.
  void finish();

  std::function<void(const Tick&)> on_tick;

  const Summary& summary() const { return summary_; }
  const synth::AudioBlock& audio() const { return audio_; }
  synth::AudioBlock take_audio() { return std::move(audio_); }
  const PipelineConfig& config() const { return cfg_; }

 private:
  void observe(TimestampUs t_us);
  void render_until(TimestampUs t_us, bool partial);
  std::size_t sample_index(TimestampUs t_us) const;

  PipelineConfig cfg_;
  osc::PacketSink* osc_;
  fusion::MotionTracker tracker_;
  mapping::EnvelopeFollower follower_;
  synth::OscillatorBank bank_;
  mapping::SynthParams params_;
  synth::AudioBlock audio_;
  Summary summary_;
  bool muted_ = false;
  double last_stillness_s_ = 0.0;
  bool finished_ = false;
};

/// Pulls every record from `source` into `pipeline`, then finishes it.
void run(session::RecordSource& source, PerformerPipeline& pipeline);

}  // namespace stillness::pipeline
