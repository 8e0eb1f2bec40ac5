#include "stillness/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace stillness::pipeline {

PerformerPipeline::PerformerPipeline(PipelineConfig cfg, osc::PacketSink* osc)
    : cfg_(std::move(cfg)),
      osc_(osc),
      tracker_(cfg_.qom, cfg_.gate, cfg_.protocol.constants.imu_rate_hz),
      follower_(cfg_.map, cfg_.protocol.constants.emg_rate_hz),
      bank_(cfg_.sample_rate) {
  cfg_.map.validate();
  audio_.sample_rate = cfg_.sample_rate;
  params_.freqs.fill(cfg_.map.f_lo);
}

void PerformerPipeline::observe(TimestampUs t_us) {
  ++summary_.records;
  if (!summary_.first_t_us) summary_.first_t_us = t_us;
  summary_.last_t_us = std::max(summary_.last_t_us, t_us);
}

std::size_t PerformerPipeline::sample_index(TimestampUs t_us) const {
  const TimestampUs rel = t_us - summary_.first_t_us.value_or(t_us);
  if (rel <= 0) return 0;
  const auto rate = static_cast<std::int64_t>(std::llround(cfg_.sample_rate));
  return static_cast<std::size_t>(rel * rate / 1'000'000);
}

void PerformerPipeline::render_until(TimestampUs t_us, bool partial) {
  if (!cfg_.render_audio) return;
  const std::size_t target = sample_index(t_us);
  const std::size_t block = std::max<std::size_t>(cfg_.block_size, 1);
  std::size_t done = audio_.samples.size();
  while (done + block <= target || (partial && done < target)) {
    const std::size_t n = std::min(block, target - done);
    audio_.samples.resize(done + n);
    bank_.render(params_, std::span<float>(audio_.samples).subspan(done, n));
    done += n;
  }
}

void PerformerPipeline::process(const session::SessionRecord& record) {
  switch (record.kind()) {
    case session::RecordKind::meta: {
      observe(record.t_us);
      ++summary_.meta_records;
      if (cfg_.prefer_log_constants) {
        cfg_.protocol.constants =
            session::meta_constants(std::get<session::Meta>(record.data), cfg_.protocol.constants);
        if (summary_.imu_frames == 0 && summary_.emg_frames == 0) {
          const auto& k = cfg_.protocol.constants;
          tracker_ = fusion::MotionTracker(cfg_.qom, cfg_.gate, k.imu_rate_hz);
          follower_ = mapping::EnvelopeFollower(cfg_.map, k.emg_rate_hz);
        }
      }
      break;
    }
    case session::RecordKind::imu:
      process(protocol::scale_imu(std::get<protocol::RawImu>(record.data), record.t_us,
                                  cfg_.protocol.constants));
      break;
    case session::RecordKind::emg:
      process(protocol::EmgFrame{record.t_us, std::get<session::EmgSample>(record.data)});
      break;
  }
}

void PerformerPipeline::process(const protocol::EmgFrame& frame) {
  observe(frame.t_us);
  ++summary_.emg_frames;
  follower_.push(frame);
}

void PerformerPipeline::process(const protocol::ImuFrame& frame) {
  observe(frame.t_us);
  ++summary_.imu_frames;
  if (!protocol::is_normalized(frame)) ++summary_.non_normalized;

  render_until(frame.t_us, false);

  const fusion::MotionState& state = tracker_.update(frame);
  const mapping::EmgEnvelopes env = follower_.envelopes();
  const mapping::OrientationControls controls = mapping::map_orientation(state.euler, cfg_.map);
  const mapping::AssembledParams assembled =
      mapping::assemble_params(env, controls, state.master_gain, cfg_.sample_rate);
  if (assembled.clamped > 0 && summary_.clamped_partials == 0) {
    std::cerr << "warning: partials at or above Nyquist clamped to 0.45 x sample rate\n";
  }
  summary_.clamped_partials += assembled.clamped;
  params_ = assembled.params;

  const bool muted = state.qom > cfg_.gate.threshold;
  if (muted && !muted_) ++summary_.gate_mutes;
  if (!muted) summary_.still_s += state.stillness_s - last_stillness_s_;
  muted_ = muted;
  last_stillness_s_ = state.stillness_s;

  if (osc_) {
    for (const auto& msg : osc::emit_pipeline(state, env, params_, cfg_.performer_id)) {
      const auto bytes = osc::encode_message(msg);
      osc_->send(bytes);
      ++summary_.osc_messages;
    }
  }
  if (on_tick) on_tick(Tick{frame.t_us, state, env, params_, muted});
}

void PerformerPipeline::finish() {
  if (finished_) return;
  finished_ = true;
  if (summary_.first_t_us) render_until(summary_.last_t_us, true);
}

void run(session::RecordSource& source, PerformerPipeline& pipeline) {
  while (auto r = source.next()) pipeline.process(*r);
  pipeline.finish();
}

}  // namespace stillness::pipeline
