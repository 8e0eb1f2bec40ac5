#pragma once

// Operator configuration. Files are INI; every key is optional and
// command-line flags override whatever the file sets.
//
//   [osc]      host, port
//   [performer] id
//   [map]      f_lo, f_hi, spread_max, drive_max, rms_window_s
//   [gate]     threshold, ramp_seconds, ramp_shape (linear|equal_power),
//              smoothing (true|false), smoothing_alpha
//   [qom]      mode (compensated|raw), gyro_full_scale
//   [audio]    sample_rate, block_size, stereo (true|false)
//   [device]   serial_port, quat_scale, accel_scale, gyro_scale,
//              imu_rate_hz, emg_rate_hz, emg_mode (filtered|raw),
//              command_handle, imu_handle, classifier_handle,
//              emg_handles (four values, e.g. "0x2b 0x2e 0x31 0x34")

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>

#include "stillness/fusion.hpp"
#include "stillness/mapping.hpp"
#include "stillness/pipeline.hpp"
#include "stillness/protocol.hpp"

namespace stillness {

/// Environment variable consulted when no --config flag is given.
inline constexpr const char* kConfigEnvVar = "STILLNESS_CONFIG";

struct Config {
  std::string osc_host = "127.0.0.1";
  std::uint16_t osc_port = 9000;
  int performer_id = 0;
  mapping::MapConfig map;
  fusion::GateConfig gate;
  fusion::QomConfig qom;
  double sample_rate = 44100.0;
  std::size_t block_size = 256;
  bool stereo = false;
  std::string serial_port = "/dev/ttyACM0";
  std::uint8_t emg_mode = protocol::emg_mode::filtered;
  protocol::ProtocolConfig protocol;

  /// Throws Error{InvalidConfig}.
  void validate() const;

  pipeline::PipelineConfig pipeline_config() const;
};

/// Applies the keys found in `in` on top of `base`. Unknown sections or keys
/// are rejected.
Config parse_config(std::istream& in, Config base = {});
Config load_config(const std::filesystem::path& path, Config base = {});

}  // namespace stillness
