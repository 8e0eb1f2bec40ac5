#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stillness/config.hpp"
#include "stillness/dongle.hpp"
#include "stillness/pipeline.hpp"
#include "stillness/scenario.hpp"

namespace stillness::app {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,   // bad input data, I/O failure, ...
  kExitUsage = 2,     // malformed command line or flag value
  kExitHardware = 3,  // dongle missing or device unreachable
};

/// Entry point shared by main() and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// ---------------------------------------------------------------------------

struct ReplayCommand {
  std::filesystem::path log;
  std::optional<std::filesystem::path> wav;
  bool osc = false;  // send over UDP
  std::optional<std::filesystem::path> osc_dump;
  double speed = 0.0;
};

pipeline::Summary cmd_replay(const Config& cfg, const ReplayCommand& cmd, std::ostream& out);

struct TransitionCheck {
  std::size_t pose = 0;
  TimestampUs onset_us = 0;
  std::optional<TimestampUs> mute_us;
  bool ok = false;
};

struct HoldCheck {
  std::size_t pose = 0;
  TimestampUs start_us = 0;
  TimestampUs end_us = 0;
  std::optional<TimestampUs> full_gain_us;
  bool required = false;  // hold lasts at least the ramp time
  bool ok = false;
};

struct PerformerTimeline {
  std::vector<TransitionCheck> transitions;
  std::vector<HoldCheck> holds;
  pipeline::Summary summary;
};

struct SimulateCommand {
  std::optional<std::filesystem::path> scenario;  // built-in default when empty
  std::uint64_t seed = 2018;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> wav;  // defaults to out_dir/mix.wav
  bool osc_dump = true;
};

struct SimulateResult {
  std::vector<std::filesystem::path> logs;
  std::vector<std::filesystem::path> osc_dumps;
  std::filesystem::path wav;
  std::filesystem::path report;
  std::vector<PerformerTimeline> timelines;
  bool all_ok = false;
};

SimulateResult cmd_simulate(const Config& cfg, const SimulateCommand& cmd, std::ostream& out);

/// Gate checks for one performer's ticks against its scenario pose windows.
PerformerTimeline check_timeline(const std::vector<scenario::PoseWindow>& windows,
                                 const std::vector<pipeline::Tick>& ticks,
                                 TimestampUs control_period_us, double ramp_seconds);

struct MonitorCommand {
  std::optional<std::filesystem::path> replay;
  std::optional<std::filesystem::path> scenario;
  std::size_t performer = 0;
  std::uint64_t seed = 2018;
  double refresh_hz = 5.0;
  double speed = 0.0;
};

/// One telemetry line per refresh interval of stream time.
void cmd_monitor(const Config& cfg, const MonitorCommand& cmd, std::ostream& out);
void monitor_source(const Config& cfg, session::RecordSource& source, double refresh_hz,
                    std::ostream& out);

/// Prints one "mac name" line per device; an empty listing is not an error.
std::vector<dongle::DiscoveredDevice> cmd_scan(dongle::ByteTransport& transport,
                                               std::chrono::milliseconds duration, bool all,
                                               std::ostream& out);

}  // namespace stillness::app
