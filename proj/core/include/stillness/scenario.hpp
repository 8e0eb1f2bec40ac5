#pragma once

// Synthetic ensemble sessions: each performer holds a sequence of poses,
// moving between them with a short burst of large motion.
//
// Scenario files are INI:
//
//   [scenario]
//   transition_s = 2.0
//
//   [performer.0.pose.0]
//   duration_s = 135
//   roll_deg = 0
//   pitch_deg = 20
//   yaw_deg = -45
//   tension = 0.8 0.1 0 0 0.4 0 0 0.2
//   micromotion_amp = 1.0
//   transition_motion_amp = 1.0
//
// Performers and poses are numbered from 0 without gaps. Every pose after
// the first opens with a transition of transition_s seconds.

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <vector>

#include "stillness/fusion.hpp"
#include "stillness/protocol.hpp"
#include "stillness/session.hpp"

namespace stillness::scenario {

/// Identifier written into generated log headers.
inline constexpr const char* kRngAlgorithm = "mt19937_64/box-muller/v1";

struct Pose {
  double duration_s = 0.0;
  fusion::EulerAngles orientation;  // radians
  std::array<double, kEmgChannels> tension{};
  /// Standard deviation of hold jitter: degrees of orientation, 0.01 g of
  /// acceleration and deg/s of rotation per unit.
  double micromotion_amp = 0.0;
  /// Burst strength during the transition into this pose: 2 g of extra
  /// acceleration and 1000 deg/s of rotation per unit.
  double transition_motion_amp = 1.0;
};

struct PerformerScript {
  std::vector<Pose> poses;
};

struct Scenario {
  std::vector<PerformerScript> performers;
  double transition_s = 2.0;

  /// Throws Error{InvalidScenario}.
  void validate() const;
  double duration_s(std::size_t performer) const;
};

/// Four performers, four poses each, nine minutes.
Scenario default_scenario();

Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);

struct PoseWindow {
  TimestampUs start_us = 0;
  TimestampUs transition_end_us = 0;  // == start_us for the first pose
  TimestampUs end_us = 0;
};

std::vector<PoseWindow> pose_windows(const Scenario& scenario, std::size_t performer);

/// Raw IMU at the device IMU rate and EMG at the EMG rate, preceded by a meta
/// record. Identical (scenario, seed) give identical logs.
std::vector<std::vector<session::SessionRecord>> generate_scenario(
    const Scenario& scenario, std::uint64_t seed, const protocol::DeviceConstants& k = {});

}  // namespace stillness::scenario
