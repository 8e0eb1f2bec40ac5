#include "stillness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stillness/error.hpp"

namespace stillness::scenario {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidScenario, what); }

TimestampUs to_us(double seconds) { return static_cast<TimestampUs>(std::llround(seconds * 1e6)); }

// 53-bit uniform in [0, 1).
double uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& gen) {
  const double u1 = 1.0 - uniform(gen);  // (0, 1]
  const double u2 = uniform(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec3 random_direction(std::mt19937_64& gen) {
  Vec3 v{gaussian(gen), gaussian(gen), gaussian(gen)};
  const double n = fusion::vector_magnitude(v);
  if (n < 1e-12) return {1.0, 0.0, 0.0};
  return {v.x / n, v.y / n, v.z / n};
}

std::int16_t quantize16(double v, double scale) {
  const double r = std::round(v * scale);
  return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

std::int8_t quantize8(double v) {
  return static_cast<std::int8_t>(std::clamp(std::round(v), -128.0, 127.0));
}

// Gravity as seen by the sensor: world +z rotated into the body frame.
Vec3 gravity_in_sensor(const Quaternion& q) {
  return {2.0 * (q.x * q.z - q.w * q.y), 2.0 * (q.y * q.z + q.w * q.x),
          1.0 - 2.0 * (q.x * q.x + q.y * q.y)};
}

Pose make_pose(double duration, double roll_deg, double pitch_deg, double yaw_deg,
               std::array<double, kEmgChannels> tension) {
  Pose p;
  p.duration_s = duration;
  p.orientation = {roll_deg * kDeg, pitch_deg * kDeg, yaw_deg * kDeg};
  p.tension = tension;
  p.micromotion_amp = 1.0;
  p.transition_motion_amp = 1.0;
  return p;
}

std::array<double, kEmgChannels> parse_tension(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::array<double, kEmgChannels> out{};
  std::size_t n = 0;
  double v;
  while (in >> v) {
    if (n == kEmgChannels) invalid(where + ": tension needs exactly 8 values");
    out[n++] = v;
  }
  if (!in.eof() || n != kEmgChannels) invalid(where + ": tension needs exactly 8 numbers");
  return out;
}

}  // namespace

void Scenario::validate() const {
  if (performers.empty()) invalid("scenario has no performers");
  if (!(transition_s > 0.0) || !std::isfinite(transition_s)) invalid("transition_s must be > 0");
  for (std::size_t p = 0; p < performers.size(); ++p) {
    const auto& poses = performers[p].poses;
    const std::string who = "performer " + std::to_string(p);
    if (poses.empty()) invalid(who + " has no poses");
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const Pose& pose = poses[i];
      const std::string where = who + " pose " + std::to_string(i);
      if (!(pose.duration_s > 0.0) || !std::isfinite(pose.duration_s)) {
        invalid(where + ": duration_s must be > 0");
      }
      if (i > 0 && !(pose.duration_s > transition_s)) {
        invalid(where + ": duration_s must exceed transition_s");
      }
      for (double t : pose.tension) {
        if (!(t >= 0.0 && t <= 1.0)) invalid(where + ": tension values must lie in [0, 1]");
      }
      if (!(pose.micromotion_amp >= 0.0) || !(pose.transition_motion_amp >= 0.0)) {
        invalid(where + ": motion amplitudes must be >= 0");
      }
      const auto& o = pose.orientation;
      if (!(std::abs(o.pitch) < std::numbers::pi / 2) || !std::isfinite(o.roll) ||
          !std::isfinite(o.yaw)) {
        invalid(where + ": pitch must lie strictly inside (-90, 90) degrees");
      }
    }
  }
}

double Scenario::duration_s(std::size_t performer) const {
  double total = 0.0;
  for (const auto& pose : performers.at(performer).poses) total += pose.duration_s;
  return total;
}

Scenario default_scenario() {
  Scenario s;
  s.transition_s = 2.0;
  // Each performer holds a different arm direction so the ensemble spreads
  // over register and timbre.
  s.performers = {
      {{make_pose(135, 0, 20, -60, {0.8, 0.2, 0.0, 0.0, 0.4, 0.0, 0.1, 0.3}),
        make_pose(135, 30, -10, 0, {0.1, 0.7, 0.5, 0.0, 0.0, 0.2, 0.0, 0.0}),
        make_pose(135, -45, 40, 45, {0.0, 0.0, 0.3, 0.9, 0.6, 0.0, 0.0, 0.1}),
        make_pose(135, 10, 0, 120, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5})}},
      {{make_pose(135, -20, -30, 90, {0.0, 0.6, 0.0, 0.6, 0.0, 0.6, 0.0, 0.6}),
        make_pose(135, 60, 10, -30, {0.9, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9}),
        make_pose(135, 0, 60, 0, {0.2, 0.2, 0.8, 0.8, 0.2, 0.2, 0.0, 0.0}),
        make_pose(135, -90, -20, -120, {0.3, 0.0, 0.7, 0.0, 0.3, 0.0, 0.7, 0.0})}},
      {{make_pose(135, 45, 50, 150, {0.0, 0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0}),
        make_pose(135, 0, -45, 60, {0.6, 0.3, 0.1, 0.0, 0.0, 0.1, 0.3, 0.6}),
        make_pose(135, 120, 15, -90, {0.0, 0.9, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0}),
        make_pose(135, -30, 5, 30, {0.4, 0.4, 0.0, 0.0, 0.0, 0.0, 0.4, 0.4})}},
      {{make_pose(135, 90, -60, -150, {0.7, 0.0, 0.0, 0.7, 0.0, 0.0, 0.7, 0.0}),
        make_pose(135, -60, 30, 100, {0.0, 0.3, 0.6, 0.9, 0.6, 0.3, 0.0, 0.0}),
        make_pose(135, 15, -5, -10, {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0}),
        make_pose(135, 150, 25, 160, {0.2, 0.4, 0.6, 0.8, 0.8, 0.6, 0.4, 0.2})}},
  };
  return s;
}

Scenario parse_scenario(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    invalid(std::string("malformed scenario file: ") + e.what());
  }

  Scenario s;
  std::map<std::size_t, std::map<std::size_t, Pose>> poses;
  static const std::regex pose_section(R"(performer\.(\d+)\.pose\.(\d+))");

  auto number = [](const pt::ptree& sec, const std::string& key, const std::string& where,
                   std::optional<double> fallback) {
    const auto raw = sec.get_optional<std::string>(pt::ptree::path_type(key, '/'));
    if (!raw) {
      if (fallback) return *fallback;
      invalid(where + ": missing " + key);
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(*raw, &used);
      if (used != raw->size()) throw std::invalid_argument(*raw);
      return v;
    } catch (const std::exception&) {
      invalid(where + ": " + key + " is not a number: \"" + *raw + "\"");
    }
  };

  for (const auto& [name, section] : tree) {
    if (name == "scenario") {
      s.transition_s = number(section, "transition_s", name, 2.0);
      continue;
    }
    std::smatch m;
    if (!std::regex_match(name, m, pose_section)) invalid("unknown section [" + name + "]");
    Pose pose;
    pose.duration_s = number(section, "duration_s", name, std::nullopt);
    pose.orientation.roll = number(section, "roll_deg", name, 0.0) * kDeg;
    pose.orientation.pitch = number(section, "pitch_deg", name, 0.0) * kDeg;
    pose.orientation.yaw = number(section, "yaw_deg", name, 0.0) * kDeg;
    pose.micromotion_amp = number(section, "micromotion_amp", name, 1.0);
    pose.transition_motion_amp = number(section, "transition_motion_amp", name, 1.0);
    const auto tension = section.get_optional<std::string>("tension");
    pose.tension = tension ? parse_tension(*tension, name) : std::array<double, kEmgChannels>{};

    const auto p = std::stoul(m[1].str());
    const auto i = std::stoul(m[2].str());
    if (!poses[p].emplace(i, pose).second) invalid("duplicate section [" + name + "]");
  }

  std::size_t expected_p = 0;
  for (auto& [p, list] : poses) {
    if (p != expected_p++) invalid("performer numbering has a gap before " + std::to_string(p));
    PerformerScript script;
    std::size_t expected_i = 0;
    for (auto& [i, pose] : list) {
      if (i != expected_i++) {
        invalid("performer " + std::to_string(p) + " pose numbering has a gap before " +
                std::to_string(i));
      }
      script.poses.push_back(pose);
    }
    s.performers.push_back(std::move(script));
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open scenario file " + path.string());
  return parse_scenario(in);
}

std::vector<PoseWindow> pose_windows(const Scenario& scenario, std::size_t performer) {
  std::vector<PoseWindow> out;
  double start = 0.0;
  const auto& poses = scenario.performers.at(performer).poses;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    PoseWindow w;
    w.start_us = to_us(start);
    w.transition_end_us = i == 0 ? w.start_us : to_us(start + scenario.transition_s);
    start += poses[i].duration_s;
    w.end_us = to_us(start);
    out.push_back(w);
  }
  return out;
}

namespace {

struct PerformerGenerator {
  const Scenario& scenario;
  const PerformerScript& script;
  std::vector<PoseWindow> windows;
  const protocol::DeviceConstants& k;
  std::mt19937_64 gen;

  std::size_t pose_at(TimestampUs t) const {
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (t < windows[i].end_us) return i;
    }
    return windows.size() - 1;
  }

  protocol::RawImu imu_sample(TimestampUs t) {
    const std::size_t i = pose_at(t);
    const Pose& pose = script.poses[i];
    const PoseWindow& w = windows[i];
    const bool transition = i > 0 && t < w.transition_end_us;

    // Fixed draw order per tick, whatever the pose parameters.
    const Vec3 jitter{gaussian(gen), gaussian(gen), gaussian(gen)};
    const Vec3 accel_noise{gaussian(gen), gaussian(gen), gaussian(gen)};
    const Vec3 gyro_noise{gaussian(gen), gaussian(gen), gaussian(gen)};
    const Vec3 burst_accel_dir = random_direction(gen);
    const Vec3 burst_gyro_axis = random_direction(gen);

    fusion::EulerAngles target = pose.orientation;
    if (transition) {
      const auto& from = script.poses[i - 1].orientation;
      const double u = static_cast<double>(t - w.start_us) /
                       static_cast<double>(w.transition_end_us - w.start_us);
      target.roll = from.roll + (target.roll - from.roll) * u;
      target.pitch = from.pitch + (target.pitch - from.pitch) * u;
      target.yaw = from.yaw + (target.yaw - from.yaw) * u;
    }
    const double a = pose.micromotion_amp;
    const fusion::EulerAngles held{target.roll + a * kDeg * jitter.x,
                                   target.pitch + a * kDeg * jitter.y,
                                   target.yaw + a * kDeg * jitter.z};
    const Quaternion q = fusion::euler_to_quat(held);

    Vec3 accel = gravity_in_sensor(q);
    accel.x += 0.01 * a * accel_noise.x;
    accel.y += 0.01 * a * accel_noise.y;
    accel.z += 0.01 * a * accel_noise.z;
    Vec3 gyro{a * gyro_noise.x, a * gyro_noise.y, a * gyro_noise.z};
    if (transition) {
      const double b = pose.transition_motion_amp;
      accel.x += 2.0 * b * burst_accel_dir.x;
      accel.y += 2.0 * b * burst_accel_dir.y;
      accel.z += 2.0 * b * burst_accel_dir.z;
      gyro.x += 1000.0 * b * burst_gyro_axis.x;
      gyro.y += 1000.0 * b * burst_gyro_axis.y;
      gyro.z += 1000.0 * b * burst_gyro_axis.z;
    }

    protocol::RawImu raw;
    raw.quat = {quantize16(q.w, k.quat_scale), quantize16(q.x, k.quat_scale),
                quantize16(q.y, k.quat_scale), quantize16(q.z, k.quat_scale)};
    raw.accel = {quantize16(accel.x, k.accel_scale), quantize16(accel.y, k.accel_scale),
                 quantize16(accel.z, k.accel_scale)};
    raw.gyro = {quantize16(gyro.x, k.gyro_scale), quantize16(gyro.y, k.gyro_scale),
                quantize16(gyro.z, k.gyro_scale)};
    return raw;
  }

  session::EmgSample emg_sample(TimestampUs t) {
    const Pose& pose = script.poses[pose_at(t)];
    session::EmgSample s{};
    for (std::size_t ch = 0; ch < kEmgChannels; ++ch) {
      s[ch] = quantize8(gaussian(gen) * pose.tension[ch] * 96.0);
    }
    return s;
  }
};

}  // namespace

std::vector<std::vector<session::SessionRecord>> generate_scenario(
    const Scenario& scenario, std::uint64_t seed, const protocol::DeviceConstants& k) {
  scenario.validate();
  std::mt19937_64 master(seed);

  const TimestampUs imu_period = to_us(1.0 / k.imu_rate_hz);
  const TimestampUs emg_period = to_us(1.0 / k.emg_rate_hz);
  if (imu_period <= 0 || emg_period <= 0) invalid("device rates must be positive");

  std::vector<std::vector<session::SessionRecord>> logs;
  for (std::size_t p = 0; p < scenario.performers.size(); ++p) {
    const std::uint64_t performer_seed = master();
    PerformerGenerator g{scenario, scenario.performers[p], pose_windows(scenario, p), k,
                         std::mt19937_64(performer_seed)};
    const TimestampUs end = g.windows.back().end_us;

    std::vector<session::SessionRecord> log;
    log.reserve(static_cast<std::size_t>(end / imu_period + end / emg_period + 2));

    session::Meta meta = session::make_meta(k, "scenario");
    meta["performer"] = p;
    meta["rng"] = kRngAlgorithm;
    meta["seed"] = seed;
    log.push_back(session::meta_record(0, std::move(meta)));

    // EMG before IMU at equal stamps so each control tick sees the latest
    // muscle sample.
    TimestampUs t_imu = 0, t_emg = 0;
    while (t_imu < end || t_emg < end) {
      if (t_emg < end && t_emg <= t_imu) {
        log.push_back({t_emg, g.emg_sample(t_emg)});
        t_emg += emg_period;
      } else {
        log.push_back(session::imu_record(t_imu, g.imu_sample(t_imu)));
        t_imu += imu_period;
      }
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace stillness::scenario
