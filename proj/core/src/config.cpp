#include "stillness/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stillness/error.hpp"

namespace stillness {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  bad(key + ": not a number: \"" + v + "\"");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used, 0);  // accepts 0x prefixes
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  bad(key + ": not an integer: \"" + v + "\"");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key + ": not a boolean: \"" + v + "\"");
}

std::uint16_t to_handle(const std::string& key, const std::string& v) {
  const long long h = to_int(key, v);
  if (h < 0 || h > 0xffff) bad(key + ": handle out of range");
  return static_cast<std::uint16_t>(h);
}

using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"osc.host", [](Config& c, auto&, auto& v) { c.osc_host = v; }},
      {"osc.port",
       [](Config& c, auto& k, auto& v) {
         const long long p = to_int(k, v);
         if (p <= 0 || p > 65535) bad(k + ": port out of range");
         c.osc_port = static_cast<std::uint16_t>(p);
       }},
      {"performer.id", [](Config& c, auto& k, auto& v) { c.performer_id = int(to_int(k, v)); }},
      {"map.f_lo", [](Config& c, auto& k, auto& v) { c.map.f_lo = to_double(k, v); }},
      {"map.f_hi", [](Config& c, auto& k, auto& v) { c.map.f_hi = to_double(k, v); }},
      {"map.spread_max", [](Config& c, auto& k, auto& v) { c.map.spread_max = to_double(k, v); }},
      {"map.drive_max", [](Config& c, auto& k, auto& v) { c.map.drive_max = to_double(k, v); }},
      {"map.rms_window_s",
       [](Config& c, auto& k, auto& v) { c.map.rms_window_s = to_double(k, v); }},
      {"gate.threshold", [](Config& c, auto& k, auto& v) { c.gate.threshold = to_double(k, v); }},
      {"gate.ramp_seconds",
       [](Config& c, auto& k, auto& v) { c.gate.ramp_seconds = to_double(k, v); }},
      {"gate.ramp_shape",
       [](Config& c, auto& k, auto& v) {
         if (v == "linear") {
           c.gate.ramp_shape = fusion::RampShape::linear;
         } else if (v == "equal_power") {
           c.gate.ramp_shape = fusion::RampShape::equal_power;
         } else {
           bad(k + ": expected linear or equal_power");
         }
       }},
      {"gate.smoothing", [](Config& c, auto& k, auto& v) { c.gate.smoothing = to_bool(k, v); }},
      {"gate.smoothing_alpha",
       [](Config& c, auto& k, auto& v) { c.gate.smoothing_alpha = to_double(k, v); }},
      {"qom.mode",
       [](Config& c, auto& k, auto& v) {
         if (v == "compensated") {
           c.qom.mode = fusion::QomMode::gravity_compensated;
         } else if (v == "raw") {
           c.qom.mode = fusion::QomMode::raw;
         } else {
           bad(k + ": expected compensated or raw");
         }
       }},
      {"qom.gyro_full_scale",
       [](Config& c, auto& k, auto& v) { c.qom.gyro_full_scale_dps = to_double(k, v); }},
      {"audio.sample_rate", [](Config& c, auto& k, auto& v) { c.sample_rate = to_double(k, v); }},
      {"audio.block_size",
       [](Config& c, auto& k, auto& v) {
         const long long n = to_int(k, v);
         if (n <= 0) bad(k + ": must be positive");
         c.block_size = static_cast<std::size_t>(n);
       }},
      {"audio.stereo", [](Config& c, auto& k, auto& v) { c.stereo = to_bool(k, v); }},
      {"device.serial_port", [](Config& c, auto&, auto& v) { c.serial_port = v; }},
      {"device.emg_mode",
       [](Config& c, auto& k, auto& v) {
         if (v == "filtered") {
           c.emg_mode = protocol::emg_mode::filtered;
         } else if (v == "raw") {
           c.emg_mode = protocol::emg_mode::raw;
         } else {
           bad(k + ": expected filtered or raw");
         }
       }},
      {"device.quat_scale",
       [](Config& c, auto& k, auto& v) { c.protocol.constants.quat_scale = to_double(k, v); }},
      {"device.accel_scale",
       [](Config& c, auto& k, auto& v) { c.protocol.constants.accel_scale = to_double(k, v); }},
      {"device.gyro_scale",
       [](Config& c, auto& k, auto& v) { c.protocol.constants.gyro_scale = to_double(k, v); }},
      {"device.imu_rate_hz",
       [](Config& c, auto& k, auto& v) { c.protocol.constants.imu_rate_hz = to_double(k, v); }},
      {"device.emg_rate_hz",
       [](Config& c, auto& k, auto& v) { c.protocol.constants.emg_rate_hz = to_double(k, v); }},
      {"device.command_handle",
       [](Config& c, auto& k, auto& v) { c.protocol.handles.command = to_handle(k, v); }},
      {"device.imu_handle",
       [](Config& c, auto& k, auto& v) { c.protocol.handles.imu = to_handle(k, v); }},
      {"device.classifier_handle",
       [](Config& c, auto& k, auto& v) { c.protocol.handles.classifier = to_handle(k, v); }},
      {"device.emg_handles",
       [](Config& c, auto& k, auto& v) {
         std::istringstream in(v);
         std::string tok;
         std::size_t n = 0;
         while (in >> tok) {
           if (n == 4) bad(k + ": expected four handles");
           c.protocol.handles.emg[n++] = to_handle(k, tok);
         }
         if (n != 4) bad(k + ": expected four handles");
       }},
  };
  return table;
}

}  // namespace

void Config::validate() const {
  map.validate();
  if (!(gate.threshold > 0.0)) bad("gate.threshold must be > 0");
  if (!(gate.ramp_seconds > 0.0)) bad("gate.ramp_seconds must be > 0");
  if (!(gate.smoothing_alpha >= 0.0 && gate.smoothing_alpha <= 1.0)) {
    bad("gate.smoothing_alpha must lie in [0, 1]");
  }
  if (!(qom.gyro_full_scale_dps > 0.0)) bad("qom.gyro_full_scale must be > 0");
  if (!(sample_rate > 0.0)) bad("audio.sample_rate must be > 0");
  if (block_size == 0) bad("audio.block_size must be > 0");
  const auto& k = protocol.constants;
  if (!(k.quat_scale > 0 && k.accel_scale > 0 && k.gyro_scale > 0)) bad("scales must be > 0");
  if (!(k.imu_rate_hz > 0 && k.emg_rate_hz > 0)) bad("device rates must be > 0");
}

pipeline::PipelineConfig Config::pipeline_config() const {
  pipeline::PipelineConfig p;
  p.protocol = protocol;
  p.map = map;
  p.gate = gate;
  p.qom = qom;
  p.sample_rate = sample_rate;
  p.block_size = block_size;
  p.performer_id = performer_id;
  return p;
}

Config parse_config(std::istream& in, Config base) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    bad(std::string("malformed config: ") + e.what());
  }
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) bad("key outside a section: " + section);
    for (const auto& [key, value] : keys) {
      const std::string name = section + "." + key;
      const auto it = setters().find(name);
      if (it == setters().end()) bad("unknown config key " + name);
      it->second(base, name, value.data());
    }
  }
  base.validate();
  return base;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream in(path);
  if (!in) bad("cannot open config file " + path.string());
  return parse_config(in, std::move(base));
}

}  // namespace stillness
