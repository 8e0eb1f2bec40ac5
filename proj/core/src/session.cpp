#include "stillness/session.hpp"

#include <chrono>
#include <limits>
#include <thread>

#include "stillness/error.hpp"

namespace stillness::session {

namespace {

const char* kind_name(RecordKind kind) {
  switch (kind) {
    case RecordKind::imu: return "imu";
    case RecordKind::emg: return "emg";
    case RecordKind::meta: return "meta";
  }
  return "?";
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
  throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + what);
}

std::int64_t checked_int(const nlohmann::json& v, std::int64_t lo, std::int64_t hi,
                         std::size_t line_no) {
  if (!v.is_number_integer()) parse_fail(line_no, "data values must be integers");
  const auto x = v.get<std::int64_t>();
  if (x < lo || x > hi) {
    parse_fail(line_no, "value " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
  }
  return x;
}

int major_version(const std::string& version) {
  const auto dot = version.find('.');
  try {
    return std::stoi(version.substr(0, dot));
  } catch (const std::exception&) {
    return -1;
  }
}

}  // namespace

SessionRecord imu_record(TimestampUs t_us, const protocol::RawImu& raw) { return {t_us, raw}; }

SessionRecord emg_record(const protocol::EmgFrame& frame) { return {frame.t_us, frame.channels}; }

SessionRecord meta_record(TimestampUs t_us, Meta meta) { return {t_us, std::move(meta)}; }

Meta make_meta(const protocol::DeviceConstants& k, std::string source) {
  Meta m;
  m["version"] = kLogVersion;
  m["device"] = "myo";
  m["source"] = std::move(source);
  m["scales"] = {{"quat", k.quat_scale}, {"accel", k.accel_scale}, {"gyro", k.gyro_scale}};
  m["rates"] = {{"imu_hz", k.imu_rate_hz}, {"emg_hz", k.emg_rate_hz}};
  return m;
}

protocol::DeviceConstants meta_constants(const Meta& meta, const protocol::DeviceConstants& fb) {
  protocol::DeviceConstants k = fb;
  auto pick = [&](const char* group, const char* key, double& out) {
    if (meta.contains(group) && meta[group].is_object() && meta[group].contains(key) &&
        meta[group][key].is_number()) {
      out = meta[group][key].get<double>();
    }
  };
  pick("scales", "quat", k.quat_scale);
  pick("scales", "accel", k.accel_scale);
  pick("scales", "gyro", k.gyro_scale);
  pick("rates", "imu_hz", k.imu_rate_hz);
  pick("rates", "emg_hz", k.emg_rate_hz);
  return k;
}

std::string format_record(const SessionRecord& record) {
  nlohmann::ordered_json j;
  j["t_us"] = record.t_us;
  j["kind"] = kind_name(record.kind());
  if (const auto* imu = std::get_if<protocol::RawImu>(&record.data)) {
    auto& d = j["data"] = nlohmann::ordered_json::array();
    for (auto v : imu->quat) d.push_back(v);
    for (auto v : imu->accel) d.push_back(v);
    for (auto v : imu->gyro) d.push_back(v);
  } else if (const auto* emg = std::get_if<EmgSample>(&record.data)) {
    auto& d = j["data"] = nlohmann::ordered_json::array();
    for (auto v : *emg) d.push_back(static_cast<int>(v));
  } else {
    j["data"] = std::get<Meta>(record.data);
  }
  return j.dump();
}

SessionRecord parse_record(const std::string& line, std::size_t line_no) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    parse_fail(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) parse_fail(line_no, "record must be an object");
  if (!j.contains("t_us") || !j["t_us"].is_number_integer()) {
    parse_fail(line_no, "missing integer field t_us");
  }
  if (!j.contains("kind") || !j["kind"].is_string()) parse_fail(line_no, "missing field kind");
  if (!j.contains("data")) parse_fail(line_no, "missing field data");

  SessionRecord r;
  r.t_us = j["t_us"].get<TimestampUs>();
  const auto kind = j["kind"].get<std::string>();
  const auto& data = j["data"];

  if (kind == "imu") {
    if (!data.is_array() || data.size() != 10) parse_fail(line_no, "imu data needs 10 values");
    protocol::RawImu raw;
    auto v = [&](std::size_t i) {
      return static_cast<std::int16_t>(checked_int(data[i], -32768, 32767, line_no));
    };
    for (std::size_t i = 0; i < 4; ++i) raw.quat[i] = v(i);
    for (std::size_t i = 0; i < 3; ++i) raw.accel[i] = v(4 + i);
    for (std::size_t i = 0; i < 3; ++i) raw.gyro[i] = v(7 + i);
    r.data = raw;
  } else if (kind == "emg") {
    if (!data.is_array() || data.size() != kEmgChannels) {
      parse_fail(line_no, "emg data needs 8 values");
    }
    EmgSample s;
    for (std::size_t i = 0; i < kEmgChannels; ++i) {
      s[i] = static_cast<std::int8_t>(checked_int(data[i], -128, 127, line_no));
    }
    r.data = s;
  } else if (kind == "meta") {
    if (!data.is_object()) parse_fail(line_no, "meta data must be an object");
    if (!data.contains("version") || !data["version"].is_string()) {
      parse_fail(line_no, "meta record lacks a version string");
    }
    const auto version = data["version"].get<std::string>();
    if (major_version(version) != kLogMajorVersion) {
      throw Error(ErrorKind::VersionError, "line " + std::to_string(line_no) +
                                               ": unsupported log version " + version);
    }
    r.data = Meta(data);
  } else {
    parse_fail(line_no, "unknown record kind \"" + kind + "\"");
  }
  return r;
}

LogWriter::LogWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
}

void LogWriter::write(const SessionRecord& record) {
  out_ << format_record(record) << '\n';
  if (!out_) throw Error(ErrorKind::IoError, "write failed for " + path_.string());
}

void LogWriter::close() {
  out_.close();
  if (out_.fail()) throw Error(ErrorKind::IoError, "close failed for " + path_.string());
}

void record(std::span<const SessionRecord> records, const std::filesystem::path& path) {
  LogWriter w(path);
  for (const auto& r : records) w.write(r);
  w.close();
}

std::optional<SessionRecord> VectorSource::next() {
  if (pos_ >= records_.size()) return std::nullopt;
  return records_[pos_++];
}

LogReader::LogReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw Error(ErrorKind::IoError, "cannot open " + path.string());
}

std::optional<SessionRecord> LogReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;

    SessionRecord r;
    try {
      r = parse_record(text, line_);
    } catch (const Error& e) {
      throw Error(e.kind(), path_.string() + ": " + e.what());
    }
    if (last_t_ && r.t_us < *last_t_) {
      throw Error(ErrorKind::MonotonicityError,
                  path_.string() + ": line " + std::to_string(line_) + ": t_us " +
                      std::to_string(r.t_us) + " precedes " + std::to_string(*last_t_));
    }
    last_t_ = r.t_us;
    return r;
  }
  if (in_.bad()) throw Error(ErrorKind::IoError, "read failed for " + path_.string());
  return std::nullopt;
}

ReplaySource::ReplaySource(const std::filesystem::path& path, ReplayOptions options)
    : reader_(path), options_(options) {}

std::optional<SessionRecord> ReplaySource::next() {
  auto r = reader_.next();
  if (!r || options_.speed <= 0.0) return r;

  using clock = std::chrono::steady_clock;
  const auto now_ns = [] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now().time_since_epoch())
        .count();
  };
  if (!first_t_) {
    first_t_ = r->t_us;
    start_ns_ = now_ns();
    return r;
  }
  const double offset_ns = static_cast<double>(r->t_us - *first_t_) * 1e3 / options_.speed;
  const auto due = clock::time_point(
      std::chrono::nanoseconds(start_ns_ + static_cast<std::int64_t>(offset_ns)));
  std::this_thread::sleep_until(due);
  return r;
}

void replay(const std::filesystem::path& path, ReplayOptions options,
            const std::function<void(const SessionRecord&)>& sink) {
  ReplaySource source(path, options);
  while (auto r = source.next()) sink(*r);
}

std::vector<SessionRecord> read_log(const std::filesystem::path& path) {
  std::vector<SessionRecord> out;
  LogReader reader(path);
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

}  // namespace stillness::session
