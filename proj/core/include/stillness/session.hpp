#pragma once

// Record / replay of raw sensor streams.
//
// A log is UTF-8 text, one JSON object per line:
//   {"t_us":20000,"kind":"imu","data":[w,x,y,z,ax,ay,az,gx,gy,gz]}
//   {"t_us":20000,"kind":"emg","data":[c0,...,c7]}
//   {"t_us":0,"kind":"meta","data":{"version":"1.0",...}}
// Values are the raw integers from the wire, before any scaling. A meta
// record, when present, leads the log and carries the format version,
// device id and scale constants.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "stillness/protocol.hpp"
#include "stillness/types.hpp"

namespace stillness::session {

inline constexpr int kLogMajorVersion = 1;
inline constexpr const char* kLogVersion = "1.0";

using EmgSample = std::array<std::int8_t, kEmgChannels>;
using Meta = nlohmann::ordered_json;

enum class RecordKind { imu, emg, meta };

struct SessionRecord {
  TimestampUs t_us = 0;
  std::variant<protocol::RawImu, EmgSample, Meta> data;

  RecordKind kind() const { return static_cast<RecordKind>(data.index()); }

  friend bool operator==(const SessionRecord&, const SessionRecord&) = default;
};

SessionRecord imu_record(TimestampUs t_us, const protocol::RawImu& raw);
SessionRecord emg_record(const protocol::EmgFrame& frame);
SessionRecord meta_record(TimestampUs t_us, Meta meta);

/// Meta object with version, device and scale constants filled in.
Meta make_meta(const protocol::DeviceConstants& k = {}, std::string source = "unknown");

/// Scale constants stored in a meta record, falling back to `fallback` for
/// missing entries.
protocol::DeviceConstants meta_constants(const Meta& meta,
                                         const protocol::DeviceConstants& fallback = {});

/// One record as a single line of text (no trailing newline).
std::string format_record(const SessionRecord& record);

/// Throws Error{ParseError} (message names `line_no`) or Error{VersionError}.
SessionRecord parse_record(const std::string& line, std::size_t line_no = 0);

// ---------------------------------------------------------------------------

class LogWriter {
 public:
  /// Truncates `path`. Throws Error{IoError}.
  explicit LogWriter(const std::filesystem::path& path);

  void write(const SessionRecord& record);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Writes `records` verbatim, one line each. An empty sequence gives an empty
/// file.
void record(std::span<const SessionRecord> records, const std::filesystem::path& path);

/// Pull interface shared by replayed logs, in-memory streams and the live
/// dongle transport.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<SessionRecord> next() = 0;
};

class VectorSource final : public RecordSource {
 public:
  explicit VectorSource(std::vector<SessionRecord> records) : records_(std::move(records)) {}
  std::optional<SessionRecord> next() override;

 private:
  std::vector<SessionRecord> records_;
  std::size_t pos_ = 0;
};

/// Reads a log line by line, validating syntax, value ranges and timestamp
/// order. Errors name the file and line.
class LogReader final : public RecordSource {
 public:
  explicit LogReader(const std::filesystem::path& path);
  std::optional<SessionRecord> next() override;

  std::size_t line() const { return line_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::optional<TimestampUs> last_t_;
};

struct ReplayOptions {
  /// Playback speed multiplier; 0 delivers as fast as possible.
  double speed = 0.0;
};

/// Delivers records from `path` in order. In timed mode the gaps between
/// records are scaled by 1/speed; results never depend on the wall clock.
class ReplaySource final : public RecordSource {
 public:
  ReplaySource(const std::filesystem::path& path, ReplayOptions options = {});
  std::optional<SessionRecord> next() override;

 private:
  LogReader reader_;
  ReplayOptions options_;
  std::optional<TimestampUs> first_t_;
  std::int64_t start_ns_ = 0;
};

void replay(const std::filesystem::path& path, ReplayOptions options,
            const std::function<void(const SessionRecord&)>& sink);

std::vector<SessionRecord> read_log(const std::filesystem::path& path);

}  // namespace stillness::session
