#pragma once

// Live hardware path: the BLE dongle's virtual serial port, device
// discovery, connection set-up and a RecordSource over the notification
// stream. Only SerialPort touches the operating system; DongleClient works
// over any ByteTransport so the conversation can be scripted in tests.

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stillness/protocol.hpp"
#include "stillness/session.hpp"

namespace stillness::dongle {

class ByteTransport {
 public:
  virtual ~ByteTransport() = default;
  virtual void write(protocol::ByteView bytes) = 0;
  /// Reads up to out.size() bytes, waiting at most `timeout`. Returns 0 on
  /// timeout.
  virtual std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) = 0;
};

/// POSIX tty in raw mode.
class SerialPort final : public ByteTransport {
 public:
  /// Throws Error{NoDongle} when the device cannot be opened.
  static std::unique_ptr<SerialPort> open(const std::string& path);
  ~SerialPort() override;

  void write(protocol::ByteView bytes) override;
  std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override;

 private:
  explicit SerialPort(int fd) : fd_(fd) {}
  int fd_;
};

struct DiscoveredDevice {
  protocol::MacAddress address{};
  std::uint8_t address_type = 0;
  std::string name;
  std::int8_t rssi = 0;
  bool is_myo = false;
};

class DongleClient {
 public:
  explicit DongleClient(ByteTransport& transport, protocol::ProtocolConfig cfg = {});

  /// Discovers for `duration`; devices are listed in order of first sighting.
  std::vector<DiscoveredDevice> scan(std::chrono::milliseconds duration, bool myo_only = true);

  /// Connects and returns the connection handle. Throws Error{Timeout}.
  std::uint8_t connect(const DiscoveredDevice& device, std::chrono::milliseconds timeout);

  /// Enables notifications and writes the set-mode and never-sleep commands.
  void start_streaming(std::uint8_t emg_mode = protocol::emg_mode::filtered,
                       std::uint8_t imu_mode = protocol::imu_mode::data,
                       std::uint8_t classifier = protocol::classifier_mode::disabled);

  void disconnect();

  /// Next decoded frame from the dongle, or nullopt after `timeout`.
  std::optional<protocol::BgapiFrame> next_frame(std::chrono::milliseconds timeout);

  const protocol::ProtocolConfig& config() const { return cfg_; }
  std::optional<std::uint8_t> connection() const { return connection_; }

 private:
  void send(const protocol::Bytes& bytes) { transport_.write(bytes); }

  ByteTransport& transport_;
  protocol::ProtocolConfig cfg_;
  protocol::BgapiStreamDecoder decoder_;
  std::optional<std::uint8_t> connection_;
};

/// Turns attribute notifications into session records stamped by `clock`
/// (microseconds). Classifier and unknown handles are skipped. The first
/// record is a meta record.
class LiveSource final : public session::RecordSource {
 public:
  using Clock = std::function<TimestampUs()>;

  LiveSource(DongleClient& client, Clock clock, std::chrono::milliseconds idle_timeout);
  std::optional<session::SessionRecord> next() override;

  std::size_t skipped() const { return skipped_; }

 private:
  DongleClient& client_;
  Clock clock_;
  std::chrono::milliseconds idle_timeout_;
  std::deque<session::SessionRecord> pending_;
  bool sent_meta_ = false;
  TimestampUs last_t_ = 0;
  std::size_t skipped_ = 0;
};

/// Microseconds since construction on the steady clock.
LiveSource::Clock steady_clock_us();

}  // namespace stillness::dongle
