#pragma once

// Serial framing of the armband's USB BLE dongle (BGAPI) and the armband's
// GATT-level packets. Everything here is a pure function over byte buffers,
// except BgapiStreamDecoder which owns its input buffer.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stillness/types.hpp"

namespace stillness::protocol {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kMaxPayload = 255;

enum class MessageType : std::uint8_t { command, response, event };

/// Bit 7 clear means command when the bytes travel host to dongle and
/// response when they travel back; bit 7 set is always an event.
enum class Direction { host_to_dongle, dongle_to_host };

struct BgapiFrame {
  MessageType type = MessageType::command;
  std::uint8_t class_id = 0;
  std::uint8_t command_id = 0;
  Bytes payload;

  std::uint8_t payload_len() const { return static_cast<std::uint8_t>(payload.size()); }

  friend bool operator==(const BgapiFrame&, const BgapiFrame&) = default;
};

/// Read position over a borrowed byte buffer.
class ByteCursor {
 public:
  explicit ByteCursor(ByteView data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t consumed() const { return pos_; }
  bool empty() const { return remaining() == 0; }
  ByteView rest() const { return data_.subspan(pos_); }
  void advance(std::size_t n);

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

/// Decodes one frame at the cursor and advances past it.
/// Throws Error{TruncatedFrame} (cursor untouched) when the buffer holds less
/// than the declared frame, Error{InvalidHeader} when reserved header bits are
/// set.
BgapiFrame decode_bgapi_frame(ByteCursor& cursor, Direction dir = Direction::host_to_dongle);

Bytes encode_bgapi_frame(const BgapiFrame& frame);
Bytes encode_bgapi_command(std::uint8_t class_id, std::uint8_t command_id, ByteView payload = {});

/// Incremental decoder for a serial byte stream. Invalid headers are skipped
/// one byte at a time until a plausible frame boundary is found.
class BgapiStreamDecoder {
 public:
  explicit BgapiStreamDecoder(Direction dir = Direction::dongle_to_host) : dir_(dir) {}

  void feed(ByteView bytes);
  std::optional<BgapiFrame> next();

  std::size_t buffered() const { return buffer_.size(); }
  std::size_t dropped_bytes() const { return dropped_; }

 private:
  Direction dir_;
  std::deque<std::uint8_t> buffer_;
  std::size_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Device constants and GATT handle layout

struct DeviceConstants {
  double quat_scale = 16384.0;
  double accel_scale = 2048.0;  // raw per g
  double gyro_scale = 16.0;     // raw per deg/s
  double imu_rate_hz = 50.0;
  double emg_rate_hz = 200.0;

  friend bool operator==(const DeviceConstants&, const DeviceConstants&) = default;
};

/// Characteristic value handles (and their notification descriptors) of the
/// published firmware.
struct HandleMap {
  std::uint16_t command = 0x19;
  std::uint16_t imu = 0x1c;
  std::uint16_t imu_cccd = 0x1d;
  std::uint16_t classifier = 0x23;
  std::uint16_t classifier_cccd = 0x24;
  std::array<std::uint16_t, 4> emg = {0x2b, 0x2e, 0x31, 0x34};
  std::array<std::uint16_t, 4> emg_cccd = {0x2c, 0x2f, 0x32, 0x35};

  friend bool operator==(const HandleMap&, const HandleMap&) = default;
};

struct ProtocolConfig {
  DeviceConstants constants;
  HandleMap handles;
};

enum class PacketKind { imu, emg, classifier, other };

PacketKind classify_handle(std::uint16_t handle, const HandleMap& map);

// ---------------------------------------------------------------------------
// Sensor packets

/// Unscaled IMU fields in wire order.
struct RawImu {
  std::array<std::int16_t, 4> quat{};  // w, x, y, z
  std::array<std::int16_t, 3> accel{};
  std::array<std::int16_t, 3> gyro{};

  friend bool operator==(const RawImu&, const RawImu&) = default;
};

struct ImuFrame {
  TimestampUs t_us = 0;
  Quaternion quat;
  Vec3 accel;  // g
  Vec3 gyro;   // deg/s
};

struct EmgFrame {
  TimestampUs t_us = 0;
  std::array<std::int8_t, kEmgChannels> channels{};

  friend bool operator==(const EmgFrame&, const EmgFrame&) = default;
};

inline constexpr std::size_t kImuPacketSize = 20;
inline constexpr std::size_t kEmgPacketSize = 16;

RawImu decode_imu_payload(ByteView payload);
Bytes encode_imu_payload(const RawImu& raw);
ImuFrame scale_imu(const RawImu& raw, TimestampUs t_us, const DeviceConstants& k = {});
ImuFrame parse_imu_packet(ByteView payload, TimestampUs t_us, const DeviceConstants& k = {});

/// True when the quaternion norm is within 1 +/- 1e-2.
bool is_normalized(const ImuFrame& frame);

/// Two consecutive samples; the second is stamped half an EMG period later.
std::pair<EmgFrame, EmgFrame> parse_emg_packet(ByteView payload, TimestampUs t_us,
                                               const DeviceConstants& k = {});

// ---------------------------------------------------------------------------
// Commands written to the armband's command characteristic

namespace emg_mode {
inline constexpr std::uint8_t none = 0x00;
inline constexpr std::uint8_t filtered = 0x02;
inline constexpr std::uint8_t raw = 0x03;
}  // namespace emg_mode

namespace imu_mode {
inline constexpr std::uint8_t none = 0x00;
inline constexpr std::uint8_t data = 0x01;
inline constexpr std::uint8_t events = 0x02;
inline constexpr std::uint8_t all = 0x03;
inline constexpr std::uint8_t raw = 0x04;
}  // namespace imu_mode

namespace classifier_mode {
inline constexpr std::uint8_t disabled = 0x00;
inline constexpr std::uint8_t enabled = 0x01;
}  // namespace classifier_mode

struct MyoCommand {
  std::uint8_t command_id = 0;
  Bytes payload;

  /// command id, payload length, payload.
  Bytes encode() const;
};

inline constexpr std::uint8_t kSetModeCommand = 0x01;
inline constexpr std::uint8_t kSetSleepModeCommand = 0x09;

Bytes build_set_mode_command(std::uint8_t emg, std::uint8_t imu, std::uint8_t classifier);
Bytes build_never_sleep_command();

// ---------------------------------------------------------------------------
// BGAPI messages used by the bridge

namespace bgapi {
inline constexpr std::uint8_t kClassConnection = 3;
inline constexpr std::uint8_t kClassAttClient = 4;
inline constexpr std::uint8_t kClassGap = 6;

inline constexpr std::uint8_t kConnectionDisconnect = 0;  // command
inline constexpr std::uint8_t kConnectionStatus = 0;      // event
inline constexpr std::uint8_t kConnectionDisconnected = 4;  // event

inline constexpr std::uint8_t kAttClientAttributeWrite = 5;  // command
inline constexpr std::uint8_t kAttClientAttributeValue = 5;  // event

inline constexpr std::uint8_t kGapDiscover = 2;
inline constexpr std::uint8_t kGapConnectDirect = 3;
inline constexpr std::uint8_t kGapEndProcedure = 4;
inline constexpr std::uint8_t kGapScanResponse = 0;  // event
}  // namespace bgapi

using MacAddress = std::array<std::uint8_t, 6>;  // wire (little-endian) order

struct AttributeValue {
  std::uint8_t connection = 0;
  std::uint16_t handle = 0;
  std::uint8_t type = 0;
  Bytes value;
};

struct ScanResponse {
  std::int8_t rssi = 0;
  std::uint8_t packet_type = 0;
  MacAddress sender{};
  std::uint8_t address_type = 0;
  std::uint8_t bond = 0;
  Bytes data;  // advertising data
};

struct ConnectionStatus {
  std::uint8_t connection = 0;
  std::uint8_t flags = 0;
  MacAddress address{};
};

/// nullopt when the frame is not the corresponding event or is malformed.
std::optional<AttributeValue> as_attribute_value(const BgapiFrame& frame);
std::optional<ScanResponse> as_scan_response(const BgapiFrame& frame);
std::optional<ConnectionStatus> as_connection_status(const BgapiFrame& frame);

BgapiFrame make_attribute_value_event(const AttributeValue& value);
BgapiFrame make_scan_response_event(const ScanResponse& response);

Bytes build_attribute_write(std::uint8_t connection, std::uint16_t handle, ByteView data);
Bytes build_gap_discover(std::uint8_t mode = 1);
Bytes build_gap_end_procedure();
Bytes build_gap_connect_direct(const MacAddress& address, std::uint8_t address_type = 0);
Bytes build_disconnect(std::uint8_t connection);

/// Complete (0x09) or shortened (0x08) local name from advertising data.
std::optional<std::string> advertised_name(ByteView adv_data);

/// True when the advertising data lists the armband's control service.
bool advertises_myo_service(ByteView adv_data);

/// "aa:bb:cc:dd:ee:ff", most significant byte first.
std::string format_mac(const MacAddress& address);

}  // namespace stillness::protocol
