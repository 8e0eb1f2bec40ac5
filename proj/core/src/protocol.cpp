#include "stillness/protocol.hpp"

#include <algorithm>
#include <cstdio>

#include "stillness/error.hpp"

namespace stillness::protocol {

namespace {

constexpr std::uint8_t kEventBit = 0x80;
// Technology type (bits 6..3) and length high bits (2..0); this bridge only
// speaks BLE frames with single-byte lengths.
constexpr std::uint8_t kReservedBits = 0x7f;

std::int16_t read_i16le(ByteView b, std::size_t at) {
  return static_cast<std::int16_t>(static_cast<std::uint16_t>(b[at]) |
                                   static_cast<std::uint16_t>(b[at + 1]) << 8);
}

void put_i16le(Bytes& out, std::int16_t v) {
  const auto u = static_cast<std::uint16_t>(v);
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>(u >> 8));
}

void put_u16le(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

enum class HeaderStatus { ok, truncated, invalid };

struct HeaderInfo {
  HeaderStatus status = HeaderStatus::truncated;
  std::size_t frame_size = 0;
};

template <typename Range>
HeaderInfo inspect_header(const Range& bytes) {
  if (bytes.size() < kHeaderSize) return {HeaderStatus::truncated, 0};
  if ((bytes[0] & kReservedBits) != 0) return {HeaderStatus::invalid, 0};
  const std::size_t size = kHeaderSize + bytes[1];
  if (bytes.size() < size) return {HeaderStatus::truncated, size};
  return {HeaderStatus::ok, size};
}

MessageType classify(std::uint8_t header0, Direction dir) {
  if (header0 & kEventBit) return MessageType::event;
  return dir == Direction::host_to_dongle ? MessageType::command : MessageType::response;
}

}  // namespace

void ByteCursor::advance(std::size_t n) {
  if (n > remaining()) throw Error(ErrorKind::TruncatedFrame, "advance past end of buffer");
  pos_ += n;
}

BgapiFrame decode_bgapi_frame(ByteCursor& cursor, Direction dir) {
  const ByteView bytes = cursor.rest();
  const HeaderInfo info = inspect_header(bytes);
  switch (info.status) {
    case HeaderStatus::truncated:
      throw Error(ErrorKind::TruncatedFrame,
                  "have " + std::to_string(bytes.size()) + " bytes, need " +
                      std::to_string(std::max(info.frame_size, kHeaderSize)));
    case HeaderStatus::invalid:
      throw Error(ErrorKind::InvalidHeader,
                  "reserved bits set in header byte " + std::to_string(bytes[0]));
    case HeaderStatus::ok:
      break;
  }
  BgapiFrame frame;
  frame.type = classify(bytes[0], dir);
  frame.class_id = bytes[2];
  frame.command_id = bytes[3];
  frame.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + info.frame_size);
  cursor.advance(info.frame_size);
  return frame;
}

Bytes encode_bgapi_frame(const BgapiFrame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw Error(ErrorKind::PayloadTooLarge,
                std::to_string(frame.payload.size()) + " bytes exceeds 255");
  }
  Bytes out;
  out.reserve(kHeaderSize + frame.payload.size());
  out.push_back(frame.type == MessageType::event ? kEventBit : 0x00);
  out.push_back(static_cast<std::uint8_t>(frame.payload.size()));
  out.push_back(frame.class_id);
  out.push_back(frame.command_id);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Bytes encode_bgapi_command(std::uint8_t class_id, std::uint8_t command_id, ByteView payload) {
  return encode_bgapi_frame(
      BgapiFrame{MessageType::command, class_id, command_id, Bytes(payload.begin(), payload.end())});
}

void BgapiStreamDecoder::feed(ByteView bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<BgapiFrame> BgapiStreamDecoder::next() {
  for (;;) {
    const HeaderInfo info = inspect_header(buffer_);
    if (info.status == HeaderStatus::truncated) return std::nullopt;
    if (info.status == HeaderStatus::invalid) {
      buffer_.pop_front();
      ++dropped_;
      continue;
    }
    BgapiFrame frame;
    frame.type = classify(buffer_[0], dir_);
    frame.class_id = buffer_[2];
    frame.command_id = buffer_[3];
    frame.payload.assign(buffer_.begin() + kHeaderSize, buffer_.begin() + info.frame_size);
    buffer_.erase(buffer_.begin(), buffer_.begin() + info.frame_size);
    return frame;
  }
}

PacketKind classify_handle(std::uint16_t handle, const HandleMap& map) {
  if (handle == map.imu) return PacketKind::imu;
  if (std::find(map.emg.begin(), map.emg.end(), handle) != map.emg.end()) return PacketKind::emg;
  if (handle == map.classifier) return PacketKind::classifier;
  return PacketKind::other;
}

RawImu decode_imu_payload(ByteView payload) {
  if (payload.size() != kImuPacketSize) {
    throw Error(ErrorKind::WrongLength,
                "IMU packet has " + std::to_string(payload.size()) + " bytes, expected 20");
  }
  RawImu raw;
  std::size_t at = 0;
  for (auto& v : raw.quat) v = read_i16le(payload, (at++) * 2);
  for (auto& v : raw.accel) v = read_i16le(payload, (at++) * 2);
  for (auto& v : raw.gyro) v = read_i16le(payload, (at++) * 2);
  return raw;
}

Bytes encode_imu_payload(const RawImu& raw) {
  Bytes out;
  out.reserve(kImuPacketSize);
  for (auto v : raw.quat) put_i16le(out, v);
  for (auto v : raw.accel) put_i16le(out, v);
  for (auto v : raw.gyro) put_i16le(out, v);
  return out;
}

ImuFrame scale_imu(const RawImu& raw, TimestampUs t_us, const DeviceConstants& k) {
  ImuFrame f;
  f.t_us = t_us;
  f.quat = {raw.quat[0] / k.quat_scale, raw.quat[1] / k.quat_scale, raw.quat[2] / k.quat_scale,
            raw.quat[3] / k.quat_scale};
  f.accel = {raw.accel[0] / k.accel_scale, raw.accel[1] / k.accel_scale,
             raw.accel[2] / k.accel_scale};
  f.gyro = {raw.gyro[0] / k.gyro_scale, raw.gyro[1] / k.gyro_scale, raw.gyro[2] / k.gyro_scale};
  return f;
}

ImuFrame parse_imu_packet(ByteView payload, TimestampUs t_us, const DeviceConstants& k) {
  return scale_imu(decode_imu_payload(payload), t_us, k);
}

bool is_normalized(const ImuFrame& frame) {
  const double n = frame.quat.norm();
  return std::isfinite(n) && n >= 1.0 - 1e-2 && n <= 1.0 + 1e-2;
}

std::pair<EmgFrame, EmgFrame> parse_emg_packet(ByteView payload, TimestampUs t_us,
                                               const DeviceConstants& k) {
  if (payload.size() != kEmgPacketSize) {
    throw Error(ErrorKind::WrongLength,
                "EMG packet has " + std::to_string(payload.size()) + " bytes, expected 16");
  }
  EmgFrame a, b;
  a.t_us = t_us;
  b.t_us = t_us + static_cast<TimestampUs>(0.5e6 / k.emg_rate_hz + 0.5);
  for (std::size_t i = 0; i < kEmgChannels; ++i) {
    a.channels[i] = static_cast<std::int8_t>(payload[i]);
    b.channels[i] = static_cast<std::int8_t>(payload[kEmgChannels + i]);
  }
  return {a, b};
}

Bytes MyoCommand::encode() const {
  if (payload.size() > kMaxPayload) {
    throw Error(ErrorKind::PayloadTooLarge, "command payload exceeds 255 bytes");
  }
  Bytes out;
  out.reserve(2 + payload.size());
  out.push_back(command_id);
  out.push_back(static_cast<std::uint8_t>(payload.size()));
  for (auto b : payload) out.push_back(b);
  return out;
}

Bytes build_set_mode_command(std::uint8_t emg, std::uint8_t imu, std::uint8_t classifier) {
  if (emg != emg_mode::none && emg != emg_mode::filtered && emg != emg_mode::raw) {
    throw Error(ErrorKind::InvalidMode, "emg mode " + std::to_string(emg));
  }
  if (imu > imu_mode::raw) throw Error(ErrorKind::InvalidMode, "imu mode " + std::to_string(imu));
  if (classifier > classifier_mode::enabled) {
    throw Error(ErrorKind::InvalidMode, "classifier mode " + std::to_string(classifier));
  }
  return MyoCommand{kSetModeCommand, {emg, imu, classifier}}.encode();
}

Bytes build_never_sleep_command() { return MyoCommand{kSetSleepModeCommand, {0x01}}.encode(); }

std::optional<AttributeValue> as_attribute_value(const BgapiFrame& frame) {
  if (frame.type != MessageType::event || frame.class_id != bgapi::kClassAttClient ||
      frame.command_id != bgapi::kAttClientAttributeValue) {
    return std::nullopt;
  }
  const Bytes& p = frame.payload;
  if (p.size() < 5) return std::nullopt;
  const std::size_t len = p[4];
  if (p.size() != 5 + len) return std::nullopt;
  AttributeValue v;
  v.connection = p[0];
  v.handle = static_cast<std::uint16_t>(p[1] | p[2] << 8);
  v.type = p[3];
  v.value.assign(p.begin() + 5, p.end());
  return v;
}

std::optional<ScanResponse> as_scan_response(const BgapiFrame& frame) {
  if (frame.type != MessageType::event || frame.class_id != bgapi::kClassGap ||
      frame.command_id != bgapi::kGapScanResponse) {
    return std::nullopt;
  }
  const Bytes& p = frame.payload;
  if (p.size() < 11) return std::nullopt;
  const std::size_t len = p[10];
  if (p.size() != 11 + len) return std::nullopt;
  ScanResponse r;
  r.rssi = static_cast<std::int8_t>(p[0]);
  r.packet_type = p[1];
  std::copy(p.begin() + 2, p.begin() + 8, r.sender.begin());
  r.address_type = p[8];
  r.bond = p[9];
  r.data.assign(p.begin() + 11, p.end());
  return r;
}

std::optional<ConnectionStatus> as_connection_status(const BgapiFrame& frame) {
  if (frame.type != MessageType::event || frame.class_id != bgapi::kClassConnection ||
      frame.command_id != bgapi::kConnectionStatus || frame.payload.size() < 8) {
    return std::nullopt;
  }
  ConnectionStatus s;
  s.connection = frame.payload[0];
  s.flags = frame.payload[1];
  std::copy(frame.payload.begin() + 2, frame.payload.begin() + 8, s.address.begin());
  return s;
}

BgapiFrame make_attribute_value_event(const AttributeValue& value) {
  BgapiFrame f{MessageType::event, bgapi::kClassAttClient, bgapi::kAttClientAttributeValue, {}};
  f.payload.push_back(value.connection);
  put_u16le(f.payload, value.handle);
  f.payload.push_back(value.type);
  f.payload.push_back(static_cast<std::uint8_t>(value.value.size()));
  f.payload.insert(f.payload.end(), value.value.begin(), value.value.end());
  return f;
}

BgapiFrame make_scan_response_event(const ScanResponse& r) {
  BgapiFrame f{MessageType::event, bgapi::kClassGap, bgapi::kGapScanResponse, {}};
  f.payload.push_back(static_cast<std::uint8_t>(r.rssi));
  f.payload.push_back(r.packet_type);
  f.payload.insert(f.payload.end(), r.sender.begin(), r.sender.end());
  f.payload.push_back(r.address_type);
  f.payload.push_back(r.bond);
  f.payload.push_back(static_cast<std::uint8_t>(r.data.size()));
  f.payload.insert(f.payload.end(), r.data.begin(), r.data.end());
  return f;
}

Bytes build_attribute_write(std::uint8_t connection, std::uint16_t handle, ByteView data) {
  if (data.size() > kMaxPayload - 4) {
    throw Error(ErrorKind::PayloadTooLarge, "attribute value too large");
  }
  Bytes p{connection};
  put_u16le(p, handle);
  p.push_back(static_cast<std::uint8_t>(data.size()));
  p.insert(p.end(), data.begin(), data.end());
  return encode_bgapi_command(bgapi::kClassAttClient, bgapi::kAttClientAttributeWrite, p);
}

Bytes build_gap_discover(std::uint8_t mode) {
  const std::uint8_t p[] = {mode};
  return encode_bgapi_command(bgapi::kClassGap, bgapi::kGapDiscover, p);
}

Bytes build_gap_end_procedure() {
  return encode_bgapi_command(bgapi::kClassGap, bgapi::kGapEndProcedure);
}

Bytes build_gap_connect_direct(const MacAddress& address, std::uint8_t address_type) {
  Bytes p(address.begin(), address.end());
  p.push_back(address_type);
  put_u16le(p, 6);   // conn interval min (1.25 ms units)
  put_u16le(p, 6);   // conn interval max
  put_u16le(p, 64);  // supervision timeout (10 ms units)
  put_u16le(p, 0);   // slave latency
  return encode_bgapi_command(bgapi::kClassGap, bgapi::kGapConnectDirect, p);
}

Bytes build_disconnect(std::uint8_t connection) {
  const std::uint8_t p[] = {connection};
  return encode_bgapi_command(bgapi::kClassConnection, bgapi::kConnectionDisconnect, p);
}

namespace {

// Walks length-type-value advertising structures; stops at the first
// malformed entry.
template <typename Fn>
void for_each_ad_field(ByteView adv, Fn&& fn) {
  std::size_t i = 0;
  while (i < adv.size()) {
    const std::size_t len = adv[i];
    if (len == 0 || i + 1 + len > adv.size()) return;
    fn(adv[i + 1], adv.subspan(i + 2, len - 1));
    i += 1 + len;
  }
}

// d5060001-a904-deb9-4748-2c7f4a124842, little-endian.
constexpr std::array<std::uint8_t, 16> kMyoControlService = {
    0x42, 0x48, 0x12, 0x4a, 0x7f, 0x2c, 0x48, 0x47,
    0xb9, 0xde, 0x04, 0xa9, 0x01, 0x00, 0x06, 0xd5};

}  // namespace

std::optional<std::string> advertised_name(ByteView adv_data) {
  std::optional<std::string> shortened;
  std::optional<std::string> complete;
  for_each_ad_field(adv_data, [&](std::uint8_t type, ByteView value) {
    if (type == 0x09) complete.emplace(value.begin(), value.end());
    if (type == 0x08) shortened.emplace(value.begin(), value.end());
  });
  return complete ? complete : shortened;
}

bool advertises_myo_service(ByteView adv_data) {
  bool found = false;
  for_each_ad_field(adv_data, [&](std::uint8_t type, ByteView value) {
    if (type != 0x06 && type != 0x07) return;
    for (std::size_t i = 0; i + 16 <= value.size(); i += 16) {
      if (std::equal(kMyoControlService.begin(), kMyoControlService.end(), value.begin() + i)) {
        found = true;
      }
    }
  });
  return found;
}

std::string format_mac(const MacAddress& address) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", address[5], address[4],
                address[3], address[2], address[1], address[0]);
  return buf;
}

}  // namespace stillness::protocol
