#pragma once

// OSC 1.0 message encoding (no bundles) and a UDP sender.
//
// Address scheme emitted once per control tick, in this order:
//   /myo/{id}/emg     8 floats, EMG envelopes in [0, 1]
//   /myo/{id}/euler   3 floats, roll pitch yaw in radians
//   /myo/{id}/accmag  1 float, g
//   /myo/{id}/gyrmag  1 float, deg/s
//   /myo/{id}/qom     1 float
//   /myo/{id}/gate    1 float, master gain in [0, 1]
//   /myo/{id}/synth   18 floats, 8 freqs (Hz), 8 amps, drive, master gain

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stillness/fusion.hpp"
#include "stillness/mapping.hpp"

namespace stillness::osc {

using Bytes = std::vector<std::uint8_t>;
using OscArg = std::variant<float, std::int32_t, std::string>;

struct OscMessage {
  std::string address;
  std::vector<OscArg> args;

  friend bool operator==(const OscMessage&, const OscMessage&) = default;
};

inline constexpr std::size_t kMessagesPerTick = 7;
inline constexpr std::size_t kMaxDatagram = 1472;

/// Throws Error{InvalidAddress} for empty, non-'/'-prefixed or non-ASCII
/// addresses and Error{UnsupportedArgType} for strings holding NUL bytes.
Bytes encode_message(const OscMessage& msg);

std::vector<OscMessage> emit_pipeline(const fusion::MotionState& state,
                                      const mapping::EmgEnvelopes& env,
                                      const mapping::SynthParams& params, int performer_id);

/// Where encoded messages go. Implementations decide about transport
/// failures; the pipeline never stops on them.
class PacketSink {
 public:
  virtual ~PacketSink() = default;
  virtual void send(std::span<const std::uint8_t> packet) = 0;
};

/// Appends every packet to an in-memory stream, each prefixed by its
/// big-endian int32 length (OSC 1.0 stream framing).
class CaptureSink final : public PacketSink {
 public:
  void send(std::span<const std::uint8_t> packet) override;

  const Bytes& stream() const { return stream_; }
  std::size_t packets() const { return packets_; }

 private:
  Bytes stream_;
  std::size_t packets_ = 0;
};

/// One datagram per message. Socket failures are logged through the error
/// callback (stderr by default) and counted; later sends are still attempted.
class UdpSender final : public PacketSink {
 public:
  using ErrorLog = std::function<void(const std::string&)>;

  UdpSender(std::string host, std::uint16_t port, ErrorLog log = {});
  ~UdpSender() override;
  UdpSender(const UdpSender&) = delete;
  UdpSender& operator=(const UdpSender&) = delete;

  /// Throws Error{MessageTooLarge} before touching the socket when the
  /// datagram exceeds kMaxDatagram.
  void send(std::span<const std::uint8_t> packet) override;

  std::size_t sent() const { return sent_; }
  std::size_t errors() const { return errors_; }

 private:
  bool ensure_socket();
  void report(const std::string& what);

  std::string host_;
  std::uint16_t port_;
  ErrorLog log_;
  int fd_ = -1;
  std::vector<std::uint8_t> addr_;  // resolved sockaddr storage
  std::size_t sent_ = 0;
  std::size_t errors_ = 0;
};

void send_udp(std::span<const std::uint8_t> bytes, const std::string& host, std::uint16_t port);

}  // namespace stillness::osc
