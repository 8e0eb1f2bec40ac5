#include "stillness/osc.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <iostream>

#include "stillness/error.hpp"

namespace stillness::osc {

namespace {

void pad4(Bytes& out) {
  while (out.size() % 4 != 0) out.push_back(0);
}

void put_string(Bytes& out, const std::string& s) {
  out.insert(out.end(), s.begin(), s.end());
  out.push_back(0);
  pad4(out);
}

void put_u32be(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void validate_address(const std::string& address) {
  if (address.empty() || address.front() != '/') {
    throw Error(ErrorKind::InvalidAddress, "address must start with '/': \"" + address + "\"");
  }
  for (unsigned char c : address) {
    if (c == 0 || c >= 0x80) {
      throw Error(ErrorKind::InvalidAddress, "address contains NUL or non-ASCII byte");
    }
  }
}

std::string path(int id, const char* leaf) { return "/myo/" + std::to_string(id) + "/" + leaf; }

}  // namespace

Bytes encode_message(const OscMessage& msg) {
  validate_address(msg.address);

  std::string tags = ",";
  for (const auto& arg : msg.args) {
    if (std::holds_alternative<float>(arg)) {
      tags += 'f';
    } else if (std::holds_alternative<std::int32_t>(arg)) {
      tags += 'i';
    } else {
      if (std::get<std::string>(arg).find('\0') != std::string::npos) {
        throw Error(ErrorKind::UnsupportedArgType, "string argument contains NUL");
      }
      tags += 's';
    }
  }

  Bytes out;
  put_string(out, msg.address);
  put_string(out, tags);
  for (const auto& arg : msg.args) {
    if (const auto* f = std::get_if<float>(&arg)) {
      put_u32be(out, std::bit_cast<std::uint32_t>(*f));
    } else if (const auto* i = std::get_if<std::int32_t>(&arg)) {
      put_u32be(out, static_cast<std::uint32_t>(*i));
    } else {
      put_string(out, std::get<std::string>(arg));
    }
  }
  return out;
}

std::vector<OscMessage> emit_pipeline(const fusion::MotionState& state,
                                      const mapping::EmgEnvelopes& env,
                                      const mapping::SynthParams& params, int performer_id) {
  auto f = [](double v) -> OscArg { return static_cast<float>(v); };

  std::vector<OscMessage> out;
  out.reserve(kMessagesPerTick);

  OscMessage emg{path(performer_id, "emg"), {}};
  for (double e : env.env) emg.args.push_back(f(e));
  out.push_back(std::move(emg));

  out.push_back({path(performer_id, "euler"),
                 {f(state.euler.roll), f(state.euler.pitch), f(state.euler.yaw)}});
  out.push_back({path(performer_id, "accmag"), {f(state.accel_mag)}});
  out.push_back({path(performer_id, "gyrmag"), {f(state.gyro_mag)}});
  out.push_back({path(performer_id, "qom"), {f(state.qom)}});
  out.push_back({path(performer_id, "gate"), {f(params.master_gain)}});

  OscMessage synth{path(performer_id, "synth"), {}};
  for (double v : params.freqs) synth.args.push_back(f(v));
  for (double v : params.amps) synth.args.push_back(f(v));
  synth.args.push_back(f(params.drive));
  synth.args.push_back(f(params.master_gain));
  out.push_back(std::move(synth));
  return out;
}

void CaptureSink::send(std::span<const std::uint8_t> packet) {
  put_u32be(stream_, static_cast<std::uint32_t>(packet.size()));
  stream_.insert(stream_.end(), packet.begin(), packet.end());
  ++packets_;
}

UdpSender::UdpSender(std::string host, std::uint16_t port, ErrorLog log)
    : host_(std::move(host)), port_(port), log_(std::move(log)) {}

UdpSender::~UdpSender() {
  if (fd_ >= 0) ::close(fd_);
}

void UdpSender::report(const std::string& what) {
  ++errors_;
  const std::string line = "osc: " + what;
  if (log_) {
    log_(line);
  } else {
    std::cerr << line << '\n';
  }
}

bool UdpSender::ensure_socket() {
  if (fd_ >= 0) return true;

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  hints.ai_flags = AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port_);
  if (const int rc = ::getaddrinfo(host_.c_str(), service.c_str(), &hints, &res); rc != 0) {
    report("cannot resolve " + host_ + ": " + ::gai_strerror(rc));
    return false;
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    report(std::string("socket: ") + std::strerror(errno));
    ::freeaddrinfo(res);
    return false;
  }
  const auto* raw = reinterpret_cast<const std::uint8_t*>(res->ai_addr);
  addr_.assign(raw, raw + res->ai_addrlen);
  ::freeaddrinfo(res);
  fd_ = fd;
  return true;
}

void UdpSender::send(std::span<const std::uint8_t> packet) {
  if (packet.size() > kMaxDatagram) {
    throw Error(ErrorKind::MessageTooLarge,
                std::to_string(packet.size()) + " bytes exceeds " + std::to_string(kMaxDatagram));
  }
  if (!ensure_socket()) return;
  const ssize_t n =
      ::sendto(fd_, packet.data(), packet.size(), 0, reinterpret_cast<const sockaddr*>(addr_.data()),
               static_cast<socklen_t>(addr_.size()));
  if (n < 0 || static_cast<std::size_t>(n) != packet.size()) {
    report("sendto " + host_ + ":" + std::to_string(port_) + ": " + std::strerror(errno));
    return;
  }
  ++sent_;
}

void send_udp(std::span<const std::uint8_t> bytes, const std::string& host, std::uint16_t port) {
  UdpSender sender(host, port);
  sender.send(bytes);
}

}  // namespace stillness::osc
