#include "stillness/dongle.hpp"

#include <fcntl.h>
#include <poll.h>
#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "stillness/error.hpp"

namespace stillness::dongle {

using namespace std::chrono_literals;
using steady = std::chrono::steady_clock;

std::unique_ptr<SerialPort> SerialPort::open(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDWR | O_NOCTTY | O_CLOEXEC);
  if (fd < 0) {
    throw Error(ErrorKind::NoDongle, "cannot open " + path + ": " + std::strerror(errno));
  }
  termios tio{};
  if (::tcgetattr(fd, &tio) != 0) {
    ::close(fd);
    throw Error(ErrorKind::NoDongle, path + " is not a serial device");
  }
  ::cfmakeraw(&tio);
  ::cfsetispeed(&tio, B115200);
  ::cfsetospeed(&tio, B115200);
  tio.c_cflag |= CLOCAL | CREAD;
  tio.c_cc[VMIN] = 0;
  tio.c_cc[VTIME] = 0;
  if (::tcsetattr(fd, TCSANOW, &tio) != 0) {
    ::close(fd);
    throw Error(ErrorKind::NoDongle, "cannot configure " + path);
  }
  ::tcflush(fd, TCIOFLUSH);
  return std::unique_ptr<SerialPort>(new SerialPort(fd));
}

SerialPort::~SerialPort() { ::close(fd_); }

void SerialPort::write(protocol::ByteView bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::write(fd_, bytes.data() + off, bytes.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorKind::IoError, std::string("serial write: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::size_t SerialPort::read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (rc < 0 && errno != EINTR) {
    throw Error(ErrorKind::IoError, std::string("serial poll: ") + std::strerror(errno));
  }
  if (rc <= 0) return 0;
  const ssize_t n = ::read(fd_, out.data(), out.size());
  if (n < 0) {
    if (errno == EAGAIN || errno == EINTR) return 0;
    throw Error(ErrorKind::IoError, std::string("serial read: ") + std::strerror(errno));
  }
  return static_cast<std::size_t>(n);
}

DongleClient::DongleClient(ByteTransport& transport, protocol::ProtocolConfig cfg)
    : transport_(transport), cfg_(cfg), decoder_(protocol::Direction::dongle_to_host) {}

std::optional<protocol::BgapiFrame> DongleClient::next_frame(std::chrono::milliseconds timeout) {
  const auto deadline = steady::now() + timeout;
  std::array<std::uint8_t, 256> buf{};
  for (;;) {
    if (auto f = decoder_.next()) return f;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
    if (left <= 0ms) return std::nullopt;
    const std::size_t n = transport_.read(buf, left);
    if (n == 0) {
      if (steady::now() >= deadline) return std::nullopt;
      continue;
    }
    decoder_.feed(std::span<const std::uint8_t>(buf.data(), n));
  }
}

std::vector<DiscoveredDevice> DongleClient::scan(std::chrono::milliseconds duration, bool myo_only) {
  send(protocol::build_gap_end_procedure());
  send(protocol::build_gap_discover(1));

  std::vector<DiscoveredDevice> found;
  const auto deadline = steady::now() + duration;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
    if (left <= 0ms) break;
    const auto frame = next_frame(left);
    if (!frame) break;
    const auto resp = protocol::as_scan_response(*frame);
    if (!resp) continue;

    auto it = std::find_if(found.begin(), found.end(),
                           [&](const DiscoveredDevice& d) { return d.address == resp->sender; });
    if (it == found.end()) {
      found.push_back({resp->sender, resp->address_type, {}, resp->rssi, false});
      it = found.end() - 1;
    }
    it->rssi = resp->rssi;
    if (auto name = protocol::advertised_name(resp->data)) it->name = *name;
    if (protocol::advertises_myo_service(resp->data)) it->is_myo = true;
  }
  send(protocol::build_gap_end_procedure());

  if (myo_only) {
    std::erase_if(found, [](const DiscoveredDevice& d) { return !d.is_myo; });
  }
  return found;
}

std::uint8_t DongleClient::connect(const DiscoveredDevice& device,
                                   std::chrono::milliseconds timeout) {
  send(protocol::build_gap_end_procedure());
  send(protocol::build_gap_connect_direct(device.address, device.address_type));
  const auto deadline = steady::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
    if (left <= 0ms) break;
    const auto frame = next_frame(left);
    if (!frame) break;
    if (const auto status = protocol::as_connection_status(*frame);
        status && status->address == device.address) {
      connection_ = status->connection;
      return *connection_;
    }
  }
  throw Error(ErrorKind::Timeout, "no connection to " + protocol::format_mac(device.address));
}

void DongleClient::start_streaming(std::uint8_t emg, std::uint8_t imu, std::uint8_t classifier) {
  if (!connection_) throw Error(ErrorKind::NoDongle, "not connected");
  const std::uint8_t c = *connection_;
  const auto& h = cfg_.handles;
  const std::uint8_t enable_notify[] = {0x01, 0x00};

  send(protocol::build_attribute_write(c, h.imu_cccd, enable_notify));
  for (auto cccd : h.emg_cccd) send(protocol::build_attribute_write(c, cccd, enable_notify));
  send(protocol::build_attribute_write(c, h.command, protocol::build_never_sleep_command()));
  send(protocol::build_attribute_write(c, h.command,
                                       protocol::build_set_mode_command(emg, imu, classifier)));
}

void DongleClient::disconnect() {
  if (!connection_) return;
  send(protocol::build_disconnect(*connection_));
  connection_.reset();
}

LiveSource::LiveSource(DongleClient& client, Clock clock, std::chrono::milliseconds idle_timeout)
    : client_(client), clock_(std::move(clock)), idle_timeout_(idle_timeout) {}

std::optional<session::SessionRecord> LiveSource::next() {
  if (!sent_meta_) {
    sent_meta_ = true;
    last_t_ = clock_();
    return session::meta_record(last_t_, session::make_meta(client_.config().constants, "live"));
  }
  while (pending_.empty()) {
    const auto frame = client_.next_frame(idle_timeout_);
    if (!frame) return std::nullopt;
    const auto value = protocol::as_attribute_value(*frame);
    if (!value) continue;

    const TimestampUs t = std::max(last_t_, clock_());
    try {
      switch (protocol::classify_handle(value->handle, client_.config().handles)) {
        case protocol::PacketKind::imu:
          pending_.push_back(session::imu_record(t, protocol::decode_imu_payload(value->value)));
          break;
        case protocol::PacketKind::emg: {
          const auto [a, b] = protocol::parse_emg_packet(value->value, t, client_.config().constants);
          pending_.push_back(session::emg_record(a));
          pending_.push_back(session::emg_record(b));
          break;
        }
        case protocol::PacketKind::classifier:
        case protocol::PacketKind::other:
          ++skipped_;
          break;
      }
    } catch (const Error&) {
      ++skipped_;  // malformed notification
    }
  }
  auto r = std::move(pending_.front());
  pending_.pop_front();
  last_t_ = std::max(last_t_, r.t_us);
  return r;
}

LiveSource::Clock steady_clock_us() {
  const auto start = steady::now();
  return [start] {
    return std::chrono::duration_cast<std::chrono::microseconds>(steady::now() - start).count();
  };
}

}  // namespace stillness::dongle
