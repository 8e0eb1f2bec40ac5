#include <deque>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "app.hpp"
#include "stillness/dongle.hpp"
#include "stillness/error.hpp"

using namespace stillness;
using namespace stillness::dongle;
using namespace std::chrono_literals;
using protocol::Bytes;

namespace {

// Scripted dongle: bytes queued with push() are handed out on read();
// everything the client writes is kept for inspection.
class FakeTransport final : public ByteTransport {
 public:
  void push(const Bytes& b) { rx_.insert(rx_.end(), b.begin(), b.end()); }
  void push(const protocol::BgapiFrame& f) { push(protocol::encode_bgapi_frame(f)); }

  void write(protocol::ByteView bytes) override {
    written.emplace_back(bytes.begin(), bytes.end());
    if (on_write) on_write(written.back());
  }
  std::size_t read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) override {
    if (rx_.empty()) {
      std::this_thread::sleep_for(std::min(timeout, std::chrono::milliseconds(2)));
      return 0;
    }
    // hand out odd-sized pieces to exercise reassembly
    const std::size_t n = std::min({out.size(), rx_.size(), std::size_t{7}});
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = rx_.front();
      rx_.pop_front();
    }
    return n;
  }

  std::vector<Bytes> written;
  std::function<void(const Bytes&)> on_write;

 private:
  std::deque<std::uint8_t> rx_;
};

const Bytes kMyoAdv = {0x04, 0x09, 'M', 'y', 'o', 0x11, 0x07, 0x42, 0x48, 0x12, 0x4a, 0x7f,
                       0x2c, 0x48, 0x47, 0xb9, 0xde, 0x04, 0xa9, 0x01, 0x00, 0x06, 0xd5};

protocol::BgapiFrame scan_response(protocol::MacAddress mac, const Bytes& adv) {
  protocol::ScanResponse r;
  r.rssi = -50;
  r.sender = mac;
  r.data = adv;
  return protocol::make_scan_response_event(r);
}

protocol::BgapiFrame connected(protocol::MacAddress mac, std::uint8_t conn = 0) {
  protocol::BgapiFrame f{protocol::MessageType::event, protocol::bgapi::kClassConnection,
                         protocol::bgapi::kConnectionStatus,
                         {conn, 0x05, mac[0], mac[1], mac[2], mac[3], mac[4], mac[5],
                          0, 6, 0, 64, 0, 0, 0, 0xff}};
  return f;
}

protocol::BgapiFrame notification(std::uint16_t handle, const Bytes& value) {
  return protocol::make_attribute_value_event({0, handle, 1, value});
}

}  // namespace

TEST(Dongle, NoDeviceNoListing) {
  FakeTransport t;
  DongleClient c(t);
  EXPECT_TRUE(c.scan(30ms).empty());
  ASSERT_GE(t.written.size(), 2u);
  EXPECT_EQ(t.written[0], protocol::build_gap_end_procedure());
  EXPECT_EQ(t.written[1], protocol::build_gap_discover());
  EXPECT_EQ(t.written.back(), protocol::build_gap_end_procedure());
}

TEST(Dongle, ScanDedupsAndFilters) {
  FakeTransport t;
  const protocol::MacAddress myo{1, 2, 3, 4, 5, 6}, other{9, 9, 9, 9, 9, 9};
  t.push(Bytes{0x00, 0x02, 0x06, 0x02, 0x00, 0x00});  // discover response, not a scan result
  t.push(scan_response(myo, kMyoAdv));
  t.push(scan_response(other, {0x05, 0x09, 'l', 'a', 'm', 'p'}));
  t.push(scan_response(myo, {}));
  DongleClient c(t);
  const auto all = c.scan(30ms, false);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].name, "Myo");
  EXPECT_TRUE(all[0].is_myo);
  EXPECT_EQ(all[1].name, "lamp");

  FakeTransport t2;
  t2.push(scan_response(myo, kMyoAdv));
  t2.push(scan_response(other, {}));
  DongleClient c2(t2);
  const auto myos = c2.scan(30ms);
  ASSERT_EQ(myos.size(), 1u);
  EXPECT_EQ(myos[0].address, myo);
}

TEST(Dongle, ConnectAndStartStreaming) {
  FakeTransport t;
  const protocol::MacAddress mac{1, 2, 3, 4, 5, 6};
  t.push(connected({7, 7, 7, 7, 7, 7}, 1));  // someone else
  t.push(connected(mac, 2));
  DongleClient c(t);
  DiscoveredDevice d;
  d.address = mac;
  EXPECT_EQ(c.connect(d, 200ms), 2);
  t.written.clear();
  c.start_streaming();
  const std::uint8_t on[] = {0x01, 0x00};
  const auto& h = c.config().handles;
  ASSERT_EQ(t.written.size(), 7u);
  EXPECT_EQ(t.written[0], protocol::build_attribute_write(2, h.imu_cccd, on));
  EXPECT_EQ(t.written[1], protocol::build_attribute_write(2, 0x2c, on));
  EXPECT_EQ(t.written[4], protocol::build_attribute_write(2, 0x35, on));
  EXPECT_EQ(t.written[5], protocol::build_attribute_write(2, 0x19, protocol::build_never_sleep_command()));
  EXPECT_EQ(t.written[6],
            protocol::build_attribute_write(2, 0x19, protocol::build_set_mode_command(2, 1, 0)));
  c.disconnect();
  EXPECT_EQ(t.written.back(), protocol::build_disconnect(2));
}

TEST(Dongle, ConnectTimeout) {
  FakeTransport t;
  DongleClient c(t);
  try {
    c.connect(DiscoveredDevice{}, 20ms);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Timeout);
  }
  EXPECT_THROW(c.start_streaming(), Error);
}

TEST(Dongle, NoSerialDevice) {
  try {
    SerialPort::open("/nonexistent/ttyACM9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoDongle);
  }
  EXPECT_THROW(SerialPort::open("/dev/null"), Error);  // not a tty
}

TEST(LiveSource, NotificationsBecomeRecords) {
  FakeTransport t;
  const protocol::RawImu imu{{16384, 0, 0, 0}, {0, 0, 2048}, {1, 2, 3}};
  Bytes emg(8, 0x05);
  emg.insert(emg.end(), 8, 0xfb);
  t.push(notification(0x1c, protocol::encode_imu_payload(imu)));
  t.push(notification(0x23, {1, 2, 3}));        // classifier: skipped
  t.push(notification(0x2e, emg));
  t.push(notification(0x1c, Bytes(5, 0)));      // malformed: skipped
  t.push(notification(0x99, Bytes(20, 0)));     // unknown handle: skipped
  DongleClient c(t);
  TimestampUs now = 1000;
  LiveSource src(c, [&] { return now += 10; }, 20ms);

  const auto meta = src.next();
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->kind(), session::RecordKind::meta);
  std::vector<session::SessionRecord> recs;
  while (auto r = src.next()) recs.push_back(*r);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(std::get<protocol::RawImu>(recs[0].data), imu);
  EXPECT_EQ(std::get<session::EmgSample>(recs[1].data)[0], 5);
  EXPECT_EQ(std::get<session::EmgSample>(recs[2].data)[0], -5);
  EXPECT_EQ(recs[2].t_us - recs[1].t_us, 2500);
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_GE(recs[i].t_us, recs[i - 1].t_us);
  EXPECT_EQ(src.skipped(), 3u);
}

TEST(ScanCommand, ListsMacAndName) {
  FakeTransport t;
  t.push(scan_response({0x11, 0x22, 0x33, 0x44, 0x55, 0x66}, kMyoAdv));
  std::ostringstream out;
  const auto devices = app::cmd_scan(t, 30ms, false, out);
  EXPECT_EQ(devices.size(), 1u);
  EXPECT_EQ(out.str(), "66:55:44:33:22:11  Myo\n");
}

TEST(ScanCommand, EmptyListing) {
  FakeTransport t;
  std::ostringstream out;
  EXPECT_TRUE(app::cmd_scan(t, 20ms, false, out).empty());
  EXPECT_TRUE(out.str().empty());
}
