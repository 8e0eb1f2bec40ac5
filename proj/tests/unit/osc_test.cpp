#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stillness/error.hpp"
#include "stillness/osc.hpp"

using namespace stillness;
using namespace stillness::osc;

namespace {

std::uint32_t bits(float f) {
  std::uint32_t b;
  std::memcpy(&b, &f, 4);
  return b;
}

// Loopback UDP socket on an ephemeral port.
class Receiver {
 public:
  Receiver() {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a);
    socklen_t len = sizeof a;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    port_ = ntohs(a.sin_port);
    timeval tv{2, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~Receiver() { ::close(fd_); }
  std::uint16_t port() const { return port_; }
  Bytes receive() {
    Bytes buf(2048);
    const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
    buf.resize(n > 0 ? std::size_t(n) : 0);
    return buf;
  }

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

}  // namespace

TEST(OscEncode, AddressOnly) {
  EXPECT_EQ(encode_message({"/a", {}}), (Bytes{0x2f, 0x61, 0x00, 0x00, 0x2c, 0x00, 0x00, 0x00}));
}

TEST(OscEncode, SingleFloat) {
  EXPECT_EQ(encode_message({"/qom", {1.0f}}),
            (Bytes{0x2f, 0x71, 0x6f, 0x6d, 0x00, 0x00, 0x00, 0x00, 0x2c, 0x66, 0x00, 0x00, 0x3f,
                   0x80, 0x00, 0x00}));
}

TEST(OscEncode, EightFloatsThroughOracle) {
  OscMessage m{"/myo/1/emg", {}};
  for (int i = 0; i < 8; ++i) m.args.push_back(0.125f * float(i));
  const auto b = encode_message(m);
  EXPECT_EQ(b.size(), 56u);
  const auto d = oracle::decode_osc(b);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->address, "/myo/1/emg");
  EXPECT_EQ(d->tags, "ffffffff");
  for (int i = 0; i < 8; ++i) EXPECT_EQ(d->f(std::size_t(i)), 0.125f * float(i));
}

TEST(OscEncode, IntAndStringArgs) {
  const auto d = oracle::decode_osc(encode_message({"/x", {std::int32_t{-2}, std::string("abcd")}}));
  ASSERT_TRUE(d);
  EXPECT_EQ(d->tags, "is");
  EXPECT_EQ(d->args[0].bits, 0xfffffffeu);
  EXPECT_EQ(d->args[1].text, "abcd");
}

TEST(OscEncode, RandomRoundTripBitExact) {
  std::mt19937 rng(1);
  std::uniform_int_distribution<std::uint32_t> word;
  std::uniform_int_distribution<int> len(0, 20), ch('a', 'z');
  for (int i = 0; i < 1000; ++i) {
    OscMessage m{"/", {}};
    for (int c = len(rng); c > 0; --c) m.address.push_back(char(ch(rng)));
    std::vector<std::uint32_t> expect;
    for (int a = len(rng); a > 0; --a) {
      std::uint32_t w = word(rng);
      float f;
      std::memcpy(&f, &w, 4);
      if (std::isnan(f)) continue;  // NaN payloads are not part of the contract
      m.args.push_back(f);
      expect.push_back(w);
    }
    const auto b = encode_message(m);
    ASSERT_EQ(b.size() % 4, 0u);
    const auto d = oracle::decode_osc(b);
    ASSERT_TRUE(d);
    ASSERT_EQ(d->address, m.address);
    ASSERT_EQ(d->args.size(), expect.size());
    for (std::size_t k = 0; k < expect.size(); ++k) ASSERT_EQ(d->args[k].bits, expect[k]);
  }
}

TEST(OscEncode, InvalidAddresses) {
  EXPECT_THROW(encode_message({"", {}}), Error);
  EXPECT_THROW(encode_message({"qom", {}}), Error);
  EXPECT_THROW(encode_message({"/caf\xc3\xa9", {}}), Error);
  EXPECT_THROW(encode_message({"/s", {std::string("a\0b", 3)}}), Error);
}

TEST(Emit, OrderAndShapes) {
  fusion::MotionState s;
  mapping::EmgEnvelopes env;
  mapping::SynthParams p;
  const auto msgs = emit_pipeline(s, env, p, 0);
  ASSERT_EQ(msgs.size(), kMessagesPerTick);
  const char* names[] = {"emg", "euler", "accmag", "gyrmag", "qom", "gate", "synth"};
  const std::size_t counts[] = {8, 3, 1, 1, 1, 1, 18};
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    EXPECT_EQ(msgs[i].address, std::string("/myo/0/") + names[i]);
    EXPECT_EQ(msgs[i].args.size(), counts[i]);
    const auto b = encode_message(msgs[i]);
    EXPECT_EQ(b.size() % 4, 0u);
    EXPECT_TRUE(oracle::decode_osc(b));
  }
}

TEST(Emit, IdentityAndMuted) {
  fusion::MotionState s;  // identity orientation, gate closed
  const auto msgs = emit_pipeline(s, {}, {}, 0);
  EXPECT_EQ(msgs[1].args, (std::vector<OscArg>{0.0f, 0.0f, 0.0f}));
  EXPECT_EQ(msgs[5].args, (std::vector<OscArg>{0.0f}));
}

TEST(Emit, PerformerNamespace) {
  EXPECT_EQ(emit_pipeline({}, {}, {}, 3)[4].address, "/myo/3/qom");
}

TEST(Emit, CarriesValues) {
  fusion::MotionState s;
  s.euler = {0.1, -0.2, 0.3};
  s.qom = 0.42;
  mapping::SynthParams p;
  p.freqs.fill(220.0);
  p.drive = 2.5;
  p.master_gain = 0.75;
  const auto msgs = emit_pipeline(s, {}, p, 0);
  EXPECT_EQ(std::get<float>(msgs[4].args[0]), 0.42f);
  EXPECT_EQ(std::get<float>(msgs[6].args[0]), 220.0f);
  EXPECT_EQ(std::get<float>(msgs[6].args[16]), 2.5f);
  EXPECT_EQ(std::get<float>(msgs[6].args[17]), 0.75f);
  EXPECT_EQ(bits(std::get<float>(msgs[1].args[1])), bits(-0.2f));
}

TEST(Capture, LengthPrefixedStream) {
  CaptureSink sink;
  const auto a = encode_message({"/a", {}});
  const auto q = encode_message({"/qom", {1.0f}});
  sink.send(a);
  sink.send(q);
  EXPECT_EQ(sink.packets(), 2u);
  const auto parts = oracle::split_osc_stream(sink.stream());
  ASSERT_TRUE(parts);
  ASSERT_EQ(parts->size(), 2u);
  EXPECT_EQ((*parts)[0], a);
  EXPECT_EQ((*parts)[1], q);
}

TEST(Udp, LoopbackRoundTrip) {
  Receiver rx;
  const auto msg = encode_message({"/myo/0/qom", {0.5f}});
  UdpSender tx("127.0.0.1", rx.port());
  tx.send(msg);
  EXPECT_EQ(rx.receive(), msg);
  EXPECT_EQ(tx.sent(), 1u);
  send_udp(msg, "127.0.0.1", rx.port());
  EXPECT_EQ(rx.receive(), msg);
}

TEST(Udp, OversizedRejectedBeforeSend) {
  Receiver rx;
  std::vector<std::string> log;
  UdpSender tx("127.0.0.1", rx.port(), [&](const std::string& l) { log.push_back(l); });
  const Bytes big(kMaxDatagram + 4, 0);
  try {
    tx.send(big);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MessageTooLarge);
  }
  EXPECT_EQ(tx.sent(), 0u);
  EXPECT_TRUE(log.empty());
}

TEST(Udp, UnreachableHostLoggedAndRetried) {
  std::vector<std::string> log;
  UdpSender tx("no-such-host.invalid", 9000, [&](const std::string& l) { log.push_back(l); });
  const auto msg = encode_message({"/a", {}});
  EXPECT_NO_THROW(tx.send(msg));
  EXPECT_NO_THROW(tx.send(msg));
  EXPECT_EQ(tx.errors(), 2u);
  EXPECT_EQ(log.size(), 2u);
  EXPECT_EQ(tx.sent(), 0u);
}
