#include "covercall/rtp.hpp"

#include <random>

#include "doctest.h"
#include "helpers.hpp"

using namespace covercall;

namespace {

crypto::SessionKeys keys() {
  return crypto::derive_keys(crypto::Bytes(32, 0x31));
}

fec::Block data_block(std::size_t capacity, std::uint16_t seq,
                      std::uint8_t task, std::uint8_t size) {
  fec::Block b;
  b.seq = seq;
  b.task = task;
  b.size = size;
  b.payload.resize(capacity);
  for (std::size_t i = 0; i < size; ++i)
    b.payload[i] = static_cast<std::uint8_t>(i * 3 + 1);
  return b;
}

struct FakeTransport : net::DatagramTransport {
  std::string addr;
  bool spoofing;
  std::vector<net::Datagram> sent;
  FakeTransport(std::string a, bool s) : addr(std::move(a)), spoofing(s) {}
  void send(const net::Datagram& d) override { sent.push_back(d); }
  const std::string& local_addr() const override { return addr; }
  bool supports_spoofing() const override { return spoofing; }
};

}  // namespace

TEST_CASE("frame/unframe round trip") {
  const auto k = keys();
  rtp::SenderState sender;
  sender.ssrc = 0xabcd1234;
  const auto block = data_block(156, 7, 3, 100);
  const auto packet = rtp::frame(block, k, sender, 160);
  CHECK(packet.ciphertext.size() == 160 + crypto::kAeadTagBytes);

  rtp::ReplayGuard guard;
  const auto res = rtp::unframe(packet, k, guard, 160);
  CHECK(res.status == rtp::UnframeStatus::Ok);
  REQUIRE(res.block.has_value());
  CHECK(*res.block == block);
}

TEST_CASE("wire serialization round trips and sizes are constant") {
  const auto k = keys();
  rtp::SenderState sender;
  sender.ssrc = 42;
  std::size_t expected = 0;
  // data, parity-style, and filler blocks all produce identical wire sizes
  for (auto b : {data_block(156, 0, 1, 156), data_block(156, 10, 0, 7),
                 data_block(156, 0xFFFF, 0, 156)}) {
    const auto packet = rtp::frame(b, k, sender, 160);
    const auto wire = rtp::serialize_packet(packet);
    if (expected == 0) expected = wire.size();
    CHECK(wire.size() == expected);
    const auto parsed = rtp::parse_packet(wire);
    REQUIRE(parsed.has_value());
    CHECK(parsed->ssrc == packet.ssrc);
    CHECK(parsed->seq == packet.seq);
    CHECK(parsed->timestamp == packet.timestamp);
    CHECK(parsed->ciphertext == packet.ciphertext);
    sender.advance();
  }
  CHECK(expected == 12 + 160 + crypto::kAeadTagBytes);
}

TEST_CASE("frame rejects blocks that do not fill the codec payload") {
  const auto k = keys();
  rtp::SenderState sender;
  CHECK_THROWS_AS(rtp::frame(data_block(100, 0, 1, 10), k, sender, 160),
                  rtp::SizeMismatch);
}

TEST_CASE("any ciphertext modification is an authentication failure") {
  const auto k = keys();
  rtp::SenderState sender;
  sender.ssrc = 1;
  const auto packet = rtp::frame(data_block(156, 0, 1, 50), k, sender, 160);

  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    auto bent = packet;
    const std::size_t at = rng() % bent.ciphertext.size();
    bent.ciphertext[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    rtp::ReplayGuard guard;
    CHECK(rtp::unframe(bent, k, guard, 160).status ==
          rtp::UnframeStatus::AuthFailure);
  }

  // header tampering breaks the bound associated data too
  auto bent = packet;
  bent.timestamp ^= 1;
  rtp::ReplayGuard guard;
  CHECK(rtp::unframe(bent, k, guard, 160).status ==
        rtp::UnframeStatus::AuthFailure);
}

TEST_CASE("exact duplicates are replays and do not disturb the session") {
  const auto k = keys();
  rtp::SenderState sender;
  sender.ssrc = 5;
  rtp::ReplayGuard guard;
  std::vector<rtp::RtpPacket> packets;
  for (int i = 0; i < 5; ++i) {
    packets.push_back(rtp::frame(data_block(156, static_cast<std::uint16_t>(i),
                                            1, 10),
                                 k, sender, 160));
    sender.advance();
  }
  for (const auto& p : packets)
    CHECK(rtp::unframe(p, k, guard, 160).status == rtp::UnframeStatus::Ok);
  for (const auto& p : packets)
    CHECK(rtp::unframe(p, k, guard, 160).status ==
          rtp::UnframeStatus::ReplayDetected);
  // and a fresh packet still passes afterwards
  const auto next = rtp::frame(data_block(156, 5, 1, 10), k, sender, 160);
  CHECK(rtp::unframe(next, k, guard, 160).status == rtp::UnframeStatus::Ok);
}

TEST_CASE("packets older than the replay window are rejected") {
  const auto k = keys();
  rtp::SenderState sender;
  std::vector<rtp::RtpPacket> packets;
  for (int i = 0; i < 100; ++i) {
    packets.push_back(rtp::frame(data_block(156, static_cast<std::uint16_t>(i),
                                            1, 1),
                                 k, sender, 160));
    sender.advance();
  }
  rtp::ReplayGuard guard;
  CHECK(rtp::unframe(packets[99], k, guard, 160).status ==
        rtp::UnframeStatus::Ok);
  // 99 - 64 = 35: anything at or below is outside the window
  CHECK(rtp::unframe(packets[35], k, guard, 160).status ==
        rtp::UnframeStatus::ReplayDetected);
  CHECK(rtp::unframe(packets[36], k, guard, 160).status ==
        rtp::UnframeStatus::Ok);
}

TEST_CASE("sequence rollover keeps the nonce moving") {
  const auto k = keys();
  rtp::SenderState sender;
  sender.ssrc = 12;
  sender.seq = 0xFFFE;
  rtp::ReplayGuard guard;
  std::vector<std::vector<std::uint8_t>> wires;
  for (int i = 0; i < 4; ++i) {
    const auto block = data_block(156, sender.seq, 1, 3);
    const auto p = rtp::frame(block, k, sender, 160);
    wires.push_back(rtp::serialize_packet(p));
    sender.advance();
    const auto parsed = rtp::parse_packet(wires.back());
    CHECK(rtp::unframe(*parsed, k, guard, 160).status ==
          rtp::UnframeStatus::Ok);
  }
  CHECK(sender.rollover == 1);
}

TEST_CASE("RTCP cover packets: right size, fresh content, key separation") {
  const auto k = keys();
  rtp::SenderState rtcp_sender;
  rtcp_sender.ssrc = 77;
  std::mt19937_64 rng(3);
  const auto a = rtp::rtcp_packet(k, rtcp_sender, 160, rng);
  const auto b = rtp::rtcp_packet(k, rtcp_sender, 160, rng);
  CHECK(a.size() == b.size());
  CHECK(a.size() == 12 + 160 + crypto::kAeadTagBytes);
  CHECK(a != b);

  rtp::ReplayGuard g1;
  CHECK(rtp::rtcp_check(a, k, g1));
  CHECK(rtp::rtcp_check(b, k, g1));
  CHECK(!rtp::rtcp_check(a, k, g1));  // replayed RTCP is dropped too

  // an RTP-keyed packet must not authenticate as RTCP and vice versa
  rtp::SenderState rtp_sender;
  const auto rtp_packet = rtp::frame(data_block(156, 0, 1, 5), k, rtp_sender,
                                     160);
  rtp::ReplayGuard g2;
  CHECK(!rtp::rtcp_check(rtp::serialize_packet(rtp_packet), k, g2));
  rtp::ReplayGuard g3;
  const auto rtcp_parsed = rtp::parse_packet(a);
  CHECK(rtp::unframe(*rtcp_parsed, k, g3, 160).status ==
        rtp::UnframeStatus::AuthFailure);
}

TEST_CASE("spoofed_send policy") {
  net::Datagram d;
  d.claimed_src = {"203.0.113.7", 4000};
  d.dst = {"10.1.0.5", 4000};
  d.kind = net::DatagramKind::Rtp;

  FakeTransport spoofing("198.51.100.9", true);
  rtp::spoofed_send(spoofing, d);
  CHECK(spoofing.sent.size() == 1);
  CHECK(spoofing.sent[0].claimed_src.addr == "203.0.113.7");

  FakeTransport filtered("198.51.100.9", false);
  CHECK_THROWS_AS(rtp::spoofed_send(filtered, d), net::SpoofingUnsupported);
  // sending as yourself is always allowed
  net::Datagram honest = d;
  honest.claimed_src = {"198.51.100.9", 4000};
  rtp::spoofed_send(filtered, honest);
  CHECK(filtered.sent.size() == 1);
}
