#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "covercall/crypto.hpp"
#include "covercall/fec.hpp"
#include "covercall/net.hpp"

namespace covercall::rtp {

constexpr std::size_t kHeaderBytes = 12;

struct SizeMismatch : std::runtime_error {
  SizeMismatch(std::size_t got, std::size_t want)
      : std::runtime_error("plaintext is " + std::to_string(got) +
                           " bytes, codec payload is " +
                           std::to_string(want)) {}
};

struct RtpPacket {
  std::uint32_t ssrc = 0;
  std::uint16_t seq = 0;
  std::uint32_t timestamp = 0;
  std::vector<std::uint8_t> ciphertext;  // encrypted payload + 16-byte tag
};

// Wire: 12-byte header (version/marker byte, payload type byte, seq,
// timestamp, ssrc) followed by the ciphertext. The header doubles as the
// AEAD associated data.
std::vector<std::uint8_t> serialize_packet(const RtpPacket& p);
std::optional<RtpPacket> parse_packet(std::span<const std::uint8_t> bytes);

// Outbound per-stream counters. seq/rollover feed the AEAD nonce, so state
// is owned by exactly one sender.
struct SenderState {
  std::uint32_t ssrc = 0;
  std::uint16_t seq = 0;
  std::uint32_t rollover = 0;
  std::uint32_t timestamp = 0;
  std::uint32_t timestamp_step = 160;

  std::uint64_t extended_seq() const {
    return (static_cast<std::uint64_t>(rollover) << 16) | seq;
  }
  void advance() {
    timestamp += timestamp_step;
    if (seq == 0xFFFF) {
      seq = 0;
      ++rollover;
    } else {
      ++seq;
    }
  }
};

// SRTP-style replay window: packets at or below the high-water mark minus
// the window, or already seen, are rejected.
class ReplayGuard {
 public:
  explicit ReplayGuard(unsigned window = 64) : window_(window) {}
  // Extended sequence estimate for an incoming wire seq, or nullopt when the
  // packet is a replay / too old. Does not commit state.
  std::optional<std::uint64_t> classify(std::uint16_t seq) const;
  void accept(std::uint64_t extended);

 private:
  unsigned window_;
  bool any_ = false;
  std::uint64_t highest_ = 0;
  std::uint64_t mask_ = 0;  // bit i: highest_ - i seen
};

// Encrypts one serialized block into an RTP packet. The block must fill the
// codec payload exactly (4-byte header + capacity).
RtpPacket frame(const fec::Block& block, const crypto::SessionKeys& keys,
                const SenderState& sender, std::size_t codec_payload_size);

enum class UnframeStatus { Ok, AuthFailure, ReplayDetected };

struct UnframeResult {
  UnframeStatus status = UnframeStatus::AuthFailure;
  std::optional<fec::Block> block;
};

// Replay check, then authenticated decryption; nothing is trusted before the
// tag verifies. On success the guard is advanced.
UnframeResult unframe(const RtpPacket& packet, const crypto::SessionKeys& keys,
                      ReplayGuard& guard, std::size_t codec_payload_size);

// RTCP cover packet: same wire size as an RTP packet for the codec, random
// plaintext, encrypted under the RTCP key.
std::vector<std::uint8_t> rtcp_packet(const crypto::SessionKeys& keys,
                                      SenderState& rtcp_sender,
                                      std::size_t codec_payload_size,
                                      std::mt19937_64& rng);

// True when an RTCP cover packet authenticates under the RTCP key.
bool rtcp_check(std::span<const std::uint8_t> bytes,
                const crypto::SessionKeys& keys, ReplayGuard& guard);

// Hands a datagram to the transport with claimed_src as its visible origin.
// Throws net::SpoofingUnsupported when the transport cannot forge sources
// and the claimed address is not the transport's own.
void spoofed_send(net::DatagramTransport& transport, const net::Datagram& d);

}  // namespace covercall::rtp
