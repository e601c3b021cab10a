#include "covercall/rtp.hpp"

namespace covercall::rtp {

namespace {

void put_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

void put_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
  v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

std::vector<std::uint8_t> header_bytes(const RtpPacket& p) {
  std::vector<std::uint8_t> h;
  h.reserve(kHeaderBytes);
  h.push_back(0x80);  // version 2
  h.push_back(0x60);  // dynamic payload type
  put_u16(h, p.seq);
  put_u32(h, p.timestamp);
  put_u32(h, p.ssrc);
  return h;
}

crypto::Nonce96 make_nonce(std::uint32_t ssrc, std::uint32_t rollover,
                           std::uint16_t seq) {
  crypto::Nonce96 n{};
  n[0] = static_cast<std::uint8_t>(ssrc >> 24);
  n[1] = static_cast<std::uint8_t>((ssrc >> 16) & 0xff);
  n[2] = static_cast<std::uint8_t>((ssrc >> 8) & 0xff);
  n[3] = static_cast<std::uint8_t>(ssrc & 0xff);
  n[4] = static_cast<std::uint8_t>(rollover >> 24);
  n[5] = static_cast<std::uint8_t>((rollover >> 16) & 0xff);
  n[6] = static_cast<std::uint8_t>((rollover >> 8) & 0xff);
  n[7] = static_cast<std::uint8_t>(rollover & 0xff);
  n[8] = static_cast<std::uint8_t>(seq >> 8);
  n[9] = static_cast<std::uint8_t>(seq & 0xff);
  return n;
}

RtpPacket encrypt_payload(std::span<const std::uint8_t> plaintext,
                          const crypto::Key256& key,
                          const SenderState& sender) {
  RtpPacket p;
  p.ssrc = sender.ssrc;
  p.seq = sender.seq;
  p.timestamp = sender.timestamp;
  const auto header = header_bytes(p);
  p.ciphertext = crypto::aead_seal(
      key, make_nonce(sender.ssrc, sender.rollover, sender.seq), plaintext,
      header);
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize_packet(const RtpPacket& p) {
  auto out = header_bytes(p);
  out.insert(out.end(), p.ciphertext.begin(), p.ciphertext.end());
  return out;
}

std::optional<RtpPacket> parse_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + crypto::kAeadTagBytes) return std::nullopt;
  if (bytes[0] != 0x80) return std::nullopt;
  RtpPacket p;
  p.seq = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
  p.timestamp = (static_cast<std::uint32_t>(bytes[4]) << 24) |
                (static_cast<std::uint32_t>(bytes[5]) << 16) |
                (static_cast<std::uint32_t>(bytes[6]) << 8) | bytes[7];
  p.ssrc = (static_cast<std::uint32_t>(bytes[8]) << 24) |
           (static_cast<std::uint32_t>(bytes[9]) << 16) |
           (static_cast<std::uint32_t>(bytes[10]) << 8) | bytes[11];
  p.ciphertext.assign(bytes.begin() + kHeaderBytes, bytes.end());
  return p;
}

std::optional<std::uint64_t> ReplayGuard::classify(std::uint16_t seq) const {
  if (!any_) return static_cast<std::uint64_t>(seq);
  // Nearest extended index congruent to seq mod 2^16.
  const std::uint64_t base = highest_ & ~0xFFFFull;
  std::uint64_t ext = base | seq;
  if (ext > highest_ + 0x8000 && ext >= 0x10000)
    ext -= 0x10000;
  else if (ext + 0x8000 < highest_)
    ext += 0x10000;
  if (ext > highest_) return ext;
  const std::uint64_t diff = highest_ - ext;
  if (diff >= window_) return std::nullopt;        // beyond the window
  if (mask_ & (1ull << diff)) return std::nullopt;  // already seen
  return ext;
}

void ReplayGuard::accept(std::uint64_t extended) {
  if (!any_) {
    any_ = true;
    highest_ = extended;
    mask_ = 1;
    return;
  }
  if (extended > highest_) {
    const std::uint64_t shift = extended - highest_;
    mask_ = shift >= 64 ? 0 : mask_ << shift;
    mask_ |= 1;
    highest_ = extended;
  } else {
    mask_ |= 1ull << (highest_ - extended);
  }
}

RtpPacket frame(const fec::Block& block, const crypto::SessionKeys& keys,
                const SenderState& sender, std::size_t codec_payload_size) {
  const auto plaintext = fec::serialize_block(block);
  if (plaintext.size() != codec_payload_size)
    throw SizeMismatch(plaintext.size(), codec_payload_size);
  return encrypt_payload(plaintext, keys.rtp_key, sender);
}

UnframeResult unframe(const RtpPacket& packet, const crypto::SessionKeys& keys,
                      ReplayGuard& guard, std::size_t codec_payload_size) {
  UnframeResult res;
  const auto ext = guard.classify(packet.seq);
  if (!ext) {
    res.status = UnframeStatus::ReplayDetected;
    return res;
  }
  const auto header = header_bytes(packet);
  const auto plaintext = crypto::aead_open(
      keys.rtp_key,
      make_nonce(packet.ssrc, static_cast<std::uint32_t>(*ext >> 16),
                 packet.seq),
      packet.ciphertext, header);
  if (!plaintext || plaintext->size() != codec_payload_size) {
    res.status = UnframeStatus::AuthFailure;
    return res;
  }
  auto block = fec::parse_block(*plaintext, codec_payload_size - 4);
  if (!block) {
    res.status = UnframeStatus::AuthFailure;
    return res;
  }
  guard.accept(*ext);
  res.status = UnframeStatus::Ok;
  res.block = std::move(block);
  return res;
}

std::vector<std::uint8_t> rtcp_packet(const crypto::SessionKeys& keys,
                                      SenderState& rtcp_sender,
                                      std::size_t codec_payload_size,
                                      std::mt19937_64& rng) {
  std::vector<std::uint8_t> plaintext(codec_payload_size);
  for (auto& b : plaintext) b = static_cast<std::uint8_t>(rng());
  RtpPacket p = encrypt_payload(plaintext, keys.rtcp_key, rtcp_sender);
  rtcp_sender.advance();
  return serialize_packet(p);
}

bool rtcp_check(std::span<const std::uint8_t> bytes,
                const crypto::SessionKeys& keys, ReplayGuard& guard) {
  const auto packet = parse_packet(bytes);
  if (!packet) return false;
  const auto ext = guard.classify(packet->seq);
  if (!ext) return false;
  const auto header = header_bytes(*packet);
  const auto plaintext = crypto::aead_open(
      keys.rtcp_key,
      make_nonce(packet->ssrc, static_cast<std::uint32_t>(*ext >> 16),
                 packet->seq),
      packet->ciphertext, header);
  if (!plaintext) return false;
  guard.accept(*ext);
  return true;
}

void spoofed_send(net::DatagramTransport& transport, const net::Datagram& d) {
  if (d.claimed_src.addr != transport.local_addr() &&
      !transport.supports_spoofing()) {
    throw net::SpoofingUnsupported("transport at " + transport.local_addr() +
                                   " cannot forge source " +
                                   d.claimed_src.addr);
  }
  transport.send(d);
}

}  // namespace covercall::rtp
