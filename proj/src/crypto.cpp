#include "covercall/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <mutex>

namespace covercall::crypto {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  });
}

}  // namespace

Key256 hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> message) {
  ensure_sodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, message.data(), message.size());
  Key256 out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

Key256 hmac_sha256(std::span<const std::uint8_t> key,
                   const std::string& message) {
  return hmac_sha256(
      key, std::span(reinterpret_cast<const std::uint8_t*>(message.data()),
                     message.size()));
}

SessionKeys derive_keys(std::span<const std::uint8_t> master_key) {
  if (master_key.empty()) throw EmptyKey();
  SessionKeys keys;
  keys.rtp_key = hmac_sha256(master_key, std::string("rtp"));
  keys.rtcp_key = hmac_sha256(master_key, std::string("rtcp"));
  keys.integrity_key = hmac_sha256(master_key, std::string("integrity"));
  return keys;
}

Bytes aead_seal(const Key256& key, const Nonce96& nonce,
                std::span<const std::uint8_t> plaintext,
                std::span<const std::uint8_t> aad) {
  ensure_sodium();
  Bytes out(plaintext.size() + kAeadTagBytes);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      out.data(), &out_len, plaintext.data(), plaintext.size(), aad.data(),
      aad.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

std::optional<Bytes> aead_open(const Key256& key, const Nonce96& nonce,
                               std::span<const std::uint8_t> ciphertext,
                               std::span<const std::uint8_t> aad) {
  ensure_sodium();
  if (ciphertext.size() < kAeadTagBytes) return std::nullopt;
  Bytes out(ciphertext.size() - kAeadTagBytes);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(
          out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
          aad.data(), aad.size(), nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  out.resize(out_len);
  return out;
}

BoxKeypair generate_keypair() {
  ensure_sodium();
  BoxKeypair kp;
  crypto_box_keypair(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

Bytes seal_to(const std::array<std::uint8_t, 32>& public_key,
              std::span<const std::uint8_t> plaintext) {
  ensure_sodium();
  Bytes out(plaintext.size() + crypto_box_SEALBYTES);
  crypto_box_seal(out.data(), plaintext.data(), plaintext.size(),
                  public_key.data());
  return out;
}

std::optional<Bytes> seal_open(const BoxKeypair& keypair,
                               std::span<const std::uint8_t> ciphertext) {
  ensure_sodium();
  if (ciphertext.size() < crypto_box_SEALBYTES) return std::nullopt;
  Bytes out(ciphertext.size() - crypto_box_SEALBYTES);
  if (crypto_box_seal_open(out.data(), ciphertext.data(), ciphertext.size(),
                           keypair.public_key.data(),
                           keypair.secret_key.data()) != 0) {
    return std::nullopt;
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::optional<Bytes> from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

}  // namespace covercall::crypto
