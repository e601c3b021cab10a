#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covercall::crypto {

using Bytes = std::vector<std::uint8_t>;
using Key256 = std::array<std::uint8_t, 32>;
using Nonce96 = std::array<std::uint8_t, 12>;

constexpr std::size_t kAeadTagBytes = 16;
constexpr std::size_t kSealOverheadBytes = 48;  // ephemeral pk + box tag

struct EmptyKey : std::runtime_error {
  EmptyKey() : std::runtime_error("master key must not be empty") {}
};

// Per-session key material, all derived from the registration master key.
struct SessionKeys {
  Key256 rtp_key;
  Key256 rtcp_key;
  Key256 integrity_key;
};

// HMAC-SHA256 over an arbitrary-length key.
Key256 hmac_sha256(std::span<const std::uint8_t> key,
                   std::span<const std::uint8_t> message);
Key256 hmac_sha256(std::span<const std::uint8_t> key, const std::string& message);

// Derives the rtp/rtcp/integrity session keys from the master secret by
// MACing the fixed labels "rtp", "rtcp", "integrity". Throws EmptyKey.
SessionKeys derive_keys(std::span<const std::uint8_t> master_key);

// ChaCha20-Poly1305 (IETF). Output is ciphertext followed by a 16-byte tag.
Bytes aead_seal(const Key256& key, const Nonce96& nonce,
                std::span<const std::uint8_t> plaintext,
                std::span<const std::uint8_t> aad);
std::optional<Bytes> aead_open(const Key256& key, const Nonce96& nonce,
                               std::span<const std::uint8_t> ciphertext,
                               std::span<const std::uint8_t> aad);

// X25519 keypair plus sealed-box encryption for registration blobs:
// an ephemeral key encapsulation wrapping an authenticated payload.
struct BoxKeypair {
  std::array<std::uint8_t, 32> public_key;
  std::array<std::uint8_t, 32> secret_key;
};

BoxKeypair generate_keypair();
Bytes seal_to(const std::array<std::uint8_t, 32>& public_key,
              std::span<const std::uint8_t> plaintext);
std::optional<Bytes> seal_open(const BoxKeypair& keypair,
                               std::span<const std::uint8_t> ciphertext);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(const std::string& hex);

}  // namespace covercall::crypto
