#include "covercall/crypto.hpp"

#include "doctest.h"

using namespace covercall;

namespace {

crypto::Bytes hexb(const std::string& h) {
  auto v = crypto::from_hex(h);
  REQUIRE(v.has_value());
  return *v;
}

}  // namespace

TEST_CASE("key derivation matches reference HMAC-SHA256 vectors") {
  // Vectors computed with an independent HMAC implementation over the
  // labels "rtp" / "rtcp" / "integrity".
  const auto master = hexb(
      "000102030405060708090a0b0c0d0e0f"
      "101112131415161718191a1b1c1d1e1f");
  const auto keys = crypto::derive_keys(master);
  CHECK(crypto::to_hex(keys.rtp_key) ==
        "1335962139ea99db193fac3b5332eea99855003c2eaf556b8a820c237ea1141d");
  CHECK(crypto::to_hex(keys.rtcp_key) ==
        "c170e6b2a929af30beae47668efe81c171c8ba47e015bac28dbaa29305dc95ed");
  CHECK(crypto::to_hex(keys.integrity_key) ==
        "5fcc018c737823a9bb8bb46f9df9f70695c0eb48887d0639235335e028c4606b");

  const crypto::Bytes master2(16, 0x42);
  const auto keys2 = crypto::derive_keys(master2);
  CHECK(crypto::to_hex(keys2.rtp_key) ==
        "b9719fd689a389c1d2b951db0072f6ba6250ca219d83fe4e121201c7ddfd16db");
  CHECK(crypto::to_hex(keys2.rtcp_key) ==
        "c21bbf7b819448d8ff7b1440c600c865643d1f61202c98bddd9a4563b2acc8eb");
  CHECK(crypto::to_hex(keys2.integrity_key) ==
        "d0f6df3ca97ca096c8d43b7c65a41fa3984f3bfe65d94cef1dacc065f977e03e");
}

TEST_CASE("derivation is deterministic and label-separated") {
  const crypto::Bytes master(32, 0x07);
  const auto a = crypto::derive_keys(master);
  const auto b = crypto::derive_keys(master);
  CHECK(a.rtp_key == b.rtp_key);
  CHECK(a.rtcp_key == b.rtcp_key);
  CHECK(a.integrity_key == b.integrity_key);
  CHECK(a.rtp_key != a.rtcp_key);
  CHECK(a.rtp_key != a.integrity_key);
  CHECK(a.rtcp_key != a.integrity_key);
}

TEST_CASE("single-bit master changes flip every derived key") {
  crypto::Bytes master(32, 0x07);
  const auto base = crypto::derive_keys(master);
  for (int bit : {0, 77, 255}) {
    crypto::Bytes tweaked = master;
    tweaked[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const auto other = crypto::derive_keys(tweaked);
    CHECK(other.rtp_key != base.rtp_key);
    CHECK(other.rtcp_key != base.rtcp_key);
    CHECK(other.integrity_key != base.integrity_key);
  }
}

TEST_CASE("empty master key is refused") {
  CHECK_THROWS_AS(crypto::derive_keys(crypto::Bytes{}), crypto::EmptyKey);
}

TEST_CASE("AEAD round trip, tamper rejection, key separation") {
  crypto::Key256 key{};
  key.fill(0x11);
  crypto::Nonce96 nonce{};
  nonce[11] = 1;
  const crypto::Bytes plain(100, 0xab);
  const crypto::Bytes aad{1, 2, 3};

  auto ct = crypto::aead_seal(key, nonce, plain, aad);
  CHECK(ct.size() == plain.size() + crypto::kAeadTagBytes);
  auto back = crypto::aead_open(key, nonce, ct, aad);
  REQUIRE(back.has_value());
  CHECK(*back == plain);

  auto bent = ct;
  bent[5] ^= 0x80;
  CHECK(!crypto::aead_open(key, nonce, bent, aad).has_value());

  crypto::Key256 other{};
  other.fill(0x12);
  CHECK(!crypto::aead_open(other, nonce, ct, aad).has_value());

  crypto::Bytes wrong_aad{9};
  CHECK(!crypto::aead_open(key, nonce, ct, wrong_aad).has_value());
}

TEST_CASE("sealed boxes open only with the right keypair") {
  const auto kp = crypto::generate_keypair();
  const auto msg = hexb("00ff17");
  const auto sealed = crypto::seal_to(kp.public_key, msg);
  CHECK(sealed.size() == msg.size() + crypto::kSealOverheadBytes);
  auto opened = crypto::seal_open(kp, sealed);
  REQUIRE(opened.has_value());
  CHECK(*opened == msg);

  const auto other = crypto::generate_keypair();
  CHECK(!crypto::seal_open(other, sealed).has_value());
}

TEST_CASE("hex helpers") {
  CHECK(crypto::to_hex(hexb("00ff17")) == "00ff17");
  CHECK(!crypto::from_hex("abc").has_value());
  CHECK(!crypto::from_hex("zz").has_value());
  CHECK(crypto::from_hex("")->empty());
}
