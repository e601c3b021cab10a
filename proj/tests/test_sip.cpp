#include "covercall/sip.hpp"

#include <random>

#include "covercall/crypto.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace covercall;

namespace {

crypto::Bytes test_key() {
  auto v = crypto::from_hex(
      "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
  return *v;
}

sip::SipMessage sample_invite(std::mt19937_64& rng,
                              const sip::UserAgentProfile& profile) {
  return sip::build_invite("alice@atlanta.com", "bob@biloxi.com", "10.0.0.5",
                           profile, rng, 4000);
}

}  // namespace

TEST_CASE("build_invite carries the caller's address and profile codecs") {
  std::mt19937_64 rng(1);
  const auto& profile = sip::builtin_profile("ekiga");
  const auto m = sample_invite(rng, profile);
  CHECK(m.kind == sip::Kind::Invite);
  REQUIRE(m.sdp.has_value());
  CHECK(m.sdp->media_address == "10.0.0.5");
  CHECK(m.sdp->codecs == profile.codec_prefs);
  CHECK(m.from_tag.size() == profile.tag_length);
  CHECK(m.to_tag.empty());
  CHECK(m.ua_profile_name == "ekiga");
}

TEST_CASE("tag length follows the profile") {
  std::mt19937_64 rng(2);
  auto profile = sip::builtin_profile("ekiga");
  profile.tag_length = 8;
  CHECK(sample_invite(rng, profile).from_tag.size() == 8);
  profile.tag_length = 17;
  CHECK(sample_invite(rng, profile).from_tag.size() == 17);
}

TEST_CASE("malformed URIs are rejected") {
  std::mt19937_64 rng(3);
  const auto& profile = sip::builtin_profile("ekiga");
  CHECK_THROWS_AS(sip::build_invite("alice@atlanta.com", "", "10.0.0.5",
                                    profile, rng),
                  sip::MalformedUri);
  CHECK_THROWS_AS(sip::build_invite("alice", "bob@biloxi.com", "10.0.0.5",
                                    profile, rng),
                  sip::MalformedUri);
  CHECK_THROWS_AS(sip::build_invite("a@b@c", "bob@biloxi.com", "10.0.0.5",
                                    profile, rng),
                  sip::MalformedUri);
}

TEST_CASE("manipulated OK advertises the dummy endpoint, not the relay") {
  std::mt19937_64 rng(4);
  const auto& profile = sip::builtin_profile("ekiga");
  const auto invite = sample_invite(rng, profile);
  const auto key = test_key();
  const auto ok = sip::build_manipulated_ok(invite, profile, "203.0.113.7",
                                            4000, key, rng);
  CHECK(ok.kind == sip::Kind::Ok);
  CHECK(ok.call_id == invite.call_id);
  CHECK(ok.from_tag == invite.from_tag);
  REQUIRE(ok.sdp.has_value());
  CHECK(ok.sdp->media_address == "203.0.113.7");
  CHECK(ok.sdp->rtp_port == 4000);
  CHECK(ok.sdp->rtcp_port() == 4001);
  REQUIRE(ok.sdp->codecs.size() == 1);
  CHECK(ok.sdp->codecs[0] == "G.711");  // first caller preference in common

  const auto verified = sip::verify_ok(ok, key);
  CHECK(verified.addr == "203.0.113.7");
  CHECK(verified.rtp_port == 4000);
}

TEST_CASE("endpoint tag matches the reference MAC and is deterministic") {
  // Independent reference: HMAC-SHA256(integrity_key, "203.0.113.7:4000"),
  // first 8 bytes, hex.
  const auto keys = crypto::derive_keys(test_key());
  CHECK(sip::endpoint_tag(keys.integrity_key, "203.0.113.7", 4000) ==
        "e65372b8a91bf3b8");

  std::mt19937_64 rng(5);
  const auto& profile = sip::builtin_profile("ekiga");
  const auto invite = sample_invite(rng, profile);
  const auto ok1 = sip::build_manipulated_ok(invite, profile, "203.0.113.7",
                                             4000, keys.integrity_key, rng);
  const auto ok2 = sip::build_manipulated_ok(invite, profile, "203.0.113.7",
                                             4000, keys.integrity_key, rng);
  const auto suffix = [](const std::string& s) {
    return s.substr(s.size() - sip::kEndpointTagChars);
  };
  CHECK(suffix(ok1.to_tag) == suffix(ok2.to_tag));
  CHECK(ok1.to_tag != ok2.to_tag);  // random prefix differs
  CHECK(suffix(ok1.to_tag) == "e65372b8a91bf3b8");
}

TEST_CASE("disjoint codec lists fail negotiation") {
  std::mt19937_64 rng(6);
  auto caller = sip::builtin_profile("ekiga");
  caller.codec_prefs = {"iLBC"};
  auto callee = sip::builtin_profile("ekiga");
  callee.codec_prefs = {"G.711"};
  const auto invite = sample_invite(rng, caller);
  CHECK_THROWS_AS(sip::build_manipulated_ok(invite, callee, "203.0.113.7",
                                            4000, test_key(), rng),
                  sip::NoCommonCodec);
}

TEST_CASE("verify_ok flags every tampered endpoint encoding") {
  std::mt19937_64 rng(7);
  const auto& profile = sip::builtin_profile("ekiga");
  const auto key = test_key();
  const auto invite = sample_invite(rng, profile);
  const auto ok = sip::build_manipulated_ok(invite, profile, "203.0.113.7",
                                            4000, key, rng);

  auto rewritten = ok;
  rewritten.sdp->media_address = "203.0.113.99";
  CHECK_THROWS_AS(sip::verify_ok(rewritten, key), sip::IntegrityFailure);

  auto port_swap = ok;
  port_swap.sdp->rtp_port = 4002;
  CHECK_THROWS_AS(sip::verify_ok(port_swap, key), sip::IntegrityFailure);

  auto truncated = ok;
  truncated.to_tag = truncated.to_tag.substr(0, 10);
  CHECK_THROWS_AS(sip::verify_ok(truncated, key), sip::IntegrityFailure);

  auto no_sdp = ok;
  no_sdp.sdp.reset();
  CHECK_THROWS_AS(sip::verify_ok(no_sdp, key), sip::MissingSdp);

  // single-character change anywhere in the address text
  for (std::size_t i = 0; i < ok.sdp->media_address.size(); ++i) {
    auto bent = ok;
    bent.sdp->media_address[i] =
        bent.sdp->media_address[i] == '9' ? '8' : '9';
    CHECK_THROWS_AS(sip::verify_ok(bent, key), sip::IntegrityFailure);
  }

  // wrong key fails even on the untouched message
  const auto other = crypto::derive_keys(crypto::Bytes(16, 0x42));
  CHECK_THROWS_AS(sip::verify_ok(ok, other.integrity_key),
                  sip::IntegrityFailure);
}

TEST_CASE("dialog responses echo identifiers and enforce state") {
  std::mt19937_64 rng(8);
  const auto& profile = sip::builtin_profile("ekiga");
  const auto invite = sample_invite(rng, profile);
  const auto ok = sip::build_manipulated_ok(invite, profile, "203.0.113.7",
                                            4000, test_key(), rng);

  const auto ack = sip::build_response(sip::Kind::Ack, ok);
  CHECK(ack.call_id == ok.call_id);
  CHECK(ack.to_tag == ok.to_tag);

  const auto bye = sip::build_response(sip::Kind::Bye, ok);
  CHECK(bye.call_id == ok.call_id);

  // ACK without an established dialog (no to-tag) has no context
  CHECK_THROWS_AS(sip::build_response(sip::Kind::Ack, invite),
                  sip::MissingDialogState);
  sip::SipMessage empty;
  CHECK_THROWS_AS(sip::build_response(sip::Kind::Bye, empty),
                  sip::MissingDialogState);

  const auto trying = sip::build_response(sip::Kind::Trying, invite);
  CHECK(trying.kind == sip::Kind::Trying);
  CHECK(trying.call_id == invite.call_id);
}

TEST_CASE("parse rejects junk with a position") {
  CHECK_THROWS_AS(sip::parse(std::string("")), sip::ParseError);
  try {
    sip::parse(std::string(""));
  } catch (const sip::ParseError& e) {
    CHECK(e.offset == 0);
  }
  CHECK_THROWS_AS(sip::parse(std::string("GARBAGE")), sip::ParseError);
  CHECK_THROWS_AS(sip::parse(std::string("INVITE sip:x SIP/2.0\r\nbroken\r\n")),
                  sip::ParseError);
}

TEST_CASE("hand-written INVITE text parses with its SDP") {
  const std::string text =
      "INVITE sip:bob@biloxi.com SIP/2.0\r\n"
      "Via: SIP/2.0/UDP atlanta.com;branch=z9hG4bK.abc\r\n"
      "From: <sip:alice@atlanta.com>;tag=f00\r\n"
      "To: <sip:bob@biloxi.com>\r\n"
      "Call-ID: abc\r\n"
      "CSeq: 1 INVITE\r\n"
      "User-Agent: Ekiga/4.0.1\r\n"
      "Content-Type: application/sdp\r\n"
      "Content-Length: 105\r\n"
      "\r\n"
      "v=0\r\n"
      "o=- 0 0 IN IP4 10.0.0.5\r\n"
      "s=-\r\n"
      "c=IN IP4 10.0.0.5\r\n"
      "t=0 0\r\n"
      "m=audio 4000 RTP/AVP 96\r\n"
      "a=rtpmap:96 G.711\r\n";
  const auto m = sip::parse(text);
  CHECK(m.kind == sip::Kind::Invite);
  CHECK(m.caller_id == "alice@atlanta.com");
  CHECK(m.callee_id == "bob@biloxi.com");
  CHECK(m.from_tag == "f00");
  REQUIRE(m.sdp.has_value());
  CHECK(m.sdp->media_address == "10.0.0.5");
  CHECK(m.sdp->rtp_port == 4000);
  CHECK(m.sdp->codecs == std::vector<std::string>{"G.711"});
}

TEST_CASE("serialize/parse round trip over generated messages") {
  std::mt19937_64 rng(99);
  const auto profiles = sip::builtin_profiles();
  for (int i = 0; i < 300; ++i) {
    const auto& profile = profiles[rng() % profiles.size()];
    const auto invite = sip::build_invite(
        "user" + std::to_string(rng() % 50) + "@caller.example",
        "peer" + std::to_string(rng() % 50) + "@callee.example",
        "10.0." + std::to_string(rng() % 250) + "." +
            std::to_string(rng() % 250),
        profile, rng, static_cast<std::uint16_t>(2000 + 2 * (rng() % 2000)));
    CHECK(sip::parse(sip::serialize(invite)) == invite);

    const auto ok = sip::build_manipulated_ok(
        invite, profile, "203.0.113." + std::to_string(rng() % 200),
        static_cast<std::uint16_t>(4000 + 2 * (rng() % 100)), test_key(),
        rng);
    CHECK(sip::parse(sip::serialize(ok)) == ok);

    for (auto kind : {sip::Kind::Trying, sip::Kind::Ringing,
                      sip::Kind::Reject}) {
      const auto r = sip::build_response(kind, invite);
      CHECK(sip::parse(sip::serialize(r)) == r);
    }
    for (auto kind : {sip::Kind::Ack, sip::Kind::Bye}) {
      const auto r = sip::build_response(kind, ok);
      CHECK(sip::parse(sip::serialize(r)) == r);
    }
  }
}

TEST_CASE("fixed header fields are byte-identical across sessions") {
  std::mt19937_64 rng(123);
  const auto& profile = sip::builtin_profile("blink");
  const auto a = sip::serialize(sample_invite(rng, profile));
  const auto b = sip::serialize(sample_invite(rng, profile));
  // Same fixed lines in both (tags and call ids differ).
  for (const auto& needle :
       {std::string("User-Agent: Blink 3.0.3 (MacOSX)\r\n"),
        std::string("Supported: replaces\r\n")}) {
    CHECK(a.find(needle) != std::string::npos);
    CHECK(b.find(needle) != std::string::npos);
  }
}

TEST_CASE("user-agent profiles load from file text") {
  const auto p = sip::parse_profile(
      "# imitation\n"
      "name ekiga\n"
      "tag-length 8\n"
      "codecs G.711, G.722-64\n"
      "os Linux, Windows\n"
      "header User-Agent: Ekiga/4.0.1\n"
      "header Allow: INVITE,ACK,BYE\n");
  CHECK(p.name == "ekiga");
  CHECK(p.tag_length == 8);
  CHECK(p.codec_prefs == std::vector<std::string>{"G.711", "G.722-64"});
  CHECK(p.os_labels == std::vector<std::string>{"Linux", "Windows"});
  REQUIRE(p.header_template.size() == 2);
  CHECK(p.header_template[0].first == "User-Agent");
  CHECK(p.header_template[0].second == "Ekiga/4.0.1");

  CHECK_THROWS(sip::parse_profile("name x\ntag-length 2\ncodecs G.711\n"));
  CHECK_THROWS(sip::parse_profile("name x\ntag-length 8\n"));
  const auto from_file = sip::load_profile("fixtures/ua/ekiga.profile");
  CHECK(from_file.name == "ekiga");
  CHECK(from_file.tag_length == 8);
  CHECK(from_file.codec_prefs.size() == 4);
}

TEST_CASE("odd RTP ports are refused on build and parse") {
  std::mt19937_64 rng(5);
  const auto& profile = sip::builtin_profile("ekiga");
  CHECK_THROWS(sip::build_invite("a@b.c", "d@e.f", "10.0.0.1", profile, rng,
                                 4001));
  const auto invite = sample_invite(rng, profile);
  CHECK_THROWS(sip::build_manipulated_ok(invite, profile, "203.0.113.7", 4001,
                                         test_key(), rng));
}
