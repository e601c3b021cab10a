#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covercall::sip {

enum class Kind { Invite, Trying, Ringing, Ok, Ack, Bye, Reject };

const char* kind_name(Kind k);

struct SdpBody {
  std::string media_address;
  std::uint16_t rtp_port = 0;  // even; RTCP uses rtp_port + 1
  std::vector<std::string> codecs;

  std::uint16_t rtcp_port() const { return rtp_port + 1; }
  bool operator==(const SdpBody&) const = default;
};

// Fixed header fields a given softphone always emits, plus the knobs a
// censor could fingerprint: identifier lengths and the codec list.
struct UserAgentProfile {
  std::string name;
  std::vector<std::pair<std::string, std::string>> header_template;
  unsigned tag_length = 8;  // >= 4
  std::vector<std::string> codec_prefs;
  std::vector<std::string> os_labels;
};

struct SipMessage {
  Kind kind = Kind::Invite;
  std::string caller_id;  // SIP URI, e.g. alice@atlanta.com
  std::string callee_id;
  std::string from_tag;
  std::string to_tag;
  std::string call_id;
  std::optional<SdpBody> sdp;
  std::vector<std::pair<std::string, std::string>> extra_headers;
  // Producer metadata, not serialized; excluded from wire equality.
  std::string ua_profile_name;

  bool operator==(const SipMessage& o) const {
    return kind == o.kind && caller_id == o.caller_id &&
           callee_id == o.callee_id && from_tag == o.from_tag &&
           to_tag == o.to_tag && call_id == o.call_id && sdp == o.sdp &&
           extra_headers == o.extra_headers;
  }
};

struct VerifiedCallee {
  std::string addr;
  std::uint16_t rtp_port = 0;
};

struct MalformedUri : std::runtime_error {
  explicit MalformedUri(const std::string& uri)
      : std::runtime_error("malformed SIP URI: '" + uri + "'") {}
};
struct NoCommonCodec : std::runtime_error {
  NoCommonCodec() : std::runtime_error("no common codec") {}
};
struct IntegrityFailure : std::runtime_error {
  explicit IntegrityFailure(const std::string& why)
      : std::runtime_error("OK integrity check failed: " + why) {}
};
struct MissingSdp : std::runtime_error {
  MissingSdp() : std::runtime_error("message lacks an SDP body") {}
};
struct MissingDialogState : std::runtime_error {
  explicit MissingDialogState(const std::string& why)
      : std::runtime_error("missing dialog state: " + why) {}
};
struct ParseError : std::runtime_error {
  std::size_t offset;
  ParseError(std::size_t off, const std::string& why)
      : std::runtime_error("SIP parse error at offset " +
                           std::to_string(off) + ": " + why),
        offset(off) {}
};

// 8-byte keyed MAC over "addr:port", hex-encoded (16 chars). Appended to the
// To-tag of a manipulated OK so the caller can detect a rewritten endpoint.
std::string endpoint_tag(std::span<const std::uint8_t> key,
                         const std::string& addr, std::uint16_t rtp_port);
constexpr std::size_t kEndpointTagChars = 16;

// Caller side of the dialog: fresh from-tag and call id, SDP advertising the
// caller's address and the profile's codec preferences.
SipMessage build_invite(const std::string& caller, const std::string& callee,
                        const std::string& caller_addr,
                        const UserAgentProfile& profile, std::mt19937_64& rng,
                        std::uint16_t rtp_port = 4000);

// The relay's answer: echoes the dialog identifiers but advertises the dummy
// host as the media endpoint, with the endpoint MAC spliced into the To-tag.
SipMessage build_manipulated_ok(const SipMessage& invite,
                                const UserAgentProfile& profile,
                                const std::string& dummy_addr,
                                std::uint16_t dummy_rtp_port,
                                std::span<const std::uint8_t> session_key,
                                std::mt19937_64& rng);

// Recomputes the endpoint MAC; mismatch means the OK was tampered with and
// the caller must not ACK. Throws IntegrityFailure or MissingSdp.
VerifiedCallee verify_ok(const SipMessage& ok,
                         std::span<const std::uint8_t> session_key);

// In-dialog responses/requests that only echo identifiers from `context`.
SipMessage build_response(Kind kind, const SipMessage& context);

std::string serialize(const SipMessage& m);
SipMessage parse(const std::string& text);
SipMessage parse(std::span<const std::uint8_t> bytes);

bool uri_well_formed(const std::string& uri);
std::string uri_host(const std::string& uri);  // part after '@'
std::string random_token(std::mt19937_64& rng, unsigned length);

// Built-in softphone imitations; "ekiga" is the default.
const std::vector<UserAgentProfile>& builtin_profiles();
const UserAgentProfile& builtin_profile(const std::string& name);

// One profile per file:
//   name <label>
//   tag-length <n>
//   codecs <comma-separated labels>
//   os <comma-separated labels>
//   header <Name>: <value>     (repeatable, order preserved)
UserAgentProfile load_profile(const std::string& path);
UserAgentProfile parse_profile(const std::string& text);

}  // namespace covercall::sip
