#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace covercall::codec {

// Traffic identity of one VoIP codec: how big each RTP payload is, how often
// packets leave, and the nominal channel bandwidth that implies.
struct CodecProfile {
  std::string name;
  std::size_t payload_size = 0;   // bytes per RTP payload
  unsigned send_interval_ms = 0;  // gap between consecutive RTP packets
  double inbound_kbps = 0.0;      // nominal channel bandwidth
  double consumed_kbps = 0.0;     // informational: load seen at the dummy host

  // Payload bytes available to the block layer (4 bytes go to the header).
  std::size_t block_capacity() const {
    return payload_size > 4 ? payload_size - 4 : 0;
  }
};

struct UnknownCodec : std::runtime_error {
  explicit UnknownCodec(const std::string& name)
      : std::runtime_error("unknown codec: " + name) {}
};

struct BadProfile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Built-in profiles: G.711, G.722-64, G.726-40, iLBC, all at 20 ms cadence.
const std::vector<CodecProfile>& builtin_profiles();

// Looks a codec up by name among the built-ins. Throws UnknownCodec.
CodecProfile lookup(const std::string& name);

// Same, over an explicit profile set (e.g. one loaded from a config file).
CodecProfile lookup(const std::string& name,
                    const std::vector<CodecProfile>& profiles);

// Effective censored-data rate in bytes/second once the 4-byte block header
// and one parity block per group_size data blocks are paid for:
//   (payload_size - 4) * (1000 / send_interval) * lambda / (lambda + 1)
double goodput(const CodecProfile& profile, unsigned group_size);

// True when payload_size/send_interval reproduce inbound_kbps within slack.
bool bandwidth_identity_holds(const CodecProfile& profile,
                              double slack_kbps = 0.5);

// Config file: one codec per line,
//   name payload=<bytes> interval=<ms> inbound=<kbps> consumed=<kbps>
// Blank lines and #-comments are ignored. Throws BadProfile.
std::vector<CodecProfile> load_profiles(const std::string& path);
std::vector<CodecProfile> parse_profiles(const std::string& text);

}  // namespace covercall::codec
