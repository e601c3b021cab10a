#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace covercall::net {

using TimeMs = std::uint64_t;

struct Endpoint {
  std::string addr;
  std::uint16_t port = 0;

  bool operator==(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);

enum class DatagramKind { Rtp, Rtcp, Sip };

const char* kind_name(DatagramKind k);

// claimed_src is what the network (and any on-path observer) sees as the
// origin; it need not match the sending node's real address.
struct Datagram {
  Endpoint claimed_src;
  Endpoint dst;
  DatagramKind kind = DatagramKind::Rtp;
  std::vector<std::uint8_t> payload;
};

struct SpoofingUnsupported : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Injection point for the network beneath a node. The simulator provides the
// standard implementation; a raw-socket adapter can be slotted in where the
// host network permits forged source addresses (see docs/transport.md).
class DatagramTransport {
 public:
  virtual ~DatagramTransport() = default;
  virtual void send(const Datagram& d) = 0;
  virtual const std::string& local_addr() const = 0;
  virtual bool supports_spoofing() const = 0;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual TimeMs now_ms() const = 0;
  virtual void call_at(TimeMs t, std::function<void()> fn) = 0;
};

struct UpstreamMessage {
  std::string url;
  std::string client_addr;
  std::uint8_t task = 0;
};

// Upstream literal that closes a circumvention session.
constexpr const char* kTerminateUrl = "TERMINATE";

// Low-bandwidth indirect channel for outbound requests. The in-process
// implementation lives in the simulator; a real deployment would back this
// with a steganographic IM/email client.
class UpstreamChannel {
 public:
  virtual ~UpstreamChannel() = default;
  virtual void send(const UpstreamMessage& m) = 0;
};

}  // namespace covercall::net
