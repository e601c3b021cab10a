#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "covercall/aspath.hpp"
#include "covercall/net.hpp"
#include "covercall/sip.hpp"

namespace covercall::sim {

struct UnknownEndpoint : std::runtime_error {
  explicit UnknownEndpoint(const std::string& addr)
      : std::runtime_error("no endpoint registered at " + addr) {}
};

struct CensorAttack {
  enum class Kind {
    None,
    DropAllToCallee,   // kill the outbound media flow entirely
    RewriteOkAddress,  // rewrite the callee endpoint inside OK messages
    ReplayToCallee,    // re-inject copies of observed media
    AlterRtp,          // flip ciphertext bits on inbound RTP
    DropRandom,        // plain probabilistic media loss
  };
  Kind kind = Kind::None;
  std::string target_addr;  // DropAllToCallee filter / RewriteOkAddress value
  std::uint16_t rewrite_port = 0;  // 0 keeps the original port
  double probability = 1.0;
  unsigned every_nth = 0;  // when set, acts on every nth matching packet
  net::TimeMs active_from_ms = 0;
  net::TimeMs active_until_ms = ~0ull;
  net::TimeMs replay_delay_ms = 100;
};

CensorAttack::Kind attack_kind_from_name(const std::string& name);

struct SimConfig {
  std::uint64_t seed = 1;
  double loss_rate = 0.0;
  double reorder_rate = 0.0;
  net::TimeMs base_delay_ms = 50;
  net::TimeMs jitter_ms = 0;
  net::TimeMs fetch_latency_ms = 2000;
  net::TimeMs upstream_latency_ms = 100;
  std::set<aspath::AsNumber> censor_ases;
  std::optional<CensorAttack> attack;
};

struct ObservationEntry {
  net::TimeMs t;
  net::Endpoint src;  // as claimed; the censor cannot see deeper
  net::Endpoint dst;
  net::DatagramKind kind;
  std::size_t size;
};

// What the censor accumulates at its border: flow metadata for everything,
// and SIP-ID-to-address bindings parsed out of plaintext OK messages.
class ObservationLog {
 public:
  void observe(const ObservationEntry& e, const net::Datagram& d);
  const std::vector<ObservationEntry>& entries() const { return entries_; }
  const std::map<std::string, std::set<std::string>>& bindings() const {
    return bindings_;
  }
  std::size_t count_sip(sip::Kind kind) const;

 private:
  std::vector<ObservationEntry> entries_;
  std::map<std::string, std::set<std::string>> bindings_;
  std::vector<std::pair<net::TimeMs, sip::Kind>> sip_kinds_;
};

// Deterministic discrete-event datagram network. Spoofing-transparent:
// receivers and observers only ever see claimed_src. The censor boundary is
// AS membership of the endpoint addresses; attacks and logging trigger on
// datagrams whose endpoints straddle it.
class Simulator : public net::Scheduler {
 public:
  using Handler = std::function<void(const net::Datagram&, net::TimeMs)>;

  explicit Simulator(SimConfig config,
                     const aspath::AsTopology* topo = nullptr);

  net::TimeMs now_ms() const override { return now_; }
  void call_at(net::TimeMs t, std::function<void()> fn) override;

  void register_endpoint(const std::string& addr, Handler handler);
  // A quiet sink: accepts anything, replies to nothing (dummy hosts).
  void register_sink(const std::string& addr);
  bool endpoint_known(const std::string& addr) const;

  net::DatagramTransport& transport_for(const std::string& addr,
                                        bool supports_spoofing = true);

  void send(const net::Datagram& d);

  // Runs the event queue up to and including virtual time t.
  void run_until(net::TimeMs t);

  const ObservationLog& censor_log() const { return censor_; }
  std::uint64_t delivered() const { return delivered_; }
  std::uint64_t dropped_loss() const { return dropped_loss_; }
  std::uint64_t attack_dropped() const { return attack_dropped_; }
  std::uint64_t attack_altered() const { return attack_altered_; }
  std::uint64_t attack_rewritten_oks() const { return attack_rewritten_oks_; }
  std::uint64_t replays_injected() const { return replays_injected_; }
  std::uint64_t replays_injected_inbound() const {
    return replays_injected_inbound_;
  }
  std::uint64_t sink_received(const std::string& addr) const;
  bool censored(const std::string& addr) const;

 private:
  struct Event {
    net::TimeMs t;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };

  class NodeTransport : public net::DatagramTransport {
   public:
    NodeTransport(Simulator& sim, std::string addr, bool spoofing)
        : sim_(sim), addr_(std::move(addr)), spoofing_(spoofing) {}
    void send(const net::Datagram& d) override { sim_.send(d); }
    const std::string& local_addr() const override { return addr_; }
    bool supports_spoofing() const override { return spoofing_; }

   private:
    Simulator& sim_;
    std::string addr_;
    bool spoofing_;
  };

  enum class AttackAction { Pass, Drop };
  AttackAction apply_attack(net::Datagram& d);
  void transfer(const net::Datagram& d);  // loss + delay + delivery

  SimConfig config_;
  const aspath::AsTopology* topo_;
  std::mt19937_64 rng_;
  net::TimeMs now_ = 0;
  std::uint64_t event_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::map<std::string, Handler> endpoints_;
  std::map<std::string, std::uint64_t> sinks_;
  std::map<std::string, std::unique_ptr<NodeTransport>> transports_;
  ObservationLog censor_;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_loss_ = 0;
  std::uint64_t attack_dropped_ = 0;
  std::uint64_t attack_altered_ = 0;
  std::uint64_t attack_rewritten_oks_ = 0;
  std::uint64_t replays_injected_ = 0;
  std::uint64_t replays_injected_inbound_ = 0;
  std::uint64_t attack_match_counter_ = 0;
};

// Minimal SIP proxy hop: forwards requests to registered locations and
// responses back to the caller, emitting Trying on INVITEs. Payload bytes
// pass through untouched (SDP included).
class SipProxy {
 public:
  SipProxy(Simulator& sim, const std::string& addr,
           std::uint16_t port = 5060);
  void register_location(const std::string& sip_id, const net::Endpoint& ep);
  const std::string& addr() const { return addr_; }
  net::Endpoint endpoint() const { return {addr_, port_}; }
  std::uint64_t forwarded() const { return forwarded_; }

 private:
  void on_datagram(const net::Datagram& d, net::TimeMs now);

  Simulator& sim_;
  std::string addr_;
  std::uint16_t port_;
  net::DatagramTransport& transport_;
  std::map<std::string, net::Endpoint> locations_;
  std::map<std::string, net::Endpoint> call_routes_;  // call id -> caller
  std::uint64_t forwarded_ = 0;
};

// In-process indirect channel: delivers upstream messages to a receiver
// callback after the configured latency. Message contents are modeled as
// invisible to the censor (steganographic cover is out of scope here).
class UpstreamQueue : public net::UpstreamChannel {
 public:
  using Receiver = std::function<void(const net::UpstreamMessage&, net::TimeMs)>;

  UpstreamQueue(Simulator& sim, net::TimeMs latency_ms)
      : sim_(sim), latency_ms_(latency_ms) {}
  void set_receiver(Receiver r) { receiver_ = std::move(r); }
  void send(const net::UpstreamMessage& m) override;
  std::uint64_t sent() const { return sent_; }
  std::uint64_t receiver_errors() const { return receiver_errors_; }

 private:
  Simulator& sim_;
  net::TimeMs latency_ms_;
  Receiver receiver_;
  std::uint64_t sent_ = 0;
  std::uint64_t receiver_errors_ = 0;
};

}  // namespace covercall::sim
