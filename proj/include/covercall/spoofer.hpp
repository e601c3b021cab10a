#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "covercall/codec.hpp"
#include "covercall/crypto.hpp"
#include "covercall/fec.hpp"
#include "covercall/hostsel.hpp"
#include "covercall/net.hpp"
#include "covercall/prefetch.hpp"
#include "covercall/rtp.hpp"
#include "covercall/sip.hpp"

namespace covercall::spoofer {

struct DecryptFailure : std::runtime_error {
  DecryptFailure() : std::runtime_error("registration does not decrypt") {}
};
struct MalformedRecord : std::runtime_error {
  explicit MalformedRecord(const std::string& why)
      : std::runtime_error("malformed registration record: " + why) {}
};
struct NoSession : std::runtime_error {
  explicit NoSession(const std::string& client)
      : std::runtime_error("no streaming session for " + client) {}
};
struct DuplicateTask : std::runtime_error {
  explicit DuplicateTask(unsigned task)
      : std::runtime_error("task " + std::to_string(task) +
                           " is already active") {}
};

// The six-field bootstrap payload a joining user seals to the relay's
// public key: caller SIP ID | master key (hex) | callee SIP ID | callee
// password | upstream ID | upstream password.
struct RegistrationRecord {
  std::string caller_sip_id;
  crypto::Bytes master_key;
  std::string callee_sip_id;
  std::string callee_sip_password;
  std::string upstream_id;
  std::string upstream_password;
};

std::string serialize_registration(const RegistrationRecord& rec);
RegistrationRecord parse_registration(const std::string& text);

struct SpooferConfig {
  std::string addr;
  std::uint16_t sip_port = 5060;
  codec::CodecProfile codec = codec::lookup("G.711");
  unsigned lambda = 10;
  net::TimeMs rtcp_interval_ms = 5000;
  net::TimeMs monitor_interval_ms = 60000;
  net::TimeMs fetch_latency_ms = 2000;
  double distance_threshold_km = 500.0;
  std::set<aspath::AsNumber> censor_ases;
  net::Endpoint proxy;  // SIP proxy the relay answers through
  std::vector<std::string> ua_profiles = {"ekiga"};
  std::uint64_t rng_seed = 1;
};

// The relay node: answers INVITEs for registered callee IDs with manipulated
// OKs, prefetches requested pages, and streams them to the client at the
// codec's fixed cadence with the dummy host as the claimed source.
class SpooferNode {
 public:
  struct Session {
    enum class State { Initializing, Streaming, Terminated };
    std::string callee_sip_id;
    std::string client_addr;
    net::Endpoint client_media;
    hostsel::DummyHostRecord dummy;
    crypto::SessionKeys keys;
    codec::CodecProfile codec;
    fec::Mux mux;
    sip::SipMessage dialog_ok;
    State state = State::Initializing;
    rtp::SenderState rtp_sender;
    rtp::SenderState rtcp_sender;
    net::TimeMs next_rtp_due = 0;
    net::TimeMs next_rtcp_due = 0;
    net::TimeMs next_monitor_due = 0;
    std::set<std::uint8_t> active_tasks;
    std::uint64_t rtp_emitted = 0;
    std::uint64_t rtcp_emitted = 0;

    Session(std::size_t capacity, unsigned lambda, std::uint64_t mux_seed)
        : mux(capacity, lambda, 0, mux_seed) {}
  };

  SpooferNode(SpooferConfig config, net::Scheduler& scheduler,
              net::DatagramTransport& transport,
              hostsel::HostRegistry& registry, hostsel::GeoProvider& geo,
              hostsel::PortScanner& scanner, web::PageFetcher& fetcher,
              crypto::BoxKeypair keypair,
              const aspath::AsPathProvider* paths = nullptr,
              const aspath::AsTopology* topo = nullptr);

  // Decrypts and stores a sealed registration blob. Returns the record so
  // the caller can complete provider-side setup (SIP location, upstream
  // inbox). Throws DecryptFailure / MalformedRecord.
  const RegistrationRecord& register_user(
      std::span<const std::uint8_t> ciphertext);

  void on_datagram(const net::Datagram& d, net::TimeMs now);

  // URL arrivals from the indirect channel. Throws NoSession/DuplicateTask.
  void handle_upstream(const net::UpstreamMessage& m, net::TimeMs now);

  // Emits everything due at `now` (RTP blocks, RTCP cover, monitor checks)
  // and schedules the next wake-up. Returns the datagrams sent.
  std::vector<net::Datagram> tick(net::TimeMs now);

  const std::array<std::uint8_t, 32>& public_key() const {
    return keypair_.public_key;
  }
  const std::map<std::string, RegistrationRecord>& users() const {
    return users_;
  }
  const Session* session_for(const std::string& client_addr) const;
  std::uint64_t unknown_callee_invites() const {
    return unknown_callee_invites_;
  }
  std::uint64_t rejects_sent() const { return rejects_sent_; }
  std::uint64_t rtp_sent() const { return rtp_sent_; }
  std::uint64_t rtcp_sent() const { return rtcp_sent_; }
  std::uint64_t byes_sent() const { return byes_sent_; }

 private:
  void handle_invite(const sip::SipMessage& invite, net::TimeMs now);
  void handle_ack(const sip::SipMessage& ack, net::TimeMs now);
  void enqueue_page(const std::string& client_addr, std::uint8_t task,
                    const std::string& url);
  void terminate_session(Session& s, net::TimeMs now, bool send_bye);
  void send_sip(const sip::SipMessage& m);
  void schedule_wake(net::TimeMs t);
  const sip::UserAgentProfile& profile_for(const std::string& callee) const;

  SpooferConfig config_;
  net::Scheduler& scheduler_;
  net::DatagramTransport& transport_;
  hostsel::HostRegistry& registry_;
  hostsel::GeoProvider& geo_;
  hostsel::PortScanner& scanner_;
  web::PageFetcher& fetcher_;
  crypto::BoxKeypair keypair_;
  const aspath::AsPathProvider* paths_;
  const aspath::AsTopology* topo_;
  std::mt19937_64 rng_;
  std::vector<sip::UserAgentProfile> profiles_;

  std::map<std::string, RegistrationRecord> users_;  // caller SIP ID -> record
  std::map<std::string, std::string> callee_index_;  // callee -> caller
  std::map<std::string, std::unique_ptr<Session>> sessions_;  // client addr
  std::map<std::string, std::string> call_index_;  // call id -> client addr

  bool wake_pending_ = false;
  net::TimeMs wake_at_ = 0;
  std::uint64_t unknown_callee_invites_ = 0;
  std::uint64_t rejects_sent_ = 0;
  std::uint64_t rtp_sent_ = 0;
  std::uint64_t rtcp_sent_ = 0;
  std::uint64_t byes_sent_ = 0;
};

}  // namespace covercall::spoofer
