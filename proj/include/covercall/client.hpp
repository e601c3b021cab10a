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
#include "covercall/net.hpp"
#include "covercall/prefetch.hpp"
#include "covercall/rtp.hpp"
#include "covercall/sip.hpp"

namespace covercall::client {

struct ClientConfig {
  std::string caller_sip_id;
  std::string callee_sip_id;
  crypto::Bytes master_key;
  std::string addr;
  std::uint16_t sip_port = 5060;
  std::uint16_t rtp_port = 4000;  // even; RTCP listens on rtp_port + 1
  sip::UserAgentProfile profile = sip::builtin_profile("pjsua");
  unsigned lambda = 10;
  net::Endpoint proxy;
  net::TimeMs rtcp_interval_ms = 5000;
  net::TimeMs ok_timeout_ms = 32000;
  net::TimeMs page_deadline_ms = 120000;
  net::TimeMs teardown_deadline_ms = 30000;
  // Requests whose path carries one of these extensions are embedded-object
  // fetches and never trigger an upstream message.
  std::vector<std::string> object_extensions = {
      "png", "jpg", "jpeg", "gif", "ico", "css", "js",
      "svg", "woff", "bin",  "mp4", "webp"};
  std::uint64_t rng_seed = 2;
};

using RequestId = std::uint64_t;

struct HttpResult {
  int status = 0;
  std::string reason;
  std::vector<std::uint8_t> response;  // full stored response when available
  bool from_cache = false;
  net::TimeMs completed_at = 0;
};

struct PageStats {
  std::string url;
  std::uint8_t task = 0;
  net::TimeMs submit_ms = 0;
  net::TimeMs html_ms = 0;   // first request/response pair reassembled
  net::TimeMs done_ms = 0;   // end-of-page marker (or failure) observed
  int status = 0;
  bool gap = false;
};

enum class SessionState {
  Idle,
  Inviting,
  Streaming,
  TearingDown,
  Terminated,
  Aborted,
};

// The user side: dials the callee SIP ID, verifies the manipulated OK before
// ACKing, keeps constant-rate dummy media flowing to the verified endpoint,
// decodes the downstream stream into an HTTP response cache, and answers
// proxy-style requests out of that cache. Completion of a navigation is
// polled (`done`/`result`); the scenario driver supplies the blocking loop.
class ClientNode {
 public:
  ClientNode(ClientConfig config, net::Scheduler& scheduler,
             net::DatagramTransport& transport, net::UpstreamChannel& upstream);

  void start_session(net::TimeMs now);
  void on_datagram(const net::Datagram& d, net::TimeMs now);
  RequestId http_request(std::span<const std::uint8_t> request,
                         net::TimeMs now);
  RequestId http_get(const std::string& url, net::TimeMs now);
  bool done(RequestId id) const;
  const HttpResult& result(RequestId id) const;
  void teardown(net::TimeMs now);
  std::vector<net::Datagram> tick(net::TimeMs now);

  SessionState state() const { return state_; }
  const std::string& abort_reason() const { return abort_reason_; }
  const std::optional<sip::VerifiedCallee>& verified_callee() const {
    return verified_callee_;
  }
  const std::map<std::string, std::vector<std::uint8_t>>& cache() const {
    return cache_;
  }
  const std::vector<PageStats>& page_stats() const { return page_stats_; }

  std::uint64_t auth_failures() const { return auth_failures_; }
  std::uint64_t replays_dropped() const { return replays_dropped_; }
  std::uint64_t rtcp_invalid() const { return rtcp_invalid_; }
  std::uint64_t rtp_received() const { return rtp_received_; }
  std::uint64_t recovered_blocks() const;
  std::uint64_t dummy_rtp_sent() const { return dummy_rtp_sent_; }
  std::uint64_t dummy_rtcp_sent() const { return dummy_rtcp_sent_; }
  std::uint64_t upstream_sent() const { return upstream_sent_; }
  std::uint64_t acks_sent() const { return acks_sent_; }
  // Media datagrams sent, keyed by destination address.
  const std::map<std::string, std::uint64_t>& media_sent_to() const {
    return media_sent_to_;
  }

 private:
  struct PendingNav {
    RequestId id;
    std::uint8_t task;
    std::string url;  // normalized
    net::TimeMs submitted;
    std::vector<std::pair<RequestId, std::string>> waiters;
    std::size_t stats_index;
  };

  void on_sip(const sip::SipMessage& m, net::TimeMs now);
  void on_rtp(const net::Datagram& d, net::TimeMs now);
  void process_deliveries(const std::vector<fec::Delivery>& deliveries,
                          net::TimeMs now);
  void finish_nav(PendingNav& nav, int status, const char* reason,
                  net::TimeMs now);
  void check_gaps(net::TimeMs now);
  void resolve(RequestId id, HttpResult result);
  std::uint8_t alloc_task();
  bool is_object_request(const std::string& url) const;
  void schedule_wake(net::TimeMs t);
  void abort_session(const std::string& reason);

  ClientConfig config_;
  net::Scheduler& scheduler_;
  net::DatagramTransport& transport_;
  net::UpstreamChannel& upstream_;
  std::mt19937_64 rng_;

  SessionState state_ = SessionState::Idle;
  std::string abort_reason_;
  sip::SipMessage invite_;
  sip::SipMessage ok_;
  crypto::SessionKeys keys_;
  std::optional<sip::VerifiedCallee> verified_callee_;
  codec::CodecProfile codec_ = codec::lookup("G.711");
  std::unique_ptr<fec::Demux> demux_;
  rtp::ReplayGuard rtp_guard_;
  rtp::ReplayGuard rtcp_guard_;
  fec::Mux dummy_mux_;  // never fed: yields the random filler we transmit
  rtp::SenderState rtp_sender_;
  rtp::SenderState rtcp_sender_;
  net::TimeMs next_rtp_due_ = 0;
  net::TimeMs next_rtcp_due_ = 0;

  std::map<std::uint8_t, web::RecordParser> parsers_;
  std::map<std::uint8_t, bool> first_record_seen_;
  std::map<std::string, std::vector<std::uint8_t>> cache_;
  std::vector<PendingNav> pending_;
  std::map<RequestId, HttpResult> results_;
  std::vector<PageStats> page_stats_;
  RequestId next_request_id_ = 1;
  std::uint8_t next_task_ = 1;
  std::set<std::uint8_t> active_tasks_;

  bool wake_pending_ = false;
  net::TimeMs wake_at_ = 0;
  std::uint64_t auth_failures_ = 0;
  std::uint64_t replays_dropped_ = 0;
  std::uint64_t rtcp_invalid_ = 0;
  std::uint64_t rtp_received_ = 0;
  std::uint64_t dummy_rtp_sent_ = 0;
  std::uint64_t dummy_rtcp_sent_ = 0;
  std::uint64_t upstream_sent_ = 0;
  std::uint64_t acks_sent_ = 0;
  std::map<std::string, std::uint64_t> media_sent_to_;
};

}  // namespace covercall::client
