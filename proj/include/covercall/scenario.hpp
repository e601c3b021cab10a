#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "covercall/client.hpp"
#include "covercall/netsim.hpp"
#include "covercall/spoofer.hpp"

namespace covercall::scenario {

struct BadScenario : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Assertion {
  std::string text;  // the raw scenario line, for reporting
  std::string kind;
  std::vector<std::string> args;
};

struct Scenario {
  std::string name = "scenario";
  sim::SimConfig sim;
  std::string codec_name = "G.711";
  unsigned lambda = 10;
  std::string hosts_path;
  std::string topology_path;
  std::string pages_path;
  std::string ua_profile = "ekiga";
  std::string client_addr = "10.1.0.5";
  std::uint16_t client_rtp_port = 4000;
  std::string spoofer_addr = "198.51.100.9";
  std::string proxy_addr = "192.0.2.10";
  std::vector<std::string> navigations;
  bool teardown = true;
  net::TimeMs run_for_ms = 300000;
  std::vector<Assertion> assertions;
};

Scenario parse_scenario(const std::string& text, const std::string& base_dir);
Scenario load_scenario(const std::string& path);

struct PageReport {
  std::string url;
  double full_page_s = 0.0;
  double html_s = 0.0;
  int status = 0;
  bool gap = false;
  bool ok = false;
};

struct AssertionResult {
  std::string text;
  bool pass = false;
  std::string detail;
};

struct RunReport {
  std::string scenario_name;
  std::uint64_t seed = 0;
  std::string codec;
  double goodput_bytes_per_s = 0.0;
  std::vector<PageReport> pages;

  std::string client_state;
  std::string abort_reason;
  std::uint64_t client_rtp_received = 0;
  std::uint64_t client_auth_failures = 0;
  std::uint64_t client_replays_dropped = 0;
  std::uint64_t client_rtcp_invalid = 0;
  std::uint64_t client_dummy_rtp = 0;
  std::uint64_t client_dummy_rtcp = 0;
  std::uint64_t client_acks = 0;
  std::uint64_t upstream_messages = 0;
  std::uint64_t recovered_blocks = 0;
  std::map<std::string, std::uint64_t> client_media_by_dst;

  std::uint64_t spoofer_rtp = 0;
  std::uint64_t spoofer_rtcp = 0;
  std::uint64_t spoofer_byes = 0;
  std::uint64_t spoofer_rejects = 0;
  std::uint64_t spoofer_unknown_invites = 0;

  std::uint64_t censor_entries = 0;
  std::uint64_t acks_crossed = 0;
  std::uint64_t attack_dropped = 0;
  std::uint64_t attack_altered = 0;
  std::uint64_t attack_rewritten_oks = 0;
  std::uint64_t replays_injected = 0;
  std::uint64_t replays_injected_inbound = 0;
  std::map<std::string, std::set<std::string>> bindings;

  std::vector<AssertionResult> assertions;
  bool ok() const {
    for (const auto& a : assertions)
      if (!a.pass) return false;
    return true;
  }
};

// Everything a scenario wires together, exposed so drivers (the CLI runner,
// integration tests, the acceptance suite) can poke at individual nodes.
// Non-movable: nodes hold references into the simulator.
class Stack {
 public:
  explicit Stack(const Scenario& sc);
  Stack(const Stack&) = delete;
  Stack& operator=(const Stack&) = delete;

  codec::CodecProfile codec;
  std::optional<aspath::AsTopology> topo;
  sim::Simulator simulator;
  hostsel::FixtureScanner scanner;
  hostsel::HostRegistry registry;
  web::MemoryPageStore pages;
  sim::SipProxy proxy;
  sim::UpstreamQueue upstream;
  std::optional<aspath::ValleyFreeProvider> paths;
  spoofer::RegistrationRecord registration;
  std::unique_ptr<spoofer::SpooferNode> relay;
  std::unique_ptr<client::ClientNode> user;
};

RunReport run_scenario(const Scenario& sc);

// Report assembly over an already-driven stack (run_scenario uses this).
RunReport collect_report(const Scenario& sc, const Stack& stack);

}  // namespace covercall::scenario
