#include "covercall/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "covercall/client.hpp"
#include "covercall/codec.hpp"
#include "covercall/spoofer.hpp"

namespace covercall::scenario {

namespace {

std::string join_path(const std::string& base_dir, const std::string& rel) {
  if (rel.empty() || rel.front() == '/') return rel;
  if (base_dir.empty()) return rel;
  return (std::filesystem::path(base_dir) / rel).string();
}

std::map<std::string, std::string> parse_kv(std::istringstream& ls) {
  std::map<std::string, std::string> out;
  std::string tok;
  while (ls >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw BadScenario("expected key=value, got '" + tok + "'");
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::string value;
    if (key == "name") {
      ls >> sc.name;
    } else if (key == "seed") {
      ls >> sc.sim.seed;
    } else if (key == "codec") {
      ls >> sc.codec_name;
    } else if (key == "lambda") {
      ls >> sc.lambda;
    } else if (key == "loss_rate") {
      ls >> sc.sim.loss_rate;
    } else if (key == "reorder_rate") {
      ls >> sc.sim.reorder_rate;
    } else if (key == "base_delay_ms") {
      ls >> sc.sim.base_delay_ms;
    } else if (key == "jitter_ms") {
      ls >> sc.sim.jitter_ms;
    } else if (key == "fetch_latency_ms") {
      ls >> sc.sim.fetch_latency_ms;
    } else if (key == "upstream_latency_ms") {
      ls >> sc.sim.upstream_latency_ms;
    } else if (key == "censor_as") {
      aspath::AsNumber as;
      while (ls >> as) sc.sim.censor_ases.insert(as);
    } else if (key == "hosts") {
      ls >> value;
      sc.hosts_path = join_path(base_dir, value);
    } else if (key == "topology") {
      ls >> value;
      sc.topology_path = join_path(base_dir, value);
    } else if (key == "pages") {
      ls >> value;
      sc.pages_path = join_path(base_dir, value);
    } else if (key == "ua_profile") {
      ls >> sc.ua_profile;
    } else if (key == "client_addr") {
      ls >> sc.client_addr;
    } else if (key == "client_rtp_port") {
      ls >> sc.client_rtp_port;
    } else if (key == "spoofer_addr") {
      ls >> sc.spoofer_addr;
    } else if (key == "proxy_addr") {
      ls >> sc.proxy_addr;
    } else if (key == "navigate") {
      ls >> value;
      sc.navigations.push_back(value);
    } else if (key == "teardown") {
      ls >> value;
      sc.teardown = value == "true" || value == "1";
    } else if (key == "run_for_ms") {
      ls >> sc.run_for_ms;
    } else if (key == "attack") {
      std::string kind_name;
      ls >> kind_name;
      sim::CensorAttack atk;
      atk.kind = sim::attack_kind_from_name(kind_name);
      for (const auto& [k, v] : parse_kv(ls)) {
        if (k == "addr")
          atk.target_addr = v;
        else if (k == "port")
          atk.rewrite_port = static_cast<std::uint16_t>(std::stoul(v));
        else if (k == "p")
          atk.probability = std::stod(v);
        else if (k == "every_nth")
          atk.every_nth = static_cast<unsigned>(std::stoul(v));
        else if (k == "from_ms")
          atk.active_from_ms = std::stoull(v);
        else if (k == "until_ms")
          atk.active_until_ms = std::stoull(v);
        else if (k == "delay_ms")
          atk.replay_delay_ms = std::stoull(v);
        else
          throw BadScenario("unknown attack parameter '" + k + "'");
      }
      if (atk.kind != sim::CensorAttack::Kind::None) sc.sim.attack = atk;
    } else if (key == "assert") {
      Assertion a;
      std::ostringstream raw;
      std::string tok;
      if (!(ls >> a.kind)) throw BadScenario("empty assert line");
      raw << a.kind;
      while (ls >> tok) {
        a.args.push_back(tok);
        raw << ' ' << tok;
      }
      a.text = raw.str();
      sc.assertions.push_back(std::move(a));
    } else {
      throw BadScenario("unknown scenario key '" + key + "'");
    }
  }
  if (sc.hosts_path.empty()) throw BadScenario("scenario needs a hosts fixture");
  if (sc.pages_path.empty()) throw BadScenario("scenario needs a page manifest");
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadScenario("cannot open scenario: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_scenario(buf.str(),
                        std::filesystem::path(path).parent_path().string());
}

namespace {

struct Driver {
  sim::Simulator& sim;
  client::ClientNode& client;
  const Scenario& sc;
  std::size_t nav_index = 0;
  std::optional<client::RequestId> current;
  bool torn_down = false;
  bool finished = false;

  void poll() {
    const net::TimeMs now = sim.now_ms();
    if (client.state() == client::SessionState::Aborted) {
      finished = true;
      return;
    }
    if (current && client.done(*current)) current.reset();
    if (!current) {
      if (nav_index < sc.navigations.size()) {
        if (client.state() == client::SessionState::Streaming) {
          current = client.http_get(sc.navigations[nav_index], now);
          ++nav_index;
        }
      } else if (!torn_down) {
        if (sc.teardown) client.teardown(now);
        torn_down = true;
        if (!sc.teardown) {
          finished = true;  // leave the media running until run_for_ms
          return;
        }
      } else if (client.state() == client::SessionState::Terminated ||
                 client.state() == client::SessionState::Aborted) {
        finished = true;
        return;
      }
    }
    sim.call_at(now + 10, [this] { poll(); });
  }
};

AssertionResult evaluate(const Assertion& a, const RunReport& r) {
  AssertionResult res;
  res.text = a.text;
  auto page_of = [&](const std::string& url) -> const PageReport* {
    for (const auto& p : r.pages)
      if (p.url == url) return &p;
    return nullptr;
  };
  auto within = [&](double measured, double expected, double tol) {
    return std::fabs(measured - expected) <= tol * expected;
  };

  if (a.kind == "all_pages_ok") {
    res.pass = !r.pages.empty();
    for (const auto& p : r.pages)
      if (!p.ok) res.pass = false;
    res.detail = std::to_string(r.pages.size()) + " page(s)";
  } else if (a.kind == "page_within" && a.args.size() == 3) {
    const PageReport* p = page_of(a.args[0]);
    const double expected = std::stod(a.args[1]);
    const double tol = std::stod(a.args[2]);
    res.pass = p && p->ok && within(p->full_page_s, expected, tol);
    res.detail = p ? "measured " + std::to_string(p->full_page_s) + " s"
                   : "page missing";
  } else if (a.kind == "html_within" && a.args.size() == 3) {
    const PageReport* p = page_of(a.args[0]);
    const double expected = std::stod(a.args[1]);
    const double tol = std::stod(a.args[2]);
    res.pass = p && within(p->html_s, expected, tol);
    res.detail = p ? "measured " + std::to_string(p->html_s) + " s"
                   : "page missing";
  } else if (a.kind == "upstream_count" && a.args.size() == 1) {
    res.pass = r.upstream_messages == std::stoull(a.args[0]);
    res.detail = "sent " + std::to_string(r.upstream_messages);
  } else if (a.kind == "client_aborted") {
    res.pass = r.client_state == "aborted";
    res.detail = r.client_state + " (" + r.abort_reason + ")";
  } else if (a.kind == "no_ack_crossed") {
    res.pass = r.acks_crossed == 0;
    res.detail = std::to_string(r.acks_crossed) + " ACKs crossed";
  } else if (a.kind == "no_media_to" && a.args.size() == 1) {
    auto it = r.client_media_by_dst.find(a.args[0]);
    const std::uint64_t n = it == r.client_media_by_dst.end() ? 0 : it->second;
    res.pass = n == 0;
    res.detail = std::to_string(n) + " datagrams";
  } else if (a.kind == "page_gap" && a.args.size() == 1) {
    const PageReport* p = page_of(a.args[0]);
    res.pass = p && p->gap;
    res.detail = p ? (p->gap ? "gap" : "no gap") : "page missing";
  } else {
    res.pass = false;
    res.detail = "unknown assertion";
  }
  return res;
}

const char* state_name(client::SessionState s) {
  switch (s) {
    case client::SessionState::Idle:
      return "idle";
    case client::SessionState::Inviting:
      return "inviting";
    case client::SessionState::Streaming:
      return "streaming";
    case client::SessionState::TearingDown:
      return "tearing-down";
    case client::SessionState::Terminated:
      return "terminated";
    case client::SessionState::Aborted:
      return "aborted";
  }
  return "?";
}

}  // namespace

Stack::Stack(const Scenario& sc)
    : codec(codec::lookup(sc.codec_name)),
      topo(sc.topology_path.empty()
               ? std::nullopt
               : std::optional(aspath::AsTopology::load(sc.topology_path))),
      simulator(sc.sim, topo ? &*topo : nullptr),
      scanner(hostsel::FixtureScanner::load(sc.hosts_path)),
      pages(web::MemoryPageStore::load(sc.pages_path)),
      proxy(simulator, sc.proxy_addr),
      upstream(simulator, sc.sim.upstream_latency_ms) {
  for (const auto& addr : scanner.addresses()) simulator.register_sink(addr);
  {
    std::mt19937_64 scan_rng(sc.sim.seed ^ 0x5ca11ull);
    registry.add_candidates(
        hostsel::scan_candidates(scanner.addresses(), scanner, scan_rng),
        &scanner);
  }
  if (topo) paths.emplace(*topo);

  spoofer::SpooferConfig scfg;
  scfg.addr = sc.spoofer_addr;
  scfg.codec = codec;
  scfg.lambda = sc.lambda;
  scfg.fetch_latency_ms = sc.sim.fetch_latency_ms;
  scfg.censor_ases = sc.sim.censor_ases;
  scfg.proxy = proxy.endpoint();
  scfg.ua_profiles = {sc.ua_profile};
  scfg.rng_seed = sc.sim.seed ^ 0x9f00f;
  relay = std::make_unique<spoofer::SpooferNode>(
      scfg, simulator, simulator.transport_for(sc.spoofer_addr), registry,
      scanner, scanner, pages, crypto::generate_keypair(),
      paths ? &*paths : nullptr, topo ? &*topo : nullptr);
  simulator.register_endpoint(sc.spoofer_addr,
                              [this](const net::Datagram& d, net::TimeMs now) {
                                relay->on_datagram(d, now);
                              });
  upstream.set_receiver([this](const net::UpstreamMessage& m, net::TimeMs now) {
    relay->handle_upstream(m, now);
  });

  // Bootstrap registration, sealed to the relay's public key.
  std::mt19937_64 key_rng(sc.sim.seed ^ 0x6b65790ull);
  crypto::Bytes master(32);
  for (auto& b : master) b = static_cast<std::uint8_t>(key_rng());
  registration.caller_sip_id = "alice@client.example";
  registration.master_key = master;
  registration.callee_sip_id = "callee-" + sc.name + "@voip.example";
  registration.callee_sip_password = "callee-pass";
  registration.upstream_id = "alice.drop@im.example";
  registration.upstream_password = "im-pass";
  const std::string reg_text = spoofer::serialize_registration(registration);
  relay->register_user(crypto::seal_to(
      relay->public_key(),
      std::span(reinterpret_cast<const std::uint8_t*>(reg_text.data()),
                reg_text.size())));
  proxy.register_location(registration.callee_sip_id,
                          {sc.spoofer_addr, hostsel::kSipPort});
  proxy.register_location(registration.caller_sip_id,
                          {sc.client_addr, hostsel::kSipPort});

  client::ClientConfig ccfg;
  ccfg.caller_sip_id = registration.caller_sip_id;
  ccfg.callee_sip_id = registration.callee_sip_id;
  ccfg.master_key = master;
  ccfg.addr = sc.client_addr;
  ccfg.rtp_port = sc.client_rtp_port;
  ccfg.lambda = sc.lambda;
  ccfg.proxy = proxy.endpoint();
  ccfg.rng_seed = sc.sim.seed ^ 0xc11e47;
  user = std::make_unique<client::ClientNode>(
      ccfg, simulator, simulator.transport_for(sc.client_addr), upstream);
  simulator.register_endpoint(sc.client_addr,
                              [this](const net::Datagram& d, net::TimeMs now) {
                                user->on_datagram(d, now);
                              });

  if (sc.sim.attack &&
      sc.sim.attack->kind == sim::CensorAttack::Kind::RewriteOkAddress &&
      !simulator.endpoint_known(sc.sim.attack->target_addr)) {
    simulator.register_sink(sc.sim.attack->target_addr);
  }
}

RunReport collect_report(const Scenario& sc, const Stack& stack) {
  const auto& user = *stack.user;
  const auto& relay = *stack.relay;
  const auto& simulator = stack.simulator;

  RunReport r;
  r.scenario_name = sc.name;
  r.seed = sc.sim.seed;
  r.codec = stack.codec.name;
  r.goodput_bytes_per_s = codec::goodput(stack.codec, sc.lambda);
  for (const auto& ps : user.page_stats()) {
    PageReport p;
    p.url = ps.url;
    p.full_page_s =
        ps.done_ms > ps.submit_ms ? (ps.done_ms - ps.submit_ms) / 1000.0 : 0.0;
    p.html_s =
        ps.html_ms > ps.submit_ms ? (ps.html_ms - ps.submit_ms) / 1000.0 : 0.0;
    p.status = ps.status;
    p.gap = ps.gap;
    p.ok = ps.status == 200 && !ps.gap;
    r.pages.push_back(p);
  }
  r.client_state = state_name(user.state());
  r.abort_reason = user.abort_reason();
  r.client_rtp_received = user.rtp_received();
  r.client_auth_failures = user.auth_failures();
  r.client_replays_dropped = user.replays_dropped();
  r.client_rtcp_invalid = user.rtcp_invalid();
  r.client_dummy_rtp = user.dummy_rtp_sent();
  r.client_dummy_rtcp = user.dummy_rtcp_sent();
  r.client_acks = user.acks_sent();
  r.upstream_messages = user.upstream_sent();
  r.recovered_blocks = user.recovered_blocks();
  r.client_media_by_dst = user.media_sent_to();
  r.spoofer_rtp = relay.rtp_sent();
  r.spoofer_rtcp = relay.rtcp_sent();
  r.spoofer_byes = relay.byes_sent();
  r.spoofer_rejects = relay.rejects_sent();
  r.spoofer_unknown_invites = relay.unknown_callee_invites();
  r.censor_entries = simulator.censor_log().entries().size();
  r.acks_crossed = simulator.censor_log().count_sip(sip::Kind::Ack);
  r.attack_dropped = simulator.attack_dropped();
  r.attack_altered = simulator.attack_altered();
  r.attack_rewritten_oks = simulator.attack_rewritten_oks();
  r.replays_injected = simulator.replays_injected();
  r.replays_injected_inbound = simulator.replays_injected_inbound();
  r.bindings = simulator.censor_log().bindings();
  for (const auto& a : sc.assertions) r.assertions.push_back(evaluate(a, r));
  return r;
}

RunReport run_scenario(const Scenario& sc) {
  Stack stack(sc);
  stack.simulator.call_at(
      10, [&] { stack.user->start_session(stack.simulator.now_ms()); });
  Driver driver{stack.simulator, *stack.user, sc, 0, std::nullopt, false,
                false};
  stack.simulator.call_at(20, [&] { driver.poll(); });
  stack.simulator.run_until(sc.run_for_ms);
  return collect_report(sc, stack);
}

}  // namespace covercall::scenario
