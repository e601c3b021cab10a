#pragma once

// Shared test utilities: brute-force oracles and small fakes. Everything in
// here is deliberately independent of the implementation code paths it
// checks (enumeration instead of BFS, direct state tables instead of
// fixtures).

#include <algorithm>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "covercall/aspath.hpp"
#include "covercall/hostsel.hpp"
#include "covercall/net.hpp"
#include "covercall/netsim.hpp"

namespace testutil {

using covercall::aspath::AsNumber;
using covercall::aspath::AsTopology;

// Exhaustive valley-free path enumeration. Selection rule mirrors the
// documented route preference: first-hop class (customer < peer < provider),
// then path length, then lexicographically smallest AS sequence.
inline std::optional<std::vector<AsNumber>> best_path_bruteforce(
    const AsTopology& topo, AsNumber from, AsNumber to) {
  if (!topo.ases().count(from) || !topo.ases().count(to)) return std::nullopt;
  if (from == to) return std::vector<AsNumber>{from};

  struct Candidate {
    int klass;
    std::vector<AsNumber> path;
  };
  std::vector<Candidate> found;
  std::vector<AsNumber> walk{from};
  std::set<AsNumber> visited{from};

  // phase 0: may climb, peer, or descend; phase 1: descend only.
  auto dfs = [&](auto&& self, AsNumber at, int phase, int klass) -> void {
    if (at == to) {
      found.push_back({klass, walk});
      return;
    }
    auto step = [&](AsNumber next, int next_phase, int first_class) {
      if (visited.count(next)) return;
      visited.insert(next);
      walk.push_back(next);
      self(self, next, next_phase,
           walk.size() == 2 ? first_class : klass);
      walk.pop_back();
      visited.erase(next);
    };
    if (phase == 0) {
      for (AsNumber p : topo.providers_of(at)) step(p, 0, 2);
      for (AsNumber w : topo.peers_of(at)) step(w, 1, 1);
    }
    for (AsNumber c : topo.customers_of(at)) step(c, 1, 0);
  };
  dfs(dfs, from, 0, -1);

  if (found.empty()) return std::nullopt;
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.klass != b.klass) return a.klass < b.klass;
    if (a.path.size() != b.path.size()) return a.path.size() < b.path.size();
    return a.path < b.path;
  };
  return std::min_element(found.begin(), found.end(), better)->path;
}

// Random small topology: a loose tier hierarchy with extra peerings. All
// customer edges point from a lower tier to a higher tier, so provider
// chains never cycle.
inline AsTopology random_topology(std::mt19937_64& rng, int n_ases) {
  AsTopology topo;
  std::vector<AsNumber> ases;
  std::vector<int> tier;
  std::uniform_int_distribution<int> tier_pick(0, 2);
  for (int i = 0; i < n_ases; ++i) {
    ases.push_back(10 + i);
    tier.push_back(i == 0 ? 2 : tier_pick(rng));
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < n_ases; ++i) {
    bool has_provider = false;
    for (int j = 0; j < n_ases; ++j) {
      if (i == j) continue;
      if (tier[j] > tier[i] && coin(rng) < 0.45) {
        topo.add_customer_of(ases[i], ases[j]);
        has_provider = true;
      } else if (tier[j] == tier[i] && j > i && coin(rng) < 0.25) {
        topo.add_peers(ases[i], ases[j]);
      }
    }
    if (!has_provider && tier[i] < 2) {
      // guarantee connectivity pressure toward the top tier
      for (int j = 0; j < n_ases; ++j) {
        if (tier[j] > tier[i]) {
          topo.add_customer_of(ases[i], ases[j]);
          break;
        }
      }
    }
  }
  return topo;
}

// Scanner with one fixed state per port class, for predicate-level tests.
struct ComboScanner : covercall::hostsel::PortScanner {
  covercall::hostsel::PortState sip, rtp, rtcp;
  ComboScanner(covercall::hostsel::PortState s, covercall::hostsel::PortState r,
               covercall::hostsel::PortState c)
      : sip(s), rtp(r), rtcp(c) {}
  covercall::hostsel::PortState probe(const std::string&,
                                      std::uint16_t port) override {
    if (port == covercall::hostsel::kSipPort) return sip;
    return port % 2 == 0 ? rtp : rtcp;
  }
};

// Records every datagram delivered to one simulated address.
struct CaptureEndpoint {
  std::vector<covercall::net::Datagram> received;
  CaptureEndpoint(covercall::sim::Simulator& sim, const std::string& addr) {
    sim.register_endpoint(addr, [this](const covercall::net::Datagram& d,
                                       covercall::net::TimeMs) {
      received.push_back(d);
    });
  }
};

inline std::vector<std::uint8_t> bytes_of(const std::string& s) {
  return {s.begin(), s.end()};
}

}  // namespace testutil
