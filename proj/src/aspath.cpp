#include "covercall/aspath.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

namespace covercall::aspath {

namespace {

constexpr std::uint32_t kInf = std::numeric_limits<std::uint32_t>::max();

std::vector<AsNumber> sorted(const std::map<AsNumber, std::set<AsNumber>>& m,
                             AsNumber x) {
  auto it = m.find(x);
  if (it == m.end()) return {};
  return {it->second.begin(), it->second.end()};
}

}  // namespace

void AsTopology::add_customer_of(AsNumber customer, AsNumber provider) {
  if (customer == provider)
    throw BadTopology("self relationship on AS" + std::to_string(customer));
  providers_[customer].insert(provider);
  customers_[provider].insert(customer);
  peers_[customer].erase(provider);
  peers_[provider].erase(customer);
  ases_.insert(customer);
  ases_.insert(provider);
}

void AsTopology::add_peers(AsNumber a, AsNumber b) {
  if (a == b) throw BadTopology("self peering on AS" + std::to_string(a));
  peers_[a].insert(b);
  peers_[b].insert(a);
  providers_[a].erase(b);
  providers_[b].erase(a);
  customers_[a].erase(b);
  customers_[b].erase(a);
  ases_.insert(a);
  ases_.insert(b);
}

void AsTopology::map_net(const std::string& addr_or_prefix, AsNumber asn) {
  nets_.emplace_back(addr_or_prefix, asn);
  ases_.insert(asn);
}

std::vector<AsNumber> AsTopology::providers_of(AsNumber x) const {
  return sorted(providers_, x);
}
std::vector<AsNumber> AsTopology::customers_of(AsNumber x) const {
  return sorted(customers_, x);
}
std::vector<AsNumber> AsTopology::peers_of(AsNumber x) const {
  return sorted(peers_, x);
}

std::optional<AsNumber> AsTopology::as_of(const std::string& addr) const {
  std::optional<AsNumber> best;
  std::size_t best_len = 0;
  for (const auto& [pat, asn] : nets_) {
    const bool prefix = !pat.empty() && pat.back() == '.';
    const bool hit = prefix ? addr.rfind(pat, 0) == 0 : addr == pat;
    if (hit && pat.size() >= best_len) {
      best = asn;
      best_len = pat.size();
    }
  }
  return best;
}

AsTopology AsTopology::parse(const std::string& text) {
  AsTopology topo;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "rel") {
      AsNumber a, b;
      std::string rel;
      if (!(ls >> a >> b >> rel))
        throw BadTopology("bad rel line: " + line);
      if (rel == "customer")
        topo.add_customer_of(a, b);
      else if (rel == "provider")
        topo.add_customer_of(b, a);
      else if (rel == "peer")
        topo.add_peers(a, b);
      else
        throw BadTopology("unknown relationship '" + rel + "'");
    } else if (tag == "net") {
      std::string pat;
      AsNumber asn;
      if (!(ls >> pat >> asn)) throw BadTopology("bad net line: " + line);
      topo.map_net(pat, asn);
    } else {
      throw BadTopology("unknown topology entry '" + tag + "'");
    }
  }
  return topo;
}

AsTopology AsTopology::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadTopology("cannot open topology: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

std::vector<AsNumber> ValleyFreeProvider::path(AsNumber from,
                                               AsNumber to) const {
  if (!topo_.ases().count(from) || !topo_.ases().count(to))
    throw PathUnknown(from, to);
  if (from == to) return {from};

  // down[x]: shortest customer-chain distance x -> to (descending only).
  std::map<AsNumber, std::uint32_t> down;
  for (AsNumber x : topo_.ases()) down[x] = kInf;
  down[to] = 0;
  std::queue<AsNumber> bfs;
  bfs.push(to);
  while (!bfs.empty()) {
    AsNumber c = bfs.front();
    bfs.pop();
    for (AsNumber p : topo_.providers_of(c)) {
      if (down[p] == kInf) {
        down[p] = down[c] + 1;
        bfs.push(p);
      }
    }
  }

  // asc[x]: shortest distance x -> to while still allowed to climb, i.e.
  // min over (descend now), (one peer hop then descend), (climb a provider).
  std::map<AsNumber, std::uint32_t> asc;
  using Item = std::pair<std::uint32_t, AsNumber>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (AsNumber x : topo_.ases()) {
    std::uint32_t base = down[x];
    for (AsNumber w : topo_.peers_of(x)) {
      if (down[w] != kInf) base = std::min(base, down[w] + 1);
    }
    asc[x] = base;
    if (base != kInf) pq.emplace(base, x);
  }
  while (!pq.empty()) {
    auto [d, p] = pq.top();
    pq.pop();
    if (d != asc[p]) continue;
    for (AsNumber c : topo_.customers_of(p)) {
      if (asc[p] + 1 < asc[c]) {
        asc[c] = asc[p] + 1;
        pq.emplace(asc[c], c);
      }
    }
  }

  // Class lengths at the source; preference order is fixed.
  std::uint32_t len_customer = down[from];
  std::uint32_t len_peer = kInf;
  for (AsNumber w : topo_.peers_of(from))
    if (down[w] != kInf) len_peer = std::min(len_peer, down[w] + 1);
  std::uint32_t len_provider = kInf;
  for (AsNumber p : topo_.providers_of(from))
    if (asc[p] != kInf) len_provider = std::min(len_provider, asc[p] + 1);

  enum class Phase { Up, Down };
  std::vector<AsNumber> out{from};
  AsNumber cur = from;
  Phase phase = Phase::Down;
  std::uint32_t remaining = 0;

  auto descend_step = [&](AsNumber at, std::uint32_t rem)
      -> std::optional<AsNumber> {
    for (AsNumber c : topo_.customers_of(at))
      if (down[c] == rem - 1) return c;
    return std::nullopt;
  };

  if (len_customer != kInf) {
    phase = Phase::Down;
    remaining = len_customer;
  } else if (len_peer != kInf) {
    // Forced peer first hop: lowest peer that continues on a shortest chain.
    AsNumber next = -1;
    for (AsNumber w : topo_.peers_of(from)) {
      if (down[w] == len_peer - 1) {
        next = w;
        break;
      }
    }
    out.push_back(next);
    cur = next;
    phase = Phase::Down;
    remaining = len_peer - 1;
  } else if (len_provider != kInf) {
    AsNumber next = -1;
    for (AsNumber p : topo_.providers_of(from)) {
      if (asc[p] == len_provider - 1) {
        next = p;
        break;
      }
    }
    out.push_back(next);
    cur = next;
    phase = Phase::Up;
    remaining = len_provider - 1;
  } else {
    throw PathUnknown(from, to);
  }

  while (remaining > 0) {
    if (phase == Phase::Down) {
      auto next = descend_step(cur, remaining);
      if (!next) throw PathUnknown(from, to);  // unreachable by construction
      out.push_back(*next);
      cur = *next;
      --remaining;
    } else {
      // Still climbing: next hop may descend, peer across, or climb again.
      // Lowest AS number among the moves that stay on a shortest route.
      AsNumber best = -1;
      Phase best_phase = Phase::Up;
      auto consider = [&](AsNumber cand, Phase ph) {
        if (best == -1 || cand < best) {
          best = cand;
          best_phase = ph;
        }
      };
      for (AsNumber c : topo_.customers_of(cur))
        if (down[c] == remaining - 1) consider(c, Phase::Down);
      for (AsNumber w : topo_.peers_of(cur))
        if (down[w] == remaining - 1) consider(w, Phase::Down);
      for (AsNumber p : topo_.providers_of(cur))
        if (asc[p] == remaining - 1) consider(p, Phase::Up);
      if (best == -1) throw PathUnknown(from, to);  // unreachable
      out.push_back(best);
      cur = best;
      phase = best_phase;
      --remaining;
    }
  }
  return out;
}

std::optional<AsNumber> entry_point(const std::vector<AsNumber>& path,
                                    const std::set<AsNumber>& censor_ases) {
  for (AsNumber as : path)
    if (censor_ases.count(as)) return as;
  return std::nullopt;
}

}  // namespace covercall::aspath
