#include "covercall/hostsel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace covercall::hostsel {

const char* port_state_name(PortState s) {
  switch (s) {
    case PortState::Open:
      return "open";
    case PortState::Closed:
      return "closed";
    case PortState::Filtered:
      return "filtered";
    case PortState::Unfiltered:
      return "unfiltered";
    case PortState::OpenFiltered:
      return "open_filtered";
    case PortState::ClosedFiltered:
      return "closed_filtered";
    case PortState::HostSeemsDown:
      return "host_seems_down";
  }
  return "?";
}

std::optional<PortState> port_state_from_name(const std::string& name) {
  for (int i = 0; i < kPortStateCount; ++i) {
    auto s = static_cast<PortState>(i);
    if (name == port_state_name(s)) return s;
  }
  return std::nullopt;
}

double distance_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadiusKm = 6371.0;
  const double deg = std::numbers::pi / 180.0;
  const double lat1 = a.lat * deg, lat2 = b.lat * deg;
  const double dlat = (b.lat - a.lat) * deg;
  const double dlon = (b.lon - a.lon) * deg;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1) * std::cos(lat2) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

FixtureScanner FixtureScanner::parse(const std::string& text) {
  FixtureScanner fs;
  std::istringstream in(text);
  std::string line;
  auto read_states = [](std::istringstream& ls, const std::string& ctx) {
    std::string s1, s2, s3;
    if (!(ls >> s1 >> s2 >> s3))
      throw BadFixture("expected three port states: " + ctx);
    auto a = port_state_from_name(s1), b = port_state_from_name(s2),
         c = port_state_from_name(s3);
    if (!a || !b || !c) throw BadFixture("bad port state in: " + ctx);
    return States{*a, *b, *c};
  };
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == '@') {
      const std::uint64_t at_s = std::stoull(first.substr(1));
      std::string addr;
      if (!(ls >> addr)) throw BadFixture("schedule line lacks addr: " + line);
      States st = read_states(ls, line);
      fs.hosts_[addr].schedule[at_s * 1000] = st;
      fs.horizon_ms_ = std::max(fs.horizon_ms_, at_s * 1000);
    } else {
      HostEntry& h = fs.hosts_[first];
      h.base = read_states(ls, line);
      double lat, lon;
      if (ls >> lat >> lon) h.location = GeoPoint{lat, lon};
    }
  }
  return fs;
}

FixtureScanner FixtureScanner::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadFixture("cannot open host fixture: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

const FixtureScanner::States& FixtureScanner::states_at(
    const HostEntry& h) const {
  const States* current = &h.base;
  for (const auto& [t, st] : h.schedule) {
    if (t <= now_ms_)
      current = &st;
    else
      break;
  }
  return *current;
}

PortState FixtureScanner::probe(const std::string& addr, std::uint16_t port) {
  auto it = hosts_.find(addr);
  if (it == hosts_.end())
    throw ScannerUnavailable("no probe data for " + addr);
  const States& st = states_at(it->second);
  if (port == kSipPort) return st.sip;
  return port % 2 == 0 ? st.rtp : st.rtcp;
}

std::optional<GeoPoint> FixtureScanner::locate(const std::string& addr) {
  auto it = hosts_.find(addr);
  if (it == hosts_.end()) return std::nullopt;
  return it->second.location;
}

std::vector<std::string> FixtureScanner::addresses() const {
  std::vector<std::string> out;
  out.reserve(hosts_.size());
  for (const auto& [addr, entry] : hosts_) out.push_back(addr);
  return out;
}

std::vector<DummyHostRecord> scan_candidates(
    const std::vector<std::string>& ip_range, PortScanner& scanner,
    std::mt19937_64& rng) {
  std::vector<DummyHostRecord> out;
  std::uniform_int_distribution<std::uint16_t> even_port(1024 / 2, 65532 / 2);
  for (const auto& ip : ip_range) {
    const PortState sip = scanner.probe(ip, kSipPort);
    if (!port_acceptable(sip)) continue;
    std::uint16_t rtp_port = static_cast<std::uint16_t>(even_port(rng) * 2);
    while (rtp_port == kSipPort)
      rtp_port = static_cast<std::uint16_t>(even_port(rng) * 2);
    const PortState rtp = scanner.probe(ip, rtp_port);
    const PortState rtcp = scanner.probe(ip, rtp_port + 1);
    if (!port_acceptable(rtp) || !port_acceptable(rtcp)) continue;
    DummyHostRecord rec;
    rec.addr = ip;
    rec.sip_port_state = sip;
    rec.rtp_port_state = rtp;
    rec.rtcp_port_state = rtcp;
    rec.rtp_port = rtp_port;
    out.push_back(std::move(rec));
  }
  return out;
}

void HostRegistry::add_candidates(std::vector<DummyHostRecord> records,
                                  GeoProvider* geo) {
  std::lock_guard lock(mu_);
  for (auto& rec : records) {
    if (geo && !rec.location) rec.location = geo->locate(rec.addr);
    hosts_[rec.addr] = std::move(rec);
  }
}

std::size_t HostRegistry::size() const {
  std::lock_guard lock(mu_);
  return hosts_.size();
}

std::optional<DummyHostRecord> HostRegistry::find(
    const std::string& addr) const {
  std::lock_guard lock(mu_);
  auto it = hosts_.find(addr);
  if (it == hosts_.end()) return std::nullopt;
  return it->second;
}

std::vector<DummyHostRecord> HostRegistry::candidates() const {
  std::lock_guard lock(mu_);
  std::vector<DummyHostRecord> out;
  out.reserve(hosts_.size());
  for (const auto& [addr, rec] : hosts_) out.push_back(rec);
  return out;
}

DummyHostRecord* HostRegistry::find_mut(const std::string& addr) {
  auto it = hosts_.find(addr);
  return it == hosts_.end() ? nullptr : &it->second;
}

DummyHostRecord HostRegistry::assign(
    const std::string& callee, GeoProvider& geo, double distance_threshold_km,
    std::mt19937_64& rng,
    const std::function<bool(const DummyHostRecord&)>& eligible) {
  std::lock_guard lock(mu_);

  auto assignable = [&](const DummyHostRecord& rec) {
    return rec.live() && !rec.assigned_to.has_value();
  };
  auto take = [&](DummyHostRecord* rec) {
    rec->assigned_to = callee;
    auto& asg = assignments_[callee];
    asg.callee_sip_id = callee;
    if (asg.primary_dummy.empty()) {
      asg.primary_dummy = rec->addr;
      asg.history.push_back(rec->addr);
    } else if (std::find(asg.history.begin(), asg.history.end(), rec->addr) ==
               asg.history.end()) {
      asg.history.push_back(rec->addr);
    }
    return *rec;
  };

  auto it = assignments_.find(callee);
  if (it != assignments_.end()) {
    CalleeAssignment& asg = it->second;
    if (DummyHostRecord* primary = find_mut(asg.primary_dummy);
        primary && assignable(*primary)) {
      return take(primary);
    }
    // Most recent previously used host, newest first, primary excluded
    // (it was just ruled out).
    for (auto rit = asg.history.rbegin(); rit != asg.history.rend(); ++rit) {
      if (*rit == asg.primary_dummy) continue;
      if (DummyHostRecord* rec = find_mut(*rit); rec && assignable(*rec))
        return take(rec);
    }
    // Fall back to fresh candidates near the primary.
    std::optional<GeoPoint> anchor;
    if (DummyHostRecord* primary = find_mut(asg.primary_dummy); primary)
      anchor = primary->location;
    if (!anchor) anchor = geo.locate(asg.primary_dummy);
    std::vector<DummyHostRecord*> nearby;
    for (auto& [addr, rec] : hosts_) {
      if (!assignable(rec)) continue;
      if (eligible && !eligible(rec)) continue;
      if (!anchor || !rec.location) continue;
      if (distance_km(*anchor, *rec.location) <= distance_threshold_km)
        nearby.push_back(&rec);
    }
    if (nearby.empty()) throw NoCandidate(callee);
    std::uniform_int_distribution<std::size_t> pick(0, nearby.size() - 1);
    return take(nearby[pick(rng)]);
  }

  // First session for this callee: random live candidate becomes primary.
  std::vector<DummyHostRecord*> pool;
  for (auto& [addr, rec] : hosts_) {
    if (!assignable(rec)) continue;
    if (eligible && !eligible(rec)) continue;
    pool.push_back(&rec);
  }
  if (pool.empty()) throw NoCandidate(callee);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return take(pool[pick(rng)]);
}

void HostRegistry::release(const std::string& addr) {
  std::lock_guard lock(mu_);
  DummyHostRecord* rec = find_mut(addr);
  if (!rec || !rec->assigned_to) throw NotAssigned(addr);
  rec->assigned_to.reset();
}

MonitorResult HostRegistry::monitor(const std::string& addr,
                                    PortScanner& scanner,
                                    std::uint64_t now_ms) {
  std::lock_guard lock(mu_);
  DummyHostRecord* rec = find_mut(addr);
  if (!rec || !rec->assigned_to) throw NotAssigned(addr);
  rec->sip_port_state = scanner.probe(addr, kSipPort);
  rec->rtp_port_state = scanner.probe(addr, rec->rtp_port);
  rec->rtcp_port_state = scanner.probe(addr, rec->rtp_port + 1);
  rec->last_checked_ms = now_ms;
  return rec->live() ? MonitorResult::Alive : MonitorResult::Lost;
}

void HostRegistry::update_states(const std::string& addr, PortState sip,
                                 PortState rtp, PortState rtcp,
                                 std::uint64_t now_ms) {
  std::lock_guard lock(mu_);
  DummyHostRecord* rec = find_mut(addr);
  if (!rec) return;
  rec->sip_port_state = sip;
  rec->rtp_port_state = rtp;
  rec->rtcp_port_state = rtcp;
  rec->last_checked_ms = now_ms;
}

std::vector<DummyHostRecord> filter_by_entry_point(
    const std::vector<DummyHostRecord>& candidates,
    const std::string& client_addr,
    const std::vector<aspath::AsNumber>& reference_path,
    const aspath::AsPathProvider& inference, const aspath::AsTopology& topo,
    const std::set<aspath::AsNumber>& censor_ases) {
  std::vector<DummyHostRecord> out;
  const auto reference_entry = aspath::entry_point(reference_path, censor_ases);
  if (!reference_entry) return out;
  const auto client_as = topo.as_of(client_addr);
  if (!client_as) return out;
  for (const auto& rec : candidates) {
    const auto cand_as = topo.as_of(rec.addr);
    if (!cand_as) continue;
    try {
      const auto path = inference.path(*cand_as, *client_as);
      if (aspath::entry_point(path, censor_ases) == reference_entry)
        out.push_back(rec);
    } catch (const aspath::PathUnknown&) {
      // Unroutable candidates cannot be checked; leave them out.
    }
  }
  return out;
}

}  // namespace covercall::hostsel
