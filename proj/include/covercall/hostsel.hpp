#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "covercall/aspath.hpp"

namespace covercall::hostsel {

// The seven probe outcomes a scanner can report. Only closed and
// host-seems-down disqualify a port; every ambiguous state is usable cover.
enum class PortState {
  Open,
  Closed,
  Filtered,
  Unfiltered,
  OpenFiltered,
  ClosedFiltered,
  HostSeemsDown,
};

constexpr int kPortStateCount = 7;
const char* port_state_name(PortState s);
std::optional<PortState> port_state_from_name(const std::string& name);

inline bool port_acceptable(PortState s) {
  return s != PortState::Closed && s != PortState::HostSeemsDown;
}

constexpr std::uint16_t kSipPort = 5060;

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

// Great-circle distance in kilometres (haversine, R = 6371 km).
double distance_km(const GeoPoint& a, const GeoPoint& b);

struct DummyHostRecord {
  std::string addr;
  PortState sip_port_state = PortState::Filtered;
  PortState rtp_port_state = PortState::Filtered;
  PortState rtcp_port_state = PortState::Filtered;
  std::uint16_t rtp_port = 0;  // even; RTCP is rtp_port + 1
  std::optional<std::string> assigned_to;
  std::optional<GeoPoint> location;
  std::uint64_t last_checked_ms = 0;

  bool live() const {
    return port_acceptable(sip_port_state) && port_acceptable(rtp_port_state) &&
           port_acceptable(rtcp_port_state);
  }
};

struct CalleeAssignment {
  std::string callee_sip_id;
  std::string primary_dummy;
  std::vector<std::string> history;  // primary first, later hosts appended
};

struct ScannerUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoCandidate : std::runtime_error {
  explicit NoCandidate(const std::string& callee)
      : std::runtime_error("no assignable dummy host for " + callee) {}
};
struct NotAssigned : std::runtime_error {
  explicit NotAssigned(const std::string& addr)
      : std::runtime_error(addr + " is not assigned") {}
};
struct BadFixture : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class PortScanner {
 public:
  virtual ~PortScanner() = default;
  // Throws ScannerUnavailable when the target cannot be probed at all.
  virtual PortState probe(const std::string& addr, std::uint16_t port) = 0;
};

class GeoProvider {
 public:
  virtual ~GeoProvider() = default;
  virtual std::optional<GeoPoint> locate(const std::string& addr) = 0;
};

// Host fixture: base states plus optional timed transitions.
//   <addr> <sip> <rtp> <rtcp> [<lat> <lon>]
//   @<seconds> <addr> <sip> <rtp> <rtcp>
// Ports map onto state classes: 5060 is SIP, other even ports RTP, odd RTCP.
class FixtureScanner : public PortScanner, public GeoProvider {
 public:
  static FixtureScanner parse(const std::string& text);
  static FixtureScanner load(const std::string& path);

  PortState probe(const std::string& addr, std::uint16_t port) override;
  std::optional<GeoPoint> locate(const std::string& addr) override;

  void set_now_ms(std::uint64_t now) { now_ms_ = now; }
  std::vector<std::string> addresses() const;
  // Largest schedule timestamp, 0 when the fixture is static.
  std::uint64_t horizon_ms() const { return horizon_ms_; }
  bool scheduled() const { return horizon_ms_ > 0; }

 private:
  struct States {
    PortState sip, rtp, rtcp;
  };
  struct HostEntry {
    States base{PortState::Filtered, PortState::Filtered, PortState::Filtered};
    std::optional<GeoPoint> location;
    std::map<std::uint64_t, States> schedule;  // effective-from time -> states
  };
  const States& states_at(const HostEntry& h) const;

  std::map<std::string, HostEntry> hosts_;
  std::uint64_t now_ms_ = 0;
  std::uint64_t horizon_ms_ = 0;
};

// Port-scanning pass over an address range: probe SIP; if acceptable, pick a
// random even RTP port and probe it and the next odd port; keep the host only
// if all three probes come back acceptable.
std::vector<DummyHostRecord> scan_candidates(
    const std::vector<std::string>& ip_range, PortScanner& scanner,
    std::mt19937_64& rng);

enum class MonitorResult { Alive, Lost };

// Shared pool of scanned candidates plus per-callee assignment history.
// Mutations are serialized internally.
class HostRegistry {
 public:
  void add_candidates(std::vector<DummyHostRecord> records, GeoProvider* geo);
  std::size_t size() const;
  std::optional<DummyHostRecord> find(const std::string& addr) const;
  std::vector<DummyHostRecord> candidates() const;
  const std::map<std::string, CalleeAssignment>& assignments() const {
    return assignments_;
  }

  // Sticky assignment: first use picks a random live candidate as the
  // callee's primary; later uses prefer the primary, then assignment
  // history, then a fresh candidate within distance_threshold_km of the
  // primary. Never hands out a host already assigned to someone else.
  // `eligible` (when set) gates hosts the caller considers usable, e.g. the
  // AS entry-point filter; it applies to fresh picks, not history reuse.
  DummyHostRecord assign(
      const std::string& callee, GeoProvider& geo, double distance_threshold_km,
      std::mt19937_64& rng,
      const std::function<bool(const DummyHostRecord&)>& eligible = {});

  void release(const std::string& addr);

  // Re-probes the host's three ports and records the outcome. Lost when any
  // port turns closed or the host drops off; callers tear the session down.
  MonitorResult monitor(const std::string& addr, PortScanner& scanner,
                        std::uint64_t now_ms);

  void update_states(const std::string& addr, PortState sip, PortState rtp,
                     PortState rtcp, std::uint64_t now_ms);

 private:
  DummyHostRecord* find_mut(const std::string& addr);

  mutable std::mutex mu_;
  std::map<std::string, DummyHostRecord> hosts_;
  std::map<std::string, CalleeAssignment> assignments_;
};

// Keeps the candidates whose predicted path to the client enters the
// censored ASes at the same AS as the reference (spoofer-to-client) path.
// Candidates the provider cannot route are dropped.
std::vector<DummyHostRecord> filter_by_entry_point(
    const std::vector<DummyHostRecord>& candidates,
    const std::string& client_addr,
    const std::vector<aspath::AsNumber>& reference_path,
    const aspath::AsPathProvider& inference, const aspath::AsTopology& topo,
    const std::set<aspath::AsNumber>& censor_ases);

}  // namespace covercall::hostsel
