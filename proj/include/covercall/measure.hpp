#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covercall/net.hpp"

namespace covercall::measure {

struct DurationPoint {
  double hours;     // usable for at least this long
  double fraction;  // CDF value at `hours`
};

struct AlivePoint {
  double t_hours;
  std::size_t alive;
};

struct HostMeasurement {
  std::size_t fixture_hosts = 0;
  std::size_t sampled = 0;
  std::size_t satisfactory = 0;
  double satisfactory_pct = 0.0;
  bool scheduled = false;  // fixture carries timed state changes
  double horizon_hours = 0.0;
  std::vector<DurationPoint> usable_cdf;
  std::vector<AlivePoint> alive_series;
};

// Samples `sample_size` hosts from the fixture, runs the port-scan pass over
// them, and reports the satisfactory percentage. When the fixture schedules
// state changes over time, also reports how long each satisfactory host
// stays usable (duration CDF) and the usable-host count over time.
HostMeasurement measure_hosts(const std::string& fixture_path,
                              std::size_t sample_size, std::uint64_t seed,
                              net::TimeMs step_ms = 600000);

}  // namespace covercall::measure
