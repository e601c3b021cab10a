#include "covercall/measure.hpp"

#include <algorithm>
#include <random>

#include "covercall/hostsel.hpp"

namespace covercall::measure {

HostMeasurement measure_hosts(const std::string& fixture_path,
                              std::size_t sample_size, std::uint64_t seed,
                              net::TimeMs step_ms) {
  auto scanner = hostsel::FixtureScanner::load(fixture_path);
  auto addrs = scanner.addresses();

  HostMeasurement m;
  m.fixture_hosts = addrs.size();

  std::mt19937_64 rng(seed);
  std::shuffle(addrs.begin(), addrs.end(), rng);
  if (sample_size < addrs.size()) addrs.resize(sample_size);
  m.sampled = addrs.size();
  if (m.sampled == 0) return m;

  scanner.set_now_ms(0);
  const auto candidates = hostsel::scan_candidates(addrs, scanner, rng);
  m.satisfactory = candidates.size();
  m.satisfactory_pct = 100.0 * static_cast<double>(m.satisfactory) /
                       static_cast<double>(m.sampled);

  m.scheduled = scanner.scheduled();
  if (!m.scheduled || candidates.empty()) return m;

  const net::TimeMs horizon = scanner.horizon_ms();
  m.horizon_hours = static_cast<double>(horizon) / 3600000.0;

  auto usable_at = [&](const hostsel::DummyHostRecord& rec, net::TimeMs t) {
    scanner.set_now_ms(t);
    return hostsel::port_acceptable(scanner.probe(rec.addr, hostsel::kSipPort)) &&
           hostsel::port_acceptable(scanner.probe(rec.addr, rec.rtp_port)) &&
           hostsel::port_acceptable(scanner.probe(rec.addr, rec.rtp_port + 1));
  };

  // Stepwise usable-duration per candidate: time until the first probe round
  // that finds any port closed or the host gone. Hosts that never fail are
  // capped at the fixture horizon.
  std::vector<net::TimeMs> durations;
  for (const auto& rec : candidates) {
    net::TimeMs lasted = horizon + step_ms;
    for (net::TimeMs t = 0; t <= horizon; t += step_ms) {
      if (!usable_at(rec, t)) {
        lasted = t;
        break;
      }
    }
    durations.push_back(lasted);
  }
  std::sort(durations.begin(), durations.end());
  const double n = static_cast<double>(durations.size());
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (i + 1 < durations.size() && durations[i + 1] == durations[i]) continue;
    m.usable_cdf.push_back(
        DurationPoint{static_cast<double>(durations[i]) / 3600000.0,
                      static_cast<double>(i + 1) / n});
  }

  for (net::TimeMs t = 0; t <= horizon; t += step_ms) {
    std::size_t alive = 0;
    for (const auto& rec : candidates)
      if (usable_at(rec, t)) ++alive;
    m.alive_series.push_back(
        AlivePoint{static_cast<double>(t) / 3600000.0, alive});
  }
  return m;
}

}  // namespace covercall::measure
