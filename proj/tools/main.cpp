#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "covercall/measure.hpp"
#include "covercall/scenario.hpp"

using nlohmann::json;

namespace {

json page_to_json(const covercall::scenario::PageReport& p) {
  return json{{"record", "page"},     {"url", p.url},
              {"full_page_s", p.full_page_s}, {"html_s", p.html_s},
              {"status", p.status},   {"gap", p.gap},
              {"ok", p.ok}};
}

json report_to_json(const covercall::scenario::RunReport& r) {
  json counters{
      {"record", "counters"},
      {"client_rtp_received", r.client_rtp_received},
      {"client_auth_failures", r.client_auth_failures},
      {"client_replays_dropped", r.client_replays_dropped},
      {"client_rtcp_invalid", r.client_rtcp_invalid},
      {"client_dummy_rtp", r.client_dummy_rtp},
      {"client_dummy_rtcp", r.client_dummy_rtcp},
      {"upstream_messages", r.upstream_messages},
      {"recovered_blocks", r.recovered_blocks},
      {"spoofer_rtp", r.spoofer_rtp},
      {"spoofer_rtcp", r.spoofer_rtcp},
      {"spoofer_byes", r.spoofer_byes},
      {"spoofer_rejects", r.spoofer_rejects},
      {"censor_entries", r.censor_entries},
      {"acks_crossed", r.acks_crossed},
      {"attack_dropped", r.attack_dropped},
      {"attack_altered", r.attack_altered},
      {"attack_rewritten_oks", r.attack_rewritten_oks},
      {"replays_injected", r.replays_injected},
  };
  json run{{"record", "run"},
           {"scenario", r.scenario_name},
           {"seed", r.seed},
           {"codec", r.codec},
           {"goodput_bytes_per_s", r.goodput_bytes_per_s},
           {"client_state", r.client_state},
           {"abort_reason", r.abort_reason},
           {"ok", r.ok()}};
  json out = json::array();
  out.push_back(run);
  for (const auto& p : r.pages) out.push_back(page_to_json(p));
  out.push_back(counters);
  for (const auto& a : r.assertions)
    out.push_back(json{
        {"record", "assertion"}, {"text", a.text}, {"pass", a.pass},
        {"detail", a.detail}});
  return out;
}

void write_jsonl(const std::string& path, const json& records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& rec : records) f << rec.dump() << '\n';
}

int cmd_run(const std::string& scenario_path, const std::uint64_t* seed_override,
            const std::string& codec_override, const std::string& out_path,
            bool verbose) {
  auto sc = covercall::scenario::load_scenario(scenario_path);
  if (seed_override) sc.sim.seed = *seed_override;
  if (!codec_override.empty()) sc.codec_name = codec_override;

  const auto report = covercall::scenario::run_scenario(sc);

  std::cout << "scenario " << report.scenario_name << "  codec "
            << report.codec << "  seed " << report.seed << "  goodput "
            << std::fixed << std::setprecision(1) << report.goodput_bytes_per_s
            << " B/s\n";
  std::cout << "client: " << report.client_state;
  if (!report.abort_reason.empty())
    std::cout << " (" << report.abort_reason << ")";
  std::cout << "\n\n";
  if (!report.pages.empty()) {
    std::cout << std::left << std::setw(44) << "page" << std::right
              << std::setw(12) << "full_page_s" << std::setw(10) << "html_s"
              << std::setw(8) << "status" << std::setw(6) << "gap" << "\n";
    for (const auto& p : report.pages) {
      std::cout << std::left << std::setw(44) << p.url << std::right
                << std::setw(12) << std::setprecision(3) << p.full_page_s
                << std::setw(10) << p.html_s << std::setw(8) << p.status
                << std::setw(6) << (p.gap ? "yes" : "no") << "\n";
    }
    std::cout << "\n";
  }
  if (verbose) {
    std::cout << "spoofer rtp/rtcp sent: " << report.spoofer_rtp << "/"
              << report.spoofer_rtcp
              << "  client dummy rtp/rtcp: " << report.client_dummy_rtp << "/"
              << report.client_dummy_rtcp << "\n"
              << "client auth failures: " << report.client_auth_failures
              << "  replays dropped: " << report.client_replays_dropped
              << "  recovered blocks: " << report.recovered_blocks << "\n"
              << "upstream messages: " << report.upstream_messages
              << "  censor log entries: " << report.censor_entries << "\n";
    for (const auto& [callee, addrs] : report.bindings) {
      std::cout << "censor binding " << callee << " ->";
      for (const auto& a : addrs) std::cout << ' ' << a;
      std::cout << "\n";
    }
    std::cout << "\n";
  }
  for (const auto& a : report.assertions) {
    std::cout << (a.pass ? "PASS  " : "FAIL  ") << a.text << "  [" << a.detail
              << "]\n";
  }
  if (!out_path.empty()) write_jsonl(out_path, report_to_json(report));
  return report.ok() ? 0 : 1;
}

int cmd_measure(const std::string& fixture, std::size_t sample,
                std::uint64_t seed, unsigned step_min,
                const std::string& out_path) {
  const auto m = covercall::measure::measure_hosts(
      fixture, sample, seed, static_cast<std::uint64_t>(step_min) * 60000);
  std::cout << "hosts in fixture: " << m.fixture_hosts << "\n"
            << "sampled: " << m.sampled << "\n"
            << "satisfactory: " << m.satisfactory << " (" << std::fixed
            << std::setprecision(1) << m.satisfactory_pct << "%)\n";
  if (m.scheduled) {
    std::cout << "\nusable-duration CDF (hours -> fraction):\n";
    for (const auto& p : m.usable_cdf)
      std::cout << "  " << std::setprecision(2) << p.hours << "h  "
                << std::setprecision(3) << p.fraction << "\n";
    std::cout << "\nusable hosts over time:\n";
    for (const auto& p : m.alive_series)
      std::cout << "  t=" << std::setprecision(2) << p.t_hours << "h  "
                << p.alive << "\n";
  }
  if (!out_path.empty()) {
    json records = json::array();
    records.push_back(json{{"record", "measure"},
                           {"fixture_hosts", m.fixture_hosts},
                           {"sampled", m.sampled},
                           {"satisfactory", m.satisfactory},
                           {"satisfactory_pct", m.satisfactory_pct},
                           {"scheduled", m.scheduled}});
    for (const auto& p : m.usable_cdf)
      records.push_back(json{{"record", "usable_cdf"},
                             {"hours", p.hours},
                             {"fraction", p.fraction}});
    for (const auto& p : m.alive_series)
      records.push_back(json{
          {"record", "alive"}, {"t_hours", p.t_hours}, {"alive", p.alive}});
    write_jsonl(out_path, records);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covercall: spoofed-VoIP circumvention channel simulator"};
  app.require_subcommand(1);

  std::string scenario_path, codec_override, out_path;
  std::uint64_t seed = 0;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "run a scenario end to end");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--codec", codec_override, "override the codec");
  run->add_option("--out", out_path, "write a JSONL report here");
  run->add_flag("-v,--verbose", verbose, "print counters and bindings");

  std::string fixture_path, m_out;
  std::size_t sample = 100;
  std::uint64_t m_seed = 1;
  unsigned step_min = 10;
  auto* measure =
      app.add_subcommand("measure-hosts", "dummy-host selection measurement");
  measure->add_option("fixture", fixture_path, "host fixture file")
      ->required();
  measure->add_option("--sample", sample, "hosts to sample");
  measure->add_option("--seed", m_seed, "sampling seed");
  measure->add_option("--step-min", step_min,
                      "probe cadence for scheduled fixtures (minutes)");
  measure->add_option("--out", m_out, "write a JSONL report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(scenario_path, seed_opt->count() ? &seed : nullptr,
                     codec_override, out_path, verbose);
    return cmd_measure(fixture_path, sample, m_seed, step_min, m_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
