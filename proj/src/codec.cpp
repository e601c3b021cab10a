#include "covercall/codec.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace covercall::codec {

const std::vector<CodecProfile>& builtin_profiles() {
  // Payload sizes chosen so payload*8/interval lands exactly on the nominal
  // channel bandwidth. Consumed bandwidth is carried as published, not
  // recomputed.
  static const std::vector<CodecProfile> profiles = {
      {"G.711", 160, 20, 64.0, 87.2},
      {"G.722-64", 160, 20, 64.0, 87.2},
      {"G.726-40", 100, 20, 40.0, 54.7},
      {"iLBC", 39, 20, 15.6, 26.6},
  };
  return profiles;
}

CodecProfile lookup(const std::string& name,
                    const std::vector<CodecProfile>& profiles) {
  for (const auto& p : profiles) {
    if (p.name == name) return p;
  }
  throw UnknownCodec(name);
}

CodecProfile lookup(const std::string& name) {
  return lookup(name, builtin_profiles());
}

double goodput(const CodecProfile& profile, unsigned group_size) {
  if (group_size < 1) throw BadProfile("group size must be >= 1");
  const double packets_per_s = 1000.0 / profile.send_interval_ms;
  const double data_fraction =
      static_cast<double>(group_size) / (group_size + 1.0);
  return static_cast<double>(profile.block_capacity()) * packets_per_s *
         data_fraction;
}

bool bandwidth_identity_holds(const CodecProfile& profile, double slack_kbps) {
  const double kbps = static_cast<double>(profile.payload_size) * 8.0 *
                      (1000.0 / profile.send_interval_ms) / 1000.0;
  return std::fabs(kbps - profile.inbound_kbps) <= slack_kbps;
}

namespace {

double parse_number(const std::string& value, const std::string& line) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw BadProfile("bad numeric value '" + value + "' in: " + line);
  }
}

}  // namespace

std::vector<CodecProfile> parse_profiles(const std::string& text) {
  std::vector<CodecProfile> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    CodecProfile p;
    p.name = name;
    std::string field;
    while (ls >> field) {
      auto eq = field.find('=');
      if (eq == std::string::npos)
        throw BadProfile("expected key=value, got '" + field + "'");
      const std::string key = field.substr(0, eq);
      const std::string value = field.substr(eq + 1);
      if (key == "payload") {
        p.payload_size = static_cast<std::size_t>(parse_number(value, line));
      } else if (key == "interval") {
        p.send_interval_ms = static_cast<unsigned>(parse_number(value, line));
      } else if (key == "inbound") {
        p.inbound_kbps = parse_number(value, line);
      } else if (key == "consumed") {
        p.consumed_kbps = parse_number(value, line);
      } else {
        throw BadProfile("unknown codec field '" + key + "'");
      }
    }
    if (p.payload_size <= 4)
      throw BadProfile(p.name + ": payload must exceed the 4-byte header");
    if (p.send_interval_ms == 0)
      throw BadProfile(p.name + ": interval must be positive");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<CodecProfile> load_profiles(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw BadProfile("cannot open codec config: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_profiles(buf.str());
}

}  // namespace covercall::codec
