#include "covercall/sip.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "covercall/crypto.hpp"

namespace covercall::sip {

namespace {

constexpr const char* kCrLf = "\r\n";

std::string strip_scheme(const std::string& uri) {
  if (uri.rfind("sip:", 0) == 0) return uri.substr(4);
  return uri;
}

struct Line {
  std::size_t offset;
  std::string text;
};

// Splits on \r\n (or bare \n), keeping the offset of each line start.
std::vector<Line> split_lines(const std::string& text) {
  std::vector<Line> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back({pos, text.substr(pos)});
      break;
    }
    std::size_t end = nl;
    if (end > pos && text[end - 1] == '\r') --end;
    out.push_back({pos, text.substr(pos, end - pos)});
    pos = nl + 1;
  }
  return out;
}

struct NameAddr {
  std::string uri;
  std::string tag;
};

NameAddr parse_name_addr(const Line& line, const std::string& value) {
  auto lt = value.find('<');
  auto gt = value.find('>');
  if (lt == std::string::npos || gt == std::string::npos || gt < lt)
    throw ParseError(line.offset, "expected <sip:...> in '" + line.text + "'");
  NameAddr out;
  out.uri = strip_scheme(value.substr(lt + 1, gt - lt - 1));
  auto tag_pos = value.find(";tag=", gt);
  if (tag_pos != std::string::npos) out.tag = value.substr(tag_pos + 5);
  return out;
}

std::string codec_list_header(const std::vector<std::string>& codecs,
                              std::uint16_t rtp_port,
                              const std::string& media_address) {
  std::ostringstream sdp;
  sdp << "v=0" << kCrLf;
  sdp << "o=- 0 0 IN IP4 " << media_address << kCrLf;
  sdp << "s=-" << kCrLf;
  sdp << "c=IN IP4 " << media_address << kCrLf;
  sdp << "t=0 0" << kCrLf;
  sdp << "m=audio " << rtp_port << " RTP/AVP";
  for (std::size_t i = 0; i < codecs.size(); ++i) sdp << ' ' << (96 + i);
  sdp << kCrLf;
  for (std::size_t i = 0; i < codecs.size(); ++i)
    sdp << "a=rtpmap:" << (96 + i) << ' ' << codecs[i] << kCrLf;
  return sdp.str();
}

SdpBody parse_sdp(const std::string& body, std::size_t base_offset) {
  SdpBody sdp;
  bool saw_conn = false, saw_media = false;
  for (const auto& line : split_lines(body)) {
    if (line.text.empty()) continue;
    const std::size_t off = base_offset + line.offset;
    if (line.text.rfind("c=IN IP4 ", 0) == 0) {
      sdp.media_address = line.text.substr(9);
      saw_conn = true;
    } else if (line.text.rfind("m=audio ", 0) == 0) {
      std::istringstream ms(line.text.substr(8));
      int port = -1;
      ms >> port;
      if (port < 0 || port > 0xFFFF)
        throw ParseError(off, "bad media port");
      if (port % 2 != 0)
        throw ParseError(off, "RTP port must be even");
      sdp.rtp_port = static_cast<std::uint16_t>(port);
      saw_media = true;
    } else if (line.text.rfind("a=rtpmap:", 0) == 0) {
      auto sp = line.text.find(' ');
      if (sp == std::string::npos)
        throw ParseError(off, "bad rtpmap line");
      sdp.codecs.push_back(line.text.substr(sp + 1));
    }
  }
  if (!saw_conn) throw ParseError(base_offset, "SDP lacks a c= line");
  if (!saw_media) throw ParseError(base_offset, "SDP lacks an m= line");
  return sdp;
}

struct StartLine {
  Kind kind;
  bool is_request;
};

StartLine parse_start_line(const Line& line) {
  if (line.text.rfind("SIP/2.0 ", 0) == 0) {
    const std::string rest = line.text.substr(8);
    if (rest.rfind("100", 0) == 0) return {Kind::Trying, false};
    if (rest.rfind("180", 0) == 0) return {Kind::Ringing, false};
    if (rest.rfind("200", 0) == 0) return {Kind::Ok, false};
    if (rest.rfind("603", 0) == 0) return {Kind::Reject, false};
    throw ParseError(line.offset + 8, "unsupported status '" + rest + "'");
  }
  auto sp = line.text.find(' ');
  if (sp == std::string::npos)
    throw ParseError(line.offset, "not a SIP start line");
  const std::string method = line.text.substr(0, sp);
  if (method == "INVITE") return {Kind::Invite, true};
  if (method == "ACK") return {Kind::Ack, true};
  if (method == "BYE") return {Kind::Bye, true};
  throw ParseError(line.offset, "unsupported method '" + method + "'");
}

const char* cseq_method(Kind k) {
  switch (k) {
    case Kind::Ack:
      return "ACK";
    case Kind::Bye:
      return "BYE";
    default:
      return "INVITE";
  }
}

}  // namespace

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Invite:
      return "INVITE";
    case Kind::Trying:
      return "TRYING";
    case Kind::Ringing:
      return "RINGING";
    case Kind::Ok:
      return "OK";
    case Kind::Ack:
      return "ACK";
    case Kind::Bye:
      return "BYE";
    case Kind::Reject:
      return "REJECT";
  }
  return "?";
}

bool uri_well_formed(const std::string& uri) {
  const std::string u = strip_scheme(uri);
  auto at = u.find('@');
  if (at == std::string::npos || at == 0 || at + 1 >= u.size()) return false;
  if (u.find('@', at + 1) != std::string::npos) return false;
  for (char c : u) {
    if (c == ' ' || c == '<' || c == '>' || c == ';' || c == '\r' || c == '\n')
      return false;
  }
  return true;
}

std::string uri_host(const std::string& uri) {
  const std::string u = strip_scheme(uri);
  auto at = u.find('@');
  return at == std::string::npos ? u : u.substr(at + 1);
}

std::string random_token(std::mt19937_64& rng, unsigned length) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(alphabet) - 2);
  std::string out;
  out.reserve(length);
  for (unsigned i = 0; i < length; ++i) out.push_back(alphabet[pick(rng)]);
  return out;
}

std::string endpoint_tag(std::span<const std::uint8_t> key,
                         const std::string& addr, std::uint16_t rtp_port) {
  const std::string canonical = addr + ":" + std::to_string(rtp_port);
  const auto mac = crypto::hmac_sha256(key, canonical);
  return crypto::to_hex(std::span(mac.data(), 8));
}

std::string serialize(const SipMessage& m) {
  if ((m.kind == Kind::Invite || m.kind == Kind::Ok) && !m.sdp)
    throw MissingSdp();
  std::ostringstream out;
  switch (m.kind) {
    case Kind::Invite:
      out << "INVITE sip:" << m.callee_id << " SIP/2.0" << kCrLf;
      break;
    case Kind::Ack:
      out << "ACK sip:" << m.callee_id << " SIP/2.0" << kCrLf;
      break;
    case Kind::Bye:
      out << "BYE sip:" << m.callee_id << " SIP/2.0" << kCrLf;
      break;
    case Kind::Trying:
      out << "SIP/2.0 100 Trying" << kCrLf;
      break;
    case Kind::Ringing:
      out << "SIP/2.0 180 Ringing" << kCrLf;
      break;
    case Kind::Ok:
      out << "SIP/2.0 200 OK" << kCrLf;
      break;
    case Kind::Reject:
      out << "SIP/2.0 603 Decline" << kCrLf;
      break;
  }
  out << "Via: SIP/2.0/UDP " << uri_host(m.caller_id)
      << ";branch=z9hG4bK." << m.call_id << kCrLf;
  out << "From: <sip:" << m.caller_id << ">";
  if (!m.from_tag.empty()) out << ";tag=" << m.from_tag;
  out << kCrLf;
  out << "To: <sip:" << m.callee_id << ">";
  if (!m.to_tag.empty()) out << ";tag=" << m.to_tag;
  out << kCrLf;
  out << "Call-ID: " << m.call_id << kCrLf;
  out << "CSeq: 1 " << cseq_method(m.kind) << kCrLf;
  for (const auto& [name, value] : m.extra_headers)
    out << name << ": " << value << kCrLf;
  std::string body;
  if (m.sdp) {
    body = codec_list_header(m.sdp->codecs, m.sdp->rtp_port,
                             m.sdp->media_address);
    out << "Content-Type: application/sdp" << kCrLf;
  }
  out << "Content-Length: " << body.size() << kCrLf;
  out << kCrLf;
  out << body;
  return out.str();
}

SipMessage parse(const std::string& text) {
  if (text.empty()) throw ParseError(0, "empty input");
  const auto lines = split_lines(text);
  SipMessage m;
  const StartLine start = parse_start_line(lines[0]);
  m.kind = start.kind;

  bool has_sdp_type = false;
  std::size_t content_length = 0;
  bool saw_from = false, saw_to = false, saw_call_id = false;
  std::size_t body_offset = text.size();

  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    const Line& line = lines[i];
    if (line.text.empty()) {
      // Blank line: body follows at the next line's offset.
      body_offset = i + 1 < lines.size() ? lines[i + 1].offset : text.size();
      ++i;
      break;
    }
    auto colon = line.text.find(':');
    if (colon == std::string::npos)
      throw ParseError(line.offset, "header without ':'");
    std::string name = line.text.substr(0, colon);
    std::string value = line.text.substr(colon + 1);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    if (name == "From") {
      auto na = parse_name_addr(line, value);
      m.caller_id = na.uri;
      m.from_tag = na.tag;
      saw_from = true;
    } else if (name == "To") {
      auto na = parse_name_addr(line, value);
      m.callee_id = na.uri;
      m.to_tag = na.tag;
      saw_to = true;
    } else if (name == "Call-ID") {
      m.call_id = value;
      saw_call_id = true;
    } else if (name == "Via" || name == "CSeq") {
      // Regenerated on serialize; nothing retained.
    } else if (name == "Content-Type") {
      has_sdp_type = value.rfind("application/sdp", 0) == 0;
    } else if (name == "Content-Length") {
      try {
        content_length = std::stoul(value);
      } catch (const std::exception&) {
        throw ParseError(line.offset, "bad Content-Length");
      }
    } else {
      m.extra_headers.emplace_back(name, value);
    }
  }
  if (!saw_from) throw ParseError(text.size(), "missing From header");
  if (!saw_to) throw ParseError(text.size(), "missing To header");
  if (!saw_call_id) throw ParseError(text.size(), "missing Call-ID header");

  const std::string body = text.substr(std::min(body_offset, text.size()));
  if (body.size() != content_length)
    throw ParseError(body_offset, "Content-Length mismatch");
  if (!body.empty()) {
    if (!has_sdp_type)
      throw ParseError(body_offset, "body without application/sdp type");
    m.sdp = parse_sdp(body, body_offset);
  } else if (has_sdp_type) {
    throw ParseError(body_offset, "application/sdp with empty body");
  }
  if ((m.kind == Kind::Invite || m.kind == Kind::Ok) && !m.sdp)
    throw ParseError(body_offset, "INVITE/OK requires an SDP body");
  return m;
}

SipMessage parse(std::span<const std::uint8_t> bytes) {
  return parse(std::string(bytes.begin(), bytes.end()));
}

SipMessage build_invite(const std::string& caller, const std::string& callee,
                        const std::string& caller_addr,
                        const UserAgentProfile& profile, std::mt19937_64& rng,
                        std::uint16_t rtp_port) {
  if (!uri_well_formed(caller)) throw MalformedUri(caller);
  if (!uri_well_formed(callee)) throw MalformedUri(callee);
  if (rtp_port % 2 != 0)
    throw std::invalid_argument("RTP port must be even");
  SipMessage m;
  m.kind = Kind::Invite;
  m.caller_id = strip_scheme(caller);
  m.callee_id = strip_scheme(callee);
  m.from_tag = random_token(rng, profile.tag_length);
  m.call_id = random_token(rng, profile.tag_length + 4);
  m.sdp = SdpBody{caller_addr, rtp_port, profile.codec_prefs};
  m.extra_headers = profile.header_template;
  m.ua_profile_name = profile.name;
  return m;
}

SipMessage build_manipulated_ok(const SipMessage& invite,
                                const UserAgentProfile& profile,
                                const std::string& dummy_addr,
                                std::uint16_t dummy_rtp_port,
                                std::span<const std::uint8_t> session_key,
                                std::mt19937_64& rng) {
  if (invite.kind != Kind::Invite)
    throw MissingDialogState("OK must answer an INVITE");
  if (!invite.sdp) throw MissingSdp();
  if (dummy_rtp_port % 2 != 0)
    throw std::invalid_argument("dummy RTP port must be even");

  // First caller-preferred codec the profile also supports.
  std::string codec;
  for (const auto& offered : invite.sdp->codecs) {
    if (std::find(profile.codec_prefs.begin(), profile.codec_prefs.end(),
                  offered) != profile.codec_prefs.end()) {
      codec = offered;
      break;
    }
  }
  if (codec.empty()) throw NoCommonCodec();

  SipMessage m;
  m.kind = Kind::Ok;
  m.caller_id = invite.caller_id;
  m.callee_id = invite.callee_id;
  m.from_tag = invite.from_tag;
  m.call_id = invite.call_id;
  m.to_tag = random_token(rng, profile.tag_length) +
             endpoint_tag(session_key, dummy_addr, dummy_rtp_port);
  m.sdp = SdpBody{dummy_addr, dummy_rtp_port, {codec}};
  m.extra_headers = profile.header_template;
  m.ua_profile_name = profile.name;
  return m;
}

VerifiedCallee verify_ok(const SipMessage& ok,
                         std::span<const std::uint8_t> session_key) {
  if (ok.kind != Kind::Ok)
    throw MissingDialogState("verify_ok needs an OK message");
  if (!ok.sdp) throw MissingSdp();
  if (ok.to_tag.size() < kEndpointTagChars)
    throw IntegrityFailure("To-tag shorter than the endpoint tag");
  const std::string presented =
      ok.to_tag.substr(ok.to_tag.size() - kEndpointTagChars);
  const std::string expected =
      endpoint_tag(session_key, ok.sdp->media_address, ok.sdp->rtp_port);
  if (presented != expected)
    throw IntegrityFailure("endpoint tag mismatch");
  return VerifiedCallee{ok.sdp->media_address, ok.sdp->rtp_port};
}

SipMessage build_response(Kind kind, const SipMessage& context) {
  if (kind == Kind::Invite || kind == Kind::Ok)
    throw std::invalid_argument("build_response handles non-OK replies only");
  if (context.call_id.empty() || context.from_tag.empty())
    throw MissingDialogState("context lacks call id or from tag");
  if ((kind == Kind::Ack || kind == Kind::Bye) && context.to_tag.empty())
    throw MissingDialogState(std::string(kind_name(kind)) +
                             " needs an established dialog (no to tag)");
  SipMessage m;
  m.kind = kind;
  m.caller_id = context.caller_id;
  m.callee_id = context.callee_id;
  m.from_tag = context.from_tag;
  m.to_tag = context.to_tag;
  m.call_id = context.call_id;
  return m;
}

const std::vector<UserAgentProfile>& builtin_profiles() {
  static const std::vector<UserAgentProfile> profiles = {
      {"ekiga",
       {{"User-Agent", "Ekiga/4.0.1"},
        {"Allow", "INVITE,ACK,CANCEL,OPTIONS,BYE"}},
       8,
       {"G.711", "G.722-64", "G.726-40", "iLBC"},
       {"Linux", "Windows"}},
      {"blink",
       {{"User-Agent", "Blink 3.0.3 (MacOSX)"},
        {"Supported", "replaces"}},
       12,
       {"G.722-64", "G.711", "iLBC"},
       {"Windows", "MacOSX"}},
      {"sflphone",
       {{"User-Agent", "SFLphone/1.4.1"}},
       10,
       {"G.711", "G.726-40"},
       {"Linux"}},
      {"pjsua",
       {{"User-Agent", "PJSUA v1.12"},
        {"Allow", "PRACK,INVITE,ACK,BYE,CANCEL,UPDATE,OPTIONS"}},
       8,
       {"G.711", "G.722-64", "iLBC"},
       {"Linux", "Windows", "MacOSX"}},
  };
  return profiles;
}

const UserAgentProfile& builtin_profile(const std::string& name) {
  for (const auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw std::invalid_argument("no built-in user-agent profile '" + name + "'");
}

UserAgentProfile parse_profile(const std::string& text) {
  UserAgentProfile p;
  p.tag_length = 0;
  std::istringstream in(text);
  std::string line;
  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
      while (!item.empty() && item.front() == ' ') item.erase(0, 1);
      while (!item.empty() && item.back() == ' ') item.pop_back();
      if (!item.empty()) out.push_back(item);
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos)
      throw std::runtime_error("bad profile line: " + line);
    const std::string key = line.substr(0, sp);
    const std::string value = line.substr(sp + 1);
    if (key == "name") {
      p.name = value;
    } else if (key == "tag-length") {
      p.tag_length = static_cast<unsigned>(std::stoul(value));
    } else if (key == "codecs") {
      p.codec_prefs = split_csv(value);
    } else if (key == "os") {
      p.os_labels = split_csv(value);
    } else if (key == "header") {
      auto colon = value.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("bad header line: " + line);
      std::string hv = value.substr(colon + 1);
      if (!hv.empty() && hv.front() == ' ') hv.erase(0, 1);
      p.header_template.emplace_back(value.substr(0, colon), hv);
    } else {
      throw std::runtime_error("unknown profile key '" + key + "'");
    }
  }
  if (p.name.empty()) throw std::runtime_error("profile lacks a name");
  if (p.tag_length < 4)
    throw std::runtime_error("profile tag-length must be >= 4");
  if (p.codec_prefs.empty())
    throw std::runtime_error("profile needs at least one codec");
  return p;
}

UserAgentProfile load_profile(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open profile: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_profile(buf.str());
}

}  // namespace covercall::sip
