#include "covercall/prefetch.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace covercall::web {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string strip_fragment(const std::string& url) {
  auto hash = url.find('#');
  return hash == std::string::npos ? url : url.substr(0, hash);
}

}  // namespace

std::optional<UrlParts> parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || scheme_end == 0) return std::nullopt;
  UrlParts p;
  p.scheme = url.substr(0, scheme_end);
  auto host_start = scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) {
    p.host = url.substr(host_start);
    p.path_query = "/";
  } else {
    p.host = url.substr(host_start, path_start - host_start);
    p.path_query = url.substr(path_start);
  }
  if (p.host.empty()) return std::nullopt;
  return p;
}

std::string normalize_url(const std::string& url) {
  const std::string no_frag = strip_fragment(url);
  auto parts = parse_url(no_frag);
  if (!parts) return no_frag;
  return lower(parts->scheme) + "://" + lower(parts->host) + parts->path_query;
}

std::string resolve_url(const std::string& base, const std::string& ref) {
  if (ref.find("://") != std::string::npos) return ref;
  auto parts = parse_url(base);
  if (!parts) return ref;
  if (ref.rfind("//", 0) == 0) return parts->scheme + ":" + ref;
  if (!ref.empty() && ref.front() == '/')
    return parts->scheme + "://" + parts->host + ref;
  std::string dir = parts->path_query;
  if (auto q = dir.find('?'); q != std::string::npos) dir.erase(q);
  auto slash = dir.rfind('/');
  dir = slash == std::string::npos ? "/" : dir.substr(0, slash + 1);
  return parts->scheme + "://" + parts->host + dir + ref;
}

std::string path_extension(const std::string& url) {
  auto parts = parse_url(strip_fragment(url));
  std::string path = parts ? parts->path_query : url;
  if (auto q = path.find('?'); q != std::string::npos) path.erase(q);
  auto slash = path.rfind('/');
  const std::string last =
      slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = last.rfind('.');
  if (dot == std::string::npos || dot + 1 == last.size()) return "";
  return lower(last.substr(dot + 1));
}

std::vector<std::uint8_t> build_request(const std::string& url) {
  auto parts = parse_url(url);
  const std::string host = parts ? parts->host : "unknown";
  std::string text = "GET " + url + " HTTP/1.1\r\nHost: " + host + "\r\n\r\n";
  return {text.begin(), text.end()};
}

std::vector<std::uint8_t> build_response(int status, const std::string& reason,
                                         const std::string& content_type,
                                         std::span<const std::uint8_t> body) {
  std::ostringstream head;
  head << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
       << "Content-Type: " << content_type << "\r\n"
       << "Content-Length: " << body.size() << "\r\n\r\n";
  const std::string h = head.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::optional<std::string> request_url(std::span<const std::uint8_t> request) {
  const std::string text(request.begin(), request.end());
  if (text.rfind("GET ", 0) != 0) return std::nullopt;
  auto sp = text.find(' ', 4);
  if (sp == std::string::npos) return std::nullopt;
  return text.substr(4, sp - 4);
}

std::optional<int> response_status(std::span<const std::uint8_t> response) {
  const std::string text(response.begin(),
                         response.begin() + std::min<std::size_t>(
                                                response.size(), 64));
  if (text.rfind("HTTP/1.1 ", 0) != 0 || text.size() < 12) return std::nullopt;
  try {
    return std::stoi(text.substr(9, 3));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::uint8_t> response_body(
    std::span<const std::uint8_t> response) {
  static const std::uint8_t sep[] = {'\r', '\n', '\r', '\n'};
  auto it = std::search(response.begin(), response.end(), std::begin(sep),
                        std::end(sep));
  if (it == response.end()) return {};
  return {it + 4, response.end()};
}

std::vector<std::string> extract_references(const std::string& html,
                                            const std::string& page_url) {
  std::vector<std::string> out;
  auto push = [&](const std::string& raw) {
    if (raw.empty()) return;
    if (raw.rfind("javascript:", 0) == 0 || raw.rfind("data:", 0) == 0 ||
        raw.front() == '#')
      return;
    const std::string resolved = resolve_url(page_url, raw);
    if (std::find(out.begin(), out.end(), resolved) == out.end())
      out.push_back(resolved);
  };
  auto scan_attr = [&](const char* attr, bool link_only) {
    const std::string needle = std::string(attr) + "=";
    std::size_t pos = 0;
    while ((pos = html.find(needle, pos)) != std::string::npos) {
      if (link_only) {
        // Only pull href= out of <link ...> tags; anchors are navigations.
        auto tag_open = html.rfind('<', pos);
        if (tag_open == std::string::npos ||
            lower(html.substr(tag_open, 5)) != "<link") {
          pos += needle.size();
          continue;
        }
      }
      pos += needle.size();
      if (pos >= html.size()) break;
      const char quote = html[pos];
      if (quote != '"' && quote != '\'') continue;
      auto end = html.find(quote, pos + 1);
      if (end == std::string::npos) break;
      push(html.substr(pos + 1, end - pos - 1));
      pos = end + 1;
    }
  };
  scan_attr("src", false);
  scan_attr("href", true);
  return out;
}

std::vector<HttpPairRecord> prefetch(const std::string& url,
                                     PageFetcher& fetcher) {
  std::vector<HttpPairRecord> out;
  FetchResult page;
  try {
    page = fetcher.fetch(url);
  } catch (const FetchFailure&) {
    static const std::string msg = "upstream fetch failed";
    out.push_back(
        {build_request(url),
         build_response(502, "Bad Gateway", "text/plain",
                        std::span(reinterpret_cast<const std::uint8_t*>(
                                      msg.data()),
                                  msg.size()))});
    out.push_back(HttpPairRecord::end_of_page_marker());
    return out;
  }
  out.push_back({build_request(url),
                 build_response(200, "OK", page.content_type, page.body)});
  if (page.content_type.rfind("text/html", 0) == 0) {
    const std::string html(page.body.begin(), page.body.end());
    for (const auto& ref : extract_references(html, url)) {
      try {
        FetchResult obj = fetcher.fetch(ref);
        out.push_back({build_request(ref),
                       build_response(200, "OK", obj.content_type, obj.body)});
      } catch (const FetchFailure&) {
        // Missing object: no record; the client's request for it will time
        // out against the finished page.
      }
    }
  }
  out.push_back(HttpPairRecord::end_of_page_marker());
  return out;
}

void MemoryPageStore::add(const std::string& url,
                          const std::string& content_type,
                          std::vector<std::uint8_t> body) {
  pages_[normalize_url(url)] = FetchResult{content_type, std::move(body)};
}

FetchResult MemoryPageStore::fetch(const std::string& url) {
  auto it = pages_.find(normalize_url(url));
  if (it == pages_.end()) throw FetchFailure(url);
  return it->second;
}

bool MemoryPageStore::contains(const std::string& url) const {
  return pages_.count(normalize_url(url)) > 0;
}

MemoryPageStore MemoryPageStore::load(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f)
    throw std::runtime_error("cannot open page manifest: " + manifest_path);
  const auto base_dir = std::filesystem::path(manifest_path).parent_path();
  MemoryPageStore store;
  std::string line;
  while (std::getline(f, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "body") {
      std::string url, file, ct;
      if (!(ls >> url >> file))
        throw std::runtime_error("bad body line: " + line);
      if (!(ls >> ct)) ct = "application/octet-stream";
      std::ifstream bf(base_dir / file, std::ios::binary);
      if (!bf)
        throw std::runtime_error("cannot open page body: " +
                                 (base_dir / file).string());
      std::vector<std::uint8_t> body(
          (std::istreambuf_iterator<char>(bf)),
          std::istreambuf_iterator<char>());
      store.add(url, ct, std::move(body));
    } else if (tag == "synthetic") {
      std::string url;
      std::size_t html_bytes = 0, count = 0, obj_bytes = 0;
      if (!(ls >> url >> html_bytes >> count >> obj_bytes))
        throw std::runtime_error("bad synthetic line: " + line);
      make_synthetic_page(store, url, html_bytes, count, obj_bytes);
    } else {
      throw std::runtime_error("unknown manifest entry '" + tag + "'");
    }
  }
  return store;
}

namespace {

// Pads `body` (by appending filler) until request+response totals `target`.
std::vector<std::uint8_t> pad_to_record_size(const std::string& url,
                                             const std::string& content_type,
                                             std::string body,
                                             std::size_t target) {
  const std::size_t request = build_request(url).size();
  for (int i = 0; i < 8; ++i) {
    const std::size_t total =
        request +
        build_response(200, "OK", content_type,
                       std::span(reinterpret_cast<const std::uint8_t*>(
                                     body.data()),
                                 body.size()))
            .size();
    if (total == target) break;
    if (total > target)
      throw std::runtime_error("synthetic record for " + url +
                               " cannot fit in " + std::to_string(target) +
                               " bytes");
    body.append(target - total, 'x');
  }
  return {body.begin(), body.end()};
}

}  // namespace

void make_synthetic_page(MemoryPageStore& store, const std::string& url,
                         std::size_t html_record_bytes,
                         std::size_t object_count,
                         std::size_t object_record_bytes) {
  auto parts = parse_url(url);
  if (!parts) throw std::runtime_error("synthetic page needs an absolute URL");
  std::string stem = parts->path_query;
  std::replace(stem.begin(), stem.end(), '/', '_');
  std::replace(stem.begin(), stem.end(), '?', '_');

  std::string html = "<html><body>\n";
  std::vector<std::string> object_urls;
  for (std::size_t i = 0; i < object_count; ++i) {
    const std::string name = stem + "_obj" + std::to_string(i) + ".bin";
    html += "<img src=\"" + name + "\">\n";
    object_urls.push_back(resolve_url(url, name));
  }
  html += "<!--";  // padding goes inside the comment
  const std::string tail = "--></body></html>";
  std::string padded = html;
  // Two-step sizing: append filler, then account for Content-Length digits.
  for (int i = 0; i < 8; ++i) {
    std::string candidate = padded + tail;
    const std::size_t total =
        build_request(url).size() +
        build_response(200, "OK", "text/html",
                       std::span(reinterpret_cast<const std::uint8_t*>(
                                     candidate.data()),
                                 candidate.size()))
            .size();
    if (total == html_record_bytes) break;
    if (total > html_record_bytes)
      throw std::runtime_error("html record for " + url + " cannot fit in " +
                               std::to_string(html_record_bytes) + " bytes");
    padded.append(html_record_bytes - total, 'x');
  }
  store.add(url, "text/html",
            std::vector<std::uint8_t>((padded + tail).begin(),
                                      (padded + tail).end()));
  for (const auto& obj_url : object_urls) {
    store.add(obj_url, "application/octet-stream",
              pad_to_record_size(obj_url, "application/octet-stream", "o",
                                 object_record_bytes));
  }
}

std::vector<std::uint8_t> encode_record(const HttpPairRecord& rec) {
  std::vector<std::uint8_t> out;
  if (rec.end_of_page()) {
    out.push_back(0xFF);
    out.push_back(0xFF);
    return out;
  }
  if (rec.request.size() >= kEndOfPageLen)
    throw std::runtime_error("request too large to frame");
  out.push_back(static_cast<std::uint8_t>(rec.request.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(rec.request.size() & 0xff));
  out.insert(out.end(), rec.request.begin(), rec.request.end());
  const std::uint32_t rlen = static_cast<std::uint32_t>(rec.response.size());
  out.push_back(static_cast<std::uint8_t>(rlen >> 24));
  out.push_back(static_cast<std::uint8_t>((rlen >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((rlen >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(rlen & 0xff));
  out.insert(out.end(), rec.response.begin(), rec.response.end());
  return out;
}

std::vector<std::uint8_t> encode_records(
    const std::vector<HttpPairRecord>& recs) {
  std::vector<std::uint8_t> out;
  for (const auto& rec : recs) {
    auto bytes = encode_record(rec);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

std::vector<HttpPairRecord> RecordParser::feed(
    std::span<const std::uint8_t> bytes) {
  std::vector<HttpPairRecord> out;
  if (end_seen_ || failed_) return out;
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  std::size_t pos = 0;
  while (true) {
    if (buf_.size() - pos < 2) break;
    const std::uint16_t req_len =
        static_cast<std::uint16_t>((buf_[pos] << 8) | buf_[pos + 1]);
    if (req_len == kEndOfPageLen) {
      end_seen_ = true;
      pos += 2;
      break;
    }
    if (req_len == 0) {
      // A data record never has an empty request.
      failed_ = true;
      break;
    }
    if (buf_.size() - pos < 2u + req_len + 4u) break;
    const std::size_t resp_off = pos + 2 + req_len;
    const std::uint32_t resp_len =
        (static_cast<std::uint32_t>(buf_[resp_off]) << 24) |
        (static_cast<std::uint32_t>(buf_[resp_off + 1]) << 16) |
        (static_cast<std::uint32_t>(buf_[resp_off + 2]) << 8) |
        buf_[resp_off + 3];
    if (buf_.size() - resp_off - 4 < resp_len) break;
    HttpPairRecord rec;
    rec.request.assign(buf_.begin() + pos + 2, buf_.begin() + resp_off);
    rec.response.assign(buf_.begin() + resp_off + 4,
                        buf_.begin() + resp_off + 4 + resp_len);
    out.push_back(std::move(rec));
    pos = resp_off + 4 + resp_len;
  }
  buf_.erase(buf_.begin(), buf_.begin() + pos);
  return out;
}

}  // namespace covercall::web
