#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace covercall::web {

// --- URL helpers -----------------------------------------------------------

struct UrlParts {
  std::string scheme;
  std::string host;  // may include :port
  std::string path_query;
};

std::optional<UrlParts> parse_url(const std::string& url);

// Cache key form: scheme and host lowercased, fragment dropped, query kept.
std::string normalize_url(const std::string& url);

// Resolves `ref` against `base` (absolute, scheme-relative, root-relative,
// or relative to the base document's directory).
std::string resolve_url(const std::string& base, const std::string& ref);

// Extension of the last path segment (lowercased, empty when none).
std::string path_extension(const std::string& url);

// --- pages and fetching ----------------------------------------------------

struct FetchFailure : std::runtime_error {
  explicit FetchFailure(const std::string& url)
      : std::runtime_error("cannot fetch " + url) {}
};

struct FetchResult {
  std::string content_type;
  std::vector<std::uint8_t> body;
};

class PageFetcher {
 public:
  virtual ~PageFetcher() = default;
  virtual FetchResult fetch(const std::string& url) = 0;  // FetchFailure
};

// One HTTP exchange as replayed to the client. The end-of-page marker is the
// record with an empty request.
struct HttpPairRecord {
  std::vector<std::uint8_t> request;
  std::vector<std::uint8_t> response;

  bool end_of_page() const { return request.empty(); }
  static HttpPairRecord end_of_page_marker() { return {}; }
  std::size_t wire_size() const { return request.size() + response.size(); }
};

std::vector<std::uint8_t> build_request(const std::string& url);
std::vector<std::uint8_t> build_response(int status, const std::string& reason,
                                         const std::string& content_type,
                                         std::span<const std::uint8_t> body);
// Request line URL of a serialized request ("GET <url> HTTP/1.1").
std::optional<std::string> request_url(std::span<const std::uint8_t> request);
// Status code of a serialized response.
std::optional<int> response_status(std::span<const std::uint8_t> response);
// Body (after the blank line) of a serialized response.
std::vector<std::uint8_t> response_body(std::span<const std::uint8_t> response);

// src="..." plus <link href="...">, resolved against the page URL, deduped
// in document order. javascript:/data:/fragment references are skipped.
std::vector<std::string> extract_references(const std::string& html,
                                            const std::string& page_url);

// Fetches the page, then every referenced object, and closes with the
// end-of-page marker. A failing page fetch yields one 502 record before the
// marker; failing object fetches are simply skipped.
std::vector<HttpPairRecord> prefetch(const std::string& url,
                                     PageFetcher& fetcher);

// In-memory URL->body store; the default fetcher in simulations and tests.
// Manifest lines (paths are relative to the manifest file):
//   body <url> <file> [content-type]
//   synthetic <url> <html_record_bytes> <object_count> <object_record_bytes>
class MemoryPageStore : public PageFetcher {
 public:
  void add(const std::string& url, const std::string& content_type,
           std::vector<std::uint8_t> body);
  FetchResult fetch(const std::string& url) override;
  bool contains(const std::string& url) const;
  std::size_t size() const { return pages_.size(); }

  static MemoryPageStore load(const std::string& manifest_path);

 private:
  std::map<std::string, FetchResult> pages_;
};

// Builds an html page plus `object_count` binary objects whose prefetch
// records come out at exactly the requested wire sizes (request + response
// bytes). Used to pin throughput arithmetic in tests and fixtures.
void make_synthetic_page(MemoryPageStore& store, const std::string& url,
                         std::size_t html_record_bytes,
                         std::size_t object_count,
                         std::size_t object_record_bytes);

// --- task-stream framing ---------------------------------------------------
// A record is framed as: u16 BE request length, request bytes, u32 BE
// response length, response bytes. The end-of-page marker is the bare
// length 0xFFFF.

constexpr std::uint16_t kEndOfPageLen = 0xFFFF;

std::vector<std::uint8_t> encode_record(const HttpPairRecord& rec);
std::vector<std::uint8_t> encode_records(
    const std::vector<HttpPairRecord>& recs);

// Incremental decoder for one task's byte stream.
class RecordParser {
 public:
  // Appends bytes; returns the records completed by them. Once the
  // end-of-page marker is seen, further input is ignored.
  std::vector<HttpPairRecord> feed(std::span<const std::uint8_t> bytes);
  bool end_seen() const { return end_seen_; }
  bool failed() const { return failed_; }

 private:
  std::vector<std::uint8_t> buf_;
  bool end_seen_ = false;
  bool failed_ = false;
};

}  // namespace covercall::web
