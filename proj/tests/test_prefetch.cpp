#include "covercall/prefetch.hpp"

#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

using namespace covercall;
using testutil::bytes_of;

TEST_CASE("url parsing and normalization") {
  CHECK(web::normalize_url("HTTP://Pages.Test/Wiki?q=1#frag") ==
        "http://pages.test/Wiki?q=1");
  CHECK(web::normalize_url("http://pages.test") == "http://pages.test/");
  CHECK(web::normalize_url("not a url#x") == "not a url");
  CHECK(web::path_extension("http://h/x/logo.png") == "png");
  CHECK(web::path_extension("http://h/x/page") == "");
  CHECK(web::path_extension("http://h/x/style.CSS?v=2") == "css");
}

TEST_CASE("relative reference resolution") {
  const std::string base = "http://pages.test/site/index.html";
  CHECK(web::resolve_url(base, "logo.png") ==
        "http://pages.test/site/logo.png");
  CHECK(web::resolve_url(base, "/top.css") == "http://pages.test/top.css");
  CHECK(web::resolve_url(base, "//cdn.test/x.js") == "http://cdn.test/x.js");
  CHECK(web::resolve_url(base, "https://o.test/y") == "https://o.test/y");
}

TEST_CASE("reference extraction: src and link href, deduped, no anchors") {
  const std::string html =
      "<html><head>"
      "<link rel=\"stylesheet\" href=\"style.css\">"
      "</head><body>"
      "<img src=\"a.png\"><img src='b.png'><img src=\"a.png\">"
      "<a href=\"http://pages.test/elsewhere\">nav</a>"
      "<script src=\"app.js\"></script>"
      "<img src=\"data:image/png;base64,xyz\">"
      "</body></html>";
  const auto refs =
      web::extract_references(html, "http://pages.test/site/index.html");
  CHECK(refs == std::vector<std::string>{
                    "http://pages.test/site/a.png",
                    "http://pages.test/site/b.png",
                    "http://pages.test/site/app.js",
                    "http://pages.test/site/style.css",
                });
}

TEST_CASE("prefetch returns html, every object, then the end marker") {
  web::MemoryPageStore store;
  store.add("http://h/p", "text/html",
            bytes_of("<img src=\"1.png\"><img src=\"2.png\">"));
  store.add("http://h/1.png", "image/png", bytes_of("AA"));
  store.add("http://h/2.png", "image/png", bytes_of("BB"));
  const auto records = web::prefetch("http://h/p", store);
  REQUIRE(records.size() == 4);  // html + 2 objects + marker
  CHECK(!records[0].end_of_page());
  CHECK(web::request_url(records[0].request) == "http://h/p");
  CHECK(web::request_url(records[1].request) == "http://h/1.png");
  CHECK(web::request_url(records[2].request) == "http://h/2.png");
  CHECK(records[3].end_of_page());
  CHECK(web::response_status(records[1].response) == 200);
  CHECK(web::response_body(records[1].response) == bytes_of("AA"));
}

TEST_CASE("page without references is one pair plus the marker") {
  web::MemoryPageStore store;
  store.add("http://h/solo", "text/html", bytes_of("<p>hi</p>"));
  const auto records = web::prefetch("http://h/solo", store);
  REQUIRE(records.size() == 2);
  CHECK(records[1].end_of_page());
}

TEST_CASE("failed page fetch yields an error record, failed objects vanish") {
  web::MemoryPageStore store;
  const auto failed = web::prefetch("http://h/nope", store);
  REQUIRE(failed.size() == 2);
  CHECK(web::response_status(failed[0].response) == 502);
  CHECK(failed[1].end_of_page());

  store.add("http://h/p", "text/html",
            bytes_of("<img src=\"missing.png\"><img src=\"there.png\">"));
  store.add("http://h/there.png", "image/png", bytes_of("ok"));
  const auto records = web::prefetch("http://h/p", store);
  REQUIRE(records.size() == 3);  // html + the one object that exists + marker
  CHECK(web::request_url(records[1].request) == "http://h/there.png");
}

TEST_CASE("synthetic pages hit their record sizes exactly") {
  web::MemoryPageStore store;
  web::make_synthetic_page(store, "http://pages.test/wiki", 20480, 7, 20480);
  const auto records = web::prefetch("http://pages.test/wiki", store);
  REQUIRE(records.size() == 9);  // html + 7 objects + marker
  CHECK(records[0].wire_size() == 20480);
  for (int i = 1; i <= 7; ++i) CHECK(records[i].wire_size() == 20480);
  const std::size_t total = std::accumulate(
      records.begin(), records.end(), std::size_t{0},
      [](std::size_t acc, const auto& r) { return acc + r.wire_size(); });
  CHECK(total == 163840);  // the 160 KiB reference page
}

TEST_CASE("manifest loading covers body files and synthetic entries") {
  auto store = web::MemoryPageStore::load("fixtures/pages/manifest.txt");
  CHECK(store.contains("http://pages.test/wiki"));
  CHECK(store.contains("http://pages.test/site/"));
  CHECK(store.contains("http://pages.test/site/logo.png"));
  const auto site = store.fetch("http://pages.test/site/");
  CHECK(site.content_type == "text/html");
  const auto refs = web::extract_references(
      std::string(site.body.begin(), site.body.end()),
      "http://pages.test/site/");
  CHECK(refs == std::vector<std::string>{"http://pages.test/site/logo.png",
                                         "http://pages.test/site/style.css"});
}

TEST_CASE("record framing: layout, round trip, incremental parse") {
  web::HttpPairRecord rec{bytes_of("GET http://h/x HTTP/1.1\r\n\r\n"),
                          bytes_of("HTTP/1.1 200 OK\r\n\r\nbody")};
  const auto bytes = web::encode_record(rec);
  CHECK(bytes[0] == 0);
  CHECK(bytes[1] == rec.request.size());

  const auto marker = web::encode_record(web::HttpPairRecord::end_of_page_marker());
  CHECK(marker == std::vector<std::uint8_t>{0xFF, 0xFF});

  std::vector<std::uint8_t> stream = bytes;
  stream.insert(stream.end(), bytes.begin(), bytes.end());
  stream.insert(stream.end(), marker.begin(), marker.end());

  // feed one byte at a time
  web::RecordParser parser;
  std::vector<web::HttpPairRecord> got;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    auto out = parser.feed(std::span(&stream[i], 1));
    got.insert(got.end(), out.begin(), out.end());
  }
  REQUIRE(got.size() == 2);
  CHECK(got[0].request == rec.request);
  CHECK(got[0].response == rec.response);
  CHECK(got[1].request == rec.request);
  CHECK(parser.end_seen());
  // anything after the marker is ignored
  CHECK(parser.feed(bytes).empty());
}

TEST_CASE("a zero request length in the stream is a framing error") {
  web::RecordParser parser;
  const std::vector<std::uint8_t> zeros{0, 0, 0, 0};
  CHECK(parser.feed(zeros).empty());
  CHECK(parser.failed());
}
