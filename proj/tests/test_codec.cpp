#include "covercall/codec.hpp"

#include <cmath>

#include "doctest.h"

using namespace covercall;

TEST_CASE("built-in profiles carry the published bandwidth figures") {
  struct Row {
    const char* name;
    double inbound;
    double consumed;
  };
  const Row rows[] = {
      {"G.711", 64.0, 87.2},
      {"G.722-64", 64.0, 87.2},
      {"G.726-40", 40.0, 54.7},
      {"iLBC", 15.6, 26.6},
  };
  for (const auto& row : rows) {
    const auto p = codec::lookup(row.name);
    CHECK(p.inbound_kbps == doctest::Approx(row.inbound));
    CHECK(p.consumed_kbps == doctest::Approx(row.consumed));
    CHECK(p.payload_size > 4);
    CHECK(p.send_interval_ms > 0);
    CHECK(codec::bandwidth_identity_holds(p));
  }
}

TEST_CASE("unknown codec names are rejected") {
  CHECK_THROWS_AS(codec::lookup("G.729"), codec::UnknownCodec);
  CHECK_THROWS_AS(codec::lookup(""), codec::UnknownCodec);
}

TEST_CASE("goodput arithmetic") {
  const auto g711 = codec::lookup("G.711");
  // (160-4) * 50 * 10/11, cross-checked by hand
  CHECK(codec::goodput(g711, 10) == doctest::Approx(7090.909090909091));
  // (156*50)/2
  CHECK(codec::goodput(g711, 1) == doctest::Approx(3900.0));

  codec::CodecProfile degenerate{"tiny", 4, 20, 1.6, 1.6};
  CHECK(codec::goodput(degenerate, 10) == doctest::Approx(0.0));
}

TEST_CASE("goodput grows with the group size but never reaches raw rate") {
  for (const auto& p : codec::builtin_profiles()) {
    const double raw =
        static_cast<double>(p.payload_size) * (1000.0 / p.send_interval_ms);
    double prev = 0.0;
    for (unsigned lambda = 1; lambda <= 40; ++lambda) {
      const double g = codec::goodput(p, lambda);
      CHECK(g > prev);
      CHECK(g < raw);
      prev = g;
    }
  }
}

TEST_CASE("profiles load from config text") {
  const auto profiles = codec::parse_profiles(
      "# comment\n"
      "G.711 payload=160 interval=20 inbound=64 consumed=87.2\n"
      "custom payload=80 interval=10 inbound=64 consumed=70\n");
  REQUIRE(profiles.size() == 2);
  const auto custom = codec::lookup("custom", profiles);
  CHECK(custom.payload_size == 80);
  CHECK(custom.send_interval_ms == 10);
  CHECK(codec::bandwidth_identity_holds(custom));

  CHECK_THROWS_AS(codec::parse_profiles("bad payload=4 interval=20\n"),
                  codec::BadProfile);
  CHECK_THROWS_AS(codec::parse_profiles("bad payload=160\n"),
                  codec::BadProfile);
  CHECK_THROWS_AS(codec::parse_profiles("bad payload=160 interval=x\n"),
                  codec::BadProfile);
}
