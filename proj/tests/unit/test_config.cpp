#include <doctest.h>

#include <sstream>

#include "qtele/config.hpp"
#include "qtele/errors.hpp"

using namespace qtele;

TEST_SUITE("config") {

TEST_CASE("parsing and experiment fields") {
  std::istringstream in(
      "# lab-like run\n"
      "g1 = 0.11\n"
      "g2=0.12\n"
      "\n"
      "efficiency = 0.3\n"
      "efficiency.D5 = 0.5   # Bob's + detector\n"
      "dark_rate_hz.TRIG = 10\n"
      "pulses = 2e9\n"
      "charlie_state = R\n"
      "bob_basis = RL\n"
      "drift_axis = 0, 0, 2\n"
      "feed_forward = false\n"
      "tag_scope = full\n");
  const Manifest m = Manifest::parse(in, "test");
  const ExperimentConfig c = m.experiment();
  CHECK(c.source.g1 == 0.11);
  CHECK(c.source.g2 == 0.12);
  CHECK(c.detector_table[index(DetectorId::D1)].efficiency == 0.3);
  CHECK(c.detector_table[index(DetectorId::D5)].efficiency == 0.5);
  CHECK(c.detector_table[index(DetectorId::Trig)].dark_rate_hz == 10.0);
  CHECK(c.detector_table[index(DetectorId::D6)].dark_rate_hz == 400.0);
  CHECK(c.pulses == 2'000'000'000ULL);
  CHECK(c.charlie_state.same_ray(PureState::R()));
  CHECK(c.bob_basis == Basis::RL);
  CHECK((c.drift_axis - Vector3(0, 0, 1)).norm() < 1e-12);
  CHECK_FALSE(c.feed_forward);
  CHECK(c.tag_scope == TagScope::Full);
}

TEST_CASE("later keys override, bare keys reset per-detector entries") {
  Manifest m;
  m.set("efficiency.D5", "0.5");
  m.set("efficiency", "0.2");
  CHECK(m.experiment().detector_table[index(DetectorId::D5)].efficiency == 0.2);
  m.set("seed", "7");
  m.set("seed", "8");
  CHECK(m.experiment().seed == 8);
}

TEST_CASE("errors name the key") {
  Manifest m;
  CHECK_THROWS_AS(m.set("bogus", "1"), ConfigError);
  CHECK_THROWS_AS(m.set("g1", "abc"), ConfigError);
  CHECK_THROWS_AS(m.set("pulses", "-5"), ConfigError);
  CHECK_THROWS_AS(m.set("efficiency.D9", "0.5"), ConfigError);
  CHECK_THROWS_AS(m.set("feed_forward", "maybe"), ConfigError);
  CHECK_THROWS_AS(m.set("charlie_state", "Q"), ConfigError);
  try {
    m.set("xi", "nope");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("xi") != std::string::npos);
  }
  std::istringstream bad("g1 0.1\n");
  CHECK_THROWS_AS(Manifest::parse(bad), ConfigError);
}

TEST_CASE("hash covers content, not order or worker count") {
  Manifest a, b;
  a.set("g1", "0.1");
  a.set("seed", "3");
  b.set("seed", "3");
  b.set("g1", "0.1");
  b.set("threads", "4");
  CHECK(a.canonical_text() == "g1=0.1\nseed=3\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.set("seed", "4");
  CHECK(a.hash() != b.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("scalar parsers") {
  CHECK(parse_int("k", "1e12") == 1'000'000'000'000LL);
  CHECK_THROWS_AS(parse_int("k", "1.5"), ConfigError);
  CHECK(parse_double("k", " 2.5 ") == 2.5);
  CHECK_THROWS_AS(parse_double("k", "nan"), ConfigError);
  CHECK(parse_bool("k", "yes"));
  CHECK_FALSE(parse_bool("k", "0"));
  CHECK(split_list(" H, V ,P") == std::vector<std::string>{"H", "V", "P"});
  CHECK(split_list("").empty());
}

}  // TEST_SUITE
