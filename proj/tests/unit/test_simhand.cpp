#include <doctest.h>

#include <random>

#include "dexmouse/simhand.hpp"

using namespace dexmouse;
using namespace dexmouse::simhand;
using nlohmann::json;

namespace {

PerActuated<NormalizedFlexion> all(double u) {
  PerActuated<NormalizedFlexion> t{};
  t.fill(NormalizedFlexion{u});
  return t;
}

Scenario fixture(const std::string& name) {
  return load_scenario(std::string(DEXMOUSE_DATA_DIR) + "/scenarios/" + name + ".json");
}

}  // namespace

TEST_CASE("rate limited step then block contact") {
  VirtualHand h;
  h.rate_limit = 0.3;
  h.u_actual.fill(0.2);
  h.block.fill(0.6);
  h = hand_step(h, all(0.9));
  CHECK(h.u_actual[0] == doctest::Approx(0.5));
  CHECK_FALSE(h.contact[0]);
  h = hand_step(h, all(0.9));
  CHECK(h.u_actual[0] == 0.6);
  CHECK(h.contact[0]);
}

TEST_CASE("target equal to u is a fixed point") {
  VirtualHand h;
  h.u_actual.fill(0.4);
  const auto n = hand_step(h, all(0.4));
  CHECK(n.u_actual == h.u_actual);
  CHECK(n.contact == PerActuated<bool>{});
}

TEST_CASE("no block: contact only impossible") {
  VirtualHand h;
  h.u_actual.fill(0.98);
  for (int i = 0; i < 5; ++i) {
    h = hand_step(h, all(1.0));
    CHECK(h.u_actual[0] <= 1.0);
    CHECK_FALSE(h.contact[0]);
  }
}

TEST_CASE("property: bounds, exact rate limit, contact iff clipped") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VirtualHand h;
  h.rate_limit = 0.05;
  for (int k = 0; k < 20000; ++k) {
    if (k % 50 == 0) {
      for (auto& b : h.block) b = unit(rng) < 0.5 ? Block{} : Block{unit(rng)};
      // block changes are applied when u is already below it so the rate bound stays meaningful
      for (std::size_t i = 0; i < 5; ++i) {
        if (h.block[i] && h.u_actual[i] > *h.block[i]) h.u_actual[i] = *h.block[i];
      }
    }
    PerActuated<NormalizedFlexion> tgt{};
    for (auto& t : tgt) t = NormalizedFlexion{unit(rng)};
    const auto n = hand_step(h, tgt);
    for (std::size_t i = 0; i < 5; ++i) {
      REQUIRE(n.u_actual[i] >= 0.0);
      REQUIRE(n.u_actual[i] <= 1.0);
      if (h.block[i]) REQUIRE(n.u_actual[i] <= *h.block[i]);
      REQUIRE(std::abs(n.u_actual[i] - h.u_actual[i]) <= h.rate_limit + 1e-15);
      const double commanded = h.u_actual[i] + std::clamp(tgt[i].value() - h.u_actual[i], -0.05, 0.05);
      REQUIRE(n.contact[i] == (h.block[i].has_value() && commanded > *h.block[i]));
    }
    h = n;
  }
}

TEST_CASE("scenario events apply at their cycle") {
  Scenario s;
  s.events = {{100, 0, 0.6}, {200, 0, std::nullopt}};
  validate_scenario(s);
  VirtualHand h = make_hand(s, 0.05);
  h.u_actual[0] = 0.9;
  // before the event the only bound is 1
  h = apply_scenario_events(h, s, 99);
  h = hand_step(h, all(1.0));
  CHECK_FALSE(h.contact[0]);
  h.u_actual[0] = 0.5;
  h = apply_scenario_events(h, s, 100);
  CHECK(h.block[0] == 0.6);
  for (int i = 0; i < 10; ++i) h = hand_step(h, all(0.9));
  CHECK(h.u_actual[0] == 0.6);
  CHECK(h.contact[0]);
  h = apply_scenario_events(h, s, 200);
  CHECK_FALSE(h.block[0].has_value());
  h = hand_step(h, all(0.9));
  CHECK(h.u_actual[0] == doctest::Approx(0.65));
  CHECK_FALSE(h.contact[0]);
}

TEST_CASE("empty scenario leaves hand_step unchanged") {
  Scenario s;
  VirtualHand h = make_hand(s, 0.05);
  for (std::uint64_t c = 0; c < 100; ++c) {
    const auto applied = apply_scenario_events(h, s, c);
    REQUIRE(applied == h);
    h = hand_step(applied, all(0.7));
  }
}

TEST_CASE("shipped scenarios load") {
  for (const char* name : {"pick_place", "peg_in_hole", "hammering"}) {
    CAPTURE(name);
    const auto s = fixture(name);
    CHECK(s.name == name);
    CHECK_FALSE(s.events.empty());
    CHECK(parse_scenario(to_json(s)).events == s.events);
  }
}

TEST_CASE("scenario validation errors") {
  const json dup = json::parse(R"({"name":"x","events":[
    {"cycle":5,"channel":"index_fe","block":0.5},{"cycle":5,"channel":"index_fe","block":0.4}]})");
  CHECK_THROWS_WITH_AS(parse_scenario(dup), doctest::Contains("duplicate"), ScenarioError);
  const json unsorted = json::parse(R"({"name":"x","events":[
    {"cycle":9,"channel":"index_fe","block":0.5},{"cycle":5,"channel":"ring_fe","block":0.4}]})");
  CHECK_THROWS_WITH_AS(parse_scenario(unsorted), doctest::Contains("sorted"), ScenarioError);
  const json range = json::parse(R"({"name":"x","events":[{"cycle":1,"channel":0,"block":1.5}]})");
  CHECK_THROWS_AS(parse_scenario(range), ScenarioError);
  const json aa = json::parse(R"({"name":"x","events":[{"cycle":1,"channel":"thumb_aa","block":0.5}]})");
  CHECK_THROWS_AS(parse_scenario(aa), ScenarioError);
  CHECK_THROWS_AS(parse_scenario(json::parse(R"({"events":[]})")), ScenarioError);
  CHECK_THROWS_AS(load_scenario("/nonexistent.json"), ScenarioError);
}
