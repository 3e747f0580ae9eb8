#include <doctest.h>

#include "dexmouse/core.hpp"

using namespace dexmouse;

TEST_CASE("ticks_to_degrees") {
  CHECK(ticks_to_degrees(Ticks{100}) == 8.7890625);
  CHECK(ticks_to_degrees(Ticks{0}) == 0.0);
  CHECK(ticks_to_degrees(Ticks{4096}) == 360.0);
  CHECK(ticks_to_degrees(Ticks{-2048}) == -180.0);
}

TEST_CASE("ticks_per_cycle_to_deg_per_s") {
  CHECK(ticks_per_cycle_to_deg_per_s(Ticks{20}, 100) == 175.78125);
  CHECK(ticks_per_cycle_to_deg_per_s(Ticks{0}, 100) == 0.0);
  CHECK(ticks_per_cycle_to_deg_per_s(Ticks{-20}, 100) == -175.78125);
}

TEST_CASE("tick resolution reproduces the published parentheticals within 0.5%") {
  CHECK(std::abs(ticks_per_cycle_to_deg_per_s(Ticks{20}) - 175.0) / 175.0 < 0.005);
  CHECK(std::abs(ticks_to_degrees(Ticks{100}) - 8.8) / 8.8 < 0.005);
}

TEST_CASE("degrees round trip is exact on the tick lattice") {
  for (std::int64_t t = -5000; t <= 5000; ++t) {
    const double deg = static_cast<double>(t) * 360.0 / 4096.0;
    REQUIRE(degrees_to_ticks(deg) == Ticks{t});
    REQUIRE(ticks_to_degrees(degrees_to_ticks(deg)) == deg);
  }
}

TEST_CASE("wide tick values do not overflow") {
  const Ticks lo{-(std::int64_t{1} << 31)};
  const Ticks hi{(std::int64_t{1} << 31) - 1};
  CHECK((hi - lo).value == (std::int64_t{1} << 32) - 1);
  CHECK(ticks_to_degrees(lo) == -(std::int64_t{1} << 31) * 360.0 / 4096.0);
}

TEST_CASE("channel ids") {
  int actuated = 0;
  for (int i = 0; i < kChannelCount; ++i) actuated += ChannelId{i}.actuated() ? 1 : 0;
  CHECK(actuated == 5);
  CHECK(ChannelId{5}.kind() == ChannelKind::ThumbAA);
  CHECK(ChannelId{4}.kind() == ChannelKind::ThumbFE);
  CHECK(ChannelId{0}.kind() == ChannelKind::FingerFE);
  CHECK_THROWS_AS(ChannelId{6}, std::out_of_range);
  CHECK_THROWS_AS(ChannelId{-1}, std::out_of_range);
  CHECK(parse_channel("thumb_aa") == ChannelId::thumb_aa());
  CHECK(channel_name(ChannelId{2}) == "ring_fe");
  CHECK_THROWS_AS(parse_channel("pinky"), std::invalid_argument);
}

TEST_CASE("normalized flexion clamps at construction") {
  CHECK(NormalizedFlexion{-0.5}.value() == 0.0);
  CHECK(NormalizedFlexion{1.5}.value() == 1.0);
  CHECK(NormalizedFlexion{0.25}.value() == 0.25);
}
