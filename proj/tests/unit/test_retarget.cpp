#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "dexmouse/firmware.hpp"
#include "dexmouse/retarget.hpp"

using namespace dexmouse;
using namespace dexmouse::retarget;
using nlohmann::json;

namespace {

const char* const kFixtures[] = {"bluerobin-8dof", "igrisc-11dof", "adroit-30dof"};

HandProfile fixture(const std::string& name) {
  return load_profile(std::string(DEXMOUSE_DATA_DIR) + "/profiles/" + name + ".json");
}

json minimal_profile() {
  json j;
  j["name"] = "t";
  j["joints"] = json::array();
  j["channels"] = json::object();
  const char* fe[] = {"index_fe", "middle_fe", "ring_fe", "little_fe", "thumb_fe"};
  for (const char* ch : fe) {
    const std::string id = std::string(ch) + "_j";
    j["joints"].push_back({{"id", id}, {"theta_min", 0.0}, {"theta_max", 1.0}});
    j["channels"][ch] = json::array({{{"joint", id}}});
  }
  return j;
}

}  // namespace

TEST_CASE("normalize examples") {
  const DeviceRange r{1000, 3000, true};
  CHECK(normalize(Ticks{3000}, r).value() == 0.0);
  CHECK(normalize(Ticks{1000}, r).value() == 1.0);
  CHECK(normalize(Ticks{2000}, r).value() == 0.5);
  CHECK(normalize(Ticks{500}, r).value() == 1.0);
  CHECK(normalize(Ticks{3500}, r).value() == 0.0);
  CHECK(out_of_range(500, r));
  CHECK_FALSE(out_of_range(1000, r));
  const DeviceRange up{1024, 3072, false};
  CHECK(normalize(Ticks{1024}, up).value() == 0.0);
  CHECK(normalize(Ticks{2048}, up).value() == 0.5);
}

TEST_CASE("inverse examples") {
  const DeviceRange r{1000, 3000, true};
  CHECK(denormalize(NormalizedFlexion{0.0}, r) == Ticks{3000});
  CHECK(denormalize(NormalizedFlexion{1.0}, r) == Ticks{1000});
  CHECK(denormalize(NormalizedFlexion{0.25}, r) == Ticks{2500});
}

TEST_CASE("map_channel examples") {
  const JointMap quarter{"j", 0.0, std::numbers::pi / 2, 1.0, false};
  const auto a = map_channel(NormalizedFlexion{0.5}, std::span(&quarter, 1));
  CHECK(a[0] == doctest::Approx(0.7853981633974483).epsilon(1e-15));

  const JointMap finger[] = {{"mcp", 0.0, 1.6, 1.0, false}, {"pip", 0.0, 1.2, 1.0, false}};
  const auto b = map_channel(NormalizedFlexion{1.0}, finger);
  CHECK(b[0] == 1.6);
  CHECK(b[1] == 1.2);
  const auto c = map_channel(NormalizedFlexion{0.0}, finger);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);

  const JointMap inv{"t", -0.5, 0.5, 1.0, true};
  CHECK(map_channel(NormalizedFlexion{0.0}, std::span(&inv, 1))[0] == 0.5);
  CHECK(map_channel(NormalizedFlexion{1.0}, std::span(&inv, 1))[0] == -0.5);
  const JointMap half{"h", 0.0, 2.0, 0.5, false};
  CHECK(map_channel(NormalizedFlexion{1.0}, std::span(&half, 1))[0] == 1.0);
}

TEST_CASE("fixtures load and have the expected shape") {
  const auto br = fixture("bluerobin-8dof");
  CHECK(br.joint_count() == 8);
  CHECK(br.log_only[3]);
  CHECK(br.log_only[5]);
  CHECK(br.channel_maps[0].size() == 2);

  const auto ig = fixture("igrisc-11dof");
  CHECK(ig.joint_count() == 11);
  for (int c = 0; c < kChannelCount; ++c) CHECK(ig.channel_maps[static_cast<std::size_t>(c)].size() == 1);

  const auto ad = fixture("adroit-30dof");
  CHECK(ad.joint_count() == 30);
  std::size_t mapped = 0;
  for (const auto& maps : ad.channel_maps) mapped += maps.size();
  CHECK(mapped == 22);
  std::size_t neutral = 0;
  for (const auto& j : ad.joints) neutral += j.neutral ? 1 : 0;
  CHECK(neutral == 8);

  CHECK(br.content_hash.size() == 64);
  CHECK(br.content_hash != ig.content_hash);
}

TEST_CASE("extended endpoints put every mapped joint at theta_min") {
  for (const char* name : kFixtures) {
    CAPTURE(name);
    const auto p = fixture(name);
    firmware::SensorInputs in;
    for (std::size_t i = 0; i < in.fe.size(); ++i) in.fe[i] = Ticks{p.device_ranges[i].q_max};
    in.aa_raw = p.device_ranges[5].q_min;
    const auto t = retarget_all(firmware::DeviceState::initial(in), p);
    REQUIRE(t.joints.size() == p.joint_count());
    for (std::size_t c = 0; c < p.channel_maps.size(); ++c) {
      for (const auto& m : p.channel_maps[c]) {
        const double expect = m.invert ? std::lerp(m.theta_min, m.theta_max, m.weight) : m.theta_min;
        CHECK(t.joints[m.joint_index].angle == expect);
      }
    }
    for (std::size_t j = 0; j < p.joints.size(); ++j) {
      if (p.joints[j].neutral) CHECK(t.joints[j].angle == *p.joints[j].neutral);
    }
  }
}

TEST_CASE("grid properties: endpoints, monotone, inverse within one tick") {
  for (const char* name : kFixtures) {
    CAPTURE(name);
    const auto p = fixture(name);
    for (std::size_t c = 0; c < p.channel_maps.size(); ++c) {
      const auto& maps = p.channel_maps[c];
      std::vector<double> prev;
      for (int k = 0; k <= 1000; ++k) {
        const NormalizedFlexion u{k / 1000.0};
        const auto a = map_channel(u, maps);
        for (std::size_t m = 0; m < maps.size(); ++m) {
          REQUIRE(a[m] >= maps[m].theta_min);
          REQUIRE(a[m] <= maps[m].theta_max);
          if (!prev.empty()) {
            if (maps[m].invert) REQUIRE(a[m] <= prev[m]);
            else REQUIRE(a[m] >= prev[m]);
          }
          if (k == 0 || k == 1000) {
            const double s = maps[m].invert ? 1.0 - u.value() : u.value();
            REQUIRE(a[m] == std::lerp(maps[m].theta_min, maps[m].theta_max, maps[m].weight * s));
          }
        }
        prev = a;
      }
    }
    for (int k = 0; k <= 1000; ++k) {
      PerActuated<NormalizedFlexion> u{};
      u.fill(NormalizedFlexion{k / 1000.0});
      const auto q = inverse_map(u, p);
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double span = static_cast<double>(p.device_ranges[i].span());
        REQUIRE(std::abs(normalize(q[i], p.device_ranges[i]).value() - u[i].value()) * span <= 1.0);
      }
    }
  }
}

TEST_CASE("retarget depends only on ticks and profile") {
  const auto p = fixture("igrisc-11dof");
  firmware::SensorInputs in;
  in.fe = {Ticks{1200}, Ticks{1700}, Ticks{2300}, Ticks{2900}, Ticks{2000}};
  in.aa_raw = 2500;
  const auto s = firmware::DeviceState::initial(in);
  CHECK(retarget_all(s, p).angles() == retarget_all(s, p).angles());
  CHECK(retarget_all(s, fixture("igrisc-11dof")).angles() == retarget_all(s, p).angles());
}

TEST_CASE("clamp counter") {
  const auto p = fixture("igrisc-11dof");
  ClampCounter cc;
  cc.observe({2000, 2000, 2000, 2000, 2000, 2000}, p);
  CHECK(cc.count() == 0);
  cc.observe({900, 2000, 3100, 2000, 2000, 4000}, p);
  CHECK(cc.count() == 3);
}

TEST_CASE("profile validation errors") {
  CHECK_NOTHROW(parse_profile(minimal_profile()));

  auto j = minimal_profile();
  j["channels"].erase("ring_fe");
  CHECK_THROWS_WITH_AS(parse_profile(j), doctest::Contains("ring_fe"), ProfileError);

  j = minimal_profile();
  j["channels"].erase("ring_fe");
  j["log_only"] = {"ring_fe"};
  j["joints"].erase(2);
  CHECK_NOTHROW(parse_profile(j));

  j = minimal_profile();
  j["channels"]["thumb_aa"] = json::array({{{"joint", "index_fe_j"}}});
  CHECK_THROWS_WITH_AS(parse_profile(j), doctest::Contains("more than one"), ProfileError);

  j = minimal_profile();
  j["joints"][0]["theta_max"] = -1.0;
  CHECK_THROWS_AS(parse_profile(j), ProfileError);

  j = minimal_profile();
  j["device_ranges"]["index_fe"] = {{"q_min", 3000}, {"q_max", 1000}};
  CHECK_THROWS_AS(parse_profile(j), ProfileError);

  j = minimal_profile();
  j["channels"]["index_fe"][0]["weight"] = 1.5;
  CHECK_THROWS_AS(parse_profile(j), ProfileError);

  j = minimal_profile();
  j["channels"]["index_fe"][0]["joint"] = "nope";
  CHECK_THROWS_AS(parse_profile(j), ProfileError);

  j = minimal_profile();
  j["joints"].push_back({{"id", "wrist"}, {"theta_min", -1.0}, {"theta_max", 1.0}});
  CHECK_THROWS_WITH_AS(parse_profile(j), doctest::Contains("neutral"), ProfileError);
  j["joints"].back()["neutral"] = 0.0;
  CHECK_NOTHROW(parse_profile(j));

  j = minimal_profile();
  j["channels"]["pinky"] = json::array();
  CHECK_THROWS_AS(parse_profile(j), ProfileError);

  CHECK_THROWS_AS(parse_profile(json::parse(R"({"name": 3})")), ProfileError);
  CHECK_THROWS_AS(load_profile("/nonexistent/profile.json"), ProfileError);
}

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
