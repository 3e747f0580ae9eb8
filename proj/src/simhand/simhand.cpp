#include "dexmouse/simhand.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <utility>

namespace dexmouse::simhand {

using nlohmann::json;

VirtualHand hand_step(const VirtualHand& hand, const PerActuated<NormalizedFlexion>& u_target) {
  VirtualHand next = hand;
  const double r = hand.rate_limit;
  for (std::size_t i = 0; i < next.u_actual.size(); ++i) {
    const double u = hand.u_actual[i];
    const double commanded = u + std::clamp(u_target[i].value() - u, -r, r);
    const double upper = hand.block[i] ? std::min(1.0, *hand.block[i]) : 1.0;
    next.contact[i] = hand.block[i].has_value() && commanded > upper;
    next.u_actual[i] = std::clamp(commanded, 0.0, upper);
  }
  return next;
}

PerActuated<NormalizedFlexion> flexion(const VirtualHand& hand) {
  PerActuated<NormalizedFlexion> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = NormalizedFlexion{hand.u_actual[i]};
  return out;
}

void validate_scenario(const Scenario& s) {
  auto check_block = [](const Block& b) {
    if (b && !(*b >= 0.0 && *b <= 1.0)) throw ScenarioError("block value outside [0,1]");
  };
  for (const auto& b : s.initial_blocks) check_block(b);
  std::set<std::pair<std::uint64_t, int>> seen;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.channel < 0 || e.channel >= kActuatedCount) throw ScenarioError("event channel must be an FE channel");
    check_block(e.block);
    if (i > 0 && e.cycle < s.events[i - 1].cycle) throw ScenarioError("events not sorted by cycle");
    if (!seen.emplace(e.cycle, e.channel).second) {
      throw ScenarioError("duplicate event for cycle " + std::to_string(e.cycle) + " channel " +
                          std::to_string(e.channel));
    }
  }
}

namespace {

Block parse_block(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json block_json(const Block& b) { return b ? json(*b) : json(nullptr); }

int fe_channel(const json& v) {
  const auto ch = v.is_string() ? parse_channel(v.get<std::string>()) : ChannelId{v.get<int>()};
  if (!ch.actuated()) throw ScenarioError("blocks apply to FE channels only");
  return ch.index();
}

}  // namespace

Scenario parse_scenario(const json& doc) {
  Scenario s;
  try {
    s.name = doc.at("name").get<std::string>();
    s.description = doc.value("description", "");
    if (doc.contains("initial_blocks")) {
      for (const auto& [name, v] : doc.at("initial_blocks").items()) {
        s.initial_blocks[static_cast<std::size_t>(fe_channel(json(name)))] = parse_block(v);
      }
    }
    for (const auto& e : doc.value("events", json::array())) {
      s.events.push_back({e.at("cycle").get<std::uint64_t>(), fe_channel(e.at("channel")), parse_block(e.at("block"))});
    }
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(e.what());
  } catch (const std::out_of_range& e) {
    throw ScenarioError(e.what());
  }
  validate_scenario(s);
  s.canonical_json = to_json(s).dump();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario " + path.string());
  try {
    return parse_scenario(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
}

json to_json(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["description"] = s.description;
  json blocks = json::object();
  for (int i = 0; i < kActuatedCount; ++i) {
    if (s.initial_blocks[static_cast<std::size_t>(i)]) {
      blocks[std::string(channel_name(ChannelId{i}))] = block_json(s.initial_blocks[static_cast<std::size_t>(i)]);
    }
  }
  doc["initial_blocks"] = blocks;
  json events = json::array();
  for (const auto& e : s.events) {
    events.push_back({{"cycle", e.cycle}, {"channel", std::string(channel_name(ChannelId{e.channel}))},
                      {"block", block_json(e.block)}});
  }
  doc["events"] = events;
  return doc;
}

VirtualHand apply_scenario_events(const VirtualHand& hand, const Scenario& scenario, std::uint64_t cycle) {
  VirtualHand next = hand;
  auto it = std::lower_bound(scenario.events.begin(), scenario.events.end(), cycle,
                             [](const ScenarioEvent& e, std::uint64_t c) { return e.cycle < c; });
  for (; it != scenario.events.end() && it->cycle == cycle; ++it) {
    next.block[static_cast<std::size_t>(it->channel)] = it->block;
  }
  return next;
}

VirtualHand make_hand(const Scenario& scenario, double rate_limit) {
  VirtualHand h;
  h.block = scenario.initial_blocks;
  h.rate_limit = rate_limit;
  return h;
}

}  // namespace dexmouse::simhand
