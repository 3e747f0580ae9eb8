#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dexmouse/core.hpp"

namespace dexmouse::simhand {

using Block = std::optional<double>;

/// Virtual robot hand in normalized flexion space, one entry per FE channel.
struct VirtualHand {
  PerActuated<double> u_actual{};
  PerActuated<Block> block{};
  PerActuated<bool> contact{};
  double rate_limit = 0.05;

  bool operator==(const VirtualHand&) const = default;
};

/// Rate-limited tracking toward the targets, clipped by any active block.
/// contact[i] is set when channel i's rate-limited command exceeded its block.
VirtualHand hand_step(const VirtualHand& hand, const PerActuated<NormalizedFlexion>& u_target);

PerActuated<NormalizedFlexion> flexion(const VirtualHand& hand);

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioEvent {
  std::uint64_t cycle = 0;
  int channel = 0;  ///< FE channel index 0..4
  Block block;

  bool operator==(const ScenarioEvent&) const = default;
};

struct Scenario {
  std::string name;
  std::string description;
  PerActuated<Block> initial_blocks{};
  std::vector<ScenarioEvent> events;  ///< sorted by cycle
  std::string canonical_json;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);
/// Sorted events, unique (cycle, channel), blocks within [0,1].
void validate_scenario(const Scenario& scenario);
nlohmann::json to_json(const Scenario& scenario);

/// Applies every event scheduled exactly at `cycle`; call before hand_step.
VirtualHand apply_scenario_events(const VirtualHand& hand, const Scenario& scenario, std::uint64_t cycle);

VirtualHand make_hand(const Scenario& scenario, double rate_limit);

}  // namespace dexmouse::simhand
