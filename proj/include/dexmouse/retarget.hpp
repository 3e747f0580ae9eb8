#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dexmouse/core.hpp"
#include "dexmouse/firmware.hpp"

namespace dexmouse::retarget {

class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Device-side range of one channel. For the AA channel the unit is raw
/// encoder counts (0..4095).
struct DeviceRange {
  std::int64_t q_min = 1000;
  std::int64_t q_max = 3000;
  bool flexion_decreases = true;

  std::int64_t span() const { return q_max - q_min; }
  bool operator==(const DeviceRange&) const = default;
};

struct JointMap {
  std::string joint_id;
  double theta_min = 0.0;
  double theta_max = 0.0;
  double weight = 1.0;
  bool invert = false;
  /// Position of joint_id in HandProfile::joints.
  std::size_t joint_index = 0;
};

struct JointSpec {
  std::string id;
  double theta_min = 0.0;
  double theta_max = 0.0;
  /// Held angle for joints no channel drives.
  std::optional<double> neutral;
};

struct HandProfile {
  std::string name;
  std::vector<JointSpec> joints;  ///< declaration order = output order
  PerChannel<std::vector<JointMap>> channel_maps;
  PerChannel<DeviceRange> device_ranges;
  PerChannel<bool> log_only{};
  double rate_limit = 0.05;
  /// Canonical JSON text the profile was loaded from, and its SHA-256.
  std::string canonical_json;
  std::string content_hash;

  std::size_t joint_count() const { return joints.size(); }
};

HandProfile parse_profile(const nlohmann::json& doc);
HandProfile load_profile(const std::filesystem::path& path);
/// Throws ProfileError describing the first violated invariant.
void validate_profile(const HandProfile& profile);

std::string sha256_hex(std::string_view data);

NormalizedFlexion normalize(double q, const DeviceRange& range);
inline NormalizedFlexion normalize(Ticks q, const DeviceRange& range) {
  return normalize(static_cast<double>(q.value), range);
}
bool out_of_range(double q, const DeviceRange& range);

/// Nearest tick whose normalized value is u.
Ticks denormalize(NormalizedFlexion u, const DeviceRange& range);

std::vector<double> map_channel(NormalizedFlexion u, std::span<const JointMap> maps);

struct JointTarget {
  std::string joint_id;
  double angle;
  bool operator==(const JointTarget&) const = default;
};

struct RobotJointTargets {
  Timestamp t{};
  std::vector<JointTarget> joints;

  std::vector<double> angles() const;
};

/// Normalized flexion per channel, AA from the filtered reading.
PerChannel<NormalizedFlexion> normalize_device(const firmware::DeviceState& state, const HandProfile& profile);

RobotJointTargets retarget_flexion(const PerChannel<NormalizedFlexion>& u, const HandProfile& profile,
                                   Timestamp t = {});
RobotJointTargets retarget_all(const firmware::DeviceState& state, const HandProfile& profile, Timestamp t = {});

/// Robot flexion per FE channel expressed as device ticks.
PerActuated<Ticks> inverse_map(const PerActuated<NormalizedFlexion>& u_robot, const HandProfile& profile);

/// Counts readings clamped by normalize; the only mutable state in this module.
class ClampCounter {
 public:
  void observe(const PerChannel<double>& raw, const HandProfile& profile);
  std::uint64_t count() const { return count_; }

 private:
  std::uint64_t count_ = 0;
};

}  // namespace dexmouse::retarget
