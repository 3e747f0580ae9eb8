#include <cmath>

#include "dexmouse/retarget.hpp"

namespace dexmouse::retarget {

bool out_of_range(double q, const DeviceRange& range) {
  return q < static_cast<double>(range.q_min) || q > static_cast<double>(range.q_max);
}

NormalizedFlexion normalize(double q, const DeviceRange& range) {
  const double span = static_cast<double>(range.span());
  const double u = range.flexion_decreases ? (static_cast<double>(range.q_max) - q) / span
                                           : (q - static_cast<double>(range.q_min)) / span;
  return NormalizedFlexion{u};
}

Ticks denormalize(NormalizedFlexion u, const DeviceRange& range) {
  const double span = static_cast<double>(range.span());
  const double q = range.flexion_decreases ? static_cast<double>(range.q_max) - u.value() * span
                                           : static_cast<double>(range.q_min) + u.value() * span;
  return Ticks{static_cast<std::int64_t>(std::llround(q))};
}

std::vector<double> map_channel(NormalizedFlexion u, std::span<const JointMap> maps) {
  std::vector<double> out;
  out.reserve(maps.size());
  for (const auto& m : maps) {
    const double s = m.invert ? 1.0 - u.value() : u.value();
    // std::lerp is exact at both ends and monotone in its parameter.
    out.push_back(std::lerp(m.theta_min, m.theta_max, m.weight * s));
  }
  return out;
}

std::vector<double> RobotJointTargets::angles() const {
  std::vector<double> a;
  a.reserve(joints.size());
  for (const auto& j : joints) a.push_back(j.angle);
  return a;
}

PerChannel<NormalizedFlexion> normalize_device(const firmware::DeviceState& state, const HandProfile& profile) {
  PerChannel<NormalizedFlexion> u{};
  for (std::size_t i = 0; i < static_cast<std::size_t>(kActuatedCount); ++i) {
    u[i] = normalize(state.fe[i].q_operator, profile.device_ranges[i]);
  }
  const auto aa = static_cast<std::size_t>(ChannelId::thumb_aa().index());
  u[aa] = normalize(state.aa_filtered, profile.device_ranges[aa]);
  return u;
}

RobotJointTargets retarget_flexion(const PerChannel<NormalizedFlexion>& u, const HandProfile& profile, Timestamp t) {
  RobotJointTargets out;
  out.t = t;
  out.joints.reserve(profile.joints.size());
  for (const auto& spec : profile.joints) out.joints.push_back({spec.id, spec.neutral.value_or(spec.theta_min)});

  for (std::size_t c = 0; c < u.size(); ++c) {
    const auto& maps = profile.channel_maps[c];
    if (maps.empty()) continue;
    const auto angles = map_channel(u[c], maps);
    for (std::size_t k = 0; k < maps.size(); ++k) out.joints[maps[k].joint_index].angle = angles[k];
  }
  return out;
}

RobotJointTargets retarget_all(const firmware::DeviceState& state, const HandProfile& profile, Timestamp t) {
  return retarget_flexion(normalize_device(state, profile), profile, t);
}

PerActuated<Ticks> inverse_map(const PerActuated<NormalizedFlexion>& u_robot, const HandProfile& profile) {
  PerActuated<Ticks> q{};
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = denormalize(u_robot[i], profile.device_ranges[i]);
  return q;
}

void ClampCounter::observe(const PerChannel<double>& raw, const HandProfile& profile) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (out_of_range(raw[i], profile.device_ranges[i])) ++count_;
  }
}

}  // namespace dexmouse::retarget
