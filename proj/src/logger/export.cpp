#include "dexmouse/logger.hpp"

namespace dexmouse::logger {

streams::AlignInput align_input(const Episode& episode) {
  streams::AlignInput in;
  for (const auto& r : episode.records) {
    switch (r.stream) {
      case Stream::Joints: {
        streams::ControlSample s;
        s.t = r.t;
        s.ticks = std::get<PerChannel<std::int64_t>>(r.payload);
        in.control.push_back(std::move(s));
        break;
      }
      case Stream::Torque:
        if (!in.control.empty() && in.control.back().t == r.t) in.control.back().tau = std::get<PerActuated<double>>(r.payload);
        break;
      case Stream::RobotTargets:
        if (!in.control.empty() && in.control.back().t == r.t) in.control.back().targets = std::get<std::vector<double>>(r.payload);
        break;
      case Stream::Contact:
        if (!in.control.empty() && in.control.back().t == r.t) in.control.back().contact = std::get<PerActuated<bool>>(r.payload);
        break;
      case Stream::Pose: {
        const auto& v = std::get<PosePayload>(r.payload);
        in.pose.push_back(streams::make_pose(r.t, {v[0], v[1], v[2]}, {v[3], v[4], v[5], v[6]}));
        break;
      }
      case Stream::Camera:
        in.camera.push_back({std::get<std::uint64_t>(r.payload), r.t});
        break;
      case Stream::Event:
        break;
    }
  }
  return in;
}

std::vector<std::string> joint_names(const Episode& episode) {
  std::vector<std::string> names;
  for (const auto& j : episode.header.profile_doc.at("joints")) names.push_back(j.at("id").get<std::string>());
  return names;
}

}  // namespace dexmouse::logger
