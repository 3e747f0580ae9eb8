#include <cstring>
#include <sstream>

#include "dexmouse/logger.hpp"
#include "dexmouse/pipeline.hpp"

namespace dexmouse::logger {

namespace {

// Bitwise double equality, so -0.0 vs 0.0 and NaN payloads count as divergent.
bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

template <typename Range>
bool same_doubles(const Range& a, const Range& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

struct Expected {
  Timestamp t;
  PerActuated<double> tau{};
  std::vector<double> targets;
  PerActuated<bool> contact{};
  bool torque_seen = false;
  bool targets_seen = false;
  bool contact_seen = false;
};

}  // namespace

ReplayReport replay(const Episode& episode, std::optional<firmware::ForceFeedbackParams> params) {
  ReplayReport report;
  const auto& header = episode.header;
  const auto profile = retarget::parse_profile(header.profile_doc);
  ControlPipeline pipeline(profile, params.value_or(header.ff_params), header.initial);

  auto diverge = [&](Stream s, Timestamp t, std::string detail) {
    ++report.divergences;
    if (!report.first) report.first = Divergence{s, t, std::move(detail)};
  };

  std::optional<Expected> cycle;
  auto close_cycle = [&] {
    if (!cycle) return;
    if (!cycle->torque_seen) diverge(Stream::Torque, cycle->t, "missing torque record");
    if (!cycle->targets_seen) diverge(Stream::RobotTargets, cycle->t, "missing robot_targets record");
    if (!cycle->contact_seen) diverge(Stream::Contact, cycle->t, "missing contact record");
    cycle.reset();
  };

  for (const auto& r : episode.records) {
    switch (r.stream) {
      case Stream::Event:
        if (auto b = event::parse_block(std::get<std::string>(r.payload))) {
          pipeline.set_block(b->first, b->second);
        }
        break;
      case Stream::Joints: {
        close_cycle();
        const auto& raw = std::get<PerChannel<std::int64_t>>(r.payload);
        const auto inputs = firmware::SensorInputs::from_raw(raw);
        const auto& out = pipeline.step(inputs, r.t);
        cycle = Expected{r.t, out.tau, out.targets.angles(), out.contact};
        ++report.cycles;
        break;
      }
      case Stream::Torque:
      case Stream::RobotTargets:
      case Stream::Contact: {
        ++report.compared;
        if (!cycle || cycle->t != r.t) {
          diverge(r.stream, r.t, "record without a matching joints cycle");
          break;
        }
        if (r.stream == Stream::Torque) {
          cycle->torque_seen = true;
          if (!same_doubles(std::get<PerActuated<double>>(r.payload), cycle->tau)) {
            std::ostringstream os;
            os << "torque differs:";
            for (double v : cycle->tau) os << ' ' << v;
            diverge(r.stream, r.t, os.str());
          }
        } else if (r.stream == Stream::RobotTargets) {
          cycle->targets_seen = true;
          if (!same_doubles(std::get<std::vector<double>>(r.payload), cycle->targets)) {
            diverge(r.stream, r.t, "robot_targets differ");
          }
        } else {
          cycle->contact_seen = true;
          if (std::get<PerActuated<bool>>(r.payload) != cycle->contact) diverge(r.stream, r.t, "contact flags differ");
        }
        break;
      }
      case Stream::Pose:
      case Stream::Camera:
        break;
    }
  }
  close_cycle();
  return report;
}

}  // namespace dexmouse::logger
