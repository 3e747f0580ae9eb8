#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dexmouse/core.hpp"

namespace dexmouse::streams {

struct Pose {
  Timestamp t{};
  std::array<double, 3> position{};              ///< meters
  std::array<double, 4> orientation{1, 0, 0, 0};  ///< unit quaternion w,x,y,z

  bool operator==(const Pose&) const = default;
};

/// Re-normalizes the quaternion; throws std::invalid_argument on a zero or
/// non-finite quaternion.
Pose make_pose(Timestamp t, std::array<double, 3> position, std::array<double, 4> orientation);

struct CameraFrameRef {
  std::uint64_t frame_index = 0;
  Timestamp t{};
  bool operator==(const CameraFrameRef&) const = default;
};

/// k-th sample time of a uniform grid, rounded to the nearest nanosecond.
constexpr Timestamp grid_time(std::int64_t k, std::int64_t rate_hz) {
  return Timestamp{(2 * k * kNanosPerSecond + rate_hz) / (2 * rate_hz)};
}

struct PathSpec {
  enum class Kind { Static, Circle, Figure8 };
  Kind kind = Kind::Static;
  double radius = 0.1;   ///< meters
  double period_s = 4.0;
  double height = 0.0;

  /// "static", "circle[:radius[:period]]", "figure8[:radius[:period]]"
  static PathSpec parse(std::string_view text);
};

/// Deterministic stand-in for the wrist tracker.
class MockPoseSource {
 public:
  MockPoseSource(std::uint64_t seed, std::int64_t rate_hz, PathSpec path);

  Pose sample(std::int64_t k) const;
  /// Every sample with time <= until.
  std::vector<Pose> generate(Timestamp until) const;
  std::int64_t rate_hz() const { return rate_hz_; }
  double phase() const { return phase_; }

 private:
  std::int64_t rate_hz_;
  PathSpec path_;
  double phase_ = 0.0;
};

/// Frame indices of a fixed-rate camera, timestamps on the uniform grid.
std::vector<CameraFrameRef> camera_frames(std::int64_t rate_hz, Timestamp until);

/// Everything the control loop produces in one cycle.
struct ControlSample {
  Timestamp t{};
  PerChannel<std::int64_t> ticks{};
  std::vector<double> targets;
  PerActuated<double> tau{};
  PerActuated<bool> contact{};

  bool operator==(const ControlSample&) const = default;
};

struct AlignInput {
  std::vector<ControlSample> control;  ///< mandatory
  std::vector<Pose> pose;              ///< optional, empty = absent
  std::vector<CameraFrameRef> camera;  ///< optional, empty = absent
};

struct AlignedSample {
  Timestamp t{};
  ControlSample control;
  std::optional<Pose> pose;
  std::optional<std::uint64_t> frame_index;
};

struct AlignResult {
  std::vector<AlignedSample> rows;
  std::uint64_t dropped = 0;  ///< grid rows omitted for exceeding max_gap
};

class AlignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-order hold of every present stream onto t_k = k / rate_hz.
AlignResult align(const AlignInput& input, std::int64_t rate_hz = 20, std::int64_t max_gap_ms = 150);

/// CSV with header: t_ns, q_<ch>..., tau_<ch>..., contact_<ch>..., px,py,pz,qw,qx,qy,qz,
/// frame_index, then one column per joint name.
void write_csv(std::ostream& os, std::span<const AlignedSample> rows, std::span<const std::string> joint_names);

}  // namespace dexmouse::streams
