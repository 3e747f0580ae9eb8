#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dexmouse {

/// Encoder resolution shared by the actuators and the thumb AA encoder.
inline constexpr std::int64_t kTicksPerRev = 4096;
inline constexpr double kDegreesPerTick = 360.0 / static_cast<double>(kTicksPerRev);
inline constexpr int kLoopHz = 100;
inline constexpr std::int64_t kNanosPerSecond = 1'000'000'000;
inline constexpr std::int64_t kCyclePeriodNs = kNanosPerSecond / kLoopHz;

/// Signed encoder position or position delta. Flexion decreases the tick value.
struct Ticks {
  std::int64_t value = 0;

  constexpr Ticks() = default;
  constexpr explicit Ticks(std::int64_t v) : value(v) {}

  constexpr auto operator<=>(const Ticks&) const = default;
  constexpr Ticks operator-(Ticks o) const { return Ticks{value - o.value}; }
  constexpr Ticks operator+(Ticks o) const { return Ticks{value + o.value}; }
  constexpr Ticks operator-() const { return Ticks{-value}; }
};

/// Session-relative time in nanoseconds.
struct Timestamp {
  std::int64_t ns = 0;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t n) : ns(n) {}
  constexpr auto operator<=>(const Timestamp&) const = default;

  constexpr double seconds() const { return static_cast<double>(ns) / 1e9; }
  static constexpr Timestamp from_cycle(std::uint64_t cycle) {
    return Timestamp{static_cast<std::int64_t>(cycle) * kCyclePeriodNs};
  }
};

enum class ChannelKind { FingerFE, ThumbFE, ThumbAA };

inline constexpr int kChannelCount = 6;
inline constexpr int kActuatedCount = 5;

/// One of the six device channels. Indices 0..3 are finger FE (index to
/// little), 4 is thumb FE, 5 is the sense-only thumb AA.
class ChannelId {
 public:
  constexpr explicit ChannelId(int index) : index_(index) {
    if (index < 0 || index >= kChannelCount) {
      throw std::out_of_range("channel index out of range");
    }
  }

  constexpr int index() const { return index_; }
  constexpr ChannelKind kind() const {
    if (index_ < 4) return ChannelKind::FingerFE;
    return index_ == 4 ? ChannelKind::ThumbFE : ChannelKind::ThumbAA;
  }
  constexpr bool actuated() const { return kind() != ChannelKind::ThumbAA; }

  constexpr auto operator<=>(const ChannelId&) const = default;

  static constexpr ChannelId thumb_fe() { return ChannelId{4}; }
  static constexpr ChannelId thumb_aa() { return ChannelId{5}; }

 private:
  int index_;
};

std::string_view channel_name(ChannelId ch);
/// Parses names like "index_fe" or "thumb_aa"; throws std::invalid_argument.
ChannelId parse_channel(std::string_view name);

/// Normalized flexion in [0,1]; 0 is fully extended.
class NormalizedFlexion {
 public:
  constexpr NormalizedFlexion() = default;
  constexpr explicit NormalizedFlexion(double u) : u_(u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u)) {}
  constexpr double value() const { return u_; }
  constexpr auto operator<=>(const NormalizedFlexion&) const = default;

 private:
  double u_ = 0.0;
};

constexpr double ticks_to_degrees(Ticks t) {
  return static_cast<double>(t.value) * 360.0 / static_cast<double>(kTicksPerRev);
}

/// Nearest tick for an angle; exact for multiples of 360/4096.
Ticks degrees_to_ticks(double degrees);

constexpr double ticks_per_cycle_to_deg_per_s(Ticks per_cycle, int loop_hz = kLoopHz) {
  return static_cast<double>(per_cycle.value) * kDegreesPerTick * static_cast<double>(loop_hz);
}

template <typename T>
using PerChannel = std::array<T, kChannelCount>;
template <typename T>
using PerActuated = std::array<T, kActuatedCount>;

}  // namespace dexmouse
