#include "dexmouse/core.hpp"

#include <cmath>

namespace dexmouse {

namespace {
constexpr std::array<std::string_view, kChannelCount> kNames = {
    "index_fe", "middle_fe", "ring_fe", "little_fe", "thumb_fe", "thumb_aa"};
}

std::string_view channel_name(ChannelId ch) { return kNames[static_cast<std::size_t>(ch.index())]; }

ChannelId parse_channel(std::string_view name) {
  for (int i = 0; i < kChannelCount; ++i) {
    if (kNames[static_cast<std::size_t>(i)] == name) return ChannelId{i};
  }
  throw std::invalid_argument("unknown channel name: " + std::string(name));
}

Ticks degrees_to_ticks(double degrees) {
  return Ticks{static_cast<std::int64_t>(std::llround(degrees * static_cast<double>(kTicksPerRev) / 360.0))};
}

}  // namespace dexmouse
