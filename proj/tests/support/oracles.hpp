#pragma once

// Reference implementations used only by tests. Each one follows the textbook
// definition directly and shares no code with the library path it checks.

#include <cstdint>
#include <span>
#include <vector>

namespace dexmouse::test {

/// Bit-at-a-time CRC-16: poly 0x8005, init 0, MSB first.
inline std::uint16_t crc16_bitwise(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0;
  for (std::uint8_t byte : data) {
    for (int i = 7; i >= 0; --i) {
      const bool bit = (byte >> i) & 1U;
      const bool top = (crc >> 15) & 1U;
      crc = static_cast<std::uint16_t>(crc << 1);
      if (top != bit) crc ^= 0x8005;
    }
  }
  return crc;
}

/// Gain law written out literally.
inline double gain_oracle(long v, double k, double gamma, long v_th) {
  if (v < 0) v = -v;
  if (v <= v_th) return k;
  return gamma * k;
}

/// Torque law without saturation, then clamp.
inline double force_oracle(long delta, double gain, long eps, double tau_max) {
  double tau = 0.0;
  if (delta > eps) tau = gain * static_cast<double>(delta);
  if (tau > tau_max) tau = tau_max;
  if (tau < 0.0) tau = 0.0;
  return tau;
}

}  // namespace dexmouse::test
