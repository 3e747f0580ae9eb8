#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "dexmouse/core.hpp"

namespace dexmouse::firmware {

enum class GainMode { Contact, FreeMotion };

const char* to_string(GainMode mode);

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Stiffness scheduling and force rendering constants.
struct ForceFeedbackParams {
  double k_nominal = 5.0;
  double gamma = 0.1;
  Ticks v_th{20};      ///< ticks per control cycle
  Ticks epsilon{100};  ///< dead zone
  double tau_max = 1000.0;
  int loop_hz = kLoopHz;
  double aa_alpha = 0.1;
  /// Consecutive cycles of penetration required before force is rendered.
  int debounce_cycles = 0;

  /// Throws ParameterError on any out-of-range field.
  void validate() const;
  bool operator==(const ForceFeedbackParams&) const = default;
};

/// y = alpha*x + (1-alpha)*y_prev, evaluated as y_prev + alpha*(x - y_prev)
/// so that x == y_prev returns y_prev bit-exactly.
constexpr double ema_step(double y_prev, double x, double alpha) {
  return y_prev + alpha * (x - y_prev);
}

class EmaFilter {
 public:
  explicit EmaFilter(double alpha, double initial = 0.0);
  double step(double x) { return value_ = ema_step(value_, x, alpha_); }
  double value() const { return value_; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
  double value_;
};

/// One-cycle backward difference.
constexpr Ticks estimate_velocity(Ticks q_now, Ticks q_prev) { return q_now - q_prev; }

struct ScheduledGain {
  double gain;
  GainMode mode;
};

constexpr ScheduledGain scheduled_gain(Ticks v, const ForceFeedbackParams& p) {
  const std::int64_t speed = v.value < 0 ? -v.value : v.value;
  if (speed <= p.v_th.value) return {p.k_nominal, GainMode::Contact};
  return {p.gamma * p.k_nominal, GainMode::FreeMotion};
}

/// Unidirectional virtual-wall force. Zero unless q_robot - q_operator > epsilon.
constexpr double render_force(Ticks q_robot, Ticks q_operator, double gain, const ForceFeedbackParams& p) {
  const std::int64_t penetration = (q_robot - q_operator).value;
  if (penetration <= p.epsilon.value) return 0.0;
  const double tau = gain * static_cast<double>(penetration);
  if (tau <= 0.0) return 0.0;
  return tau > p.tau_max ? p.tau_max : tau;
}

struct SensorInputs {
  PerActuated<Ticks> fe{};
  std::int64_t aa_raw = 0;

  /// Builds from six raw values in channel order; throws StructuralError otherwise.
  static SensorInputs from_raw(std::span<const std::int64_t> raw);
  bool operator==(const SensorInputs&) const = default;
};

struct ChannelState {
  Ticks q_operator{};
  Ticks velocity{};
  GainMode gain_mode = GainMode::Contact;
  double tau_cmd = 0.0;
  int penetration_cycles = 0;

  bool operator==(const ChannelState&) const = default;
};

struct DeviceState {
  PerActuated<ChannelState> fe{};
  std::int64_t aa_raw = 0;
  double aa_filtered = 0.0;
  std::uint64_t cycle_count = 0;

  /// Primes position history and the AA filter with the first reading.
  static DeviceState initial(const SensorInputs& first);
  bool operator==(const DeviceState&) const = default;
};

/// Robot finger positions in device tick space, zero-order held between updates.
struct RobotShadow {
  PerActuated<Ticks> q_robot{};
  bool operator==(const RobotShadow&) const = default;
};

struct StepOutputs {
  PerActuated<double> tau_cmd{};
  double aa_filtered = 0.0;
};

struct StepResult {
  DeviceState state;
  StepOutputs outputs;
};

/// One 10 ms control cycle: sense, filter, velocity, gain, force.
/// Pure: identical arguments give bit-identical results.
StepResult firmware_step(const DeviceState& state, const RobotShadow& shadow, const SensorInputs& inputs,
                         const ForceFeedbackParams& params);

/// Owns validated parameters and the evolving device state.
class Controller {
 public:
  Controller(ForceFeedbackParams params, const SensorInputs& first);
  Controller(ForceFeedbackParams params, DeviceState state);

  const StepOutputs& step(const RobotShadow& shadow, const SensorInputs& inputs);

  const DeviceState& state() const { return state_; }
  const ForceFeedbackParams& params() const { return params_; }
  const StepOutputs& last_outputs() const { return outputs_; }
  /// Replaces parameters; throws ParameterError and keeps the old ones when invalid.
  void set_params(const ForceFeedbackParams& params);

 private:
  ForceFeedbackParams params_;
  DeviceState state_;
  StepOutputs outputs_{};
};

}  // namespace dexmouse::firmware
