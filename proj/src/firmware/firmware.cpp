#include "dexmouse/firmware.hpp"

#include <cmath>
#include <string>

namespace dexmouse::firmware {

const char* to_string(GainMode mode) { return mode == GainMode::Contact ? "contact" : "free"; }

void ForceFeedbackParams::validate() const {
  if (!(std::isfinite(k_nominal) && k_nominal >= 0.0)) throw ParameterError("k_nominal must be finite and >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("gamma must be in [0,1]");
  if (v_th.value <= 0) throw ParameterError("v_th must be > 0");
  if (epsilon.value < 0) throw ParameterError("epsilon must be >= 0");
  if (!(std::isfinite(tau_max) && tau_max > 0.0)) throw ParameterError("tau_max must be > 0");
  if (loop_hz <= 0) throw ParameterError("loop_hz must be > 0");
  if (!(aa_alpha > 0.0 && aa_alpha <= 1.0)) throw ParameterError("aa_alpha must be in (0,1]");
  if (debounce_cycles < 0) throw ParameterError("debounce_cycles must be >= 0");
}

EmaFilter::EmaFilter(double alpha, double initial) : alpha_(alpha), value_(initial) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("EMA alpha must be in (0,1], got " + std::to_string(alpha));
}

SensorInputs SensorInputs::from_raw(std::span<const std::int64_t> raw) {
  if (raw.size() != static_cast<std::size_t>(kChannelCount)) {
    throw StructuralError("expected " + std::to_string(kChannelCount) + " channel readings, got " +
                          std::to_string(raw.size()));
  }
  SensorInputs in;
  for (int i = 0; i < kActuatedCount; ++i) in.fe[static_cast<std::size_t>(i)] = Ticks{raw[static_cast<std::size_t>(i)]};
  in.aa_raw = raw[kActuatedCount];
  return in;
}

DeviceState DeviceState::initial(const SensorInputs& first) {
  DeviceState s;
  for (std::size_t i = 0; i < s.fe.size(); ++i) s.fe[i].q_operator = first.fe[i];
  s.aa_raw = first.aa_raw;
  s.aa_filtered = static_cast<double>(first.aa_raw);
  return s;
}

StepResult firmware_step(const DeviceState& state, const RobotShadow& shadow, const SensorInputs& inputs,
                         const ForceFeedbackParams& p) {
  StepResult r{state, {}};
  DeviceState& next = r.state;

  next.aa_raw = inputs.aa_raw;
  next.aa_filtered = ema_step(state.aa_filtered, static_cast<double>(inputs.aa_raw), p.aa_alpha);
  r.outputs.aa_filtered = next.aa_filtered;

  for (std::size_t i = 0; i < next.fe.size(); ++i) {
    ChannelState& ch = next.fe[i];
    const Ticks q = inputs.fe[i];
    ch.velocity = estimate_velocity(q, state.fe[i].q_operator);
    ch.q_operator = q;

    const auto [gain, mode] = scheduled_gain(ch.velocity, p);
    ch.gain_mode = mode;

    const double tau = render_force(shadow.q_robot[i], q, gain, p);
    ch.penetration_cycles = tau > 0.0 ? state.fe[i].penetration_cycles + 1 : 0;
    ch.tau_cmd = ch.penetration_cycles > p.debounce_cycles ? tau : 0.0;
    r.outputs.tau_cmd[i] = ch.tau_cmd;
  }
  next.cycle_count = state.cycle_count + 1;
  return r;
}

Controller::Controller(ForceFeedbackParams params, const SensorInputs& first)
    : Controller(params, DeviceState::initial(first)) {}

Controller::Controller(ForceFeedbackParams params, DeviceState state) : params_(params), state_(state) {
  params_.validate();
}

const StepOutputs& Controller::step(const RobotShadow& shadow, const SensorInputs& inputs) {
  auto r = firmware_step(state_, shadow, inputs, params_);
  state_ = r.state;
  outputs_ = r.outputs;
  return outputs_;
}

void Controller::set_params(const ForceFeedbackParams& params) {
  params.validate();
  params_ = params;
}

}  // namespace dexmouse::firmware
