#include "dexmouse/pipeline.hpp"

namespace dexmouse {

ControlPipeline::ControlPipeline(const retarget::HandProfile& profile, firmware::ForceFeedbackParams params,
                                 logger::ReplayState initial)
    : profile_(&profile), controller_(params, initial.device), shadow_(initial.shadow), hand_(initial.hand) {}

const CycleOutputs& ControlPipeline::step(const firmware::SensorInputs& inputs, Timestamp t) {
  const auto& out = controller_.step(shadow_, inputs);
  last_.tau = out.tau_cmd;
  last_.u_operator = retarget::normalize_device(controller_.state(), *profile_);
  last_.targets = retarget::retarget_flexion(last_.u_operator, *profile_, t);

  PerActuated<NormalizedFlexion> u_target{};
  for (std::size_t i = 0; i < u_target.size(); ++i) u_target[i] = last_.u_operator[i];
  hand_ = simhand::hand_step(hand_, u_target);
  last_.contact = hand_.contact;
  shadow_.q_robot = retarget::inverse_map(simhand::flexion(hand_), *profile_);
  return last_;
}

logger::ReplayState ControlPipeline::rest_state(const firmware::SensorInputs& first,
                                                const retarget::HandProfile& profile,
                                                const simhand::Scenario& scenario) {
  logger::ReplayState s;
  s.device = firmware::DeviceState::initial(first);
  s.hand = simhand::make_hand(scenario, profile.rate_limit);
  for (std::size_t i = 0; i < s.hand.u_actual.size(); ++i) {
    s.hand.u_actual[i] = retarget::normalize(first.fe[i], profile.device_ranges[i]).value();
    if (s.hand.block[i]) s.hand.u_actual[i] = std::min(s.hand.u_actual[i], *s.hand.block[i]);
  }
  s.shadow.q_robot = retarget::inverse_map(simhand::flexion(s.hand), profile);
  return s;
}

}  // namespace dexmouse
