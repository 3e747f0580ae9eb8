#pragma once

#include "dexmouse/firmware.hpp"
#include "dexmouse/logger.hpp"
#include "dexmouse/retarget.hpp"
#include "dexmouse/simhand.hpp"

namespace dexmouse {

struct CycleOutputs {
  PerActuated<double> tau{};
  retarget::RobotJointTargets targets;
  PerActuated<bool> contact{};
  PerChannel<NormalizedFlexion> u_operator{};
};

/// The closed force-feedback loop for one device and one virtual hand:
/// firmware_step against the held shadow, retarget, hand_step, then refresh
/// the shadow through the inverse map. Used by the live session and by replay.
class ControlPipeline {
 public:
  ControlPipeline(const retarget::HandProfile& profile, firmware::ForceFeedbackParams params,
                  logger::ReplayState initial);

  const CycleOutputs& step(const firmware::SensorInputs& inputs, Timestamp t);

  void set_block(int channel, simhand::Block value) { hand_.block[static_cast<std::size_t>(channel)] = value; }
  void set_params(const firmware::ForceFeedbackParams& p) { controller_.set_params(p); }

  logger::ReplayState snapshot() const { return {controller_.state(), shadow_, hand_}; }
  const firmware::Controller& controller() const { return controller_; }
  const simhand::VirtualHand& hand() const { return hand_; }
  const firmware::RobotShadow& shadow() const { return shadow_; }
  const CycleOutputs& last() const { return last_; }
  const retarget::HandProfile& profile() const { return *profile_; }

  /// Starting state for a device at rest with the hand open.
  static logger::ReplayState rest_state(const firmware::SensorInputs& first, const retarget::HandProfile& profile,
                                        const simhand::Scenario& scenario);

 private:
  const retarget::HandProfile* profile_;
  firmware::Controller controller_;
  firmware::RobotShadow shadow_;
  simhand::VirtualHand hand_;
  CycleOutputs last_;
};

}  // namespace dexmouse
