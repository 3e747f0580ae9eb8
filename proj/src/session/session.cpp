#include "api.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>
#include <thread>

namespace dexmouse::session {

using nlohmann::json;

namespace {

std::filesystem::path resolve_log_dir(const std::filesystem::path& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv("DEXMOUSE_LOG_DIR"); env && *env) return env;
  return ".";
}

std::string wall_clock_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json block_json(const simhand::Block& b) { return b ? json(*b) : json(nullptr); }

}  // namespace

json to_json(const StateMessage& m) {
  json modes = json::array();
  for (auto g : m.gain_mode) modes.push_back(firmware::to_string(g));
  json blocks = json::array();
  for (const auto& b : m.blocks) blocks.push_back(block_json(b));
  json targets = json::array();
  for (const auto& jt : m.targets) targets.push_back({{"joint", jt.joint_id}, {"angle", jt.angle}});
  return {{"type", "state"},
          {"t", m.t.ns},
          {"cycle", m.cycle},
          {"q_operator", m.q_operator},
          {"gain_mode", modes},
          {"tau", m.tau},
          {"u_actual", m.u_actual},
          {"contact", m.contact},
          {"blocks", blocks},
          {"targets", targets},
          {"pose", {{"p", m.pose.position}, {"q", m.pose.orientation}}},
          {"recording", m.recording},
          {"task", m.task}};
}

json to_json(const ExitReport& r) {
  json eps = json::array();
  for (const auto& p : r.episodes) eps.push_back(p.string());
  json out = {{"cycles", r.cycles},
              {"episodes", eps},
              {"commands_applied", r.commands_applied},
              {"commands_rejected", r.commands_rejected},
              {"states_broadcast", r.states_broadcast},
              {"states_dropped", r.states_dropped},
              {"bus_timeouts", r.bus_timeouts},
              {"clamped_readings", r.clamped_readings},
              {"errors", r.errors}};
  if (r.jitter) {
    out["jitter_us"] = {{"samples", r.jitter->samples},
                        {"mean", r.jitter->mean_us},
                        {"max", r.jitter->max_us},
                        {"p99", r.jitter->p99_us}};
  }
  return out;
}

Session::Session(SessionConfig config)
    : config_(std::move(config)),
      bus_(wire::make_device_bus(config_.bus)),
      pose_source_(config_.seed, 20, streams::PathSpec{}) {
  try {
    profile_ = retarget::load_profile(config_.profile_path);
    scenario_ = simhand::load_scenario(config_.scenario_path);
    params_ = logger::params_from_json(config_.ff_overrides);
    pose_source_ = streams::MockPoseSource(config_.seed, 20, streams::PathSpec::parse(config_.pose_path));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (config_.state_broadcast_hz <= 0 || config_.state_broadcast_hz > kLoopHz) {
    throw ConfigError("state_broadcast_hz must be in [1, 100]");
  }
  if (config_.input_lag_ms < 0.0) throw ConfigError("input_lag_ms must be >= 0");

  log_dir_ = resolve_log_dir(config_.log_dir);
  std::error_code ec;
  std::filesystem::create_directories(log_dir_, ec);
  if (ec) throw ConfigError("cannot create log dir " + log_dir_.string() + ": " + ec.message());

  if (config_.clock == ClockMode::Simulated) {
    session_id_ = "sim-" + std::to_string(config_.seed);
  } else {
    session_id_ = "wall-" + std::to_string(std::chrono::duration_cast<std::chrono::seconds>(
                                                std::chrono::system_clock::now().time_since_epoch())
                                                .count());
  }

  // Operator starts with an open hand, thumb AA centered.
  for (int c = 0; c < kChannelCount; ++c) {
    const auto& r = profile_.device_ranges[static_cast<std::size_t>(c)];
    const double open = ChannelId{c}.actuated() ? static_cast<double>(r.flexion_decreases ? r.q_max : r.q_min)
                                                : 0.5 * static_cast<double>(r.q_min + r.q_max);
    operator_targets_[static_cast<std::size_t>(c)] = open;
    operator_position_[static_cast<std::size_t>(c)] = open;
    last_inputs_[static_cast<std::size_t>(c)] = std::llround(open);
  }

  logger::ReplayState initial;
  if (config_.mode == InputMode::Replay) {
    try {
      replay_source_ = logger::read_episode(config_.replay_source);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("replay source: ") + e.what());
    }
    if (replay_source_->header.profile_hash != profile_.content_hash) {
      throw ConfigError("replay source was recorded with a different profile");
    }
    params_ = replay_source_->header.ff_params;
    initial = replay_source_->header.initial;
  } else {
    auto first = firmware::SensorInputs::from_raw(last_inputs_);
    initial = ControlPipeline::rest_state(first, profile_, scenario_);
  }
  pipeline_ = std::make_unique<ControlPipeline>(profile_, params_, initial);
  last_pose_ = pose_source_.sample(0);

  for (std::uint8_t id = wire::kFirstActuatorId; id < wire::kFirstActuatorId + kActuatedCount; ++id) {
    bus_.transact(wire::make_write(id, wire::reg::kTorqueEnable, std::vector<std::uint8_t>{1}));
  }

  if (config_.api_port >= 0) api_ = std::make_unique<Api>(*this, config_.api_port);
}

Session::~Session() {
  api_.reset();
  if (writer_) {
    try {
      writer_->close();
    } catch (...) {  // NOLINT(bugprone-empty-catch): best effort on teardown
    }
  }
}

int Session::api_port() const { return api_ ? api_->port() : -1; }

void Session::log(const logger::LogRecord& r) {
  if (!writer_) return;
  try {
    writer_->record(r);
  } catch (const std::exception& e) {
    fail_recording(e.what());
  }
}

void Session::fail_recording(const std::string& what) {
  report_.errors.push_back("recording stopped: " + what);
  if (writer_) {
    try {
      writer_->record(logger::LogRecord::event(Timestamp::from_cycle(cycle_), logger::event::error(what)));
    } catch (...) {  // NOLINT(bugprone-empty-catch): storage already failed
    }
    try {
      writer_->close();
    } catch (...) {  // NOLINT(bugprone-empty-catch)
    }
  }
  writer_.reset();
}

void Session::start_recording(const std::string& task) {
  ++episode_counter_;
  std::ostringstream name;
  name << session_id_ << "_ep" << std::setw(3) << std::setfill('0') << episode_counter_ << ".jsonl";
  episode_path_ = log_dir_ / name.str();
  task_ = task;

  logger::EpisodeHeader h;
  h.session_id = session_id_;
  h.profile_name = profile_.name;
  h.profile_hash = profile_.content_hash;
  h.profile_doc = json::parse(profile_.canonical_json);
  h.scenario_name = scenario_.name;
  h.scenario_doc = json::parse(scenario_.canonical_json);
  h.ff_params = pipeline_->controller().params();
  h.start_wall_clock = wall_clock_iso();
  h.task = task;
  h.operator_alias = config_.operator_alias;
  h.initial = pipeline_->snapshot();

  try {
    std::unique_ptr<logger::RecordSink> sink =
        config_.sink_factory ? config_.sink_factory(episode_path_)
                             : std::make_unique<logger::AsyncSink>(std::make_unique<logger::FileSink>(episode_path_));
    writer_ = std::make_unique<logger::EpisodeWriter>(std::move(sink));
    writer_->write_header(h);
  } catch (const std::exception& e) {
    writer_.reset();
    report_.errors.push_back(std::string("cannot start recording: ") + e.what());
    return;
  }
  report_.episodes.push_back(episode_path_);
  log(logger::LogRecord::event(Timestamp::from_cycle(cycle_), logger::event::kStart));
}

void Session::stop_recording(bool success) {
  if (!writer_) return;
  log(logger::LogRecord::event(Timestamp::from_cycle(cycle_),
                               success ? logger::event::kEndSuccess : logger::event::kEndFailure));
  if (writer_) {
    try {
      writer_->close();
    } catch (const std::exception& e) {
      report_.errors.push_back(std::string("closing episode: ") + e.what());
    }
  }
  writer_.reset();
}

void Session::set_block(int channel, simhand::Block value) {
  if (pipeline_->hand().block[static_cast<std::size_t>(channel)] == value) return;
  pipeline_->set_block(channel, value);
  log(logger::LogRecord::event(Timestamp::from_cycle(cycle_), logger::event::block(channel, value)));
}

std::optional<std::string> Session::apply(const Command& c) {
  struct Visitor {
    Session& s;
    std::optional<std::string> operator()(const SetInput& in) const {
      if (s.config_.mode == InputMode::Replay) return "inputs come from the replay source";
      const auto i = static_cast<std::size_t>(in.channel.index());
      if (const auto* t = std::get_if<Ticks>(&in.value)) {
        s.operator_targets_[i] = static_cast<double>(t->value);
      } else {
        const auto u = std::get<NormalizedFlexion>(in.value);
        s.operator_targets_[i] = static_cast<double>(retarget::denormalize(u, s.profile_.device_ranges[i]).value);
      }
      return std::nullopt;
    }
    std::optional<std::string> operator()(const SetBlock& b) const {
      s.set_block(b.channel.index(), b.value);
      return std::nullopt;
    }
    std::optional<std::string> operator()(const RecordStart& r) const {
      if (s.writer_) return "already recording";
      s.start_recording(r.task);
      if (!s.writer_) return "recording could not start";
      return std::nullopt;
    }
    std::optional<std::string> operator()(const RecordStop& r) const {
      if (!s.writer_) return "not recording";
      s.stop_recording(r.success);
      return std::nullopt;
    }
    std::optional<std::string> operator()(const SetParams& p) const {
      if (s.writer_) return "set_params is not allowed while recording";
      try {
        s.pipeline_->set_params(logger::params_from_json(p.overrides, s.pipeline_->controller().params()));
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
      return std::nullopt;
    }
    std::optional<std::string> operator()(const Stop&) const {
      s.stop_requested_ = true;
      return std::nullopt;
    }
  };
  auto err = std::visit(Visitor{*this}, c);
  if (err) ++report_.commands_rejected;
  else ++report_.commands_applied;
  return err;
}

void Session::drain_commands() {
  if (config_.script) {
    const auto& entries = config_.script->entries;
    while (script_cursor_ < entries.size() && entries[script_cursor_].cycle <= cycle_) {
      if (auto err = apply(entries[script_cursor_].command)) {
        report_.errors.push_back("script cycle " + std::to_string(entries[script_cursor_].cycle) + ": " + *err);
      }
      ++script_cursor_;
    }
  }
  while (auto in = inbox_.try_pop()) {
    auto err = apply(in->command);
    json body = err ? json{{"type", "error"}, {"message", *err}}
                    : json{{"type", "ack"}, {"command", command_name(in->command)}};
    if (!in->request_id.is_null()) body["id"] = in->request_id;
    if (!err && std::holds_alternative<RecordStop>(in->command)) body["episode"] = episode_path_.string();
    outbox_.try_push(Outbound{in->client, body.dump()});
  }
}

firmware::SensorInputs Session::exchange_inputs(const PerChannel<std::int64_t>& world) {
  for (int i = 0; i < kActuatedCount; ++i) {
    auto* dev = bus_.device(static_cast<std::uint8_t>(wire::kFirstActuatorId + i));
    auto& regs = dev->registers();
    const auto prev = regs.get(wire::reg::kPresentPosition);
    regs.set(wire::reg::kPresentPosition, world[static_cast<std::size_t>(i)]);
    regs.set(wire::reg::kPresentVelocity, world[static_cast<std::size_t>(i)] - prev);
    regs.set(wire::reg::kPresentCurrent, regs.get(wire::reg::kGoalCurrent));
  }
  const auto aa = static_cast<std::size_t>(ChannelId::thumb_aa().index());
  bus_.device(wire::kEncoderId)->registers().set(wire::reg::kRawAngle, std::clamp<std::int64_t>(world[aa], 0, 4095));

  static constexpr std::uint8_t kIds[] = {1, 2, 3, 4, 5};
  const auto positions = bus_.transact(wire::make_sync_read(wire::reg::kPresentPosition, 4, kIds));
  for (const auto& f : positions.responses) {
    if (f.params.size() == 5 && f.params[0] == wire::status_error::kNone) {
      last_inputs_[static_cast<std::size_t>(f.id - wire::kFirstActuatorId)] =
          wire::from_le(std::span(f.params).subspan(1), true);
    }
  }
  if (positions.timed_out) ++report_.bus_timeouts;

  const auto angle = bus_.transact(wire::make_read(wire::kEncoderId, wire::reg::kRawAngle, 2));
  if (angle.timed_out) {
    ++report_.bus_timeouts;
  } else if (angle.responses.front().params.size() == 3) {
    last_inputs_[aa] = wire::from_le(std::span(angle.responses.front().params).subspan(1), false);
  }
  return firmware::SensorInputs::from_raw(last_inputs_);
}

void Session::write_outputs() {
  std::vector<wire::SyncWriteEntry> current;
  std::vector<wire::SyncWriteEntry> position;
  const auto& tau = pipeline_->last().tau;
  const auto& shadow = pipeline_->shadow();
  for (int i = 0; i < kActuatedCount; ++i) {
    const auto id = static_cast<std::uint8_t>(wire::kFirstActuatorId + i);
    const auto amps = std::clamp<std::int64_t>(std::llround(tau[static_cast<std::size_t>(i)]), -32768, 32767);
    current.push_back({id, wire::le_bytes(amps, 2)});
    position.push_back({id, wire::le_bytes(shadow.q_robot[static_cast<std::size_t>(i)].value, 4)});
  }
  bus_.transact(wire::make_sync_write(wire::reg::kGoalCurrent, 2, current));
  bus_.transact(wire::make_sync_write(wire::reg::kGoalPosition, 4, position));
}

StateMessage Session::state() const {
  StateMessage m;
  m.t = Timestamp::from_cycle(cycle_ == 0 ? 0 : cycle_ - 1);
  m.cycle = cycle_;
  m.q_operator = last_inputs_;
  const auto& dev = pipeline_->controller().state();
  for (std::size_t i = 0; i < m.gain_mode.size(); ++i) {
    m.gain_mode[i] = dev.fe[i].gain_mode;
    m.tau[i] = dev.fe[i].tau_cmd;
  }
  m.u_actual = pipeline_->hand().u_actual;
  m.contact = pipeline_->hand().contact;
  m.blocks = pipeline_->hand().block;
  m.targets = pipeline_->last().targets.joints;
  m.pose = last_pose_;
  m.recording = writer_ != nullptr;
  m.task = writer_ ? task_ : std::string{};
  return m;
}

void Session::broadcast() {
  if (!api_) return;
  const auto hz = static_cast<std::uint64_t>(config_.state_broadcast_hz);
  // Fires whenever floor(cycle * hz / loop_hz) advances.
  if ((cycle_ + 1) * hz / kLoopHz == cycle_ * hz / kLoopHz) return;
  if (outbox_.try_push(Outbound{std::nullopt, to_json(state()).dump()})) {
    ++report_.states_broadcast;
  } else {
    ++report_.states_dropped;
  }
}

void Session::step() {
  const Timestamp t = Timestamp::from_cycle(cycle_);
  drain_commands();

  // Scenario choreography, applied before the hand moves this cycle.
  const auto scheduled = simhand::apply_scenario_events(pipeline_->hand(), scenario_, cycle_);
  for (int i = 0; i < kActuatedCount; ++i) set_block(i, scheduled.block[static_cast<std::size_t>(i)]);

  PerChannel<std::int64_t> world{};
  if (replay_source_) {
    const auto& recs = replay_source_->records;
    while (replay_cursor_ < recs.size() && recs[replay_cursor_].stream != logger::Stream::Joints) {
      if (recs[replay_cursor_].stream == logger::Stream::Event) {
        if (auto b = logger::event::parse_block(std::get<std::string>(recs[replay_cursor_].payload))) {
          set_block(b->first, b->second);
        }
      }
      ++replay_cursor_;
    }
    if (replay_cursor_ >= recs.size()) {
      stop_requested_ = true;
      return;
    }
    world = std::get<PerChannel<std::int64_t>>(recs[replay_cursor_++].payload);
  } else {
    const double dt = 1000.0 / kLoopHz;
    const double k = config_.input_lag_ms > 0.0 ? dt / (config_.input_lag_ms + dt) : 1.0;
    for (std::size_t i = 0; i < world.size(); ++i) {
      operator_position_[i] += (operator_targets_[i] - operator_position_[i]) * k;
      world[i] = std::llround(operator_position_[i]);
    }
  }

  const auto inputs = exchange_inputs(world);
  PerChannel<double> raw{};
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<double>(last_inputs_[i]);
  clamps_.observe(raw, profile_);

  const auto& out = pipeline_->step(inputs, t);
  write_outputs();

  if (writer_) {
    log(logger::LogRecord::joints(t, last_inputs_));
    log(logger::LogRecord::torque(t, out.tau));
    log(logger::LogRecord::robot_targets(t, out.targets.angles()));
    log(logger::LogRecord::contact(t, out.contact));
  }
  while (streams::grid_time(next_pose_, pose_source_.rate_hz()) <= t) {
    last_pose_ = pose_source_.sample(next_pose_++);
    log(logger::LogRecord::pose(last_pose_));
  }
  while (streams::grid_time(next_frame_, 30) <= t) {
    log(logger::LogRecord::camera({static_cast<std::uint64_t>(next_frame_), streams::grid_time(next_frame_, 30)}));
    ++next_frame_;
  }

  broadcast();
  ++cycle_;
}

void Session::finish() {
  if (config_.script) {
    const auto& entries = config_.script->entries;
    while (script_cursor_ < entries.size() && entries[script_cursor_].cycle <= cycle_) {
      apply(entries[script_cursor_++].command);
    }
  }
  if (writer_) stop_recording(false);
  report_.cycles = cycle_;
  report_.clamped_readings = clamps_.count();
  if (!jitter_us_.empty()) {
    JitterStats j;
    j.samples = jitter_us_.size();
    double sum = 0.0;
    for (double v : jitter_us_) sum += v;
    j.mean_us = sum / static_cast<double>(jitter_us_.size());
    auto sorted = jitter_us_;
    std::sort(sorted.begin(), sorted.end());
    j.max_us = sorted.back();
    j.p99_us = sorted[static_cast<std::size_t>(0.99 * static_cast<double>(sorted.size() - 1))];
    report_.jitter = j;
  }
}

ExitReport Session::run() {
  std::optional<std::uint64_t> limit = config_.max_cycles;
  if (!limit && config_.script && config_.script->cycles) limit = config_.script->cycles;

  if (config_.clock == ClockMode::Simulated) {
    while (!stop_requested_ && (!limit || cycle_ < *limit)) step();
  } else {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::nanoseconds(kCyclePeriodNs);
    const auto start = clock::now();
    while (!stop_requested_ && (!limit || cycle_ < *limit)) {
      const auto due = start + period * static_cast<std::int64_t>(cycle_);
      std::this_thread::sleep_until(due);
      const auto late = std::chrono::duration<double, std::micro>(clock::now() - due).count();
      jitter_us_.push_back(late);
      step();
    }
  }
  finish();
  return report_;
}

ExitReport run_session(SessionConfig config) {
  Session s(std::move(config));
  return s.run();
}

}  // namespace dexmouse::session
