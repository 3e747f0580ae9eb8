#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dexmouse/bounded_queue.hpp"
#include "dexmouse/logger.hpp"
#include "dexmouse/pipeline.hpp"
#include "dexmouse/streams.hpp"
#include "dexmouse/wire.hpp"

namespace dexmouse::session {

// Commands -------------------------------------------------------------------

struct SetInput {
  ChannelId channel{0};
  std::variant<Ticks, NormalizedFlexion> value;
};
struct SetBlock {
  ChannelId channel{0};
  simhand::Block value;
};
struct RecordStart {
  std::string task;
};
struct RecordStop {
  bool success = false;
};
struct SetParams {
  nlohmann::json overrides;
};
struct Stop {};

using Command = std::variant<SetInput, SetBlock, RecordStart, RecordStop, SetParams, Stop>;

class CommandError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses and range-checks a CommandMessage; throws CommandError.
Command parse_command(const nlohmann::json& msg);
const char* command_name(const Command& c);

struct ScriptEntry {
  std::uint64_t cycle = 0;
  Command command;
};

struct Script {
  std::vector<ScriptEntry> entries;  ///< sorted by cycle
  std::optional<std::uint64_t> cycles;
};

Script parse_script(const nlohmann::json& doc);
Script load_script(const std::filesystem::path& path);

// Configuration --------------------------------------------------------------

enum class ClockMode { Simulated, Wall };
enum class InputMode { Virtual, Replay };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using SinkFactory = std::function<std::unique_ptr<logger::RecordSink>(const std::filesystem::path&)>;

struct SessionConfig {
  std::filesystem::path profile_path;
  std::filesystem::path scenario_path;
  nlohmann::json ff_overrides = nlohmann::json::object();
  InputMode mode = InputMode::Virtual;
  /// Episode whose logged raw inputs drive the loop in replay mode.
  std::filesystem::path replay_source;
  int api_port = -1;  ///< -1 disables the API, 0 picks a free port
  int state_broadcast_hz = 20;
  ClockMode clock = ClockMode::Simulated;
  std::optional<Script> script;
  /// Loop length; nullopt runs until a stop command.
  std::optional<std::uint64_t> max_cycles;
  std::filesystem::path log_dir;  ///< empty: DEXMOUSE_LOG_DIR, then "."
  std::uint64_t seed = 1;
  std::string operator_alias = "anonymous";
  std::string pose_path = "circle";
  double input_lag_ms = 50.0;
  wire::BusConfig bus{};
  /// Overrides file output; defaults to an AsyncSink over a FileSink.
  SinkFactory sink_factory;
};

// Messages -------------------------------------------------------------------

struct StateMessage {
  Timestamp t;
  std::uint64_t cycle = 0;
  PerChannel<std::int64_t> q_operator{};
  PerActuated<firmware::GainMode> gain_mode{};
  PerActuated<double> tau{};
  PerActuated<double> u_actual{};
  PerActuated<bool> contact{};
  PerActuated<simhand::Block> blocks{};
  std::vector<retarget::JointTarget> targets;
  streams::Pose pose;
  bool recording = false;
  std::string task;
};

nlohmann::json to_json(const StateMessage& m);

/// Reply routed back to the client that issued a command.
struct Reply {
  std::uint64_t client = 0;
  nlohmann::json body;
};

struct Outbound {
  std::optional<std::uint64_t> client;  ///< nullopt: broadcast
  std::string text;
};

struct Inbound {
  std::uint64_t client = 0;
  nlohmann::json request_id;
  Command command;
};

// Session --------------------------------------------------------------------

struct JitterStats {
  std::uint64_t samples = 0;
  double mean_us = 0.0;
  double max_us = 0.0;
  double p99_us = 0.0;
};

struct ExitReport {
  std::uint64_t cycles = 0;
  std::vector<std::filesystem::path> episodes;
  std::uint64_t commands_applied = 0;
  std::uint64_t commands_rejected = 0;
  std::uint64_t states_broadcast = 0;
  std::uint64_t states_dropped = 0;
  std::uint64_t bus_timeouts = 0;
  std::uint64_t clamped_readings = 0;
  std::vector<std::string> errors;
  std::optional<JitterStats> jitter;
};

nlohmann::json to_json(const ExitReport& r);

class Session {
 public:
  /// Loads and validates everything; throws ConfigError before any cycle runs.
  explicit Session(SessionConfig config);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Runs one 10 ms control cycle.
  void step();
  /// Runs until max_cycles, the script's cycle count, or a stop command.
  ExitReport run();
  void request_stop() { stop_requested_ = true; }

  /// Applies a command on the loop context; returns an error text on rejection.
  std::optional<std::string> apply(const Command& c);

  std::uint64_t cycle() const { return cycle_; }
  bool recording() const { return writer_ != nullptr; }
  const ControlPipeline& pipeline() const { return *pipeline_; }
  const retarget::HandProfile& profile() const { return profile_; }
  const ExitReport& report() const { return report_; }
  StateMessage state() const;
  const std::filesystem::path& log_dir() const { return log_dir_; }
  wire::SimulatedBus& bus() { return bus_; }

  BoundedQueue<Inbound>& inbox() { return inbox_; }
  BoundedQueue<Outbound>& outbox() { return outbox_; }

  /// Port the API listens on, once started.
  int api_port() const;

 private:
  void drain_commands();
  void start_recording(const std::string& task);
  void stop_recording(bool success);
  void log(const logger::LogRecord& r);
  void fail_recording(const std::string& what);
  void set_block(int channel, simhand::Block value);
  firmware::SensorInputs exchange_inputs(const PerChannel<std::int64_t>& world);
  void write_outputs();
  void broadcast();
  void finish();

  SessionConfig config_;
  retarget::HandProfile profile_;
  simhand::Scenario scenario_;
  firmware::ForceFeedbackParams params_;
  std::optional<logger::Episode> replay_source_;
  std::size_t replay_cursor_ = 0;
  std::filesystem::path log_dir_;
  std::string session_id_;

  wire::SimulatedBus bus_;
  std::unique_ptr<ControlPipeline> pipeline_;
  retarget::ClampCounter clamps_;
  streams::MockPoseSource pose_source_;
  std::int64_t next_pose_ = 0;
  std::int64_t next_frame_ = 0;
  streams::Pose last_pose_;

  PerChannel<double> operator_targets_{};
  PerChannel<double> operator_position_{};
  PerChannel<std::int64_t> last_inputs_{};
  std::size_t script_cursor_ = 0;

  std::unique_ptr<logger::EpisodeWriter> writer_;
  std::filesystem::path episode_path_;
  std::string task_;
  int episode_counter_ = 0;

  BoundedQueue<Inbound> inbox_{256};
  BoundedQueue<Outbound> outbox_{64};

  std::uint64_t cycle_ = 0;
  std::atomic<bool> stop_requested_{false};
  ExitReport report_;
  std::vector<double> jitter_us_;

  class Api;
  std::unique_ptr<Api> api_;
};

/// Convenience: constructs and runs a session.
ExitReport run_session(SessionConfig config);

}  // namespace dexmouse::session
