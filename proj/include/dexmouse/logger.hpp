#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dexmouse/core.hpp"
#include "dexmouse/firmware.hpp"
#include "dexmouse/simhand.hpp"
#include "dexmouse/streams.hpp"

namespace dexmouse::logger {

inline constexpr int kSchemaVersion = 1;

enum class Stream { Joints, Torque, RobotTargets, Contact, Pose, Camera, Event };
inline constexpr std::array kAllStreams = {Stream::Joints, Stream::Torque, Stream::RobotTargets, Stream::Contact,
                                           Stream::Pose,   Stream::Camera, Stream::Event};

const char* to_string(Stream s);
std::optional<Stream> parse_stream(std::string_view name);

using PosePayload = std::array<double, 7>;  ///< px py pz qw qx qy qz
using Payload = std::variant<PerChannel<std::int64_t>, PerActuated<double>, std::vector<double>, PerActuated<bool>,
                             PosePayload, std::uint64_t, std::string>;

struct LogRecord {
  Timestamp t{};
  Stream stream = Stream::Event;
  Payload payload;

  static LogRecord joints(Timestamp t, const PerChannel<std::int64_t>& ticks) { return {t, Stream::Joints, ticks}; }
  static LogRecord torque(Timestamp t, const PerActuated<double>& tau) { return {t, Stream::Torque, tau}; }
  static LogRecord robot_targets(Timestamp t, std::vector<double> angles) {
    return {t, Stream::RobotTargets, std::move(angles)};
  }
  static LogRecord contact(Timestamp t, const PerActuated<bool>& c) { return {t, Stream::Contact, c}; }
  static LogRecord pose(const streams::Pose& p);
  static LogRecord camera(const streams::CameraFrameRef& f) { return {f.t, Stream::Camera, f.frame_index}; }
  static LogRecord event(Timestamp t, std::string tag) { return {t, Stream::Event, std::move(tag)}; }

  bool operator==(const LogRecord&) const = default;
};

/// Firmware, shadow and hand state at the first recorded cycle; replay starts here.
struct ReplayState {
  firmware::DeviceState device;
  firmware::RobotShadow shadow;
  simhand::VirtualHand hand;

  bool operator==(const ReplayState&) const = default;
};

struct EpisodeHeader {
  int schema_version = kSchemaVersion;
  std::string session_id;
  std::string profile_name;
  std::string profile_hash;
  nlohmann::json profile_doc;
  std::string scenario_name;
  nlohmann::json scenario_doc;
  firmware::ForceFeedbackParams ff_params;
  std::string start_wall_clock;
  std::string task;
  std::string operator_alias;
  ReplayState initial;
};

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StorageError : public LogError {
 public:
  using LogError::LogError;
};

// JSON mapping ---------------------------------------------------------------

nlohmann::json to_json(const firmware::ForceFeedbackParams& p);
/// Applies the keys present in `overrides` on top of `base`, then validates.
firmware::ForceFeedbackParams params_from_json(const nlohmann::json& overrides,
                                               const firmware::ForceFeedbackParams& base = {});
nlohmann::json to_json(const ReplayState& s);
ReplayState replay_state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EpisodeHeader& h);
EpisodeHeader header_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LogRecord& r);
/// Throws LogError when the object is not a well-formed record.
LogRecord record_from_json(const nlohmann::json& j, std::optional<std::size_t> expected_targets = std::nullopt);

std::string serialize(const LogRecord& r);

// Writing --------------------------------------------------------------------

class RecordSink {
 public:
  virtual ~RecordSink() = default;
  /// Appends one line (without newline). Throws StorageError on failure.
  virtual void write_line(const std::string& line) = 0;
  virtual void flush() = 0;
  virtual void close() {}
};

class FileSink : public RecordSink {
 public:
  explicit FileSink(const std::filesystem::path& path);
  void write_line(const std::string& line) override;
  void flush() override;
  void close() override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Moves writes to a worker thread through a bounded queue. The worker
/// flushes whenever the queue drains. Errors surface on the next call.
class AsyncSink : public RecordSink {
 public:
  explicit AsyncSink(std::unique_ptr<RecordSink> inner, std::size_t capacity = 4096);
  ~AsyncSink() override;

  void write_line(const std::string& line) override;
  void flush() override;
  void close() override;

 private:
  void run();
  void rethrow();

  std::unique_ptr<RecordSink> inner_;
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool idle_ = true;
  std::optional<std::string> error_;
  std::thread worker_;
};

/// Collects lines in memory; used by tests and replay checks.
class MemorySink : public RecordSink {
 public:
  void write_line(const std::string& line) override { lines.push_back(line); }
  void flush() override { ++flushes; }
  std::vector<std::string> lines;
  int flushes = 0;
};

class EpisodeWriter {
 public:
  explicit EpisodeWriter(std::unique_ptr<RecordSink> sink);

  void write_header(const EpisodeHeader& header);
  /// Rejects records before the header with LogError.
  void record(const LogRecord& r);
  void close();

  bool has_header() const { return header_written_; }
  std::uint64_t records_written() const { return records_; }

  static constexpr std::int64_t kFlushIntervalNs = 100'000'000;

 private:
  std::unique_ptr<RecordSink> sink_;
  bool header_written_ = false;
  bool closed_ = false;
  std::uint64_t records_ = 0;
  std::optional<Timestamp> last_flush_;
};

// Reading --------------------------------------------------------------------

struct Episode {
  EpisodeHeader header;
  std::vector<LogRecord> records;
};

/// Strict reader; throws LogError on the first problem. Use validate() for a full report.
Episode read_episode(const std::filesystem::path& path);
Episode parse_episode(std::string_view text);

struct Violation {
  std::size_t line;  ///< 1-based
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t records = 0;
  bool ok() const { return violations.empty(); }
};

/// Total: never throws on content, reports every violation with its line.
ValidationReport validate_text(std::string_view text);
ValidationReport validate(const std::filesystem::path& path);

// Replay ---------------------------------------------------------------------

struct Divergence {
  Stream stream;
  Timestamp t;
  std::string detail;
};

struct ReplayReport {
  std::uint64_t cycles = 0;
  std::uint64_t compared = 0;
  std::uint64_t divergences = 0;
  std::optional<Divergence> first;
  bool ok() const { return divergences == 0; }
};

/// Re-runs firmware, retargeting and the virtual hand over the logged raw
/// inputs and block events, comparing torque, robot_targets and contact
/// bit-exactly. `params` overrides the logged force-feedback parameters.
ReplayReport replay(const Episode& episode, std::optional<firmware::ForceFeedbackParams> params = std::nullopt);

// Stats ----------------------------------------------------------------------

struct EpisodeStats {
  double duration_s = 0.0;
  std::map<Stream, std::uint64_t> records;
  PerActuated<double> contact_fraction{};
  bool success = false;
  std::optional<double> completion_s;
  bool end_missing = false;
};

EpisodeStats stats(const Episode& episode);
nlohmann::json to_json(const EpisodeStats& s);
void write_stats_csv(std::ostream& os, const EpisodeStats& s);

// Export ---------------------------------------------------------------------

/// Regroups per-cycle records into control samples plus the pose and camera streams.
streams::AlignInput align_input(const Episode& episode);
/// Joint ids in output order, from the embedded profile.
std::vector<std::string> joint_names(const Episode& episode);

// Event tags -----------------------------------------------------------------

namespace event {
inline constexpr const char* kStart = "start";
inline constexpr const char* kEndSuccess = "end:success";
inline constexpr const char* kEndFailure = "end:failure";
std::string block(int channel, const simhand::Block& value);
/// Parses "block:<channel>:<value|none>".
std::optional<std::pair<int, simhand::Block>> parse_block(std::string_view tag);
std::string error(std::string_view message);
}  // namespace event

}  // namespace dexmouse::logger
