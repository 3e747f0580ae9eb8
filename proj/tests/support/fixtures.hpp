#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dexmouse/logger.hpp"
#include "dexmouse/session.hpp"

namespace dexmouse::test {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(DEXMOUSE_DATA_DIR) / rel;
}

/// Sink writing into storage shared with the test; can be told to fail.
class SharedSink : public logger::RecordSink {
 public:
  explicit SharedSink(std::shared_ptr<std::vector<std::string>> lines, std::optional<std::size_t> fail_after = {})
      : lines_(std::move(lines)), fail_after_(fail_after) {}
  void write_line(const std::string& line) override {
    if (fail_after_ && lines_->size() >= *fail_after_) throw logger::StorageError("disk full");
    lines_->push_back(line);
  }
  void flush() override {}

 private:
  std::shared_ptr<std::vector<std::string>> lines_;
  std::optional<std::size_t> fail_after_;
};

/// Captures every episode a session opens, keyed by file name.
struct Capture {
  std::map<std::string, std::shared_ptr<std::vector<std::string>>> files;
  std::optional<std::size_t> fail_after;

  session::SinkFactory factory() {
    return [this](const std::filesystem::path& p) -> std::unique_ptr<logger::RecordSink> {
      auto lines = std::make_shared<std::vector<std::string>>();
      files[p.filename().string()] = lines;
      return std::make_unique<SharedSink>(lines, fail_after);
    };
  }

  std::string text(const std::string& name) const {
    std::string out;
    for (const auto& l : *files.at(name)) out += l + '\n';
    return out;
  }
  std::string only_text() const { return text(files.begin()->first); }
};

/// Operator flexes every finger into the scenario's blocks and back out, a few times over.
inline nlohmann::json flex_script(std::uint64_t cycles, bool success = true) {
  using nlohmann::json;
  json cmds = json::array();
  cmds.push_back({{"cycle", 0}, {"command", {{"type", "record_start"}, {"task", "scripted"}}}});
  const double levels[] = {0.8, 0.1, 0.95, 0.3, 0.7, 0.0};
  std::uint64_t c = 50;
  for (int k = 0; c < cycles; ++k, c += 170) {
    for (int ch = 0; ch < 6; ++ch) {
      cmds.push_back({{"cycle", c + static_cast<std::uint64_t>(ch) * 7},
                      {"command", {{"type", "set_input"}, {"channel", ch}, {"u", levels[(k + ch) % 6]}}}});
    }
  }
  cmds.push_back({{"cycle", cycles}, {"command", {{"type", "record_stop"}, {"success", success}}}});
  return {{"cycles", cycles}, {"commands", cmds}};
}

inline session::SessionConfig sim_config(const std::string& scenario, std::uint64_t cycles, Capture& cap,
                                         const std::string& profile = "igrisc-11dof") {
  session::SessionConfig cfg;
  cfg.profile_path = data_path("profiles/" + profile + ".json");
  cfg.scenario_path = data_path("scenarios/" + scenario + ".json");
  cfg.script = session::parse_script(flex_script(cycles));
  cfg.sink_factory = cap.factory();
  cfg.log_dir = std::filesystem::temp_directory_path();
  return cfg;
}

/// Everything after the header line.
inline std::string body_of(const std::string& text) { return text.substr(text.find('\n') + 1); }

}  // namespace dexmouse::test
