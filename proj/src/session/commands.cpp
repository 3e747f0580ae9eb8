#include <fstream>

#include "dexmouse/session.hpp"

namespace dexmouse::session {

using nlohmann::json;

namespace {

ChannelId channel_of(const json& msg) {
  if (!msg.contains("channel")) throw CommandError("missing 'channel'");
  const auto& c = msg["channel"];
  try {
    if (c.is_string()) return parse_channel(c.get<std::string>());
    if (c.is_number_integer()) return ChannelId{c.get<int>()};
  } catch (const std::exception& e) {
    throw CommandError(e.what());
  }
  throw CommandError("'channel' must be a name or index");
}

}  // namespace

Command parse_command(const json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    throw CommandError("command must be an object with a string 'type'");
  }
  const auto type = msg["type"].get<std::string>();

  if (type == "set_input") {
    const auto ch = channel_of(msg);
    if (msg.contains("ticks")) {
      if (!msg["ticks"].is_number_integer()) throw CommandError("'ticks' must be an integer");
      const auto v = msg["ticks"].get<std::int64_t>();
      if (v < 0 || v >= kTicksPerRev) throw CommandError("'ticks' outside [0, 4095]");
      return SetInput{ch, Ticks{v}};
    }
    if (msg.contains("u")) {
      if (!msg["u"].is_number()) throw CommandError("'u' must be a number");
      const double u = msg["u"].get<double>();
      if (!(u >= 0.0 && u <= 1.0)) throw CommandError("'u' outside [0, 1]");
      return SetInput{ch, NormalizedFlexion{u}};
    }
    throw CommandError("set_input needs 'ticks' or 'u'");
  }
  if (type == "set_block") {
    const auto ch = channel_of(msg);
    if (!ch.actuated()) throw CommandError("blocks apply to FE channels only");
    if (!msg.contains("value") || msg["value"].is_null()) return SetBlock{ch, std::nullopt};
    if (!msg["value"].is_number()) throw CommandError("'value' must be a number or null");
    const double v = msg["value"].get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw CommandError("block value outside [0, 1]");
    return SetBlock{ch, v};
  }
  if (type == "record_start") {
    if (msg.contains("task") && !msg["task"].is_string()) throw CommandError("'task' must be a string");
    return RecordStart{msg.value("task", std::string{})};
  }
  if (type == "record_stop") {
    if (msg.contains("success") && !msg["success"].is_boolean()) throw CommandError("'success' must be boolean");
    return RecordStop{msg.value("success", false)};
  }
  if (type == "set_params") {
    if (!msg.contains("params") || !msg["params"].is_object()) throw CommandError("set_params needs object 'params'");
    try {
      logger::params_from_json(msg["params"]);
    } catch (const std::exception& e) {
      throw CommandError(e.what());
    }
    return SetParams{msg["params"]};
  }
  if (type == "stop") return Stop{};
  throw CommandError("unknown command type '" + type + "'");
}

const char* command_name(const Command& c) {
  struct Name {
    const char* operator()(const SetInput&) const { return "set_input"; }
    const char* operator()(const SetBlock&) const { return "set_block"; }
    const char* operator()(const RecordStart&) const { return "record_start"; }
    const char* operator()(const RecordStop&) const { return "record_stop"; }
    const char* operator()(const SetParams&) const { return "set_params"; }
    const char* operator()(const Stop&) const { return "stop"; }
  };
  return std::visit(Name{}, c);
}

Script parse_script(const json& doc) {
  Script s;
  try {
    if (doc.contains("cycles")) s.cycles = doc.at("cycles").get<std::uint64_t>();
    for (const auto& e : doc.value("commands", json::array())) {
      s.entries.push_back({e.at("cycle").get<std::uint64_t>(), parse_command(e.at("command"))});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed script: ") + e.what());
  } catch (const CommandError& e) {
    throw ConfigError(std::string("script command: ") + e.what());
  }
  std::stable_sort(s.entries.begin(), s.entries.end(),
                   [](const ScriptEntry& a, const ScriptEntry& b) { return a.cycle < b.cycle; });
  return s;
}

Script load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open script " + path.string());
  try {
    return parse_script(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace dexmouse::session
