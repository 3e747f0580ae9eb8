#include <charconv>
#include <cmath>

#include "dexmouse/logger.hpp"

namespace dexmouse::logger {

using nlohmann::json;

const char* to_string(Stream s) {
  switch (s) {
    case Stream::Joints: return "joints";
    case Stream::Torque: return "torque";
    case Stream::RobotTargets: return "robot_targets";
    case Stream::Contact: return "contact";
    case Stream::Pose: return "pose";
    case Stream::Camera: return "camera";
    case Stream::Event: return "event";
  }
  return "?";
}

std::optional<Stream> parse_stream(std::string_view name) {
  for (auto s : kAllStreams) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

LogRecord LogRecord::pose(const streams::Pose& p) {
  PosePayload v{p.position[0],    p.position[1],    p.position[2],   p.orientation[0],
                p.orientation[1], p.orientation[2], p.orientation[3]};
  return {p.t, Stream::Pose, v};
}

json to_json(const firmware::ForceFeedbackParams& p) {
  return {{"k_nominal", p.k_nominal}, {"gamma", p.gamma},         {"v_th", p.v_th.value},
          {"epsilon", p.epsilon.value}, {"tau_max", p.tau_max},   {"loop_hz", p.loop_hz},
          {"aa_alpha", p.aa_alpha},    {"debounce_cycles", p.debounce_cycles}};
}

firmware::ForceFeedbackParams params_from_json(const json& o, const firmware::ForceFeedbackParams& base) {
  if (!o.is_object()) throw firmware::ParameterError("params must be a JSON object");
  firmware::ForceFeedbackParams p = base;
  try {
    for (const auto& [key, v] : o.items()) {
      if (key == "k_nominal") p.k_nominal = v.get<double>();
      else if (key == "gamma") p.gamma = v.get<double>();
      else if (key == "v_th") p.v_th = Ticks{v.get<std::int64_t>()};
      else if (key == "epsilon") p.epsilon = Ticks{v.get<std::int64_t>()};
      else if (key == "tau_max") p.tau_max = v.get<double>();
      else if (key == "loop_hz") p.loop_hz = v.get<int>();
      else if (key == "aa_alpha") p.aa_alpha = v.get<double>();
      else if (key == "debounce_cycles") p.debounce_cycles = v.get<int>();
      else throw firmware::ParameterError("unknown parameter '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw firmware::ParameterError(std::string("bad parameter value: ") + e.what());
  }
  p.validate();
  return p;
}

namespace {

json block_json(const simhand::Block& b) { return b ? json(*b) : json(nullptr); }

}  // namespace

json to_json(const ReplayState& s) {
  json fe = json::array();
  for (const auto& ch : s.device.fe) {
    fe.push_back({{"q", ch.q_operator.value},
                  {"v", ch.velocity.value},
                  {"mode", firmware::to_string(ch.gain_mode)},
                  {"tau", ch.tau_cmd},
                  {"pen", ch.penetration_cycles}});
  }
  json shadow = json::array();
  for (auto q : s.shadow.q_robot) shadow.push_back(q.value);
  json blocks = json::array();
  for (const auto& b : s.hand.block) blocks.push_back(block_json(b));
  return {{"device",
           {{"fe", fe},
            {"aa_raw", s.device.aa_raw},
            {"aa_filtered", s.device.aa_filtered},
            {"cycle_count", s.device.cycle_count}}},
          {"shadow", shadow},
          {"hand",
           {{"u", s.hand.u_actual}, {"block", blocks}, {"contact", s.hand.contact}, {"rate_limit", s.hand.rate_limit}}}};
}

ReplayState replay_state_from_json(const json& j) {
  ReplayState s;
  const auto& dev = j.at("device");
  const auto& fe = dev.at("fe");
  if (fe.size() != static_cast<std::size_t>(kActuatedCount)) throw LogError("initial_state.device.fe must have 5 entries");
  for (std::size_t i = 0; i < s.device.fe.size(); ++i) {
    auto& ch = s.device.fe[i];
    ch.q_operator = Ticks{fe[i].at("q").get<std::int64_t>()};
    ch.velocity = Ticks{fe[i].at("v").get<std::int64_t>()};
    ch.gain_mode = fe[i].at("mode").get<std::string>() == "free" ? firmware::GainMode::FreeMotion
                                                                  : firmware::GainMode::Contact;
    ch.tau_cmd = fe[i].at("tau").get<double>();
    ch.penetration_cycles = fe[i].at("pen").get<int>();
  }
  s.device.aa_raw = dev.at("aa_raw").get<std::int64_t>();
  s.device.aa_filtered = dev.at("aa_filtered").get<double>();
  s.device.cycle_count = dev.at("cycle_count").get<std::uint64_t>();

  const auto& shadow = j.at("shadow");
  const auto& hand = j.at("hand");
  if (shadow.size() != 5 || hand.at("u").size() != 5 || hand.at("block").size() != 5 || hand.at("contact").size() != 5) {
    throw LogError("initial_state arrays must have 5 entries");
  }
  for (std::size_t i = 0; i < 5; ++i) {
    s.shadow.q_robot[i] = Ticks{shadow[i].get<std::int64_t>()};
    s.hand.u_actual[i] = hand.at("u")[i].get<double>();
    const auto& b = hand.at("block")[i];
    s.hand.block[i] = b.is_null() ? simhand::Block{} : simhand::Block{b.get<double>()};
    s.hand.contact[i] = hand.at("contact")[i].get<bool>();
  }
  s.hand.rate_limit = hand.at("rate_limit").get<double>();
  return s;
}

json to_json(const EpisodeHeader& h) {
  return {{"type", "header"},
          {"schema_version", h.schema_version},
          {"session_id", h.session_id},
          {"profile", {{"name", h.profile_name}, {"hash", h.profile_hash}, {"doc", h.profile_doc}}},
          {"scenario", {{"name", h.scenario_name}, {"doc", h.scenario_doc}}},
          {"ff_params", to_json(h.ff_params)},
          {"start_wall_clock", h.start_wall_clock},
          {"task", h.task},
          {"operator", h.operator_alias},
          {"initial_state", to_json(h.initial)}};
}

EpisodeHeader header_from_json(const json& j) {
  try {
    if (j.at("type") != "header") throw LogError("first record is not a header");
    EpisodeHeader h;
    h.schema_version = j.at("schema_version").get<int>();
    h.session_id = j.at("session_id").get<std::string>();
    h.profile_name = j.at("profile").at("name").get<std::string>();
    h.profile_hash = j.at("profile").at("hash").get<std::string>();
    h.profile_doc = j.at("profile").at("doc");
    h.scenario_name = j.at("scenario").at("name").get<std::string>();
    h.scenario_doc = j.at("scenario").at("doc");
    h.ff_params = params_from_json(j.at("ff_params"));
    h.start_wall_clock = j.at("start_wall_clock").get<std::string>();
    h.task = j.at("task").get<std::string>();
    h.operator_alias = j.at("operator").get<std::string>();
    h.initial = replay_state_from_json(j.at("initial_state"));
    return h;
  } catch (const json::exception& e) {
    throw LogError(std::string("malformed header: ") + e.what());
  } catch (const firmware::ParameterError& e) {
    throw LogError(std::string("malformed header: ") + e.what());
  }
}

json to_json(const LogRecord& r) {
  json v = std::visit([](const auto& p) { return json(p); }, r.payload);
  return {{"t", r.t.ns}, {"stream", to_string(r.stream)}, {"v", std::move(v)}};
}

std::string serialize(const LogRecord& r) { return to_json(r).dump(); }

namespace {

template <std::size_t N, typename T>
std::array<T, N> fixed(const json& v, const char* what) {
  if (!v.is_array() || v.size() != N) {
    throw LogError(std::string(what) + " payload must have " + std::to_string(N) + " entries");
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v[i].is_boolean()) throw LogError(std::string(what) + " entries must be booleans");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v[i].is_number_integer()) throw LogError(std::string(what) + " entries must be integers");
    } else {
      if (!v[i].is_number()) throw LogError(std::string(what) + " entries must be numbers");
    }
    out[i] = v[i].get<T>();
  }
  return out;
}

}  // namespace

LogRecord record_from_json(const json& j, std::optional<std::size_t> expected_targets) {
  if (!j.is_object()) throw LogError("record is not a JSON object");
  if (!j.contains("t") || !j["t"].is_number_integer()) throw LogError("record needs integer 't'");
  if (!j.contains("stream") || !j["stream"].is_string()) throw LogError("record needs string 'stream'");
  if (!j.contains("v")) throw LogError("record needs payload 'v'");
  const auto t = j["t"].get<std::int64_t>();
  if (t < 0) throw LogError("negative timestamp");
  const auto stream = parse_stream(j["stream"].get<std::string>());
  if (!stream) throw LogError("unknown stream '" + j["stream"].get<std::string>() + "'");
  const json& v = j["v"];

  LogRecord r;
  r.t = Timestamp{t};
  r.stream = *stream;
  switch (*stream) {
    case Stream::Joints: r.payload = fixed<kChannelCount, std::int64_t>(v, "joints"); break;
    case Stream::Torque: r.payload = fixed<kActuatedCount, double>(v, "torque"); break;
    case Stream::Contact: r.payload = fixed<kActuatedCount, bool>(v, "contact"); break;
    case Stream::Pose: r.payload = fixed<7, double>(v, "pose"); break;
    case Stream::RobotTargets: {
      if (!v.is_array()) throw LogError("robot_targets payload must be an array");
      if (expected_targets && v.size() != *expected_targets) {
        throw LogError("robot_targets payload has " + std::to_string(v.size()) + " entries, profile declares " +
                       std::to_string(*expected_targets));
      }
      std::vector<double> a;
      for (const auto& x : v) {
        if (!x.is_number()) throw LogError("robot_targets entries must be numbers");
        a.push_back(x.get<double>());
      }
      r.payload = std::move(a);
      break;
    }
    case Stream::Camera:
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw LogError("camera payload must be a non-negative integer");
      }
      r.payload = v.get<std::uint64_t>();
      break;
    case Stream::Event:
      if (!v.is_string()) throw LogError("event payload must be a string");
      r.payload = v.get<std::string>();
      break;
  }
  return r;
}

namespace event {

std::string block(int channel, const simhand::Block& value) {
  std::string s = "block:" + std::string(channel_name(ChannelId{channel})) + ":";
  if (!value) return s + "none";
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, *value);
  return s.append(buf, p);
}

std::optional<std::pair<int, simhand::Block>> parse_block(std::string_view tag) {
  if (!tag.starts_with("block:")) return std::nullopt;
  tag.remove_prefix(6);
  const auto colon = tag.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  int channel = 0;
  try {
    const auto ch = parse_channel(tag.substr(0, colon));
    if (!ch.actuated()) return std::nullopt;
    channel = ch.index();
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  const auto value = tag.substr(colon + 1);
  if (value == "none") return std::make_pair(channel, simhand::Block{});
  double v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size()) return std::nullopt;
  return std::make_pair(channel, simhand::Block{v});
}

std::string error(std::string_view message) { return "error:" + std::string(message); }

}  // namespace event

}  // namespace dexmouse::logger
