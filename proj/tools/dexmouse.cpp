#include <CLI11.hpp>

#include <charconv>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dexmouse/logger.hpp"
#include "dexmouse/retarget.hpp"
#include "dexmouse/session.hpp"
#include "dexmouse/streams.hpp"
#include "dexmouse/wire.hpp"

using namespace dexmouse;
using nlohmann::json;

namespace {

std::atomic<session::Session*> g_session{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_session.load()) s->request_stop();
}

// "key=value" pairs into a JSON object of numbers.
json parse_overrides(const std::vector<std::string>& kv) {
  json out = json::object();
  for (const auto& item : kv) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--param", "expected key=value, got '" + item + "'");
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    try {
      out[key] = json::parse(val);
    } catch (const json::exception&) {
      throw CLI::ValidationError("--param", "value for '" + key + "' is not a number");
    }
  }
  return out;
}

std::string read_all(std::istream& in) {
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int cmd_run(const std::string& profile, const std::string& scenario, bool sim_clock, int port,
            const std::string& script, std::optional<std::uint64_t> cycles, std::uint64_t seed,
            const std::string& log_dir, const std::string& pose, const std::vector<std::string>& params,
            const std::string& replay_source, const std::string& alias) {
  session::SessionConfig cfg;
  cfg.profile_path = profile;
  cfg.scenario_path = scenario;
  cfg.clock = sim_clock ? session::ClockMode::Simulated : session::ClockMode::Wall;
  cfg.api_port = port;
  if (!script.empty()) cfg.script = session::load_script(script);
  cfg.max_cycles = cycles;
  cfg.seed = seed;
  cfg.log_dir = log_dir;
  cfg.pose_path = pose;
  cfg.ff_overrides = parse_overrides(params);
  cfg.operator_alias = alias;
  if (!replay_source.empty()) {
    cfg.mode = session::InputMode::Replay;
    cfg.replay_source = replay_source;
  }
  if (sim_clock && !cycles && !(cfg.script && cfg.script->cycles) && cfg.mode == session::InputMode::Virtual) {
    std::cerr << "dexmouse: --sim-clock needs --cycles or a script with \"cycles\"\n";
    return 2;
  }

  session::Session s(std::move(cfg));
  if (port >= 0) std::cerr << "api listening on ws://127.0.0.1:" << s.api_port() << "\n";
  g_session = &s;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto report = s.run();
  g_session = nullptr;
  std::cout << session::to_json(report).dump(2) << "\n";
  return report.errors.empty() ? 0 : 1;
}

int cmd_replay(const std::string& file, const std::vector<std::string>& params) {
  const auto ep = logger::read_episode(file);
  std::optional<firmware::ForceFeedbackParams> p;
  if (!params.empty()) p = logger::params_from_json(parse_overrides(params), ep.header.ff_params);
  const auto r = logger::replay(ep, p);
  json out = {{"cycles", r.cycles}, {"compared", r.compared}, {"divergences", r.divergences}};
  if (r.first) {
    out["first"] = {{"stream", logger::to_string(r.first->stream)}, {"t", r.first->t.ns}, {"detail", r.first->detail}};
  }
  std::cout << out.dump(2) << "\n";
  return r.ok() ? 0 : 1;
}

int cmd_validate(const std::string& file) {
  const auto r = logger::validate(file);
  for (const auto& v : r.violations) std::cout << file << ":" << v.line << ": " << v.message << "\n";
  std::cout << r.records << " records, " << r.violations.size() << " violations\n";
  return r.ok() ? 0 : 1;
}

int cmd_stats(const std::string& file, bool csv) {
  const auto s = logger::stats(logger::read_episode(file));
  if (csv) logger::write_stats_csv(std::cout, s);
  else std::cout << logger::to_json(s).dump(2) << "\n";
  return 0;
}

int cmd_retarget(const std::string& profile_path, const std::string& input, const std::string& output) {
  const auto profile = retarget::load_profile(profile_path);
  std::ifstream fin;
  if (!input.empty() && input != "-") {
    fin.open(input);
    if (!fin) throw std::runtime_error("cannot open " + input);
  }
  std::istream& in = fin.is_open() ? fin : std::cin;
  std::ofstream fout;
  if (!output.empty() && output != "-") fout.open(output);
  std::ostream& out = fout.is_open() ? fout : std::cout;

  std::string line;
  std::size_t lineno = 0;
  bool with_time = false;
  bool header_written = false;
  auto write_header = [&] {
    if (with_time) out << "t_ns,";
    for (std::size_t j = 0; j < profile.joints.size(); ++j) out << (j ? "," : "") << profile.joints[j].id;
    out << "\n";
    header_written = true;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (lineno == 1 && !cells.empty() && !cells[0].empty() && !std::isdigit(static_cast<unsigned char>(cells[0][0])) &&
        cells[0][0] != '-') {
      with_time = cells[0] == "t_ns";
      continue;
    }
    if (!header_written) write_header();
    const std::size_t off = with_time ? 1 : 0;
    if (cells.size() != off + kChannelCount) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " + std::to_string(off + kChannelCount) +
                               " columns, got " + std::to_string(cells.size()));
    }
    PerChannel<NormalizedFlexion> u{};
    for (std::size_t c = 0; c < u.size(); ++c) {
      std::int64_t q;
      try {
        q = std::stoll(cells[off + c]);
      } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": bad tick value '" + cells[off + c] + "'");
      }
      u[c] = retarget::normalize(Ticks{q}, profile.device_ranges[c]);
    }
    const auto targets = retarget::retarget_flexion(u, profile);
    if (with_time) out << cells[0] << ",";
    char buf[32];
    for (std::size_t j = 0; j < targets.joints.size(); ++j) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, targets.joints[j].angle);
      if (j) out << ',';
      out.write(buf, p - buf);
    }
    out << "\n";
  }
  if (!header_written) write_header();
  return 0;
}

int cmd_wire_dump(const std::string& hex, const std::string& file) {
  std::string text = hex;
  if (text.empty()) {
    if (!file.empty() && file != "-") {
      std::ifstream in(file);
      if (!in) throw std::runtime_error("cannot open " + file);
      text = read_all(in);
    } else {
      text = read_all(std::cin);
    }
  }
  const auto bytes = wire::parse_hex(text);
  // byte-at-a-time feeding reports frames and diagnostics in stream order
  wire::Decoder dec;
  std::size_t frames = 0, diagnostics = 0, residue = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto r = dec.feed(std::span(bytes).subspan(i, 1));
    for (const auto& d : r.diagnostics) {
      std::cout << wire::to_string(d.kind) << " offset=" << d.offset << " bytes=" << d.bytes << "\n";
    }
    for (const auto& f : r.frames) std::cout << "frame " << wire::describe(f) << "\n";
    frames += r.frames.size();
    diagnostics += r.diagnostics.size();
    residue = r.residue;
  }
  for (const auto& d : dec.finish()) {
    std::cout << wire::to_string(d.kind) << " offset=" << d.offset << " bytes=" << d.bytes << "\n";
    ++diagnostics;
  }
  std::cout << bytes.size() << " bytes: " << frames << " frames, " << diagnostics << " diagnostics, " << residue
            << " residue\n";
  return diagnostics == 0 && residue == 0 ? 0 : 1;
}

int cmd_export(const std::string& file, std::int64_t rate, std::int64_t max_gap, const std::string& output) {
  const auto ep = logger::read_episode(file);
  const auto aligned = streams::align(logger::align_input(ep), rate, max_gap);
  const auto names = logger::joint_names(ep);
  if (!output.empty() && output != "-") {
    std::ofstream out(output);
    if (!out) throw std::runtime_error("cannot write " + output);
    streams::write_csv(out, aligned.rows, names);
  } else {
    streams::write_csv(std::cout, aligned.rows, names);
  }
  std::cerr << aligned.rows.size() << " rows, " << aligned.dropped << " dropped for gaps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dexmouse: force-feedback glove simulator, recorder and tools"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dexmouse 0.1.0");

  auto* run = app.add_subcommand("run", "run a live or simulated session");
  std::string profile, scenario, script, log_dir, pose = "circle", replay_source, alias = "anonymous";
  bool sim_clock = false;
  int port = -1;
  std::optional<std::uint64_t> cycles;
  std::uint64_t seed = 1;
  std::vector<std::string> params;
  run->add_option("--profile", profile, "hand profile JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--scenario", scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_flag("--sim-clock", sim_clock, "run as fast as possible on simulated time");
  run->add_option("--port", port, "WebSocket API port on 127.0.0.1 (0 picks one)");
  run->add_option("--script", script, "scripted inputs JSON")->check(CLI::ExistingFile);
  run->add_option("--cycles", cycles, "stop after this many 10 ms cycles");
  run->add_option("--seed", seed, "seed for the mock tracker and bus noise");
  run->add_option("--log-dir", log_dir, "episode directory (default $DEXMOUSE_LOG_DIR, then .)");
  run->add_option("--pose", pose, "mock wrist path: static, circle[:r[:T]], figure8[:r[:T]]");
  run->add_option("--param", params, "force-feedback override key=value, repeatable");
  run->add_option("--replay-source", replay_source, "drive the loop from a recorded episode")->check(CLI::ExistingFile);
  run->add_option("--operator", alias, "free-text operator alias");

  auto* rep = app.add_subcommand("replay", "re-run an episode and compare outputs bit-exactly");
  std::string file;
  std::vector<std::string> rep_params;
  rep->add_option("file", file, "episode .jsonl")->required()->check(CLI::ExistingFile);
  rep->add_option("--param", rep_params, "override a logged force-feedback parameter key=value");

  auto* val = app.add_subcommand("validate", "check an episode file");
  val->add_option("file", file, "episode .jsonl")->required()->check(CLI::ExistingFile);

  auto* st = app.add_subcommand("stats", "episode summary");
  bool csv = false;
  st->add_option("file", file, "episode .jsonl")->required()->check(CLI::ExistingFile);
  st->add_flag("--csv", csv, "CSV instead of JSON");

  auto* rt = app.add_subcommand("retarget", "map CSV rows of six tick values to joint angles");
  std::string rt_in, rt_out;
  rt->add_option("--profile", profile, "hand profile JSON")->required()->check(CLI::ExistingFile);
  rt->add_option("--input,-i", rt_in, "input CSV (default stdin)");
  rt->add_option("--output,-o", rt_out, "output CSV (default stdout)");

  auto* wire_cmd = app.add_subcommand("wire", "bus protocol tools");
  wire_cmd->require_subcommand(1);
  auto* dump = wire_cmd->add_subcommand("dump", "decode a hex byte stream into frames and diagnostics");
  std::string hex, hex_file;
  dump->add_option("--hex", hex, "hex bytes, e.g. \"FF FF FD 00 01 03 00 01 19 4E\"");
  dump->add_option("file", hex_file, "file of hex text (default stdin)");

  auto* ex = app.add_subcommand("export", "align an episode's streams onto a fixed grid as CSV");
  std::int64_t rate = 20, max_gap = 150;
  std::string ex_out;
  ex->add_option("file", file, "episode .jsonl")->required()->check(CLI::ExistingFile);
  ex->add_option("--rate", rate, "grid rate in Hz")->check(CLI::PositiveNumber);
  ex->add_option("--max-gap", max_gap, "drop rows whose held samples are older than this (ms)");
  ex->add_option("--output,-o", ex_out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(profile, scenario, sim_clock, port, script, cycles, seed, log_dir, pose, params, replay_source,
                     alias);
    }
    if (*rep) return cmd_replay(file, rep_params);
    if (*val) return cmd_validate(file);
    if (*st) return cmd_stats(file, csv);
    if (*rt) return cmd_retarget(profile, rt_in, rt_out);
    if (*dump) return cmd_wire_dump(hex, hex_file);
    if (*ex) return cmd_export(file, rate, max_gap, ex_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "dexmouse: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
