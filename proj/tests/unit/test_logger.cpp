#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "dexmouse/logger.hpp"
#include "dexmouse/pipeline.hpp"
#include "fixtures.hpp"

using namespace dexmouse;
using namespace dexmouse::logger;
using nlohmann::json;

namespace {

retarget::HandProfile igris() { return retarget::load_profile(test::data_path("profiles/igrisc-11dof.json")); }

EpisodeHeader header_for(const retarget::HandProfile& p, ReplayState initial,
                         firmware::ForceFeedbackParams ff = {}) {
  EpisodeHeader h;
  h.session_id = "test";
  h.profile_name = p.name;
  h.profile_hash = p.content_hash;
  h.profile_doc = json::parse(p.canonical_json);
  h.scenario_name = "none";
  h.scenario_doc = json{{"name", "none"}, {"events", json::array()}};
  h.ff_params = ff;
  h.start_wall_clock = "2000-01-01T00:00:00Z";
  h.initial = std::move(initial);
  return h;
}

std::string to_text(const EpisodeHeader& h, const std::vector<LogRecord>& records) {
  std::string out = to_json(h).dump() + '\n';
  for (const auto& r : records) out += serialize(r) + '\n';
  return out;
}

// Index finger pinned at a block of u=0.5 (tick 2000); the operator flexes 2 ticks per cycle past it,
// so penetration after cycle k is 2k ticks and first exceeds eps=100 at k=51.
Episode slow_penetration(int cycles) {
  const auto p = igris();
  firmware::SensorInputs first;
  first.fe.fill(Ticks{2000});
  first.aa_raw = 2048;
  simhand::Scenario none;
  auto init = ControlPipeline::rest_state(first, p, none);
  init.hand.block[0] = 0.5;

  Episode ep;
  ep.header = header_for(p, init);
  ControlPipeline pipe(p, {}, init);
  ep.records.push_back(LogRecord::event(Timestamp{0}, event::kStart));
  for (int k = 1; k <= cycles; ++k) {
    const Timestamp t = Timestamp::from_cycle(static_cast<std::uint64_t>(k));
    PerChannel<std::int64_t> raw{2000 - 2 * k, 2000, 2000, 2000, 2000, 2048};
    const auto& out = pipe.step(firmware::SensorInputs::from_raw(raw), t);
    ep.records.push_back(LogRecord::joints(t, raw));
    ep.records.push_back(LogRecord::torque(t, out.tau));
    ep.records.push_back(LogRecord::robot_targets(t, out.targets.angles()));
    ep.records.push_back(LogRecord::contact(t, out.contact));
  }
  ep.records.push_back(LogRecord::event(Timestamp::from_cycle(static_cast<std::uint64_t>(cycles)), event::kEndSuccess));
  return ep;
}

}  // namespace

TEST_CASE("every record type round-trips") {
  const std::vector<LogRecord> records = {
      LogRecord::joints(Timestamp{10}, {1, 2, 3, 4, 4095, -7}),
      LogRecord::torque(Timestamp{10}, {0.0, 750.0, 1000.0, 0.1, 1e-300}),
      LogRecord::robot_targets(Timestamp{10}, {0.0, 1.6, 0.1 + 0.2, -0.5}),
      LogRecord::contact(Timestamp{10}, {true, false, false, true, false}),
      LogRecord::pose(streams::make_pose(Timestamp{20}, {0.1, -0.2, 0.3}, {0.7, 0.1, 0.2, 0.3})),
      LogRecord::camera({42, Timestamp{30}}),
      LogRecord::event(Timestamp{40}, event::block(2, 0.55)),
  };
  for (const auto& r : records) {
    const auto back = record_from_json(json::parse(serialize(r)));
    CHECK(back == r);
  }
}

TEST_CASE("header round-trips including replay state") {
  auto ep = slow_penetration(3);
  const auto back = header_from_json(to_json(ep.header));
  CHECK(back.initial == ep.header.initial);
  CHECK(back.ff_params == ep.header.ff_params);
  CHECK(back.profile_hash == ep.header.profile_hash);
  CHECK(back.profile_doc == ep.header.profile_doc);
}

TEST_CASE("params json") {
  auto p = params_from_json(json{{"epsilon", 150}, {"gamma", 0.2}});
  CHECK(p.epsilon == Ticks{150});
  CHECK(p.gamma == 0.2);
  CHECK(p.k_nominal == 5.0);
  CHECK_THROWS_AS(params_from_json(json{{"gamma", 3}}), firmware::ParameterError);
  CHECK_THROWS(params_from_json(json{{"nonsense", 1}}));
  CHECK(params_from_json(to_json(firmware::ForceFeedbackParams{})) == firmware::ForceFeedbackParams{});
}

TEST_CASE("block event tags") {
  CHECK(event::block(0, 0.6) == "block:index_fe:0.6");
  CHECK(event::block(3, std::nullopt) == "block:little_fe:none");
  const auto b = event::parse_block("block:little_fe:none");
  REQUIRE(b);
  CHECK(b->first == 3);
  CHECK_FALSE(b->second);
  CHECK(event::parse_block(event::block(1, 0.1 + 0.2))->second == 0.1 + 0.2);
  CHECK_FALSE(event::parse_block("start"));
  CHECK_FALSE(event::parse_block("block:thumb_aa:0.5"));
}

TEST_CASE("writer rejects records before the header") {
  auto sink = std::make_unique<MemorySink>();
  auto* mem = sink.get();
  EpisodeWriter w(std::move(sink));
  CHECK_THROWS_AS(w.record(LogRecord::event(Timestamp{0}, "start")), LogError);
  w.write_header(slow_penetration(1).header);
  CHECK_THROWS_AS(w.write_header(slow_penetration(1).header), LogError);
  for (int k = 0; k < 100; ++k) w.record(LogRecord::joints(Timestamp::from_cycle(static_cast<std::uint64_t>(k)), {}));
  CHECK(w.records_written() == 100);
  CHECK(mem->lines.size() == 101);
  // one flush per 100 ms of record time
  CHECK(mem->flushes >= 9);
  CHECK(mem->flushes <= 11);
}

TEST_CASE("file and async sinks write readable episodes") {
  const auto ep = slow_penetration(20);
  const auto path = std::filesystem::temp_directory_path() / "dexmouse_async_sink_test.jsonl";
  {
    EpisodeWriter w(std::make_unique<AsyncSink>(std::make_unique<FileSink>(path), 8));
    w.write_header(ep.header);
    for (const auto& r : ep.records) w.record(r);
    w.close();
  }
  const auto back = read_episode(path);
  CHECK(back.records == ep.records);
  CHECK(validate(path).ok());
  std::filesystem::remove(path);
}

TEST_CASE("storage failure surfaces as StorageError") {
  auto lines = std::make_shared<std::vector<std::string>>();
  EpisodeWriter w(std::make_unique<test::SharedSink>(lines, 3));
  w.write_header(slow_penetration(1).header);
  w.record(LogRecord::event(Timestamp{0}, "start"));
  w.record(LogRecord::event(Timestamp{0}, "x"));
  CHECK_THROWS_AS(w.record(LogRecord::event(Timestamp{0}, "y")), StorageError);
  CHECK_THROWS_AS(FileSink("/nonexistent-dir/x.jsonl"), StorageError);
}

TEST_CASE("validator: clean episode") {
  const auto ep = slow_penetration(50);
  const auto report = validate_text(to_text(ep.header, ep.records));
  CHECK(report.ok());
  CHECK(report.records == ep.records.size());
}

TEST_CASE("validator: out-of-order pose is one violation at its line") {
  const auto ep = slow_penetration(5);
  auto records = ep.records;
  records.push_back(LogRecord::pose(streams::make_pose(Timestamp{100'000'000}, {}, {1, 0, 0, 0})));
  records.push_back(LogRecord::pose(streams::make_pose(Timestamp{50'000'000}, {}, {1, 0, 0, 0})));
  records.push_back(LogRecord::pose(streams::make_pose(Timestamp{150'000'000}, {}, {1, 0, 0, 0})));
  const auto report = validate_text(to_text(ep.header, records));
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].line == records.size());  // header is line 1
}

TEST_CASE("validator: truncated last line") {
  const auto ep = slow_penetration(5);
  auto text = to_text(ep.header, ep.records);
  text += serialize(LogRecord::camera({0, Timestamp{60'000'000}})).substr(0, 20);
  const auto report = validate_text(text);
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].message.find("partial record") != std::string::npos);
  CHECK(report.records == ep.records.size());
}

TEST_CASE("validator: header problems") {
  const auto ep = slow_penetration(2);
  CHECK_FALSE(validate_text("").ok());
  CHECK_FALSE(validate_text(serialize(ep.records[0]) + "\n").ok());
  auto h = ep.header;
  h.profile_hash = std::string(64, '0');
  CHECK_FALSE(validate_text(to_text(h, ep.records)).ok());
  auto j = to_json(ep.header);
  j["schema_version"] = 99;
  CHECK_FALSE(validate_text(j.dump() + "\n").ok());
  auto bad_arity = to_json(LogRecord::joints(Timestamp{0}, {}));
  bad_arity["v"].erase(0);
  CHECK_FALSE(validate_text(to_json(ep.header).dump() + "\n" + bad_arity.dump() + "\n").ok());
  const auto two_headers = to_json(ep.header).dump() + "\n" + to_json(ep.header).dump() + "\n";
  CHECK_FALSE(validate_text(two_headers).ok());
}

TEST_CASE("validator is total on arbitrary bytes") {
  const auto ep = slow_penetration(30);
  const auto clean = to_text(ep.header, ep.records);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    std::string text = clean;
    const int edits = 1 + static_cast<int>(rng() % 20);
    for (int e = 0; e < edits; ++e) {
      const auto pos = static_cast<std::size_t>(rng() % text.size());
      switch (rng() % 3) {
        case 0: text[pos] = static_cast<char>(rng()); break;
        case 1: text.erase(pos, 1 + rng() % 40); break;
        default: text.insert(pos, 1, static_cast<char>(rng())); break;
      }
      if (text.empty()) text = "x";
    }
    CHECK_NOTHROW(validate_text(text));
  }
  std::string noise(4096, '\0');
  for (auto& c : noise) c = static_cast<char>(rng());
  CHECK_NOTHROW(validate_text(noise));
  CHECK_FALSE(validate_text(noise).ok());
}

TEST_CASE("replay: recorded episode has zero divergences") {
  const auto ep = slow_penetration(200);
  const auto report = replay(ep);
  CHECK(report.ok());
  CHECK(report.cycles == 200);
  CHECK(report.compared == 600);
  // and through the text form
  CHECK(replay(parse_episode(to_text(ep.header, ep.records))).ok());
}

TEST_CASE("replay: perturbed epsilon diverges at the first penetration") {
  const auto ep = slow_penetration(200);
  CHECK(std::get<PerActuated<double>>(ep.records[4 * 50 + 2].payload)[0] > 0.0);  // cycle 51 torque
  CHECK(std::get<PerActuated<double>>(ep.records[4 * 49 + 2].payload)[0] == 0.0);  // cycle 50 torque
  firmware::ForceFeedbackParams p;
  p.epsilon = Ticks{150};
  const auto report = replay(ep, p);
  REQUIRE(report.first);
  CHECK(report.first->stream == Stream::Torque);
  CHECK(report.first->t == Timestamp::from_cycle(51));
}

TEST_CASE("replay: header-only episode") {
  auto ep = slow_penetration(0);
  ep.records.clear();
  const auto report = replay(ep);
  CHECK(report.ok());
  CHECK(report.cycles == 0);
}

TEST_CASE("replay: tampered record and missing record") {
  auto ep = slow_penetration(20);
  auto tampered = ep;
  std::get<PerActuated<bool>>(tampered.records[4 * 9 + 4].payload)[2] = true;
  auto r = replay(tampered);
  REQUIRE(r.first);
  CHECK(r.first->stream == Stream::Contact);
  CHECK(r.first->t == Timestamp::from_cycle(10));

  auto missing = ep;
  missing.records.erase(missing.records.begin() + 4 * 5 + 3);
  r = replay(missing);
  REQUIRE(r.first);
  CHECK(r.first->detail.find("missing") != std::string::npos);
}

TEST_CASE("stats: contact fraction, success, completion") {
  auto ep = slow_penetration(0);
  ep.records.clear();
  ep.records.push_back(LogRecord::event(Timestamp{0}, event::kStart));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const bool on = k >= 300 && k < 500;  // 2 s out of 10 s
    ep.records.push_back(LogRecord::contact(Timestamp::from_cycle(k), {on, false, false, false, false}));
  }
  ep.records.push_back(LogRecord::event(Timestamp::from_cycle(1000), event::kEndSuccess));
  const auto s = stats(ep);
  CHECK(s.contact_fraction[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(s.contact_fraction[1] == 0.0);
  CHECK(s.success);
  REQUIRE(s.completion_s);
  CHECK(*s.completion_s == doctest::Approx(10.0));
  CHECK(s.duration_s == doctest::Approx(10.0));
  CHECK_FALSE(s.end_missing);
  CHECK(s.records.at(Stream::Contact) == 1000);
}

TEST_CASE("stats: no contact, missing end") {
  auto ep = slow_penetration(0);
  ep.records.clear();
  for (std::uint64_t k = 0; k < 100; ++k) {
    ep.records.push_back(LogRecord::contact(Timestamp::from_cycle(k), {}));
  }
  const auto s = stats(ep);
  for (double f : s.contact_fraction) CHECK(f == 0.0);
  CHECK_FALSE(s.success);
  CHECK(s.end_missing);
  CHECK(s.duration_s == doctest::Approx(0.99));
  std::ostringstream os;
  write_stats_csv(os, s);
  CHECK(os.str().rfind("duration_s,", 0) == 0);
  CHECK(to_json(s)["end_missing"] == true);
}

TEST_CASE("60 s session yields rate x duration records per stream") {
  test::Capture cap;
  session::Session s(test::sim_config("pick_place", 6000, cap));
  s.run();
  const auto ep = parse_episode(cap.only_text());
  const auto st = stats(ep);
  CHECK(st.records.at(Stream::Joints) == 6000);
  CHECK(st.records.at(Stream::Torque) == 6000);
  CHECK(st.records.at(Stream::Pose) >= 1199);
  CHECK(st.records.at(Stream::Pose) <= 1201);
  CHECK(st.records.at(Stream::Camera) >= 1799);
  CHECK(st.records.at(Stream::Camera) <= 1801);
  CHECK(st.duration_s == doctest::Approx(60.0));
  CHECK(st.success);
}
