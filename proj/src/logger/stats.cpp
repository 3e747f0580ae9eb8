#include "dexmouse/logger.hpp"

namespace dexmouse::logger {

EpisodeStats stats(const Episode& episode) {
  EpisodeStats s;
  for (auto st : kAllStreams) s.records[st] = 0;
  if (episode.records.empty()) {
    s.end_missing = true;
    return s;
  }

  std::optional<std::int64_t> start;
  std::optional<std::int64_t> end;
  std::int64_t last = episode.records.front().t.ns;
  PerActuated<std::uint64_t> contact_on{};
  std::uint64_t contact_rows = 0;

  for (const auto& r : episode.records) {
    ++s.records[r.stream];
    last = std::max(last, r.t.ns);
    if (r.stream == Stream::Event) {
      const auto& tag = std::get<std::string>(r.payload);
      if (tag == event::kStart && !start) start = r.t.ns;
      if ((tag == event::kEndSuccess || tag == event::kEndFailure) && !end) {
        end = r.t.ns;
        s.success = tag == event::kEndSuccess;
      }
    } else if (r.stream == Stream::Contact) {
      const auto& c = std::get<PerActuated<bool>>(r.payload);
      ++contact_rows;
      for (std::size_t i = 0; i < c.size(); ++i) contact_on[i] += c[i] ? 1 : 0;
    }
  }

  const std::int64_t t0 = start.value_or(episode.records.front().t.ns);
  s.end_missing = !end.has_value();
  const std::int64_t t1 = end.value_or(last);
  s.duration_s = static_cast<double>(t1 - t0) / 1e9;
  if (s.success) s.completion_s = s.duration_s;
  for (std::size_t i = 0; i < contact_on.size(); ++i) {
    s.contact_fraction[i] = contact_rows == 0 ? 0.0 : static_cast<double>(contact_on[i]) / static_cast<double>(contact_rows);
  }
  return s;
}

nlohmann::json to_json(const EpisodeStats& s) {
  nlohmann::json records = nlohmann::json::object();
  for (const auto& [st, n] : s.records) records[to_string(st)] = n;
  return {{"duration_s", s.duration_s},
          {"records", records},
          {"contact_fraction", s.contact_fraction},
          {"success", s.success},
          {"completion_s", s.completion_s ? nlohmann::json(*s.completion_s) : nlohmann::json(nullptr)},
          {"end_missing", s.end_missing}};
}

void write_stats_csv(std::ostream& os, const EpisodeStats& s) {
  os << "duration_s,success,completion_s,end_missing";
  for (auto st : kAllStreams) os << ",records_" << to_string(st);
  for (int i = 0; i < kActuatedCount; ++i) os << ",contact_" << channel_name(ChannelId{i});
  os << '\n' << s.duration_s << ',' << (s.success ? 1 : 0) << ',';
  if (s.completion_s) os << *s.completion_s;
  os << ',' << (s.end_missing ? 1 : 0);
  for (auto st : kAllStreams) os << ',' << s.records.at(st);
  for (double f : s.contact_fraction) os << ',' << f;
  os << '\n';
}

}  // namespace dexmouse::logger
