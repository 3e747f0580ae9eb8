#include <fstream>
#include <sstream>

#include "dexmouse/logger.hpp"
#include "dexmouse/retarget.hpp"

namespace dexmouse::logger {

using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits into lines; the flag says whether the final line had a newline.
std::vector<std::string_view> split_lines(std::string_view text, bool& last_terminated) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  last_terminated = true;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      last_terminated = false;
      break;
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

}  // namespace

Episode parse_episode(std::string_view text) {
  bool terminated = true;
  const auto lines = split_lines(text, terminated);
  if (lines.empty()) throw LogError("empty episode");
  Episode ep;
  try {
    ep.header = header_from_json(json::parse(lines[0]));
  } catch (const json::exception& e) {
    throw LogError(std::string("line 1: ") + e.what());
  }
  const std::size_t targets = ep.header.profile_doc.contains("joints") ? ep.header.profile_doc["joints"].size() : 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    try {
      ep.records.push_back(record_from_json(json::parse(lines[i]), targets));
    } catch (const std::exception& e) {
      throw LogError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return ep;
}

Episode read_episode(const std::filesystem::path& path) { return parse_episode(slurp(path)); }

ValidationReport validate_text(std::string_view text) {
  ValidationReport report;
  auto violate = [&](std::size_t line, std::string msg) { report.violations.push_back({line, std::move(msg)}); };

  bool terminated = true;
  const auto lines = split_lines(text, terminated);
  if (lines.empty()) {
    violate(1, "missing header");
    return report;
  }

  std::optional<std::size_t> targets;
  bool header_ok = false;
  try {
    const json h = json::parse(lines[0]);
    if (!h.is_object() || h.value("type", json()) != "header") {
      violate(1, "missing header: first record is not a header");
    } else {
      if (!h.contains("schema_version") || h["schema_version"] != kSchemaVersion) {
        violate(1, "unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
      }
      try {
        const auto header = header_from_json(h);
        header_ok = true;
        if (retarget::sha256_hex(header.profile_doc.dump()) != header.profile_hash) {
          violate(1, "profile hash does not match embedded profile");
        }
        try {
          const auto profile = retarget::parse_profile(header.profile_doc);
          targets = profile.joint_count();
          if (profile.name != header.profile_name) violate(1, "profile name does not match embedded profile");
        } catch (const std::exception& e) {
          violate(1, std::string("embedded profile invalid: ") + e.what());
        }
      } catch (const std::exception& e) {
        violate(1, e.what());
      }
    }
  } catch (const std::exception& e) {
    violate(1, std::string("missing header: ") + e.what());
  }

  std::map<Stream, std::int64_t> last_t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = lines[i];
    if (line.empty()) {
      violate(line_no, "empty line");
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      if (i + 1 == lines.size() && !terminated) violate(line_no, "partial record (truncated last line)");
      else violate(line_no, std::string("malformed JSON: ") + e.what());
      continue;
    }
    try {
      if (j.is_object() && j.value("type", json()) == "header") {
        violate(line_no, "duplicate header");
        continue;
      }
      const LogRecord r = record_from_json(j, targets);
      ++report.records;
      auto it = last_t.find(r.stream);
      if (it != last_t.end()) {
        const bool ordered = r.stream == Stream::Event ? r.t.ns >= it->second : r.t.ns > it->second;
        if (!ordered) {
          violate(line_no, std::string(to_string(r.stream)) + " timestamp " + std::to_string(r.t.ns) +
                               " not after previous " + std::to_string(it->second));
          continue;
        }
      }
      last_t[r.stream] = r.t.ns;
    } catch (const std::exception& e) {
      violate(line_no, e.what());
    }
  }
  if (!header_ok && report.violations.empty()) violate(1, "missing header");
  return report;
}

ValidationReport validate(const std::filesystem::path& path) {
  std::string text;
  try {
    text = slurp(path);
  } catch (const std::exception& e) {
    ValidationReport r;
    r.violations.push_back({0, e.what()});
    return r;
  }
  return validate_text(text);
}

}  // namespace dexmouse::logger
