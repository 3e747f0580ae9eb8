#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "dexmouse/retarget.hpp"

namespace dexmouse::retarget {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

DeviceRange default_range(ChannelId ch) {
  if (ch.kind() == ChannelKind::ThumbAA) return {1024, 3072, false};
  return {1000, 3000, true};
}

}  // namespace

void validate_profile(const HandProfile& p) {
  if (p.name.empty()) throw ProfileError("profile name is empty");
  if (!(p.rate_limit > 0.0 && p.rate_limit <= 1.0)) throw ProfileError("rate_limit must be in (0,1]");

  std::set<std::string> declared;
  for (const auto& j : p.joints) {
    if (!declared.insert(j.id).second) throw ProfileError("duplicate joint '" + j.id + "'");
    if (!(j.theta_min < j.theta_max)) throw ProfileError("joint '" + j.id + "': theta_min must be < theta_max");
  }

  std::set<std::string> mapped;
  for (int c = 0; c < kChannelCount; ++c) {
    const ChannelId ch{c};
    const auto& range = p.device_ranges[static_cast<std::size_t>(c)];
    if (!(range.q_min < range.q_max)) {
      throw ProfileError(std::string(channel_name(ch)) + ": q_min must be < q_max");
    }
    const auto& maps = p.channel_maps[static_cast<std::size_t>(c)];
    if (ch.actuated() && maps.empty() && !p.log_only[static_cast<std::size_t>(c)]) {
      throw ProfileError(std::string(channel_name(ch)) + ": FE channel has no joint map and is not log_only");
    }
    if (p.log_only[static_cast<std::size_t>(c)] && !maps.empty()) {
      throw ProfileError(std::string(channel_name(ch)) + ": log_only channel must not map joints");
    }
    for (const auto& m : maps) {
      if (!declared.contains(m.joint_id)) throw ProfileError("map references undeclared joint '" + m.joint_id + "'");
      if (m.joint_index >= p.joints.size() || p.joints[m.joint_index].id != m.joint_id) {
        throw ProfileError("joint map index for '" + m.joint_id + "' is stale");
      }
      if (!mapped.insert(m.joint_id).second) {
        throw ProfileError("joint '" + m.joint_id + "' appears in more than one joint map");
      }
      if (!(m.weight > 0.0 && m.weight <= 1.0)) throw ProfileError("joint '" + m.joint_id + "': weight must be in (0,1]");
      if (!(m.theta_min < m.theta_max)) throw ProfileError("joint '" + m.joint_id + "': invalid limits");
    }
  }
  for (const auto& j : p.joints) {
    if (!mapped.contains(j.id)) {
      if (!j.neutral) throw ProfileError("unmapped joint '" + j.id + "' needs a neutral angle");
      if (*j.neutral < j.theta_min || *j.neutral > j.theta_max) {
        throw ProfileError("joint '" + j.id + "': neutral outside limits");
      }
    }
  }
}

HandProfile parse_profile(const json& doc) {
  HandProfile p;
  try {
    p.name = doc.at("name").get<std::string>();
    p.rate_limit = doc.value("rate_limit", 0.05);

    for (const auto& j : doc.at("joints")) {
      JointSpec spec;
      spec.id = j.at("id").get<std::string>();
      spec.theta_min = j.at("theta_min").get<double>();
      spec.theta_max = j.at("theta_max").get<double>();
      if (j.contains("neutral")) spec.neutral = j.at("neutral").get<double>();
      p.joints.push_back(std::move(spec));
    }

    for (std::size_t c = 0; c < p.device_ranges.size(); ++c) {
      p.device_ranges[c] = default_range(ChannelId{static_cast<int>(c)});
    }
    if (doc.contains("device_ranges")) {
      for (const auto& [name, r] : doc.at("device_ranges").items()) {
        const auto ch = parse_channel(name);
        auto& range = p.device_ranges[static_cast<std::size_t>(ch.index())];
        range.q_min = r.at("q_min").get<std::int64_t>();
        range.q_max = r.at("q_max").get<std::int64_t>();
        range.flexion_decreases = r.value("flexion_decreases", ch.actuated());
      }
    }

    for (const auto& name : doc.value("log_only", std::vector<std::string>{})) {
      p.log_only[static_cast<std::size_t>(parse_channel(name).index())] = true;
    }

    for (const auto& [name, maps] : doc.at("channels").items()) {
      const auto ch = parse_channel(name);
      for (const auto& m : maps) {
        JointMap jm;
        jm.joint_id = m.at("joint").get<std::string>();
        jm.weight = m.value("weight", 1.0);
        jm.invert = m.value("invert", false);
        for (std::size_t j = 0; j < p.joints.size(); ++j) {
          if (p.joints[j].id == jm.joint_id) {
            jm.theta_min = p.joints[j].theta_min;
            jm.theta_max = p.joints[j].theta_max;
            jm.joint_index = j;
          }
        }
        p.channel_maps[static_cast<std::size_t>(ch.index())].push_back(std::move(jm));
      }
    }
  } catch (const json::exception& e) {
    throw ProfileError(std::string("malformed profile: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProfileError(e.what());
  }

  p.canonical_json = doc.dump();
  p.content_hash = sha256_hex(p.canonical_json);
  validate_profile(p);
  return p;
}

HandProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProfileError("cannot open profile " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ProfileError(path.string() + ": " + e.what());
  }
  return parse_profile(doc);
}

}  // namespace dexmouse::retarget
