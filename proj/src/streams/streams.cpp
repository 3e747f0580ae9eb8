#include "dexmouse/streams.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

namespace dexmouse::streams {

Pose make_pose(Timestamp t, std::array<double, 3> position, std::array<double, 4> q) {
  const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!std::isfinite(norm) || norm == 0.0) throw std::invalid_argument("degenerate quaternion");
  for (auto& c : q) c /= norm;
  return Pose{t, position, q};
}

PathSpec PathSpec::parse(std::string_view text) {
  PathSpec spec;
  auto next = [&text]() -> std::string_view {
    const auto pos = text.find(':');
    auto tok = text.substr(0, pos);
    text = pos == std::string_view::npos ? std::string_view{} : text.substr(pos + 1);
    return tok;
  };
  auto number = [](std::string_view tok) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size() || !(v > 0)) {
      throw std::invalid_argument("bad path parameter '" + std::string(tok) + "'");
    }
    return v;
  };
  const auto kind = next();
  if (kind == "static") spec.kind = Kind::Static;
  else if (kind == "circle") spec.kind = Kind::Circle;
  else if (kind == "figure8") spec.kind = Kind::Figure8;
  else throw std::invalid_argument("unknown path spec '" + std::string(kind) + "'");
  if (!text.empty()) spec.radius = number(next());
  if (!text.empty()) spec.period_s = number(next());
  if (!text.empty()) throw std::invalid_argument("trailing path parameters");
  return spec;
}

MockPoseSource::MockPoseSource(std::uint64_t seed, std::int64_t rate_hz, PathSpec path)
    : rate_hz_(rate_hz), path_(path) {
  if (rate_hz <= 0) throw std::invalid_argument("pose rate must be > 0");
  std::mt19937_64 rng(seed);
  phase_ = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
}

Pose MockPoseSource::sample(std::int64_t k) const {
  const Timestamp t = grid_time(k, rate_hz_);
  if (path_.kind == PathSpec::Kind::Static) return Pose{t, {0, 0, 0}, {1, 0, 0, 0}};

  const double w = 2.0 * std::numbers::pi / path_.period_s;
  const double a = w * t.seconds() + phase_;
  const double r = path_.radius;
  std::array<double, 3> p{};
  double yaw = 0.0;
  double pitch = 0.0;
  if (path_.kind == PathSpec::Kind::Circle) {
    p = {r * std::cos(a), r * std::sin(a), path_.height};
    yaw = a;
  } else {
    p = {r * std::sin(a), 0.5 * r * std::sin(2.0 * a), path_.height};
    yaw = 0.3 * std::sin(a);
    pitch = 0.2 * std::cos(a);
  }
  // yaw about z, then pitch about y
  const double cy = std::cos(yaw / 2), sy = std::sin(yaw / 2);
  const double cp = std::cos(pitch / 2), sp = std::sin(pitch / 2);
  return make_pose(t, p, {cy * cp, -sy * sp, cy * sp, sy * cp});
}

std::vector<Pose> MockPoseSource::generate(Timestamp until) const {
  std::vector<Pose> out;
  for (std::int64_t k = 0; grid_time(k, rate_hz_) <= until; ++k) out.push_back(sample(k));
  return out;
}

std::vector<CameraFrameRef> camera_frames(std::int64_t rate_hz, Timestamp until) {
  if (rate_hz <= 0) throw std::invalid_argument("camera rate must be > 0");
  std::vector<CameraFrameRef> out;
  for (std::int64_t k = 0; grid_time(k, rate_hz) <= until; ++k) {
    out.push_back({static_cast<std::uint64_t>(k), grid_time(k, rate_hz)});
  }
  return out;
}

namespace {

template <typename T>
void require_ordered(const std::vector<T>& v, const char* name) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1].t < v[i].t)) throw AlignError(std::string(name) + " stream is not strictly time-ordered");
  }
}

// Index of the latest sample at or before t, advancing a monotone cursor.
template <typename T>
std::optional<std::size_t> hold(const std::vector<T>& v, std::size_t& cursor, Timestamp t) {
  while (cursor + 1 < v.size() && v[cursor + 1].t <= t) ++cursor;
  if (v.empty() || v[cursor].t > t) return std::nullopt;
  return cursor;
}

}  // namespace

AlignResult align(const AlignInput& in, std::int64_t rate_hz, std::int64_t max_gap_ms) {
  if (in.control.empty()) throw AlignError("control stream is empty");
  if (rate_hz <= 0) throw AlignError("rate must be > 0");
  if (max_gap_ms < 0) throw AlignError("max_gap must be >= 0");
  require_ordered(in.control, "control");
  require_ordered(in.pose, "pose");
  for (std::size_t i = 1; i < in.camera.size(); ++i) {
    if (!(in.camera[i - 1].t < in.camera[i].t) || !(in.camera[i - 1].frame_index < in.camera[i].frame_index)) {
      throw AlignError("camera stream is not strictly ordered");
    }
  }

  Timestamp start = in.control.front().t;
  if (!in.pose.empty()) start = std::max(start, in.pose.front().t);
  if (!in.camera.empty()) start = std::max(start, in.camera.front().t);
  const Timestamp end = in.control.back().t;
  const std::int64_t max_gap_ns = max_gap_ms * 1'000'000;

  std::int64_t k = start.ns / kNanosPerSecond * rate_hz + (start.ns % kNanosPerSecond) * rate_hz / kNanosPerSecond;
  while (k > 0 && grid_time(k - 1, rate_hz) >= start) --k;
  while (grid_time(k, rate_hz) < start) ++k;

  AlignResult out;
  std::size_t ci = 0, pi = 0, fi = 0;
  for (; grid_time(k, rate_hz) <= end; ++k) {
    const Timestamp t = grid_time(k, rate_hz);
    const auto c = hold(in.control, ci, t);
    const auto p = hold(in.pose, pi, t);
    const auto f = hold(in.camera, fi, t);

    auto stale = [&](Timestamp src) { return t.ns - src.ns > max_gap_ns; };
    bool ok = c && !stale(in.control[*c].t);
    if (!in.pose.empty()) ok = ok && p && !stale(in.pose[*p].t);
    if (!in.camera.empty()) ok = ok && f && !stale(in.camera[*f].t);
    if (!ok) {
      ++out.dropped;
      continue;
    }

    AlignedSample row;
    row.t = t;
    row.control = in.control[*c];
    if (p) row.pose = in.pose[*p];
    if (f) row.frame_index = in.camera[*f].frame_index;
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_csv(std::ostream& os, std::span<const AlignedSample> rows, std::span<const std::string> joint_names) {
  static constexpr const char* kCh[] = {"index_fe", "middle_fe", "ring_fe", "little_fe", "thumb_fe", "thumb_aa"};
  os << "t_ns";
  for (const char* c : kCh) os << ",q_" << c;
  for (int i = 0; i < kActuatedCount; ++i) os << ",tau_" << kCh[i];
  for (int i = 0; i < kActuatedCount; ++i) os << ",contact_" << kCh[i];
  os << ",px,py,pz,qw,qx,qy,qz,frame_index";
  for (const auto& j : joint_names) os << ",joint_" << j;
  os << '\n';

  char buf[32];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    os.write(buf, p - buf);
  };
  for (const auto& r : rows) {
    os << r.t.ns;
    for (auto q : r.control.ticks) os << ',' << q;
    for (auto tau : r.control.tau) os << ',', num(tau);
    for (bool c : r.control.contact) os << ',' << (c ? 1 : 0);
    if (r.pose) {
      for (double v : r.pose->position) os << ',', num(v);
      for (double v : r.pose->orientation) os << ',', num(v);
    } else {
      os << ",,,,,,,";
    }
    os << ',';
    if (r.frame_index) os << *r.frame_index;
    for (double a : r.control.targets) os << ',', num(a);
    os << '\n';
  }
}

}  // namespace dexmouse::streams
