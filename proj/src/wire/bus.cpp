#include <algorithm>
#include <stdexcept>

#include "dexmouse/wire.hpp"

namespace dexmouse::wire {

RegisterFile::RegisterFile(std::vector<RegisterDef> defs) : defs_(std::move(defs)) {
  std::sort(defs_.begin(), defs_.end(), [](const auto& a, const auto& b) { return a.addr < b.addr; });
  for (std::size_t i = 0; i < defs_.size(); ++i) {
    if (defs_[i].addr + defs_[i].size > kSpace) throw std::invalid_argument("register beyond address space");
    if (i > 0 && defs_[i - 1].addr + defs_[i - 1].size > defs_[i].addr) {
      throw std::invalid_argument("overlapping registers at " + std::to_string(defs_[i].addr));
    }
  }
}

RegisterFile RegisterFile::actuator() {
  RegisterFile rf({
      {"model_number", reg::kModelNumber, 2, false, false},
      {"torque_enable", reg::kTorqueEnable, 1, false, true},
      {"goal_current", reg::kGoalCurrent, 2, true, true},
      {"goal_position", reg::kGoalPosition, 4, true, true},
      {"present_current", reg::kPresentCurrent, 2, true, false},
      {"present_velocity", reg::kPresentVelocity, 4, true, false},
      {"present_position", reg::kPresentPosition, 4, true, false},
  });
  rf.set(reg::kModelNumber, 1200);
  return rf;
}

RegisterFile RegisterFile::encoder() {
  RegisterFile rf({
      {"model_number", reg::kModelNumber, 2, false, false},
      {"raw_angle", reg::kRawAngle, 2, false, false},
  });
  rf.set(reg::kModelNumber, 5600);
  return rf;
}

bool RegisterFile::covered(std::uint16_t addr, std::uint16_t length, bool need_writable) const {
  if (length == 0) return false;
  std::uint32_t cursor = addr;
  const std::uint32_t end = static_cast<std::uint32_t>(addr) + length;
  for (const auto& d : defs_) {
    if (d.addr + d.size <= cursor) continue;
    if (d.addr > cursor) return false;
    if (need_writable && !d.writable) return false;
    // Partial writes into the middle of a register are rejected.
    if (need_writable && (d.addr != cursor || d.addr + d.size > end)) return false;
    cursor = d.addr + d.size;
    if (cursor >= end) return true;
  }
  return false;
}

std::uint8_t RegisterFile::read(std::uint16_t addr, std::uint16_t length, Bytes& data) const {
  if (!covered(addr, length, false)) return status_error::kAccess;
  data.assign(mem_.begin() + addr, mem_.begin() + addr + length);
  return status_error::kNone;
}

std::uint8_t RegisterFile::write(std::uint16_t addr, std::span<const std::uint8_t> data) {
  if (data.empty() || data.size() > kSpace) return status_error::kDataLength;
  if (!covered(addr, static_cast<std::uint16_t>(data.size()), true)) return status_error::kAccess;
  std::copy(data.begin(), data.end(), mem_.begin() + addr);
  return status_error::kNone;
}

const RegisterDef& RegisterFile::def_at(std::uint16_t addr) const {
  for (const auto& d : defs_) {
    if (d.addr == addr) return d;
  }
  throw std::out_of_range("no register at address " + std::to_string(addr));
}

std::int64_t RegisterFile::get(std::uint16_t addr) const {
  const auto& d = def_at(addr);
  return from_le(std::span(mem_).subspan(d.addr, d.size), d.is_signed);
}

void RegisterFile::set(std::uint16_t addr, std::int64_t value) {
  const auto& d = def_at(addr);
  auto bytes = le_bytes(value, d.size);
  std::copy(bytes.begin(), bytes.end(), mem_.begin() + d.addr);
}

VirtualDevice::VirtualDevice(std::uint8_t id, RegisterFile regs) : id_(id), regs_(std::move(regs)) {
  if (id > kMaxDeviceId) throw std::invalid_argument("device id out of range");
}

std::optional<Frame> VirtualDevice::handle(const Frame& req) {
  const auto& p = req.params;
  auto u16 = [&](std::size_t i) { return static_cast<std::uint16_t>(p[i] | (p[i + 1] << 8)); };

  switch (req.instruction) {
    case instr::kPing: {
      if (req.id != id_ && req.id != kBroadcastId) return std::nullopt;
      Bytes data = le_bytes(regs_.get(reg::kModelNumber), 2);
      data.push_back(1);  // firmware version
      return make_status(id_, status_error::kNone, data);
    }
    case instr::kRead: {
      if (req.id != id_) return std::nullopt;
      if (p.size() != 4) return make_status(id_, status_error::kDataLength);
      Bytes data;
      auto err = regs_.read(u16(0), u16(2), data);
      return make_status(id_, err, err == status_error::kNone ? data : Bytes{});
    }
    case instr::kWrite: {
      if (req.id != id_) return std::nullopt;
      if (p.size() < 3) return make_status(id_, status_error::kDataLength);
      auto err = regs_.write(u16(0), std::span(p).subspan(2));
      return make_status(id_, err);
    }
    case instr::kSyncRead: {
      if (req.id != kBroadcastId || p.size() < 4) return std::nullopt;
      const auto ids = std::span(p).subspan(4);
      if (std::find(ids.begin(), ids.end(), id_) == ids.end()) return std::nullopt;
      Bytes data;
      auto err = regs_.read(u16(0), u16(2), data);
      return make_status(id_, err, err == status_error::kNone ? data : Bytes{});
    }
    case instr::kSyncWrite: {
      if (req.id != kBroadcastId || p.size() < 4) return std::nullopt;
      const std::uint16_t addr = u16(0);
      const std::size_t len = u16(2);
      for (std::size_t i = 4; i + 1 + len <= p.size(); i += 1 + len) {
        if (p[i] == id_) {
          regs_.write(addr, std::span(p).subspan(i + 1, len));
          break;
        }
      }
      return std::nullopt;
    }
    default:
      if (req.id != id_) return std::nullopt;
      return make_status(id_, status_error::kInstruction);
  }
}

SimulatedBus::SimulatedBus(BusConfig config) : config_(config), rng_(config.seed) {
  if (config_.corruption_rate < 0.0 || config_.corruption_rate > 1.0) {
    throw std::invalid_argument("corruption_rate must be in [0,1]");
  }
}

VirtualDevice& SimulatedBus::add(VirtualDevice device) {
  const auto id = device.id();
  auto [it, inserted] = devices_.emplace(id, std::move(device));
  if (!inserted) throw std::invalid_argument("duplicate device id " + std::to_string(id));
  return it->second;
}

VirtualDevice* SimulatedBus::device(std::uint8_t id) {
  auto it = devices_.find(id);
  return it == devices_.end() ? nullptr : &it->second;
}

Bytes SimulatedBus::corrupt(Bytes bytes) {
  if (config_.corruption_rate <= 0.0) return bytes;
  std::bernoulli_distribution flip(config_.corruption_rate);
  std::uniform_int_distribution<int> bit(0, 7);
  for (auto& b : bytes) {
    if (flip(rng_)) b ^= static_cast<std::uint8_t>(1U << bit(rng_));
  }
  return bytes;
}

std::vector<std::uint8_t> SimulatedBus::expected_responders(const Frame& req) const {
  switch (req.instruction) {
    case instr::kSyncWrite:
      return {};
    case instr::kSyncRead: {
      if (req.params.size() < 4) return {};
      std::vector<std::uint8_t> ids(req.params.begin() + 4, req.params.end());
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
      return ids;
    }
    case instr::kPing:
      if (req.id == kBroadcastId) {
        std::vector<std::uint8_t> ids;
        for (const auto& [id, _] : devices_) ids.push_back(id);
        return ids;
      }
      [[fallthrough]];
    default:
      if (req.id == kBroadcastId) return {};
      return {req.id};
  }
}

BusResult SimulatedBus::transact(const Frame& request) {
  BusResult result;
  const auto expected = expected_responders(request);

  // Every device sees the same (possibly corrupted) request bytes.
  const Bytes on_wire = corrupt(encode(request));
  const DecodeResult heard = decode(on_wire);

  Bytes reply_bytes;
  for (const auto& frame : heard.frames) {
    for (auto& [id, dev] : devices_) {  // std::map: ascending id order
      if (auto status = dev.handle(frame)) {
        auto enc = corrupt(encode(*status));
        reply_bytes.insert(reply_bytes.end(), enc.begin(), enc.end());
      }
    }
  }

  const DecodeResult got = decode(reply_bytes);
  result.diagnostics = got.diagnostics;
  for (const auto& f : got.frames) {
    if (f.instruction == instr::kStatus &&
        std::find(expected.begin(), expected.end(), f.id) != expected.end()) {
      result.responses.push_back(f);
    }
  }
  for (auto id : expected) {
    bool answered = std::any_of(result.responses.begin(), result.responses.end(),
                                [id](const Frame& f) { return f.id == id; });
    if (!answered) result.missing.push_back(id);
  }

  result.timed_out = !result.missing.empty();
  if (result.timed_out) {
    result.elapsed_us = config_.latency_us + config_.timeout_us;
  } else if (expected.empty()) {
    result.elapsed_us = config_.latency_us;
  } else {
    result.elapsed_us = 2ULL * config_.latency_us;
  }
  now_us_ += result.elapsed_us;
  return result;
}

SimulatedBus make_device_bus(BusConfig config) {
  SimulatedBus bus(config);
  for (std::uint8_t i = 0; i < 5; ++i) {
    bus.add(VirtualDevice(static_cast<std::uint8_t>(kFirstActuatorId + i), RegisterFile::actuator()));
  }
  bus.add(VirtualDevice(kEncoderId, RegisterFile::encoder()));
  return bus;
}

}  // namespace dexmouse::wire
