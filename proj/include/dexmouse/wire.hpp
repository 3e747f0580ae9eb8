#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dexmouse::wire {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kBroadcastId = 254;
inline constexpr std::uint8_t kMaxDeviceId = 252;
inline constexpr std::size_t kMaxParams = 1024;
inline constexpr std::size_t kHeaderSize = 4;
/// header + id + length(2) + instruction
inline constexpr std::size_t kPrefixSize = 8;
inline constexpr std::size_t kMinFrameSize = kPrefixSize + 2;

namespace instr {
inline constexpr std::uint8_t kPing = 0x01;
inline constexpr std::uint8_t kRead = 0x02;
inline constexpr std::uint8_t kWrite = 0x03;
inline constexpr std::uint8_t kSyncRead = 0x82;
inline constexpr std::uint8_t kSyncWrite = 0x83;
inline constexpr std::uint8_t kStatus = 0x55;
}  // namespace instr

/// Error byte carried as the first parameter of every STATUS frame.
namespace status_error {
inline constexpr std::uint8_t kNone = 0x00;
inline constexpr std::uint8_t kInstruction = 0x02;
inline constexpr std::uint8_t kDataLength = 0x05;
inline constexpr std::uint8_t kAccess = 0x07;
}  // namespace status_error

struct Frame {
  std::uint8_t id = 0;
  std::uint8_t instruction = 0;
  Bytes params;
  std::uint16_t crc = 0;

  bool operator==(const Frame&) const = default;
};

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CRC-16, polynomial 0x8005, init 0, MSB-first, no reflection, no final xor.
std::uint16_t crc16(std::span<const std::uint8_t> data, std::uint16_t crc = 0);

/// Serializes a frame; the crc field of the input is ignored.
Bytes encode(const Frame& frame);

struct DecodeError {
  enum class Kind { Resync, CrcMismatch, BadLength };
  Kind kind;
  std::size_t offset;  ///< position in the decoded input
  std::size_t bytes;   ///< bytes skipped (Resync) or discarded

  bool operator==(const DecodeError&) const = default;
};

std::string to_string(DecodeError::Kind kind);

struct DecodeResult {
  std::vector<Frame> frames;
  std::vector<DecodeError> diagnostics;
  std::size_t consumed = 0;
  /// Trailing bytes that may start a frame; consumed + residue == input size.
  std::size_t residue = 0;
};

DecodeResult decode(std::span<const std::uint8_t> stream);

/// Incremental decoder; keeps residue between feeds.
class Decoder {
 public:
  /// Diagnostics carry absolute stream offsets. A resync run that may still be
  /// growing at the end of the buffer is held back until it ends, so any
  /// chunking reports the same diagnostics as decoding the whole stream.
  DecodeResult feed(std::span<const std::uint8_t> bytes);
  /// Releases a held resync run; call at end of stream.
  std::vector<DecodeError> finish();
  std::size_t buffered() const { return buffer_.size(); }
  /// Absolute offset of the first buffered byte.
  std::size_t position() const { return base_; }

 private:
  Bytes buffer_;
  std::size_t base_ = 0;
  std::optional<DecodeError> pending_;
};

// Frame builders -------------------------------------------------------------

Frame make_ping(std::uint8_t id);
Frame make_read(std::uint8_t id, std::uint16_t addr, std::uint16_t length);
Frame make_write(std::uint8_t id, std::uint16_t addr, std::span<const std::uint8_t> data);
Frame make_sync_read(std::uint16_t addr, std::uint16_t length, std::span<const std::uint8_t> ids);
struct SyncWriteEntry {
  std::uint8_t id;
  Bytes data;
};
Frame make_sync_write(std::uint16_t addr, std::uint16_t length, std::span<const SyncWriteEntry> entries);
Frame make_status(std::uint8_t id, std::uint8_t error, std::span<const std::uint8_t> data = {});

Bytes le_bytes(std::int64_t value, std::size_t width);
std::int64_t from_le(std::span<const std::uint8_t> bytes, bool is_signed);

// Register model -------------------------------------------------------------

namespace reg {
inline constexpr std::uint16_t kModelNumber = 0;
inline constexpr std::uint16_t kRawAngle = 12;
inline constexpr std::uint16_t kTorqueEnable = 64;
inline constexpr std::uint16_t kGoalCurrent = 102;
inline constexpr std::uint16_t kGoalPosition = 116;
inline constexpr std::uint16_t kPresentCurrent = 126;
inline constexpr std::uint16_t kPresentVelocity = 128;
inline constexpr std::uint16_t kPresentPosition = 132;
}  // namespace reg

struct RegisterDef {
  std::string name;
  std::uint16_t addr;
  std::uint8_t size;
  bool is_signed;
  bool writable;
};

class RegisterFile {
 public:
  static constexpr std::size_t kSpace = 256;

  explicit RegisterFile(std::vector<RegisterDef> defs);

  static RegisterFile actuator();
  static RegisterFile encoder();

  /// Returns a status_error code; data is filled only on success.
  std::uint8_t read(std::uint16_t addr, std::uint16_t length, Bytes& data) const;
  std::uint8_t write(std::uint16_t addr, std::span<const std::uint8_t> data);

  /// Device-side access, bypasses the writable flag. Throws on unknown register.
  std::int64_t get(std::uint16_t addr) const;
  void set(std::uint16_t addr, std::int64_t value);

  const std::vector<RegisterDef>& defs() const { return defs_; }

 private:
  const RegisterDef& def_at(std::uint16_t addr) const;
  bool covered(std::uint16_t addr, std::uint16_t length, bool need_writable) const;

  std::vector<RegisterDef> defs_;
  std::array<std::uint8_t, kSpace> mem_{};
};

class VirtualDevice {
 public:
  VirtualDevice(std::uint8_t id, RegisterFile regs);

  std::uint8_t id() const { return id_; }
  RegisterFile& registers() { return regs_; }
  const RegisterFile& registers() const { return regs_; }

  /// Handles one instruction frame; nullopt when no reply is due.
  std::optional<Frame> handle(const Frame& request);

 private:
  std::uint8_t id_;
  RegisterFile regs_;
};

struct BusConfig {
  std::uint32_t latency_us = 150;  ///< per direction
  std::uint32_t timeout_us = 2000;
  double corruption_rate = 0.0;    ///< per-byte single-bit flip probability
  std::uint64_t seed = 0;
};

struct BusResult {
  std::vector<Frame> responses;
  std::vector<DecodeError> diagnostics;
  std::vector<std::uint8_t> missing;  ///< ids that never answered
  bool timed_out = false;
  std::uint64_t elapsed_us = 0;
};

/// Half-duplex multi-drop bus: one transaction at a time, single owner.
class SimulatedBus {
 public:
  explicit SimulatedBus(BusConfig config = {});

  VirtualDevice& add(VirtualDevice device);
  VirtualDevice* device(std::uint8_t id);

  BusResult transact(const Frame& request);

  std::uint64_t now_us() const { return now_us_; }
  const BusConfig& config() const { return config_; }

 private:
  Bytes corrupt(Bytes bytes);
  std::vector<std::uint8_t> expected_responders(const Frame& request) const;

  BusConfig config_;
  std::map<std::uint8_t, VirtualDevice> devices_;
  std::mt19937_64 rng_;
  std::uint64_t now_us_ = 0;
};

/// Standard six-device layout: actuators 1..5 for the FE channels, encoder 6
/// for thumb AA.
SimulatedBus make_device_bus(BusConfig config = {});
inline constexpr std::uint8_t kFirstActuatorId = 1;
inline constexpr std::uint8_t kEncoderId = 6;

std::string describe(const Frame& frame);
/// Parses whitespace/comma separated hex ("FF FF FD 00", "0xff", "fffffd00").
Bytes parse_hex(std::string_view text);

}  // namespace dexmouse::wire
