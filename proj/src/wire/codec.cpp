#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "dexmouse/wire.hpp"

#include <utility>

namespace dexmouse::wire {

namespace {

constexpr std::array<std::uint8_t, kHeaderSize> kHeader = {0xFF, 0xFF, 0xFD, 0x00};

constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int b = 0; b < 8; ++b) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x8005) : static_cast<std::uint16_t>(crc << 1);
    }
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

bool header_at(std::span<const std::uint8_t> s, std::size_t pos) {
  return std::equal(kHeader.begin(), kHeader.end(), s.begin() + static_cast<std::ptrdiff_t>(pos));
}

// True when the tail starting at pos could still grow into a header.
bool header_prefix(std::span<const std::uint8_t> s, std::size_t pos) {
  return std::equal(s.begin() + static_cast<std::ptrdiff_t>(pos), s.end(), kHeader.begin());
}

}  // namespace

std::uint16_t crc16(std::span<const std::uint8_t> data, std::uint16_t crc) {
  for (std::uint8_t byte : data) {
    crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ byte) & 0xFF]);
  }
  return crc;
}

Bytes encode(const Frame& frame) {
  if (frame.params.size() > kMaxParams) {
    throw EncodeError("params exceed " + std::to_string(kMaxParams) + " bytes");
  }
  const std::size_t length = 1 + frame.params.size() + 2;
  Bytes out;
  out.reserve(kPrefixSize + frame.params.size() + 2);
  out.insert(out.end(), kHeader.begin(), kHeader.end());
  out.push_back(frame.id);
  out.push_back(static_cast<std::uint8_t>(length & 0xFF));
  out.push_back(static_cast<std::uint8_t>(length >> 8));
  out.push_back(frame.instruction);
  out.insert(out.end(), frame.params.begin(), frame.params.end());
  const std::uint16_t crc = crc16(out);
  out.push_back(static_cast<std::uint8_t>(crc & 0xFF));
  out.push_back(static_cast<std::uint8_t>(crc >> 8));
  return out;
}

std::string to_string(DecodeError::Kind kind) {
  switch (kind) {
    case DecodeError::Kind::Resync: return "Resync";
    case DecodeError::Kind::CrcMismatch: return "CrcMismatch";
    case DecodeError::Kind::BadLength: return "BadLength";
  }
  return "?";
}

DecodeResult decode(std::span<const std::uint8_t> s) {
  DecodeResult result;
  const std::size_t n = s.size();
  std::size_t pos = 0;
  std::size_t skip_from = 0;
  std::size_t skipped = 0;

  auto flush_skip = [&] {
    if (skipped > 0) {
      result.diagnostics.push_back({DecodeError::Kind::Resync, skip_from, skipped});
      skipped = 0;
    }
  };

  while (pos < n) {
    if (n - pos < kHeaderSize) {
      if (header_prefix(s, pos)) break;
      if (skipped == 0) skip_from = pos;
      ++skipped;
      ++pos;
      continue;
    }
    if (!header_at(s, pos)) {
      if (skipped == 0) skip_from = pos;
      ++skipped;
      ++pos;
      continue;
    }
    flush_skip();
    if (n - pos < kPrefixSize - 1) break;

    const std::size_t length = static_cast<std::size_t>(s[pos + 5]) | (static_cast<std::size_t>(s[pos + 6]) << 8);
    if (length < 3 || length > kMaxParams + 3) {
      result.diagnostics.push_back({DecodeError::Kind::BadLength, pos, kHeaderSize});
      pos += kHeaderSize;
      continue;
    }
    const std::size_t total = 7 + length;
    if (n - pos < total) break;

    const auto body = s.subspan(pos, total - 2);
    const std::uint16_t wire_crc =
        static_cast<std::uint16_t>(s[pos + total - 2] | (static_cast<std::uint16_t>(s[pos + total - 1]) << 8));
    if (crc16(body) != wire_crc) {
      result.diagnostics.push_back({DecodeError::Kind::CrcMismatch, pos, total});
    } else {
      Frame f;
      f.id = s[pos + 4];
      f.instruction = s[pos + 7];
      f.params.assign(s.begin() + static_cast<std::ptrdiff_t>(pos + kPrefixSize),
                      s.begin() + static_cast<std::ptrdiff_t>(pos + total - 2));
      f.crc = wire_crc;
      result.frames.push_back(std::move(f));
    }
    pos += total;
  }
  flush_skip();
  result.consumed = pos;
  result.residue = n - pos;
  return result;
}

DecodeResult Decoder::feed(std::span<const std::uint8_t> bytes) {
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  DecodeResult r = decode(buffer_);

  std::vector<DecodeError> out;
  for (auto d : r.diagnostics) {
    d.offset += base_;
    if (pending_ && d.kind == DecodeError::Kind::Resync && pending_->offset + pending_->bytes == d.offset) {
      pending_->bytes += d.bytes;
      continue;
    }
    if (pending_) out.push_back(*std::exchange(pending_, std::nullopt));
    if (d.kind == DecodeError::Kind::Resync) pending_ = d;
    else out.push_back(d);
  }
  // the run can only continue if it reaches the end of what was consumed and
  // nothing that could be a whole header follows
  const std::size_t end = base_ + r.consumed;
  if (pending_ && !(pending_->offset + pending_->bytes == end && r.residue < kHeaderSize)) {
    out.push_back(*std::exchange(pending_, std::nullopt));
  }
  r.diagnostics = std::move(out);

  base_ += r.consumed;
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r.consumed));
  return r;
}

std::vector<DecodeError> Decoder::finish() {
  std::vector<DecodeError> out;
  if (pending_) out.push_back(*std::exchange(pending_, std::nullopt));
  return out;
}

Bytes le_bytes(std::int64_t value, std::size_t width) {
  Bytes out(width);
  auto u = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < width; ++i) out[i] = static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF);
  return out;
}

std::int64_t from_le(std::span<const std::uint8_t> bytes, bool is_signed) {
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) u |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  const std::size_t bits = bytes.size() * 8;
  if (is_signed && bits > 0 && bits < 64 && (u >> (bits - 1)) & 1U) {
    u |= ~std::uint64_t{0} << bits;
  }
  return static_cast<std::int64_t>(u);
}

Frame make_ping(std::uint8_t id) { return Frame{id, instr::kPing, {}, 0}; }

Frame make_read(std::uint8_t id, std::uint16_t addr, std::uint16_t length) {
  Frame f{id, instr::kRead, le_bytes(addr, 2), 0};
  auto len = le_bytes(length, 2);
  f.params.insert(f.params.end(), len.begin(), len.end());
  return f;
}

Frame make_write(std::uint8_t id, std::uint16_t addr, std::span<const std::uint8_t> data) {
  Frame f{id, instr::kWrite, le_bytes(addr, 2), 0};
  f.params.insert(f.params.end(), data.begin(), data.end());
  return f;
}

Frame make_sync_read(std::uint16_t addr, std::uint16_t length, std::span<const std::uint8_t> ids) {
  Frame f{kBroadcastId, instr::kSyncRead, le_bytes(addr, 2), 0};
  auto len = le_bytes(length, 2);
  f.params.insert(f.params.end(), len.begin(), len.end());
  f.params.insert(f.params.end(), ids.begin(), ids.end());
  return f;
}

Frame make_sync_write(std::uint16_t addr, std::uint16_t length, std::span<const SyncWriteEntry> entries) {
  Frame f{kBroadcastId, instr::kSyncWrite, le_bytes(addr, 2), 0};
  auto len = le_bytes(length, 2);
  f.params.insert(f.params.end(), len.begin(), len.end());
  for (const auto& e : entries) {
    if (e.data.size() != length) throw EncodeError("sync write entry length mismatch");
    f.params.push_back(e.id);
    f.params.insert(f.params.end(), e.data.begin(), e.data.end());
  }
  return f;
}

Frame make_status(std::uint8_t id, std::uint8_t error, std::span<const std::uint8_t> data) {
  Frame f{id, instr::kStatus, {error}, 0};
  f.params.insert(f.params.end(), data.begin(), data.end());
  return f;
}

namespace {
std::string instruction_name(std::uint8_t i) {
  switch (i) {
    case instr::kPing: return "PING";
    case instr::kRead: return "READ";
    case instr::kWrite: return "WRITE";
    case instr::kSyncRead: return "SYNC_READ";
    case instr::kSyncWrite: return "SYNC_WRITE";
    case instr::kStatus: return "STATUS";
    default: {
      char buf[8];
      std::snprintf(buf, sizeof buf, "0x%02X", i);
      return buf;
    }
  }
}
}  // namespace

std::string describe(const Frame& frame) {
  std::ostringstream os;
  os << instruction_name(frame.instruction) << " id=" << static_cast<int>(frame.id);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04X", frame.crc);
  os << " crc=" << buf << " params[" << frame.params.size() << "]";
  for (auto b : frame.params) {
    std::snprintf(buf, sizeof buf, " %02X", b);
    os << buf;
  }
  return os.str();
}

Bytes parse_hex(std::string_view text) {
  Bytes out;
  int nibble = -1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '0' && i + 1 < text.size() && (text[i + 1] == 'x' || text[i + 1] == 'X') && nibble < 0) {
      ++i;
      continue;
    }
    int v;
    if (c >= '0' && c <= '9') v = c - '0';
    else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
    else if (c == ' ' || c == ',' || c == '\n' || c == '\t' || c == '\r' || c == ':') {
      if (nibble >= 0) throw std::invalid_argument("odd hex digit count before separator");
      continue;
    } else {
      throw std::invalid_argument(std::string("invalid hex character '") + c + "'");
    }
    if (nibble < 0) {
      nibble = v;
    } else {
      out.push_back(static_cast<std::uint8_t>((nibble << 4) | v));
      nibble = -1;
    }
  }
  if (nibble >= 0) throw std::invalid_argument("odd number of hex digits");
  return out;
}

}  // namespace dexmouse::wire
