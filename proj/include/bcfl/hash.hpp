#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bcfl {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);

/// SHA-256 over the 64-byte concatenation left || right.
Digest sha256_pair(const Digest& left, const Digest& right);

std::string to_hex(std::span<const std::uint8_t> bytes);

/// Parses exactly 64 hex digits; throws DecodeError otherwise.
Digest digest_from_hex(std::string_view hex);

/// Big-endian encoder for the canonical byte formats hashed by the ledger.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void digest(const Digest& d) { buf_.insert(buf_.end(), d.begin(), d.end()); }
  /// u32 length followed by the raw bytes.
  void bytes(std::span<const std::uint8_t> b);
  void str(std::string_view s);

  const std::vector<std::uint8_t>& data() const noexcept { return buf_; }
  std::vector<std::uint8_t> take() && { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace bcfl
