#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pbg {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// 256-bit content digest (SHA-256).
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest of(ByteSpan data);

  bool is_zero() const noexcept;
  /// Lower-case hex of the first `prefix` bytes.
  std::string hex(std::size_t prefix = 32) const;

  friend auto operator<=>(const Digest&, const Digest&) = default;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d.bytes[i];
    return h;
  }
};

/// Deterministic canonical encoder: big-endian fixed-width integers,
/// u32 length prefix on variable-length fields.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& digest(const Digest& d);
  ByteWriter& bytes(ByteSpan b);
  ByteWriter& raw(ByteSpan b);

  const Bytes& data() const noexcept { return out_; }
  Bytes take() noexcept { return std::move(out_); }

 private:
  Bytes out_;
};

}  // namespace pbg
