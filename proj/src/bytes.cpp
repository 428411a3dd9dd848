#include "pbg/bytes.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <stdexcept>

#include "pbg/error.hpp"

namespace pbg {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnknownBlock: return "UnknownBlock";
    case Errc::MalformedCert: return "MalformedCert";
    case Errc::NotLeader: return "NotLeader";
    case Errc::NoValidParent: return "NoValidParent";
    case Errc::StaleCertificate: return "StaleCertificate";
    case Errc::BadSignature: return "BadSignature";
    case Errc::HorizonExceeded: return "HorizonExceeded";
    case Errc::UnknownScenario: return "UnknownScenario";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Digest Digest::of(ByteSpan data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.bytes.size()) {
    throw std::runtime_error("sha256 failed");
  }
  return d;
}

bool Digest::is_zero() const noexcept {
  return std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; });
}

std::string Digest::hex(std::size_t prefix) const {
  static constexpr char kHex[] = "0123456789abcdef";
  prefix = std::min(prefix, bytes.size());
  std::string s;
  s.reserve(prefix * 2);
  for (std::size_t i = 0; i < prefix; ++i) {
    s.push_back(kHex[bytes[i] >> 4]);
    s.push_back(kHex[bytes[i] & 0xf]);
  }
  return s;
}

ByteWriter& ByteWriter::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

ByteWriter& ByteWriter::digest(const Digest& d) { return raw(d.bytes); }

ByteWriter& ByteWriter::bytes(ByteSpan b) {
  u32(static_cast<std::uint32_t>(b.size()));
  return raw(b);
}

ByteWriter& ByteWriter::raw(ByteSpan b) {
  out_.insert(out_.end(), b.begin(), b.end());
  return *this;
}

}  // namespace pbg
