#include "pbg/crypto.hpp"

namespace pbg {

namespace {

Digest keyed_tag(const Digest& secret, ByteSpan message) {
  ByteWriter w;
  w.digest(secret).raw(message);
  return Digest::of(w.data());
}

}  // namespace

KeyPair KeyPair::generate(ReplicaId replica, std::uint64_t seed) {
  ByteWriter w;
  w.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("pbg-key"), 7))
      .u64(seed)
      .u32(replica);
  KeyPair kp;
  kp.secret_ = std::make_shared<const Digest>(Digest::of(w.data()));
  kp.public_.replica_ = replica;
  kp.public_.secret_ = kp.secret_;
  return kp;
}

Signature sign(const KeyPair& key, ByteSpan message) {
  return Signature{key.replica(), Digest::of(message), keyed_tag(*key.secret_, message)};
}

bool verify(const PublicKey& key, ByteSpan message, const Signature& sig) {
  if (!key.secret_ || sig.signer != key.replica_) return false;
  if (sig.payload_digest != Digest::of(message)) return false;
  return sig.tag == keyed_tag(*key.secret_, message);
}

KeyDirectory::KeyDirectory(const std::vector<KeyPair>& pairs) {
  keys_.reserve(pairs.size());
  for (const auto& kp : pairs) keys_.push_back(kp.public_key());
}

bool KeyDirectory::verify(ByteSpan message, const Signature& sig) const {
  if (sig.signer >= keys_.size()) return false;
  return pbg::verify(keys_[sig.signer], message, sig);
}

std::vector<KeyPair> generate_keys(std::size_t n, std::uint64_t seed) {
  std::vector<KeyPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(KeyPair::generate(static_cast<ReplicaId>(i), seed));
  return out;
}

}  // namespace pbg
