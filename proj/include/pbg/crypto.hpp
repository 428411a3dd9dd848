#pragma once

// Simulated signatures. A signature is a keyed digest of the message under a
// per-replica secret. Only the owning KeyPair can produce tags; PublicKey keeps
// the verification material private, so code holding another replica's public
// key cannot sign in its name.

#include <cstdint>
#include <memory>
#include <vector>

#include "pbg/bytes.hpp"

namespace pbg {

using ReplicaId = std::uint32_t;

struct Signature {
  ReplicaId signer = 0;
  Digest payload_digest;
  Digest tag;

  friend bool operator==(const Signature&, const Signature&) = default;
};

class PublicKey {
 public:
  PublicKey() = default;
  ReplicaId replica() const noexcept { return replica_; }

 private:
  friend class KeyPair;
  friend bool verify(const PublicKey& key, ByteSpan message, const Signature& sig);

  ReplicaId replica_ = 0;
  std::shared_ptr<const Digest> secret_;
};

class KeyPair {
 public:
  /// Deterministic key derivation from (seed, replica).
  static KeyPair generate(ReplicaId replica, std::uint64_t seed);

  ReplicaId replica() const noexcept { return public_.replica_; }
  const PublicKey& public_key() const noexcept { return public_; }

 private:
  friend Signature sign(const KeyPair& key, ByteSpan message);

  std::shared_ptr<const Digest> secret_;
  PublicKey public_;
};

Signature sign(const KeyPair& key, ByteSpan message);
bool verify(const PublicKey& key, ByteSpan message, const Signature& sig);

/// Public keys of every replica, indexed by ReplicaId.
class KeyDirectory {
 public:
  KeyDirectory() = default;
  explicit KeyDirectory(const std::vector<KeyPair>& pairs);

  std::size_t size() const noexcept { return keys_.size(); }
  const PublicKey& operator[](ReplicaId id) const { return keys_.at(id); }

  /// verify() against the key of sig.signer; false for unknown signers.
  bool verify(ByteSpan message, const Signature& sig) const;

 private:
  std::vector<PublicKey> keys_;
};

std::vector<KeyPair> generate_keys(std::size_t n, std::uint64_t seed);

}  // namespace pbg
