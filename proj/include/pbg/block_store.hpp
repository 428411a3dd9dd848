#pragma once

#include <unordered_map>

#include "pbg/chain.hpp"

namespace pbg {

/// Per-replica block store. Single writer (the owning replica).
class BlockStore {
 public:
  explicit BlockStore(BlockPtr genesis = make_genesis());

  const BlockId& genesis_id() const noexcept { return genesis_; }
  bool contains(const BlockId& id) const { return blocks_.contains(id); }
  std::size_t size() const noexcept { return blocks_.size(); }

  /// nullptr when absent.
  BlockPtr find(const BlockId& id) const;
  /// Throws UnknownBlock when absent.
  const Block& at(const BlockId& id) const;
  BlockPtr ptr(const BlockId& id) const;

  /// Inserts `block` together with every block reachable through parent
  /// links and tmo_set high_votes that is not stored yet.
  void insert(const BlockPtr& block);

 private:
  BlockId genesis_;
  std::unordered_map<BlockId, BlockPtr, DigestHash> blocks_;
};

/// True iff `a` lies on the parent chain of `b` (a == b included).
/// Throws UnknownBlock if the walk hits an unresolvable parent.
bool is_ancestor(const BlockStore& store, const BlockId& a, const BlockId& b);

/// Neither block is an ancestor of the other.
bool conflicts(const BlockStore& store, const BlockId& a, const BlockId& b);

}  // namespace pbg
