#include "pbg/block_store.hpp"

#include <vector>

#include "pbg/error.hpp"

namespace pbg {

BlockStore::BlockStore(BlockPtr genesis) : genesis_(genesis->id) { blocks_.emplace(genesis->id, std::move(genesis)); }

BlockPtr BlockStore::find(const BlockId& id) const {
  auto it = blocks_.find(id);
  return it == blocks_.end() ? nullptr : it->second;
}

const Block& BlockStore::at(const BlockId& id) const { return *ptr(id); }

BlockPtr BlockStore::ptr(const BlockId& id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw Error(Errc::UnknownBlock, id.hex(8));
  return it->second;
}

void BlockStore::insert(const BlockPtr& block) {
  std::vector<BlockPtr> work{block};
  while (!work.empty()) {
    BlockPtr b = std::move(work.back());
    work.pop_back();
    if (!b || !blocks_.emplace(b->id, b).second) continue;
    if (b->parent_link) work.push_back(b->parent_link);
    if (b->tmo_set) {
      for (const auto& m : *b->tmo_set) work.push_back(m.high_vote);
    }
  }
}

// No view-based early exit: a malformed block may name a parent with a higher
// view, and ancestry must still be answered structurally. Content addressing
// rules out cycles.
bool is_ancestor(const BlockStore& store, const BlockId& a, const BlockId& b) {
  store.at(a);
  const Block* cur = &store.at(b);
  while (true) {
    if (cur->id == a) return true;
    if (cur->is_genesis()) return false;
    cur = &store.at(cur->parent);
  }
}

bool conflicts(const BlockStore& store, const BlockId& a, const BlockId& b) {
  return !is_ancestor(store, a, b) && !is_ancestor(store, b, a);
}

}  // namespace pbg
