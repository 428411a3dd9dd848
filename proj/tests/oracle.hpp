#pragma once

// Brute-force reference checker for chain validity, written directly from the
// block validity table and the traceback description. It shares no code with
// src/validation.cpp: ancestry is a plain parent walk, ranking is recomputed,
// every tmo_set entry is compared against the parent and the recursion has no
// cache. Only identity and signature primitives come from the library.

#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "pbg/block_store.hpp"
#include "pbg/validation.hpp"

namespace pbg::oracle {

enum class Outcome { Normal, Eqvc, Invalid, Error };

inline const char* name(Outcome o) {
  switch (o) {
    case Outcome::Normal: return "Normal";
    case Outcome::Eqvc: return "Eqvc";
    case Outcome::Invalid: return "Invalid";
    case Outcome::Error: return "Error";
  }
  return "?";
}

struct Result {
  Outcome outcome = Outcome::Invalid;
  bool prud = false;
  friend bool operator==(const Result&, const Result&) = default;
};

class Checker {
 public:
  Checker(std::size_t n, std::size_t f, std::uint32_t pd, const KeyDirectory& keys, bool boost)
      : n_(n), f_(f), pd_(pd), keys_(keys), boost_(boost) {}

  void add(const BlockPtr& b) { blocks_[b->id] = b; }

  Result check(const Block& b) const {
    if (b.is_genesis()) return {Outcome::Normal, false};
    if (!header(b)) return {Outcome::Invalid, false};
    if (!certificate(b)) return {Outcome::Error, false};
    if (b.origin == Origin::ByVotes) {
      const Block* c = get(b.qc_block);
      const bool certified_view = b.qc.is_genesis() || c->view == b.qc.view();
      const bool ok = b.parent == b.qc_block && b.view == b.qc.view() + 1 && b.cnt_tmo == 0 && certified_view;
      return {ok ? Outcome::Normal : Outcome::Invalid, false};
    }
    return timeout_block(b);
  }

  /// Library-style ancestry without any shortcut: walk b's parents.
  bool ancestor(const BlockId& a, const BlockId& b) const {
    const Block* cur = get(b);
    std::set<BlockId> seen;
    while (cur) {
      if (cur->id == a) return true;
      if (cur->is_genesis() || !seen.insert(cur->id).second) return false;
      cur = get(cur->parent);
    }
    return false;
  }

 private:
  const Block* get(const BlockId& id) const {
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : it->second.get();
  }

  bool header(const Block& b) const {
    if (b.view == 0 || b.proposer != b.view % n_ || b.view <= b.qc.view()) return false;
    if (b.origin == Origin::ByVotes && (b.tc || b.tmo_set)) return false;
    if (b.origin == Origin::ByTimeout && (!b.tc || !b.tmo_set)) return false;
    if (b.sig.signer != b.proposer || compute_block_id(b) != b.id) return false;
    ByteWriter w;
    w.u8('S').digest(b.id);
    return keys_.verify(w.data(), b.sig);
  }

  bool certificate(const Block& b) const {
    if (b.qc.block() != b.qc_block) return false;
    if (b.qc.is_genesis()) return b.qc_block == make_genesis()->id && b.qc.type().is_normal();
    std::set<ReplicaId> voters;
    for (const Vote& v : b.qc.votes()) {
      if (v.view != b.qc.view() || v.block != b.qc.block() || v.vtype != b.qc.type()) return false;
      if (v.sig.signer != v.voter || !keys_.verify(canonical_bytes(v), v.sig)) return false;
      voters.insert(v.voter);
    }
    return voters.size() == b.qc.votes().size() && voters.size() >= n_ - f_;
  }

  bool evidence(const Block& b) const {
    std::set<ReplicaId> senders;
    for (const TimeoutMsg& m : *b.tmo_set) {
      if (!m.high_vote || m.view != b.tc->view() || m.high_vote->view > m.view) return false;
      if (m.sig.signer != m.sender || !keys_.verify(canonical_bytes(m), m.sig)) return false;
      if (!senders.insert(m.sender).second) return false;
    }
    return senders.size() >= n_ - f_ && b.tc->covers(*b.tmo_set);
  }

  std::size_t support(const BlockId& id, const std::vector<TimeoutMsg>& tmo) const {
    std::set<ReplicaId> s;
    for (const auto& m : tmo) {
      if (m.high_vote->id == id) s.insert(m.sender);
    }
    return s.size();
  }

  // >0: x ranks above y, <0 below, 0 equal rank.
  int cmp(const Block& x, const Block& y, const std::vector<TimeoutMsg>& tmo) const {
    const auto kx = std::make_tuple(x.view, x.qc.view());
    const auto ky = std::make_tuple(y.view, y.qc.view());
    if (kx != ky) return kx > ky ? 1 : -1;
    if (!boost_ || x.id == y.id) return 0;
    const bool sx = support(x.id, tmo) >= f_ + 1;
    const bool sy = support(y.id, tmo) >= f_ + 1;
    return sx == sy ? 0 : (sx ? 1 : -1);
  }

  Result timeout_block(const Block& b) const {
    const Result invalid{Outcome::Invalid, false};
    if (b.cnt_tmo > pd_) return invalid;
    if (!evidence(b)) return {Outcome::Error, false};
    if (b.tc->view() + 1 != b.view) return invalid;
    const Block* certified = get(b.qc_block);
    if (!b.qc.is_genesis() && certified->view != b.qc.view()) return invalid;
    const Block* parent = get(b.parent);
    if (b.cnt_tmo != parent->cnt_tmo + 1) return invalid;
    if (!ancestor(b.qc_block, b.parent)) return invalid;

    bool listed = false;
    std::vector<const Block*> equal_rank;
    for (const TimeoutMsg& m : *b.tmo_set) {
      const Block& hv = *m.high_vote;
      if (hv.id == parent->id) {
        listed = true;
        continue;
      }
      const int c = cmp(hv, *parent, *b.tmo_set);
      if (c > 0) return invalid;
      if (c == 0) equal_rank.push_back(&hv);
    }
    if (!listed) return invalid;

    const Result up = check(*parent);
    if (up.outcome == Outcome::Invalid || up.outcome == Outcome::Error) return up.outcome == Outcome::Error ? up : invalid;
    bool eqvc = up.outcome == Outcome::Eqvc;
    for (const Block* c : equal_rank) {
      if (!ancestor(c->id, b.qc_block) && !ancestor(b.qc_block, c->id)) eqvc = true;
    }
    return {eqvc ? Outcome::Eqvc : Outcome::Normal, b.cnt_tmo == pd_};
  }

  std::size_t n_, f_;
  std::uint32_t pd_;
  const KeyDirectory& keys_;
  bool boost_;
  std::map<BlockId, BlockPtr> blocks_;
};

inline Result from_library(const ValidationResult& r) {
  switch (r.verdict) {
    case Verdict::Normal: return {Outcome::Normal, r.prud};
    case Verdict::Eqvc: return {Outcome::Eqvc, r.prud};
    case Verdict::Invalid: return {Outcome::Invalid, false};
  }
  return {};
}

/// Random chains over n = 4 mixing honest construction with single-field
/// corruptions. Views may repeat across branches, so same-view siblings
/// (equivocation) are common.
class ChainGen {
 public:
  ChainGen(std::uint64_t seed, std::uint32_t pd)
      : rng_(seed), pd_(pd), pairs_(generate_keys(4, 99)), keys_(pairs_) {}

  const KeyDirectory& keys() const { return keys_; }
  const std::vector<KeyPair>& pairs() const { return pairs_; }

  /// A fresh chain of 1..max_blocks non-genesis blocks.
  std::vector<BlockPtr> chain(std::size_t max_blocks) {
    std::vector<BlockPtr> all{make_genesis()};
    const std::size_t k = 1 + pick(max_blocks);
    for (std::size_t i = 0; i < k; ++i) all.push_back(coin(0.5) ? by_votes(all, i) : by_timeout(all, i));
    all.erase(all.begin());
    return all;
  }

 private:
  std::size_t pick(std::size_t m) { return std::uniform_int_distribution<std::size_t>(0, m - 1)(rng_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <class T>
  const T& any(const std::vector<T>& v) { return v[pick(v.size())]; }

  VoteType some_type() {
    if (coin(0.6)) return VoteType::normal();
    return *VoteType::from_bits(static_cast<std::uint8_t>(1 + pick(3)));
  }

  QuorumCert qc_for(const BlockPtr& c) {
    if (c->is_genesis()) return QuorumCert::genesis(c->id);
    const VoteType t = some_type();
    std::vector<ReplicaId> ids{0, 1, 2, 3};
    std::shuffle(ids.begin(), ids.end(), rng_);
    ids.resize(coin(0.03) ? 2 : (coin(0.3) ? 4 : 3));
    std::vector<Vote> votes;
    for (ReplicaId r : ids) votes.push_back(make_vote(pairs_[r], c->view, c->id, t));
    if (coin(0.03)) votes[0].vtype = VoteType(!t.has_prud(), t.has_eqvc());
    if (coin(0.03)) votes[0].sig = votes.back().sig;
    return QuorumCert::unchecked(c->view, c->id, t, std::move(votes));
  }

  BlockPtr finish(Block d, std::size_t salt) {
    d.payload = {static_cast<std::uint8_t>('g'), static_cast<std::uint8_t>(salt)};
    if (coin(0.04)) d.proposer = static_cast<ReplicaId>((d.view + 1) % 4);
    const ReplicaId signer = coin(0.04) ? static_cast<ReplicaId>((d.proposer + 1) % 4) : d.proposer;
    return seal(std::move(d), pairs_[signer]);
  }

  BlockPtr by_votes(const std::vector<BlockPtr>& all, std::size_t salt) {
    const BlockPtr& c = any(all);
    Block d;
    d.view = c->view + 1 + (coin(0.15) ? 1 : 0);
    d.proposer = static_cast<ReplicaId>(d.view % 4);
    d.qc = qc_for(c);
    d.qc_block = c->id;
    d.parent = coin(0.08) ? any(all)->id : c->id;
    if (coin(0.05)) d.cnt_tmo = 1;
    d.parent_link = c;
    return finish(std::move(d), salt);
  }

  BlockPtr by_timeout(const std::vector<BlockPtr>& all, std::size_t salt) {
    const BlockPtr& parent = any(all);
    Block d;
    d.view = parent->view + 1 + (coin(0.3) ? 1 : 0);
    d.proposer = static_cast<ReplicaId>(d.view % 4);
    d.parent = parent->id;
    d.parent_link = parent;
    if (coin(0.9)) {
      d.qc = parent->qc;
      d.qc_block = parent->qc_block;
    } else {
      const BlockPtr& c = any(all);
      d.qc = qc_for(c);
      d.qc_block = c->id;
    }
    d.cnt_tmo = coin(0.9) ? parent->cnt_tmo + 1 : static_cast<std::uint32_t>(pick(pd_ + 2));
    d.origin = Origin::ByTimeout;

    View tv = d.view - 1;
    if (coin(0.04)) tv = d.view;
    std::vector<BlockPtr> eligible;
    for (const auto& b : all) {
      if (b->view <= tv) eligible.push_back(b);
    }
    std::vector<ReplicaId> senders{0, 1, 2, 3};
    std::shuffle(senders.begin(), senders.end(), rng_);
    senders.resize(coin(0.04) ? 2 : (coin(0.3) ? 4 : 3));
    std::vector<TimeoutMsg> msgs;
    for (std::size_t i = 0; i < senders.size(); ++i) {
      BlockPtr hv = (i == 0 && coin(0.85)) ? parent : (coin(0.4) ? parent : any(eligible));
      if (hv->view > tv && coin(0.5)) hv = make_genesis();
      msgs.push_back(make_timeout(pairs_[senders[i]], tv, hv));
    }
    if (coin(0.03)) msgs.back().sig = msgs.front().sig;
    if (coin(0.03)) msgs.push_back(msgs.front());
    std::shuffle(msgs.begin(), msgs.end(), rng_);
    d.tc = TimeoutCert::unchecked(msgs);
    d.tmo_set = std::move(msgs);
    return finish(std::move(d), salt);
  }

  std::mt19937_64 rng_;
  std::uint32_t pd_;
  std::vector<KeyPair> pairs_;
  KeyDirectory keys_;
};

}  // namespace pbg::oracle
