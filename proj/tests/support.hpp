#pragma once

// Hand-built chains for unit tests: every block, vote and timeout message is
// properly signed unless a test deliberately breaks it.

#include <algorithm>
#include <numeric>
#include <vector>

#include "pbg/block_store.hpp"
#include "pbg/validation.hpp"

namespace pbg::test {

struct World {
  explicit World(std::size_t n_ = 4, std::uint32_t pd = 3)
      : n(n_), f((n_ - 1) / 3), pairs(generate_keys(n_, 7)), keys(pairs), genesis(make_genesis()), store(genesis) {
    ctx = {n, f, PrudenceDegree{pd}, &keys, RankMode::Plain};
  }

  std::size_t quorum() const { return n - f; }
  ReplicaId leader(View v) const { return static_cast<ReplicaId>(v % n); }

  std::vector<ReplicaId> first_voters() const {
    std::vector<ReplicaId> ids(quorum());
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
  }

  QuorumCert qc(const BlockPtr& b, VoteType t = VoteType::normal(), std::vector<ReplicaId> voters = {}) const {
    if (b->is_genesis()) return b->qc.is_genesis() ? b->qc : QuorumCert::genesis(b->id);
    if (voters.empty()) voters = first_voters();
    std::vector<Vote> votes;
    for (ReplicaId r : voters) votes.push_back(make_vote(pairs[r], b->view, b->id, t));
    return QuorumCert::form(std::move(votes), quorum());
  }

  BlockPtr seal_by_leader(Block draft) const { return seal(std::move(draft), pairs[leader(draft.view)]); }

  /// ByVotes block at `view` on top of `certified`, carrying a QC of type t.
  BlockPtr by_votes(View view, const BlockPtr& certified, VoteType t = VoteType::normal(), char tag = 'p') {
    Block d;
    d.proposer = leader(view);
    d.view = view;
    d.parent = certified->id;
    d.qc = qc(certified, t);
    d.qc_block = certified->id;
    d.payload = {static_cast<std::uint8_t>(tag), static_cast<std::uint8_t>(view)};
    d.parent_link = certified;
    auto b = seal_by_leader(std::move(d));
    store.insert(b);
    return b;
  }

  TimeoutMsg tmo(ReplicaId sender, View view, const BlockPtr& high_vote) const {
    return make_timeout(pairs[sender], view, high_vote);
  }

  /// Timeout messages for `view` from senders 0.. with the given high_votes.
  std::vector<TimeoutMsg> tmos(View view, const std::vector<BlockPtr>& high_votes) const {
    std::vector<TimeoutMsg> out;
    for (std::size_t i = 0; i < high_votes.size(); ++i) out.push_back(tmo(static_cast<ReplicaId>(i), view, high_votes[i]));
    return out;
  }

  /// ByTimeout block at `view` on `parent` with the given tmo_set; qc and
  /// qc_block copied from the parent, cnt_tmo = parent + 1.
  BlockPtr by_timeout(View view, const BlockPtr& parent, std::vector<TimeoutMsg> msgs, char tag = 't') {
    Block d;
    d.proposer = leader(view);
    d.view = view;
    d.parent = parent->id;
    d.qc = parent->qc;
    d.qc_block = parent->qc_block;
    d.tc = TimeoutCert::form(msgs, std::min(msgs.size(), quorum()));
    d.tmo_set = std::move(msgs);
    d.cnt_tmo = parent->cnt_tmo + 1;
    d.origin = Origin::ByTimeout;
    d.payload = {static_cast<std::uint8_t>(tag), static_cast<std::uint8_t>(view)};
    d.parent_link = parent;
    auto b = seal_by_leader(std::move(d));
    store.insert(b);
    return b;
  }

  /// Same, with every sender reporting `parent` as high_vote.
  BlockPtr by_timeout(View view, const BlockPtr& parent, char tag = 't') {
    return by_timeout(view, parent, tmos(view - 1, std::vector<BlockPtr>(quorum(), parent)), tag);
  }

  std::size_t n, f;
  std::vector<KeyPair> pairs;
  KeyDirectory keys;
  BlockPtr genesis;
  BlockStore store;
  ValidationContext ctx;
};

}  // namespace pbg::test
