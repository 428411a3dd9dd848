#include "pbg/validation.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "pbg/error.hpp"

namespace pbg {

namespace detail {

bool block_signature_ok(const Block& b, const KeyDirectory& keys) {
  if (b.sig.signer != b.proposer || compute_block_id(b) != b.id) return false;
  ByteWriter w;
  w.u8('S').digest(b.id);
  return keys.verify(w.data(), b.sig);
}

bool qc_ok(const Block& b, const BlockStore& store, const ValidationContext& ctx) {
  if (b.qc.block() != b.qc_block) return false;
  if (b.qc.is_genesis()) return b.qc.block() == store.genesis_id() && b.qc.type().is_normal();
  return b.qc.verify(*ctx.keys, ctx.quorum());
}

bool timeout_evidence_ok(const Block& b, const ValidationContext& ctx) {
  if (!b.tc || !b.tmo_set) return false;
  const auto& msgs = *b.tmo_set;
  std::set<ReplicaId> senders;
  for (const TimeoutMsg& m : msgs) {
    if (m.view != b.tc->view() || !m.high_vote) return false;
    if (m.high_vote->view > m.view) return false;
    if (!senders.insert(m.sender).second) return false;
    if (!verify_timeout(m, *ctx.keys)) return false;
  }
  return senders.size() >= ctx.quorum() && b.tc->covers(msgs);
}

RankOrder compare(const Block& a, const Block& b, std::span<const TimeoutMsg> tmo_set, const ValidationContext& ctx) {
  if (ctx.rank_mode == RankMode::CommitBoost) return rank_cb(a, b, tmo_set, ctx.f);
  if (rank(a, b)) return RankOrder::B1Higher;
  if (rank(b, a)) return RankOrder::B2Higher;
  return RankOrder::Tie;
}

}  // namespace detail

namespace {

bool header_ok(const Block& b, const ValidationContext& ctx) {
  if (b.view == 0 || b.proposer != ctx.leader(b.view) || b.view <= b.qc.view()) return false;
  if (!VoteType::from_bits(b.qc.type().bits())) return false;
  const bool timeout_fields = b.tc.has_value() && b.tmo_set.has_value();
  const bool no_timeout_fields = !b.tc.has_value() && !b.tmo_set.has_value();
  if (b.origin == Origin::ByTimeout ? !timeout_fields : !no_timeout_fields) return false;
  return detail::block_signature_ok(b, *ctx.keys);
}

/// Distinct tmo_set high_votes, highest rank first.
std::vector<BlockPtr> ranked_tmo_blocks(const Block& b, const ValidationContext& ctx) {
  std::vector<BlockPtr> out;
  std::set<BlockId> seen;
  for (const auto& m : *b.tmo_set) {
    if (seen.insert(m.high_vote->id).second) out.push_back(m.high_vote);
  }
  const auto& tmo = *b.tmo_set;
  auto key = [&](const BlockPtr& x) {
    const bool strong = ctx.rank_mode == RankMode::CommitBoost && tmo_support(x->id, tmo) >= ctx.f + 1;
    return std::make_tuple(x->view, x->qc.view(), strong);
  };
  std::stable_sort(out.begin(), out.end(), [&](const BlockPtr& x, const BlockPtr& y) {
    auto kx = key(x);
    auto ky = key(y);
    if (kx != ky) return kx > ky;
    return x->id < y->id;
  });
  return out;
}

}  // namespace

bool explicit_valid(const Block& b, const BlockStore& store, const ValidationContext& ctx) {
  if (b.id == store.genesis_id()) return true;
  if (!header_ok(b, ctx)) return false;
  if (!detail::qc_ok(b, store, ctx)) return false;
  const Block& certified = store.at(b.qc_block);
  if (!b.qc.is_genesis() && certified.view != b.qc.view()) return false;

  if (b.origin == Origin::ByVotes) {
    return b.parent == b.qc_block && b.view == b.qc.view() + 1 && b.cnt_tmo == 0;
  }

  const Block& parent = store.at(b.parent);
  if (b.cnt_tmo != parent.cnt_tmo + 1) return false;
  if (!is_ancestor(store, b.qc_block, b.parent)) return false;
  if (!detail::timeout_evidence_ok(b, ctx) || b.tc->view() + 1 != b.view) return false;
  bool parent_listed = false;
  for (const auto& m : *b.tmo_set) {
    if (m.high_vote->id == b.parent) {
      parent_listed = true;
    } else if (detail::compare(*m.high_vote, parent, *b.tmo_set, ctx) == RankOrder::B1Higher) {
      return false;
    }
  }
  return parent_listed;
}

Verdict test_equivocation(std::span<const BlockPtr> candidates, const BlockId& qc_block, const BlockStore& store) {
  for (const auto& c : candidates) {
    if (conflicts(store, c->id, qc_block)) return Verdict::Eqvc;
  }
  return Verdict::Normal;
}

ChainValidator::ChainValidator(ValidationContext ctx, bool memoize) : ctx_(ctx), memoize_(memoize) {}

ValidationResult ChainValidator::valid_chain(const Block& b, const BlockStore& store) { return eval(b, store, 1); }

ValidationResult ChainValidator::eval(const Block& b, const BlockStore& store, std::size_t depth) {
  max_depth_ = std::max(max_depth_, depth);
  if (b.id == store.genesis_id()) return {Verdict::Normal, false};
  if (memoize_) {
    if (auto it = cache_.find(b.id); it != cache_.end()) return it->second;
  }
  ++evaluations_;

  ValidationResult result{Verdict::Invalid, false};
  if (header_ok(b, ctx_)) {
    if (!detail::qc_ok(b, store, ctx_)) throw Error(Errc::MalformedCert, "QC of block " + b.id.hex(8));
    if (b.origin == Origin::ByVotes) {
      const Block& certified = store.at(b.qc_block);
      const bool ok = b.parent == b.qc_block && b.view == b.qc.view() + 1 && b.cnt_tmo == 0 &&
                      (b.qc.is_genesis() || certified.view == b.qc.view());
      if (ok) result = {Verdict::Normal, false};
    } else {
      result = eval_timeout_block(b, store, depth);
    }
  }
  if (memoize_) cache_.emplace(b.id, result);
  return result;
}

ValidationResult ChainValidator::eval_timeout_block(const Block& b, const BlockStore& store, std::size_t depth) {
  const ValidationResult invalid{Verdict::Invalid, false};
  if (b.cnt_tmo > ctx_.pd.pd) return invalid;
  if (!detail::timeout_evidence_ok(b, ctx_)) throw Error(Errc::MalformedCert, "TC of block " + b.id.hex(8));
  if (b.tc->view() + 1 != b.view) return invalid;

  const Block& certified = store.at(b.qc_block);
  if (!b.qc.is_genesis() && certified.view != b.qc.view()) return invalid;
  const Block& parent = store.at(b.parent);
  if (b.cnt_tmo != parent.cnt_tmo + 1) return invalid;
  if (!is_ancestor(store, b.qc_block, b.parent)) return invalid;

  bool flag_eqvc = false;
  bool flag_exist = false;
  std::vector<BlockPtr> equivocation_candidates;
  for (const BlockPtr& candidate : ranked_tmo_blocks(b, ctx_)) {
    if (candidate->id == parent.id) {
      const ValidationResult r = eval(parent, store, depth + 1);
      if (r.verdict == Verdict::Invalid) return invalid;
      if (r.verdict == Verdict::Eqvc) flag_eqvc = true;
      flag_exist = true;
      continue;
    }
    const RankOrder order = detail::compare(*candidate, parent, *b.tmo_set, ctx_);
    if (order == RankOrder::B1Higher) return invalid;
    if (order == RankOrder::B2Higher) break;
    if (!flag_eqvc) equivocation_candidates.push_back(candidate);
  }
  if (!flag_exist) return invalid;

  Verdict verdict = Verdict::Eqvc;
  if (!flag_eqvc) verdict = test_equivocation(equivocation_candidates, b.qc_block, store);
  return {verdict, b.cnt_tmo == ctx_.pd.pd};
}

ValidationResult valid_chain(const Block& b, const BlockStore& store, const ValidationContext& ctx) {
  ChainValidator v(ctx, false);
  return v.valid_chain(b, store);
}

}  // namespace pbg
