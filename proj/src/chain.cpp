#include "pbg/chain.hpp"

#include <algorithm>
#include <set>

#include "pbg/error.hpp"

namespace pbg {

std::optional<VoteType> VoteType::from_bits(std::uint8_t bits) {
  if (bits > (kPrud | kEqvc)) return std::nullopt;
  return VoteType((bits & kPrud) != 0, (bits & kEqvc) != 0);
}

std::string_view VoteType::name() const {
  switch (bits_) {
    case 0: return "normal";
    case kPrud: return "prud";
    case kEqvc: return "eqvc";
    default: return "prud+eqvc";
  }
}

Bytes canonical_bytes(const Vote& v) {
  ByteWriter w;
  w.u8('V').u32(v.voter).u64(v.view).digest(v.block).u8(v.vtype.bits());
  return w.take();
}

Vote make_vote(const KeyPair& key, View view, const BlockId& block, VoteType vtype) {
  Vote v{key.replica(), view, block, vtype, {}};
  v.sig = sign(key, canonical_bytes(v));
  return v;
}

bool verify_vote(const Vote& v, const KeyDirectory& keys) {
  return v.sig.signer == v.voter && keys.verify(canonical_bytes(v), v.sig);
}

QuorumCert QuorumCert::form(std::vector<Vote> votes, std::size_t quorum) {
  if (votes.size() < quorum || votes.empty()) throw Error(Errc::MalformedCert, "QC below quorum");
  const Vote& first = votes.front();
  std::set<ReplicaId> voters;
  for (const Vote& v : votes) {
    if (v.view != first.view || v.block != first.block || v.vtype != first.vtype) {
      throw Error(Errc::MalformedCert, "QC mixes votes");
    }
    if (!voters.insert(v.voter).second) throw Error(Errc::MalformedCert, "QC duplicate voter");
  }
  std::sort(votes.begin(), votes.end(), [](const Vote& a, const Vote& b) { return a.voter < b.voter; });
  QuorumCert qc;
  qc.view_ = first.view;
  qc.block_ = first.block;
  qc.type_ = first.vtype;
  qc.votes_ = std::move(votes);
  return qc;
}

QuorumCert QuorumCert::genesis(const BlockId& genesis_id) {
  QuorumCert qc;
  qc.block_ = genesis_id;
  return qc;
}

QuorumCert QuorumCert::unchecked(View view, const BlockId& block, VoteType type, std::vector<Vote> votes) {
  QuorumCert qc;
  qc.view_ = view;
  qc.block_ = block;
  qc.type_ = type;
  qc.votes_ = std::move(votes);
  return qc;
}

bool QuorumCert::verify(const KeyDirectory& keys, std::size_t quorum) const {
  if (votes_.size() < quorum) return false;
  std::set<ReplicaId> voters;
  for (const Vote& v : votes_) {
    if (v.view != view_ || v.block != block_ || v.vtype != type_) return false;
    if (!voters.insert(v.voter).second) return false;
    if (!verify_vote(v, keys)) return false;
  }
  return true;
}

namespace {

void write_qc_ref(ByteWriter& w, const QuorumCert& qc) {
  w.u64(qc.view()).digest(qc.block()).u8(qc.type().bits());
}

}  // namespace

Bytes canonical_bytes(const TimeoutMsg& m) {
  ByteWriter w;
  w.u8('T').u32(m.sender).u64(m.view);
  w.digest(m.high_vote ? m.high_vote->id : BlockId{});
  w.u8(m.high_qc ? 1 : 0);
  if (m.high_qc) write_qc_ref(w, *m.high_qc);
  return w.take();
}

TimeoutMsg make_timeout(const KeyPair& key, View view, BlockPtr high_vote, std::optional<QuorumCert> high_qc) {
  TimeoutMsg m{key.replica(), view, std::move(high_vote), std::move(high_qc), {}};
  m.sig = sign(key, canonical_bytes(m));
  return m;
}

bool verify_timeout(const TimeoutMsg& m, const KeyDirectory& keys) {
  return m.high_vote && m.sig.signer == m.sender && keys.verify(canonical_bytes(m), m.sig);
}

TimeoutCert TimeoutCert::form(std::span<const TimeoutMsg> msgs, std::size_t quorum) {
  if (msgs.size() < quorum || msgs.empty()) throw Error(Errc::MalformedCert, "TC below quorum");
  TimeoutCert tc;
  tc.view_ = msgs.front().view;
  for (const TimeoutMsg& m : msgs) {
    if (m.view != tc.view_) throw Error(Errc::MalformedCert, "TC mixes views");
    tc.senders_.push_back(m.sender);
  }
  std::sort(tc.senders_.begin(), tc.senders_.end());
  if (std::adjacent_find(tc.senders_.begin(), tc.senders_.end()) != tc.senders_.end()) {
    throw Error(Errc::MalformedCert, "TC duplicate sender");
  }
  tc.digest_ = digest_of(msgs);
  return tc;
}

TimeoutCert TimeoutCert::unchecked(std::span<const TimeoutMsg> msgs) {
  TimeoutCert tc;
  tc.view_ = msgs.empty() ? 0 : msgs.front().view;
  for (const TimeoutMsg& m : msgs) tc.senders_.push_back(m.sender);
  std::sort(tc.senders_.begin(), tc.senders_.end());
  tc.digest_ = digest_of(msgs);
  return tc;
}

Digest TimeoutCert::digest_of(std::span<const TimeoutMsg> msgs) {
  std::vector<const TimeoutMsg*> sorted;
  for (const auto& m : msgs) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->sender < b->sender; });
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(sorted.size()));
  for (const TimeoutMsg* m : sorted) w.bytes(canonical_bytes(*m)).digest(m->sig.tag);
  return Digest::of(w.data());
}

bool TimeoutCert::covers(std::span<const TimeoutMsg> msgs) const {
  if (msgs.size() != senders_.size()) return false;
  std::vector<ReplicaId> s;
  for (const auto& m : msgs) {
    if (m.view != view_) return false;
    s.push_back(m.sender);
  }
  std::sort(s.begin(), s.end());
  return std::equal(s.begin(), s.end(), senders_.begin(), senders_.end()) && digest_of(msgs) == digest_;
}

Bytes canonical_bytes(const Block& b) {
  ByteWriter w;
  w.u8('B').u32(b.proposer).u64(b.view).digest(b.parent);
  write_qc_ref(w, b.qc);
  w.digest(b.qc_block);
  w.u8(b.tc ? 1 : 0);
  if (b.tc) w.u64(b.tc->view()).digest(b.tc->digest());
  w.u32(b.cnt_tmo);
  w.digest(Digest::of(b.payload));
  w.u8(static_cast<std::uint8_t>(b.origin));
  return w.take();
}

BlockId compute_block_id(const Block& b) { return Digest::of(canonical_bytes(b)); }

BlockPtr seal(Block draft, const KeyPair& key) {
  draft.id = compute_block_id(draft);
  ByteWriter w;
  w.u8('S').digest(draft.id);
  draft.sig = sign(key, w.data());
  return std::make_shared<const Block>(std::move(draft));
}

BlockPtr make_genesis() {
  static const BlockPtr genesis = [] {
    Block g;
    g.payload = {'g', 'e', 'n', 'e', 's', 'i', 's'};
    g.id = compute_block_id(g);
    g.qc = QuorumCert::genesis(g.id);
    g.qc_block = g.id;
    return std::make_shared<const Block>(std::move(g));
  }();
  return genesis;
}

bool rank(const Block& b1, const Block& b2) noexcept {
  return b1.view > b2.view || (b1.view == b2.view && b1.qc.view() > b2.qc.view());
}

bool same_rank(const Block& b1, const Block& b2) noexcept {
  return b1.view == b2.view && b1.qc.view() == b2.qc.view();
}

std::size_t tmo_support(const BlockId& block, std::span<const TimeoutMsg> tmo_set) {
  std::set<ReplicaId> senders;
  for (const auto& m : tmo_set) {
    if (m.high_vote && m.high_vote->id == block) senders.insert(m.sender);
  }
  return senders.size();
}

RankOrder rank_cb(const Block& b1, const Block& b2, std::span<const TimeoutMsg> tmo_set, std::size_t f) {
  if (rank(b1, b2)) return RankOrder::B1Higher;
  if (rank(b2, b1)) return RankOrder::B2Higher;
  if (b1.id == b2.id) return RankOrder::Tie;
  const bool strong1 = tmo_support(b1.id, tmo_set) >= f + 1;
  const bool strong2 = tmo_support(b2.id, tmo_set) >= f + 1;
  if (strong1 && !strong2) return RankOrder::B1Higher;
  if (strong2 && !strong1) return RankOrder::B2Higher;
  return RankOrder::Tie;
}

}  // namespace pbg
