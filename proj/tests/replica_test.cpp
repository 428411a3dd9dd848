#include <gtest/gtest.h>

#include "oracle.hpp"
#include "pbg/error.hpp"
#include "pbg/replica.hpp"
#include "support.hpp"

using namespace pbg;
using pbg::test::World;

namespace {

ProtocolConfig config(Protocol p = Protocol::PBG, std::uint32_t pd = 3) {
  ProtocolConfig cfg;
  cfg.n = 4;
  cfg.f = 1;
  cfg.pd.pd = pd;
  cfg.protocol = p;
  return cfg;
}

Effects deliver(Replica& r, ReplicaId from, Message m, SimTime now = 10) {
  return r.handle({now, Delivery{from, std::move(m)}});
}

std::vector<Vote> votes_in(const Effects& fx) {
  std::vector<Vote> out;
  for (const auto& o : fx.out) {
    if (const auto* v = std::get_if<Vote>(&o.msg)) out.push_back(*v);
  }
  return out;
}

std::vector<ReplicaId> vote_targets(const Effects& fx) {
  std::vector<ReplicaId> out;
  for (const auto& o : fx.out) {
    if (std::holds_alternative<Vote>(o.msg)) out.push_back(o.to);
  }
  return out;
}

std::size_t count_notes(const Effects& fx, NoteKind k) {
  return static_cast<std::size_t>(std::count_if(fx.notes.begin(), fx.notes.end(), [&](const Note& n) { return n.kind == k; }));
}

BlockPtr proposal_in(const Effects& fx) {
  for (const auto& o : fx.out) {
    if (const auto* p = std::get_if<ProposalMsg>(&o.msg)) return p->block;
  }
  return nullptr;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

}  // namespace

TEST(ProposeByQc, ExtendsCertifiedBlock) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  const auto cfg = config();
  auto b2 = propose_by_qc(cfg, w.pairs[2], 2, w.qc(b1), w.store, {1});
  EXPECT_EQ(b2->parent, b1->id);
  EXPECT_EQ(b2->qc_block, b1->id);
  EXPECT_EQ(b2->cnt_tmo, 0u);
  EXPECT_EQ(b2->origin, Origin::ByVotes);
  EXPECT_TRUE(explicit_valid(*b2, w.store, w.ctx));
}

TEST(ProposeByQc, NotLeader) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  EXPECT_EQ(code_of([&] { propose_by_qc(config(), w.pairs[3], 2, w.qc(b1), w.store, {}); }), Errc::NotLeader);
}

TEST(ProposeByQc, StaleQcRejectedAndWouldBeInvalid) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  (void)b2;
  EXPECT_EQ(code_of([&] { propose_by_qc(config(), w.pairs[3], 3, w.qc(b1), w.store, {}); }), Errc::StaleCertificate);
  // The block such a call would have produced fails the independent checker.
  Block d;
  d.proposer = 3;
  d.view = 3;
  d.parent = b1->id;
  d.qc = w.qc(b1);
  d.qc_block = b1->id;
  auto stale = w.seal_by_leader(d);
  oracle::Checker check(4, 1, 3, w.keys, false);
  check.add(w.genesis);
  check.add(b1);
  EXPECT_EQ(check.check(*stale).outcome, oracle::Outcome::Invalid);
}

TEST(ProposeByTc, PicksHighestRankedHighVote) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  auto b3 = w.by_votes(3, w.by_votes(2, b1));
  auto b4 = w.by_votes(4, b3);
  auto b5 = w.by_votes(5, b4);
  auto msgs = w.tmos(5, {b3, b5, b4});
  ChainValidator v(w.ctx);
  auto tc = TimeoutCert::form(msgs, 3);
  auto b6 = propose_by_tc(config(), w.pairs[2], 6, tc, msgs, w.store, v, {6});
  EXPECT_EQ(b6->parent, b5->id);
  EXPECT_EQ(b6->qc_block, b5->qc_block);
  EXPECT_EQ(b6->cnt_tmo, 1u);
  EXPECT_EQ(b6->origin, Origin::ByTimeout);
  w.store.insert(b6);
  EXPECT_TRUE(explicit_valid(*b6, w.store, w.ctx));
}

TEST(ProposeByTc, SkipsInvalidCandidate) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  // Explicitly invalid view-3 block: its QC certifies b1, not its parent.
  Block d;
  d.proposer = w.leader(3);
  d.view = 3;
  d.parent = b2->id;
  d.qc = w.qc(b1);
  d.qc_block = b1->id;
  auto bad = w.seal_by_leader(d);
  w.store.insert(bad);
  auto msgs = w.tmos(3, {bad, b2, b2});
  ChainValidator v(w.ctx);
  auto b4 = propose_by_tc(config(), w.pairs[0], 4, TimeoutCert::form(msgs, 3), msgs, w.store, v, {});
  EXPECT_EQ(b4->parent, b2->id);
}

TEST(ProposeByTc, CntReachesPdAndIsVotedPrudent) {
  World w(4, 2);
  auto b1 = w.by_votes(1, w.genesis);
  auto t2 = w.by_timeout(2, b1);
  ASSERT_EQ(t2->cnt_tmo, 1u);
  auto msgs = w.tmos(2, {t2, t2, t2});
  ChainValidator v(w.ctx);
  auto t3 = propose_by_tc(config(Protocol::PBG, 2), w.pairs[3], 3, TimeoutCert::form(msgs, 3), msgs, w.store, v, {});
  EXPECT_EQ(t3->cnt_tmo, 2u);
  w.store.insert(t3);
  const auto r = valid_chain(*t3, w.store, w.ctx);
  EXPECT_TRUE(r.valid());
  EXPECT_TRUE(r.prud);
  EXPECT_EQ(r.vote_type(), VoteType::prud());
}

TEST(ProposeByTc, NoValidParentAndWrongLeader) {
  World w(4, 1);
  auto b1 = w.by_votes(1, w.genesis);
  auto t2 = w.by_timeout(2, b1);  // cnt_tmo = pd: cannot be extended
  auto msgs = w.tmos(2, {t2, t2, t2});
  ChainValidator v(w.ctx);
  auto tc = TimeoutCert::form(msgs, 3);
  EXPECT_EQ(code_of([&] { propose_by_tc(config(Protocol::PBG, 1), w.pairs[3], 3, tc, msgs, w.store, v, {}); }),
            Errc::NoValidParent);
  EXPECT_EQ(code_of([&] { propose_by_tc(config(Protocol::PBG, 1), w.pairs[1], 3, tc, msgs, w.store, v, {}); }),
            Errc::NotLeader);
  EXPECT_EQ(code_of([&] { propose_by_tc(config(Protocol::PBG, 1), w.pairs[0], 4, tc, msgs, w.store, v, {}); }),
            Errc::StaleCertificate);
}

TEST(GetNonprudQc, Examples) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  auto hit = get_nonprud_qc_block(*b2, w.store);
  EXPECT_EQ(hit.block, b1->id);
  EXPECT_TRUE(hit.type.is_normal());

  // b2 <-eqvc- b3 <-prud- b4 <-prud- b5
  auto b3 = w.by_votes(3, b2, VoteType::eqvc());
  auto b4 = w.by_votes(4, b3, VoteType::prud());
  auto b5 = w.by_votes(5, b4, VoteType::prud());
  auto deep = get_nonprud_qc_block(*b5, w.store);
  EXPECT_EQ(deep.block, b2->id);
  EXPECT_EQ(deep.type, VoteType::eqvc());

  auto g = get_nonprud_qc_block(*w.genesis, w.store);
  EXPECT_EQ(g.block, w.genesis->id);
  EXPECT_TRUE(g.type.is_normal());
}

TEST(CommitRule, Examples) {
  World w;
  auto b0 = w.by_votes(1, w.genesis);
  auto b1 = w.by_votes(2, b0);
  auto b = w.by_votes(3, b1);
  EXPECT_EQ(commit_rule(*b, w.store), b0->id);

  auto e = w.by_votes(4, b, VoteType::eqvc());
  EXPECT_EQ(commit_rule(*e, w.store), std::nullopt);

  auto p = w.by_votes(5, e, VoteType::normal());
  auto q = w.by_votes(6, p, VoteType::normal());
  auto bp = w.by_votes(7, q, VoteType::normal());
  auto top = w.by_votes(8, bp, VoteType::prud());
  EXPECT_EQ(commit_rule(*top, w.store), p->id);  // prud layer skipped
}

TEST(CommitRule, NonConsecutiveCertifiedViewsStillCommit) {
  World w;
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  auto t4 = w.by_timeout(4, b2);
  auto b5 = w.by_votes(5, t4);
  // First non-prud QC certifies t4 (view 4), the next one b1 (view 1).
  EXPECT_EQ(commit_rule(*b5, w.store), b1->id);
}

class ReplicaFixture : public ::testing::Test {
 protected:
  World w;
  std::unique_ptr<Replica> make(ReplicaId id, Protocol p = Protocol::PBG, std::uint32_t pd = 3) {
    auto r = std::make_unique<Replica>(id, config(p, pd), w.pairs[id], w.keys);
    r->handle({0, Start{}});
    return r;
  }
};

TEST_F(ReplicaFixture, StartEntersViewOneAndLeaderProposes) {
  auto leader = std::make_unique<Replica>(1, config(), w.pairs[1], w.keys);
  Effects fx = leader->handle({0, Start{}});
  EXPECT_EQ(leader->view(), 1u);
  EXPECT_EQ(fx.timer, 5000.0);
  auto b = proposal_in(fx);
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->view, 1u);
  EXPECT_EQ(b->parent, w.genesis->id);
}

TEST_F(ReplicaFixture, VotesNormalToNextLeader) {
  auto r = make(3);
  auto b1 = w.by_votes(1, w.genesis);
  Effects fx = deliver(*r, 1, ProposalMsg{b1});
  auto votes = votes_in(fx);
  ASSERT_EQ(votes.size(), 1u);
  EXPECT_TRUE(votes[0].vtype.is_normal());
  EXPECT_EQ(vote_targets(fx), std::vector<ReplicaId>{2});
  EXPECT_EQ(r->view(), 2u);
  EXPECT_EQ(r->high_vote(), b1);
}

TEST_F(ReplicaFixture, CommitBoostBroadcastsVotes) {
  auto r = make(3, Protocol::PBG_CB);
  auto b1 = w.by_votes(1, w.genesis);
  Effects fx = deliver(*r, 1, ProposalMsg{b1});
  EXPECT_EQ(vote_targets(fx), std::vector<ReplicaId>{kBroadcast});
}

TEST_F(ReplicaFixture, EqvcProposalGetsEqvcVote) {
  auto b1 = w.by_votes(1, w.genesis);
  auto b2a = w.by_votes(2, b1, VoteType::normal(), 'a');
  auto b2b = w.by_votes(2, b1, VoteType::normal(), 'b');
  auto b3 = w.by_votes(3, b2a, VoteType::normal(), 'a');
  auto c3 = w.by_votes(3, b2b, VoteType::normal(), 'c');
  auto t4 = w.by_timeout(4, b3, w.tmos(3, {b3, c3, b3}));
  auto r = make(2);
  deliver(*r, 3, ProposalMsg{b3});
  Effects fx = deliver(*r, 0, ProposalMsg{t4});
  auto votes = votes_in(fx);
  ASSERT_EQ(votes.size(), 1u);
  EXPECT_EQ(votes[0].vtype, VoteType::eqvc());
}

TEST_F(ReplicaFixture, InvalidProposalDropped) {
  auto r = make(3);
  Block d = *w.by_votes(1, w.genesis);
  d.proposer = 2;
  auto bad = seal(d, w.pairs[2]);
  Effects fx = deliver(*r, 2, ProposalMsg{bad});
  EXPECT_TRUE(votes_in(fx).empty());
  EXPECT_EQ(r->rejected_proposals(), 1u);
  EXPECT_EQ(count_notes(fx, NoteKind::Drop), 1u);
}

TEST_F(ReplicaFixture, PrudentVoteRecordsParent) {
  auto r = make(0, Protocol::PBG, 1);
  w.ctx.pd.pd = 1;
  auto b1 = w.by_votes(1, w.genesis);
  deliver(*r, 1, ProposalMsg{b1});
  auto t3 = w.by_timeout(3, b1, w.tmos(2, {b1, b1, b1}));
  // Replica 0 must reach view 3 first: feed it TC evidence for view 2.
  for (ReplicaId s = 1; s <= 3; ++s) deliver(*r, s, w.tmo(s, 2, b1));
  ASSERT_EQ(r->view(), 3u);
  Effects fx = deliver(*r, 3, ProposalMsg{t3});
  auto votes = votes_in(fx);
  ASSERT_EQ(votes.size(), 1u);
  EXPECT_EQ(votes[0].vtype, VoteType::prud());
  EXPECT_EQ(r->high_vote(), b1);
}

TEST_F(ReplicaFixture, QuorumOfSameTypeFormsQc) {
  auto r = make(2);
  auto b1 = w.by_votes(1, w.genesis);
  Effects fx;
  EXPECT_FALSE(r->on_vote(make_vote(w.pairs[0], 1, b1->id, VoteType::normal()), fx));
  EXPECT_FALSE(r->on_vote(make_vote(w.pairs[1], 1, b1->id, VoteType::normal()), fx));
  EXPECT_FALSE(r->on_vote(make_vote(w.pairs[1], 1, b1->id, VoteType::normal()), fx));  // duplicate
  EXPECT_FALSE(r->on_vote(make_vote(w.pairs[3], 1, b1->id, VoteType::eqvc()), fx));   // other bucket
  EXPECT_FALSE(r->qc_for_view(1));
  auto qc = r->on_vote(make_vote(w.pairs[3], 1, b1->id, VoteType::normal()), fx);
  ASSERT_TRUE(qc);
  EXPECT_EQ(qc->votes().size(), 3u);
  EXPECT_TRUE(qc->type().is_normal());
  EXPECT_EQ(r->view(), 2u);  // next leader enters view 2 on the QC
}

TEST_F(ReplicaFixture, ForgedVoteRejected) {
  auto r = make(2);
  auto b1 = w.by_votes(1, w.genesis);
  Vote v = make_vote(w.pairs[0], 1, b1->id, VoteType::normal());
  v.voter = 1;
  Effects fx;
  EXPECT_EQ(code_of([&] { r->on_vote(v, fx); }), Errc::BadSignature);
  Effects through = deliver(*r, 1, v);
  EXPECT_EQ(count_notes(through, NoteKind::Drop), 1u);
}

TEST_F(ReplicaFixture, BoostNeedsAllNormalVotes) {
  auto b1 = w.by_votes(1, w.genesis);
  {
    auto r = make(0, Protocol::PBG_CB);
    deliver(*r, 1, ProposalMsg{b1});
    for (ReplicaId id = 0; id < 3; ++id) deliver(*r, id, make_vote(w.pairs[id], 1, b1->id, VoteType::normal()));
    EXPECT_FALSE(r->is_committed(b1->id));
    Effects fx = deliver(*r, 3, make_vote(w.pairs[3], 1, b1->id, VoteType::normal()));
    EXPECT_TRUE(r->is_committed(b1->id));
    ASSERT_EQ(count_notes(fx, NoteKind::Commit), 1u);
    EXPECT_EQ(fx.notes.back().detail, "boost");
  }
  {
    auto r = make(0, Protocol::PBG_CB);
    deliver(*r, 1, ProposalMsg{b1});
    for (ReplicaId id = 0; id < 3; ++id) deliver(*r, id, make_vote(w.pairs[id], 1, b1->id, VoteType::normal()));
    deliver(*r, 3, make_vote(w.pairs[3], 1, b1->id, VoteType::prud()));
    EXPECT_FALSE(r->is_committed(b1->id));
  }
  {
    // Plain PBG never boosts.
    auto r = make(0, Protocol::PBG);
    deliver(*r, 1, ProposalMsg{b1});
    for (ReplicaId id = 0; id < 4; ++id) deliver(*r, id, make_vote(w.pairs[id], 1, b1->id, VoteType::normal()));
    EXPECT_FALSE(r->is_committed(b1->id));
  }
}

TEST_F(ReplicaFixture, BoostBeforeBlockArrivesCommitsOnArrival) {
  auto b1 = w.by_votes(1, w.genesis);
  auto r = make(0, Protocol::PBG_CB);
  for (ReplicaId id = 0; id < 4; ++id) deliver(*r, id, make_vote(w.pairs[id], 1, b1->id, VoteType::normal()));
  EXPECT_FALSE(r->is_committed(b1->id));
  deliver(*r, 1, ProposalMsg{b1});
  EXPECT_TRUE(r->is_committed(b1->id));
}

TEST_F(ReplicaFixture, CommitRuleCommitsAncestorsInOrder) {
  auto r = make(0);
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  auto b3 = w.by_votes(3, b2);
  auto b4 = w.by_votes(4, b3);
  deliver(*r, 1, ProposalMsg{b1});
  deliver(*r, 2, ProposalMsg{b2});
  EXPECT_EQ(r->committed().size(), 1u);
  deliver(*r, 3, ProposalMsg{b3});
  deliver(*r, 0, ProposalMsg{b4});
  const std::vector<BlockId> expect{w.genesis->id, b1->id, b2->id};
  EXPECT_EQ(r->committed(), expect);
}

TEST_F(ReplicaFixture, LocalTimeoutSendsHighVote) {
  auto r = make(3);
  auto b1 = w.by_votes(1, w.genesis);
  deliver(*r, 1, ProposalMsg{b1}, 100);
  ASSERT_EQ(r->view(), 2u);
  EXPECT_EQ(r->deadline(), 5100.0);

  Effects early = r->handle({5000, TimerFired{}});
  EXPECT_TRUE(early.out.empty());

  Effects fx = r->handle({5100, TimerFired{}});
  ASSERT_EQ(fx.out.size(), 1u);
  const auto& m = std::get<TimeoutMsg>(fx.out[0].msg);
  EXPECT_EQ(fx.out[0].to, kBroadcast);
  EXPECT_EQ(m.view, 2u);
  EXPECT_EQ(m.high_vote, b1);
  EXPECT_EQ(fx.timer, 10100.0);

  // No progress: the same message again, not a second timeout for view 2.
  Effects again = r->handle({10100, TimerFired{}});
  ASSERT_EQ(again.out.size(), 1u);
  EXPECT_EQ(std::get<TimeoutMsg>(again.out[0].msg).sig, m.sig);
  EXPECT_EQ(count_notes(again, NoteKind::Timeout), 0u);
}

TEST_F(ReplicaFixture, TimeoutQuorumFormsTcAndEchoesAtFPlusOne) {
  auto r = make(3);
  auto b1 = w.by_votes(1, w.genesis);
  deliver(*r, 1, ProposalMsg{b1});
  ASSERT_EQ(r->view(), 2u);
  Effects a = deliver(*r, 0, w.tmo(0, 2, b1));
  EXPECT_TRUE(a.out.empty());
  Effects b = deliver(*r, 1, w.tmo(1, 2, b1));  // f + 1 = 2: echo
  ASSERT_EQ(b.out.size(), 1u);
  EXPECT_EQ(std::get<TimeoutMsg>(b.out[0].msg).sender, 3u);
  Effects c = deliver(*r, 2, w.tmo(2, 2, b1));
  EXPECT_EQ(count_notes(c, NoteKind::TCFormed), 1u);
  EXPECT_EQ(r->view(), 3u);
  // Leader of view 3 is replica 3: proposes by timeout on b1.
  auto t3 = proposal_in(c);
  ASSERT_NE(t3, nullptr);
  EXPECT_EQ(t3->origin, Origin::ByTimeout);
  EXPECT_EQ(t3->parent, b1->id);
  EXPECT_EQ(t3->cnt_tmo, 1u);
}

TEST_F(ReplicaFixture, StaleTimeoutIgnored) {
  auto r = make(3);
  auto b1 = w.by_votes(1, w.genesis);
  auto b2 = w.by_votes(2, b1);
  auto b3 = w.by_votes(3, b2);
  deliver(*r, 1, ProposalMsg{b1});
  deliver(*r, 2, ProposalMsg{b2});
  deliver(*r, 3, ProposalMsg{b3});
  ASSERT_EQ(r->view(), 4u);
  for (ReplicaId s = 0; s < 3; ++s) {
    Effects fx = deliver(*r, s, w.tmo(s, 1, w.genesis));
    EXPECT_TRUE(fx.out.empty());
    EXPECT_EQ(count_notes(fx, NoteKind::TCFormed), 0u);
  }
  EXPECT_TRUE(r->timeouts_for(1).empty());
}

TEST_F(ReplicaFixture, NoSecondVoteInOneView) {
  auto r = make(3);
  auto b1 = w.by_votes(1, w.genesis, VoteType::normal(), 'a');
  Block twin = *b1;
  twin.payload = {'b'};
  auto b1b = w.seal_by_leader(twin);
  EXPECT_EQ(votes_in(deliver(*r, 1, ProposalMsg{b1})).size(), 1u);
  EXPECT_TRUE(votes_in(deliver(*r, 1, ProposalMsg{b1b})).empty());
}

TEST(ProtocolConfig, Checks) {
  ProtocolConfig cfg;
  EXPECT_NO_THROW(cfg.check());
  cfg.n = 5;
  EXPECT_THROW(cfg.check(), Error);
  cfg = {};
  cfg.pd.pd = 0;
  EXPECT_THROW(cfg.check(), Error);
  cfg = {};
  EXPECT_EQ(cfg.timeout(9), 5000.0);
  EXPECT_EQ(cfg.leader(9), 1u);
}

TEST(ProtocolNames, RoundTrip) {
  for (Protocol p : {Protocol::PBG, Protocol::PBG_CB, Protocol::FHS, Protocol::CHS, Protocol::NaiveBeeGees}) {
    EXPECT_EQ(parse_protocol(to_string(p)), p);
  }
  EXPECT_EQ(parse_protocol("pbg-cb"), Protocol::PBG_CB);
  EXPECT_EQ(parse_protocol("FastHotStuff"), Protocol::FHS);
  EXPECT_FALSE(parse_protocol("raft"));
}
