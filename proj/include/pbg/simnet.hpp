#pragma once

// Discrete-event network simulator: latency model, stop faults, event queue
// and trace recording.

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pbg/protocol.hpp"

namespace pbg {

/// Deterministic random stream. Streams are derived from (seed, purpose,
/// index) so adding a consumer never shifts another consumer's numbers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  static Rng stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

  std::uint64_t next() { return gen_(); }
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 gen_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index);

struct LatencyModel {
  double base_low = 150.0;
  double base_high = 350.0;
  double spike_prob = 0.1;
  double spike_delay = 500.0;  // replaces the base sample on a spike
  SimTime delta = 1000.0;      // post-GST delivery bound
  SimTime gst = 0.0;
  double pre_gst_extra = 0.0;  // extra uniform delay before GST

  /// Throws InvalidConfig on negative or inverted bounds.
  void check() const;
};

/// Latency of one message sent at `send_time`. After GST the result never
/// exceeds delta.
SimTime sample_latency(const LatencyModel& model, SimTime send_time, Rng& rng);

// SkipProposal: the stopped leader only withholds its block.
// CrashSlot: it is also deaf to votes for its view, so it never gathers
// the QC it would extend. It is back by the time the view times out; keeping
// its timeout message keeps a stopped correct leader from counting as an
// extra fault.
enum class StopMode { SkipProposal, CrashSlot };

std::string_view to_string(StopMode m);
StopMode parse_stop_mode(std::string_view s);

struct FaultPlan {
  double stop_prob = 0.0;          // per-view probability that a correct leader stops
  bool stop_only_before_gst = false;
  std::set<View> forced_stops;     // views whose correct leader always stops
  bool hold_votes_until_gst = false;  // votes sent before GST arrive after it
  StopMode stop_mode = StopMode::CrashSlot;
};

/// Whether the correct leader of `view` is stopped. Deterministic in (seed, view).
bool leader_stopped(const FaultPlan& plan, std::uint64_t seed, View view);

enum class TraceKind { Send, Deliver, Propose, Vote, Timeout, ViewEnter, QCFormed, TCFormed, Commit, Drop };

std::string_view to_string(TraceKind k);

struct TraceEvent {
  SimTime time = 0;
  std::uint64_t seq = 0;
  TraceKind kind = TraceKind::Send;
  ReplicaId replica = 0;
  ReplicaId peer = kBroadcast;  // counterpart for Send / Deliver
  View view = 0;
  BlockId block;
  std::string msg;              // message kind for Send / Deliver / Drop
  int vtype = -1;               // VoteType bits or -1
  std::uint32_t cnt_tmo = 0;
  View qc_view = 0;             // Propose only
  BlockId qc_block;             // Propose only
  SimTime sent_at = 0;          // Deliver only
  std::string detail;
};

struct Trace {
  std::vector<TraceEvent> events;
  std::size_t n = 0;
  std::vector<bool> correct;    // per replica
  SimTime end_time = 0;
  View max_view = 0;            // highest view entered by a correct replica

  std::string to_jsonl() const;
  void write_jsonl(const std::string& path) const;
};

struct Horizon {
  View max_view = 100;  // stop once a correct replica enters a higher view
  SimTime max_time = std::numeric_limits<SimTime>::infinity();
  /// Throw HorizonExceeded when no correct replica enters a view or commits
  /// for this long. 0 selects 200 timeouts.
  SimTime stall_guard = 0;
};

struct SimOptions {
  LatencyModel latency;
  FaultPlan faults;
  std::uint64_t seed = 1;
  bool record_messages = true;  // Send / Deliver events
};

class Simulator {
 public:
  Simulator(ProtocolConfig cfg, std::vector<std::unique_ptr<Node>> nodes, SimOptions opts);

  /// Runs to the horizon. Throws HorizonExceeded when progress stalls; the
  /// partial trace stays available through trace().
  Trace run(const Horizon& horizon);
  const Trace& trace() const noexcept { return trace_; }

  Node& node(ReplicaId id) { return *nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Pending {
    SimTime time;
    std::uint64_t seq;
    bool timer;
    ReplicaId to;
    ReplicaId from;
    std::uint64_t generation;
    std::shared_ptr<const Message> msg;
    SimTime sent_at;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void apply(ReplicaId from, SimTime now, Effects fx, Trace& trace);
  void send(ReplicaId from, ReplicaId to, SimTime now, const std::shared_ptr<const Message>& msg, Trace& trace);
  void record(Trace& trace, TraceEvent ev);
  void push(Pending p);
  bool stopped_at(View view, SimTime now) const;

  ProtocolConfig cfg_;
  std::vector<std::unique_ptr<Node>> nodes_;
  SimOptions opts_;
  std::vector<Rng> latency_rng_;
  std::vector<std::uint64_t> timer_gen_;
  std::vector<Pending> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t trace_seq_ = 0;
  SimTime last_progress_ = 0;
  View highest_view_ = 0;
  std::set<BlockId> proposed_;
  Trace trace_;
};

}  // namespace pbg
