#pragma once

// Event interface shared by every replica implementation and the simulator:
// a node consumes one event at a time and returns the messages to send, an
// optional timer deadline and trace notes. Handling is deterministic given
// the node state and the event.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pbg/validation.hpp"

namespace pbg {

using SimTime = double;  // simulated milliseconds

enum class Protocol { PBG, PBG_CB, FHS, CHS, NaiveBeeGees };

std::string_view to_string(Protocol p);
/// Accepts the canonical names plus a few aliases ("pbg-cb", "fasthotstuff", ...).
std::optional<Protocol> parse_protocol(std::string_view name);

struct ProtocolConfig {
  std::size_t n = 4;
  std::size_t f = 1;
  PrudenceDegree pd;
  SimTime delta = 1000.0;
  std::function<SimTime(View)> timeout_fn;  // defaults to 5 * delta when empty
  Protocol protocol = Protocol::PBG;

  std::size_t quorum() const noexcept { return n - f; }
  ReplicaId leader(View v) const noexcept { return static_cast<ReplicaId>(v % n); }
  SimTime timeout(View v) const { return timeout_fn ? timeout_fn(v) : 5.0 * delta; }
  bool boost() const noexcept { return protocol == Protocol::PBG_CB; }

  ValidationContext validation_context(const KeyDirectory& keys) const {
    return {n, f, pd, &keys, boost() ? RankMode::CommitBoost : RankMode::Plain};
  }
  /// Throws InvalidConfig unless n = 3f + 1, f >= 1 and pd >= 1.
  void check() const;
};

struct ProposalMsg {
  BlockPtr block;
};

using Message = std::variant<ProposalMsg, Vote, TimeoutMsg>;

std::string_view message_kind(const Message& m);

inline constexpr ReplicaId kBroadcast = ~ReplicaId{0};

struct Outgoing {
  ReplicaId to = kBroadcast;  // kBroadcast: every replica, the sender included
  Message msg;
};

enum class NoteKind { Vote, Timeout, ViewEnter, QCFormed, TCFormed, Commit, Drop };

struct Note {
  NoteKind kind;
  View view = 0;
  BlockId block;
  std::uint32_t cnt_tmo = 0;
  std::optional<VoteType> vtype;
  std::string detail;
};

struct Effects {
  std::vector<Outgoing> out;
  std::optional<SimTime> timer;  // new absolute deadline, replaces the previous one
  std::vector<Note> notes;

  void send(ReplicaId to, Message m) { out.push_back({to, std::move(m)}); }
  void broadcast(Message m) { out.push_back({kBroadcast, std::move(m)}); }
  void note(Note n) { notes.push_back(std::move(n)); }
};

struct Start {};
struct Delivery {
  ReplicaId from = 0;
  Message msg;
};
struct TimerFired {};

struct Event {
  SimTime now = 0;
  std::variant<Start, Delivery, TimerFired> what;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual ReplicaId id() const = 0;
  virtual bool byzantine() const { return false; }
  virtual Effects handle(const Event& ev) = 0;
};

}  // namespace pbg
