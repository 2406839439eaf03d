#ifndef CAS_SERVER_HPP_
#define CAS_SERVER_HPP_

#include <optional>
#include <vector>

#include "cas/core.hpp"

namespace cas {

enum class ClientKind : std::uint8_t { Reader, Writer };

struct ServerConfig {
  QuorumConfig quorum;
  std::int64_t maxint = (std::int64_t{1} << 62);  // z_max; tiny in overflow tests
  int delta = 0;                                  // writes concurrent with any read
  bool bounded = true;                            // garbage collection + overflow handling on
  Word default_share = 0;                         // w_{t0,i}, this server's share of v0

  // The suspension threshold: any tag with counter z_max reaches it, so writer
  // queries stop before a successor could exceed z_max.
  Tag t_top() const { return Tag::of(maxint, 1); }
};

// One server of the register emulation: record storage, gossip aggregation
// view, and the query/pre-write/finalize/gossip handlers. Owned by a single
// logical process; every handler is one atomic step.
class ServerState {
 public:
  ServerState() = default;
  ServerState(int id, const ServerConfig& cfg)
      : id_(id), cfg_(cfg), view_(cfg.quorum.n + 1) {}

  int id() const { return id_; }
  const ServerConfig& cfg() const { return cfg_; }
  bool enabled() const { return enabled_; }
  void set_enabled(bool on) { enabled_ = on; }
  const std::vector<Record>& storage() const { return records_; }
  const std::vector<TagTriple>& view() const { return view_; }

  // Max tag among stored records with a matching phase; the default triple
  // (t0, w_{t0,i}, 'fin') is always a candidate, so the floor is t0.
  Tag max_phase_all() const;        // {pre, fin, FIN}
  Tag max_phase_finalized() const;  // {fin, FIN}
  Tag max_phase_FIN() const;        // {FIN}

  TagTriple tag_tuple() const {
    return TagTriple{max_phase_all(), max_phase_finalized(), max_phase_FIN()};
  }

  // Insert or merge a record: an existing tag climbs the phase ladder and
  // keeps its element (adopting the message's element only if ⊥ was stored).
  // t0 never enters storage; the default record is permanent and virtual.
  void update_phase(const Tag& t, std::optional<Word> w, Phase u);

  // Reply tag for a query, nullopt = suspended (bounded mode, writer asking
  // while a counter already reached z_max) or server disabled.
  std::optional<Tag> on_query(ClientKind kind);

  // Acknowledged with (t, ⊥, 'pre') by the comm layer; returns false when
  // disabled (no reply at all).
  bool on_prewrite(const Tag& t, Word w);

  struct FinalizeReply {
    bool replied = false;
    std::optional<Word> word;  // stored element, readers only
  };
  FinalizeReply on_finalize(const Tag& t, Phase d, ClientKind kind);

  struct GossipOutcome {
    bool handled = false;
    bool reset_requested = false;
    Tag reset_tag;      // max finalized tag at the trigger
    TagTriple emitted;  // tagTuple() to gossip, valid when handled && !reset_requested
  };
  // Absorb the freshest view {gossip[k]} after slot `from` was overwritten
  // with `incoming`; slot id_ aggregates this server's own maxima in place.
  GossipOutcome on_gossip(int from, const TagTriple& incoming);

  // Records a server may still need for answering clients: the overall max,
  // the finalized max, the per-owner maxima not yet FINALIZED, and the top
  // delta+1 (explicitly or implicitly) FINALIZED tags.
  std::vector<Record> relevant() const;
  void gc() { records_ = relevant(); }

  // Keep only tag t (renamed to (1, owner), phase FIN); t0 clears everything.
  // The already-renamed record is a fixed point, so repetition is harmless.
  void local_reset(const Tag& t);

  // For fault injection and tests.
  void set_storage(std::vector<Record> s) { records_ = std::move(s); }
  void set_view_slot(int j, const TagTriple& t) { view_.at(j) = t; }
  const Record* find(const Tag& t) const;

 private:
  bool overflow_condition(Tag* reset_tag) const;

  int id_ = 0;
  ServerConfig cfg_;
  std::vector<Record> records_;    // one record per tag
  std::vector<TagTriple> view_;    // gossip[1..N]; slot id_ = own aggregate
  bool enabled_ = true;
};

}  // namespace cas

#endif  // CAS_SERVER_HPP_
