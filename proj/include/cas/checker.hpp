#ifndef CAS_CHECKER_HPP_
#define CAS_CHECKER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cas/client.hpp"
#include "cas/core.hpp"
#include "cas/sim.hpp"
#include "cas/trace.hpp"

namespace cas {

// One client operation reconstructed from the event log.
struct OpRecord {
  int node = 0;
  int seq = 0;
  OpKind kind = OpKind::Write;
  std::optional<Word> value;  // written value, or the read result (nullopt = ⊥)
  std::optional<Tag> tag;     // minted (write) or targeted (read)
  Tag valid_threshold;        // largest surviving initial tag at invoke (writes)
  std::int64_t invoke_step = -1;
  std::int64_t response_step = -1;
  std::int64_t invoke_cycle = 0;
  std::int64_t response_cycle = 0;
  int element_replies = 0;  // reads
  enum class Status : std::uint8_t { Complete, Failed, Incomplete } status = Status::Incomplete;
};

// A completed global reset: tags restart below (1, owner), so operation
// ordering is only meaningful within the segments it delimits.
struct ResetEpoch {
  std::int64_t done_step = 0;
  Tag kept;  // the tag the reset preserved (renamed to (1, kept.owner)); t0 = none
};

struct OpHistory {
  std::vector<OpRecord> ops;
  std::vector<ResetEpoch> resets;
  static OpHistory from_trace(const Trace& t);
};

struct CheckResult {
  bool pass = true;
  bool skipped = false;
  std::string detail;
};

struct AtomicityOptions {
  std::int64_t suffix_start_step = 0;  // ops invoked before this step are out of scope
  Word v0 = 0;
  std::size_t oracle_limit = 10;  // brute-force cross-check up to this many operations
};

// The three sufficient conditions over the tag order, cross-checked against
// the linearization oracle on small histories. Reads that returned ⊥ are
// excluded from the order (counted by liveness only).
CheckResult check_atomicity(const OpHistory& h, const AtomicityOptions& opt);

// Exhaustive linearization search with register semantics; failed writes may
// take effect or not. nullopt when the history exceeds `limit`.
std::optional<bool> linearizable_brute_force(const OpHistory& h, std::int64_t suffix_start_step,
                                             Word v0, std::size_t limit);

// Fair segments only: every invoked op of a non-crashed, non-reset-aborted
// client completes, and complete reads saw at least k coded elements.
CheckResult check_liveness(const OpHistory& h, SchedKind sched, int k,
                           std::int64_t suffix_start_step);

// |S| <= N + delta + 3 at every handler snapshot.
CheckResult check_storage_bound(const Trace& t, int n, int delta);

struct RecoveryResult {
  bool found = false;
  std::int64_t cycle = -1;  // cycle of the first complete-and-valid write's response
  std::int64_t step = -1;
  std::string detail;
};
RecoveryResult measure_recovery(const OpHistory& h);

// measure_recovery + atomicity over the suffix it opens.
CheckResult check_recovery(const OpHistory& h, Word v0, RecoveryResult* out = nullptr);

// After `after_cycle`: quorum returns carry >= quorum acknowledgments backed
// by server handler events, gossip deliveries match earlier sends, and each
// server's gossiped tag streams are non-decreasing.
CheckResult check_comm(const Trace& t, const QuorumConfig& q, std::int64_t after_cycle);

}  // namespace cas

#endif  // CAS_CHECKER_HPP_
