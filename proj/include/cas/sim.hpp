#ifndef CAS_SIM_HPP_
#define CAS_SIM_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cas/client.hpp"
#include "cas/core.hpp"
#include "cas/reset.hpp"
#include "cas/trace.hpp"

namespace cas {

// fair: round-robin over every enabled step. unfair: seeded weighted choice
// that may starve the listed nodes outright. seldom: unfair until an overflow
// or reset trigger appears, then fair for a window, then unfair again.
enum class SchedKind : std::uint8_t { Fair, Unfair, Seldom };

struct ScriptOp {
  OpKind kind = OpKind::Write;
  Word value = 0;
  std::int64_t after = 0;  // earliest step at which the operation may start
};

struct FaultScript {
  struct Timed {
    enum class What : std::uint8_t { Crash, Resume, Reset } what = What::Crash;
    int node = 0;
    std::int64_t at = 0;
    Tag tag;  // Reset only
  };
  struct ForcedResetState {
    int node = 0;
    ResetNode::Phase phase = ResetNode::Phase::Freeze;
    Tag tag;
  };

  std::vector<Timed> timed;
  std::vector<int> malicious;

  // Transient injection, applied once before step 0.
  bool corrupt = false;
  std::int64_t corrupt_tag_ceiling = 0;
  bool corrupt_reset = false;                    // also scramble the reset machinery
  bool plant_top = false;                        // plant a record with counter z_max
  std::optional<std::pair<std::int64_t, int>> stuff;  // (tag ceiling, records per server)
  std::vector<ForcedResetState> forced_reset;
};

struct Scenario {
  QuorumConfig quorum;
  std::int64_t p = 257;
  std::int64_t maxint = (std::int64_t{1} << 62);
  int delta = 0;
  bool bounded = true;
  Word v0 = 0;
  std::uint64_t seed = 0;
  SchedKind sched = SchedKind::Fair;
  std::int64_t budget = 1'000'000;
  bool verbose = false;          // log every token traversal with its payload
  std::int64_t fair_window = 0;  // seldom: steps of forced fairness; 0 = 10 sweeps
  std::vector<int> starve;
  std::map<int, std::vector<ScriptOp>> scripts;  // client node -> operations
  FaultScript faults;

  void validate() const;  // throws std::invalid_argument
};

struct ScenarioParseError {
  std::string message;
  int line = 0;
};

// Line-oriented format: key=value header tokens, then script lines
// ("client 2 write 17", "client 4 read", "fault crash 3 at 100", ...).
std::optional<Scenario> parse_scenario(std::istream& in, ScenarioParseError* err);
std::optional<Scenario> parse_scenario_file(const std::string& path, ScenarioParseError* err);

std::string scenario_digest(const Scenario& sc);

struct RunStats {
  std::int64_t steps = 0;
  std::int64_t cycles = 0;
  int ops_completed = 0;
  int ops_failed = 0;
  int resets_completed = 0;
  int max_storage = 0;
};

// Deterministic: a scenario (seed included) maps to exactly one trace.
Trace run_scenario(const Scenario& sc, RunStats* stats = nullptr);

}  // namespace cas

#endif  // CAS_SIM_HPP_
