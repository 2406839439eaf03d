#ifndef CAS_CORE_HPP_
#define CAS_CORE_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace cas {

using Word = std::int64_t;  // one field element, 0 <= w < p

// Version tag (z, owner) with a distinguished bottom value t0 that orders
// below every proper tag. t0 is a separate variant, never (0,0), so a
// corrupted tag cannot be confused with it.
struct Tag {
  std::int64_t z = 0;
  int owner = 0;
  bool bottom = true;

  static Tag t0() { return Tag{}; }
  static Tag of(std::int64_t z, int owner) { return Tag{z, owner, false}; }

  friend bool operator==(const Tag& a, const Tag& b) {
    if (a.bottom || b.bottom) return a.bottom == b.bottom;
    return a.z == b.z && a.owner == b.owner;
  }
  friend bool operator!=(const Tag& a, const Tag& b) { return !(a == b); }
};

// (z1 < z2) or (z1 == z2 and i < j); t0 below everything.
inline bool tag_less(const Tag& a, const Tag& b) {
  if (a.bottom) return !b.bottom;
  if (b.bottom) return false;
  if (a.z != b.z) return a.z < b.z;
  return a.owner < b.owner;
}

inline bool tag_leq(const Tag& a, const Tag& b) { return a == b || tag_less(a, b); }
inline const Tag& tag_max(const Tag& a, const Tag& b) { return tag_less(a, b) ? b : a; }

// Successor used by writers: t0 counts as z = 0.
inline Tag tag_successor(const Tag& t, int writer) {
  return Tag::of(t.bottom ? 1 : t.z + 1, writer);
}

// Canonical textual form "z.owner", "t0" for the bottom tag.
std::string tag_str(const Tag& t);
std::optional<Tag> tag_parse(const std::string& s);

// Record life-cycle. Qry appears only in wire messages, never in storage.
enum class Phase : std::uint8_t { Pre, Fin, FINAL, Qry };

std::string phase_str(Phase p);
std::optional<Phase> phase_parse(const std::string& s);

// pre -> fin -> FIN ladder; anything else keeps the old phase.
inline Phase upgrade_phase(Phase old_p, Phase new_p) {
  if (old_p == Phase::Pre && new_p == Phase::Fin) return Phase::Fin;
  if (old_p == Phase::Fin && new_p == Phase::FINAL) return Phase::FINAL;
  return old_p;
}

struct Record {
  Tag tag;
  std::optional<Word> word;  // coded element, absent = ⊥
  Phase phase = Phase::Fin;
};

struct TagTriple {
  Tag pre;
  Tag fin;
  Tag FIN;
  friend bool operator==(const TagTriple& a, const TagTriple& b) {
    return a.pre == b.pre && a.fin == b.fin && a.FIN == b.FIN;
  }
  friend bool operator!=(const TagTriple& a, const TagTriple& b) { return !(a == b); }
};

struct QuorumConfig {
  int n = 0;  // servers
  int f = 0;  // crash budget
  int e = 0;  // malicious budget
  int k = 0;  // code dimension

  void validate() const {
    if (n < 1) throw std::invalid_argument("quorum config: N must be positive");
    if (f < 0 || e < 0) throw std::invalid_argument("quorum config: f,e must be nonnegative");
    if (k < 1 || k > n - 2 * (f + e))
      throw std::invalid_argument("quorum config: need k in 1..N-2(f+e)");
  }
};

// ceil((N+k+2e)/2)
inline int quorum_size(const QuorumConfig& cfg) {
  cfg.validate();
  return (cfg.n + cfg.k + 2 * cfg.e + 1) / 2;
}

inline int k_threshold(const QuorumConfig& cfg) { return cfg.k + 2 * cfg.e; }

template <typename Set>
bool is_quorum(const Set& ids, const QuorumConfig& cfg) {
  return static_cast<int>(ids.size()) >= quorum_size(cfg);
}

}  // namespace cas

#endif  // CAS_CORE_HPP_
