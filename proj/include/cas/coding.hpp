#ifndef CAS_CODING_HPP_
#define CAS_CODING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "cas/field.hpp"

namespace cas {

// Message polynomial, coefficients lowest-degree first, length k. Coefficient 0
// is the secret; the rest are the scheme's blinding values.
using Polynomial = std::vector<Word>;

// Per-server coded elements, slot j-1 for server j (1-based indices on the
// wire). nullopt = erased or never received.
struct ShareVector {
  std::vector<std::optional<Word>> shares;

  int n() const { return static_cast<int>(shares.size()); }
  int available() const {
    int c = 0;
    for (const auto& s : shares) c += s.has_value();
    return c;
  }
  static ShareVector empty(int n) { return ShareVector{std::vector<std::optional<Word>>(n)}; }
  void set(int server, Word w) { shares.at(server - 1) = w; }
  void erase(int server) { shares.at(server - 1) = std::nullopt; }
};

// Evaluate at the canonical points x_j = j, j = 1..N. Point 0 is never used,
// so no share equals the secret coefficient.
ShareVector rs_encode(const Polynomial& input, int n, const Gf& f);

// Secret in coefficient 0, k-1 blinding coefficients drawn from draw().
// Returns the polynomial alongside its encoding.
std::pair<Polynomial, ShareVector> share_secret(Word secret, int k, int n, const Gf& f,
                                                const std::function<Word()>& draw);

// Berlekamp-Welch with erasures handled by dropping their equations. Recovers
// the unique degree-<k polynomial whenever 2*(#errors) + (#erasures) < N-k+1;
// nullopt when the linear system is inconsistent, the locator does not divide,
// or too few shares remain. Failure is a value; callers map it to ⊥.
std::optional<Polynomial> rs_decode(const ShareVector& received, int k, const Gf& f);

inline std::optional<Word> rs_decode_secret(const ShareVector& received, int k, const Gf& f) {
  auto poly = rs_decode(received, k, f);
  if (!poly) return std::nullopt;
  return (*poly)[0];
}

// Enumeration oracle for the (k-1)-privacy lemma: for each candidate secret,
// counts the degree-<k polynomials consistent with the fixed shares. Test-scale
// only (walks all p^k polynomials).
std::map<Word, long> privacy_census(const std::vector<std::pair<int, Word>>& fixed_shares, int k,
                                    const Gf& f);

// Coded elements of the default object value v0, from the all-zero blinding
// polynomial; server i's default element w_{t0,i} is slot i.
ShareVector default_object_shares(Word v0, int k, int n, const Gf& f);

}  // namespace cas

#endif  // CAS_CODING_HPP_
