#ifndef CAS_FIELD_HPP_
#define CAS_FIELD_HPP_

#include <cstdint>
#include <stdexcept>

#include "cas/core.hpp"

namespace cas {

// Prime-order field GF(p). The modulus is a scenario parameter, so operations
// take the field by value rather than baking p into a type.
class Gf {
 public:
  explicit Gf(std::int64_t p) : p_(p) {
    if (p < 2 || p >= (std::int64_t{1} << 31) || !is_prime(p))
      throw std::invalid_argument("field modulus must be a prime < 2^31");
  }

  std::int64_t p() const { return p_; }

  Word norm(std::int64_t a) const {
    a %= p_;
    return a < 0 ? a + p_ : a;
  }
  Word add(Word a, Word b) const { return (a + b) % p_; }
  Word sub(Word a, Word b) const { return norm(a - b); }
  Word mul(Word a, Word b) const { return (a * b) % p_; }  // p < 2^31 keeps a*b in int64
  Word neg(Word a) const { return norm(-a); }

  Word pow(Word a, std::int64_t ex) const {
    Word r = 1 % p_;
    a = norm(a);
    while (ex > 0) {
      if (ex & 1) r = mul(r, a);
      a = mul(a, a);
      ex >>= 1;
    }
    return r;
  }

  // Fermat inverse; zero has none.
  Word inv(Word a) const {
    a = norm(a);
    if (a == 0) throw std::domain_error("no inverse of 0");
    return pow(a, p_ - 2);
  }

  static bool is_prime(std::int64_t n) {
    if (n < 2) return false;
    for (std::int64_t d = 2; d * d <= n; ++d)
      if (n % d == 0) return false;
    return true;
  }

 private:
  std::int64_t p_;
};

}  // namespace cas

#endif  // CAS_FIELD_HPP_
