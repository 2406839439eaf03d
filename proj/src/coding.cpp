#include "cas/coding.hpp"

#include <algorithm>
#include <stdexcept>

namespace cas {

namespace {

Word eval_poly(const Polynomial& poly, Word x, const Gf& f) {
  Word acc = 0;
  for (auto it = poly.rbegin(); it != poly.rend(); ++it) acc = f.add(f.mul(acc, x), f.norm(*it));
  return acc;
}

// Row-reduce the augmented system, free variables pinned to zero.
// Returns nullopt when inconsistent.
std::optional<std::vector<Word>> solve(std::vector<std::vector<Word>> m, int cols, const Gf& f) {
  const int rows = static_cast<int>(m.size());
  std::vector<int> pivot_col_of_row(rows, -1);
  int row = 0;
  for (int col = 0; col < cols && row < rows; ++col) {
    int sel = -1;
    for (int r = row; r < rows; ++r)
      if (m[r][col] != 0) {
        sel = r;
        break;
      }
    if (sel < 0) continue;
    std::swap(m[row], m[sel]);
    Word inv = f.inv(m[row][col]);
    for (int c = col; c <= cols; ++c) m[row][c] = f.mul(m[row][c], inv);
    for (int r = 0; r < rows; ++r) {
      if (r == row || m[r][col] == 0) continue;
      Word factor = m[r][col];
      for (int c = col; c <= cols; ++c) m[r][c] = f.sub(m[r][c], f.mul(factor, m[row][c]));
    }
    pivot_col_of_row[row] = col;
    ++row;
  }
  for (int r = row; r < rows; ++r)
    if (m[r][cols] != 0) return std::nullopt;
  std::vector<Word> x(cols, 0);
  for (int r = 0; r < row; ++r) x[pivot_col_of_row[r]] = m[r][cols];
  return x;
}

}  // namespace

ShareVector rs_encode(const Polynomial& input, int n, const Gf& f) {
  if (input.empty()) throw std::invalid_argument("rs_encode: empty input");
  if (n >= f.p()) throw std::invalid_argument("rs_encode: field too small");
  if (static_cast<int>(input.size()) > n) throw std::invalid_argument("rs_encode: k > N");
  ShareVector out = ShareVector::empty(n);
  for (int j = 1; j <= n; ++j) out.set(j, eval_poly(input, j % f.p(), f));
  return out;
}

std::pair<Polynomial, ShareVector> share_secret(Word secret, int k, int n, const Gf& f,
                                                const std::function<Word()>& draw) {
  if (k < 1 || k > n || n >= f.p()) throw std::invalid_argument("share_secret: need 1 <= k <= N < p");
  Polynomial poly(k);
  poly[0] = f.norm(secret);
  for (int i = 1; i < k; ++i) poly[i] = f.norm(draw());
  return {poly, rs_encode(poly, n, f)};
}

std::optional<Polynomial> rs_decode(const ShareVector& received, int k, const Gf& f) {
  if (k < 1) throw std::invalid_argument("rs_decode: k must be positive");
  std::vector<std::pair<Word, Word>> pts;  // (x_j, y_j)
  for (int j = 1; j <= received.n(); ++j)
    if (received.shares[j - 1]) pts.emplace_back(j % f.p(), f.norm(*received.shares[j - 1]));
  const int n_avail = static_cast<int>(pts.size());
  if (n_avail < k) return std::nullopt;

  const int e = (n_avail - k) / 2;  // correctable error budget
  // Unknowns: Q_0..Q_{k+e-1}, E_0..E_{e-1} (E monic of degree e).
  // Per point: Q(x) - y*E(x) = y*x^e.
  const int qn = k + e;
  const int cols = qn + e;
  std::vector<std::vector<Word>> m(n_avail, std::vector<Word>(cols + 1, 0));
  for (int i = 0; i < n_avail; ++i) {
    auto [x, y] = pts[i];
    Word xp = 1;
    for (int c = 0; c < qn; ++c) {
      m[i][c] = xp;
      xp = f.mul(xp, x);
    }
    xp = 1;
    for (int c = 0; c < e; ++c) {
      m[i][qn + c] = f.neg(f.mul(y, xp));
      xp = f.mul(xp, x);
    }
    m[i][cols] = f.mul(y, f.pow(x, e));
  }
  auto sol = solve(std::move(m), cols, f);
  if (!sol) return std::nullopt;

  Polynomial q(sol->begin(), sol->begin() + qn);
  Polynomial loc(e + 1);  // E(x) = x^e + sum E_c x^c
  for (int c = 0; c < e; ++c) loc[c] = (*sol)[qn + c];
  loc[e] = 1;

  // Long division q / loc; a nonzero remainder means more errors than e.
  Polynomial quot(k, 0);
  Polynomial rem = q;
  for (int d = qn - 1; d >= e; --d) {
    Word c = rem[d];
    if (c == 0) continue;
    if (d - e >= k) return std::nullopt;  // quotient would exceed degree k-1
    quot[d - e] = c;                      // loc is monic
    for (int i = 0; i <= e; ++i) rem[d - e + i] = f.sub(rem[d - e + i], f.mul(c, loc[i]));
  }
  for (Word c : rem)
    if (c != 0) return std::nullopt;

  // The decoded word must agree with all but at most e received shares.
  int disagree = 0;
  for (auto [x, y] : pts)
    if (eval_poly(quot, x, f) != y) ++disagree;
  if (disagree > e) return std::nullopt;
  return quot;
}

std::map<Word, long> privacy_census(const std::vector<std::pair<int, Word>>& fixed_shares, int k,
                                    const Gf& f) {
  if (static_cast<int>(fixed_shares.size()) > k - 1)
    throw std::invalid_argument("privacy_census: more than k-1 fixed shares");
  std::map<Word, long> counts;
  for (Word s = 0; s < f.p(); ++s) counts[s] = 0;
  Polynomial poly(k, 0);
  // Odometer over all p^k coefficient vectors.
  while (true) {
    bool match = true;
    for (const auto& [idx, val] : fixed_shares)
      if (eval_poly(poly, idx % f.p(), f) != f.norm(val)) {
        match = false;
        break;
      }
    if (match) ++counts[poly[0]];
    int pos = 0;
    while (pos < k) {
      if (++poly[pos] < f.p()) break;
      poly[pos] = 0;
      ++pos;
    }
    if (pos == k) break;
  }
  return counts;
}

ShareVector default_object_shares(Word v0, int k, int n, const Gf& f) {
  Polynomial poly(k, 0);
  poly[0] = f.norm(v0);
  return rs_encode(poly, n, f);
}

}  // namespace cas
