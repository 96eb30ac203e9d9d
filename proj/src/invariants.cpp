#include "braidforge/invariants.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

#include "braidforge/error.hpp"

namespace braidforge {

namespace {

// ---------------------------------------------------------------------------
// Temperley-Lieb transfer tables.
//
// Basis: non-crossing perfect matchings of 2n boundary points. Bottom point k
// has label k, top point k has label n + k.

struct TLTables {
  int strands = 0;
  std::vector<std::vector<std::uint8_t>> basis;  // partner by label
  std::size_t identity = 0;
  // act[i][b]: result of stacking e_{i+1} on top of basis element b
  std::vector<std::vector<std::size_t>> act_target;
  std::vector<std::vector<bool>> act_loop;
  std::vector<int> closure_loops;
};

void enumerate_matchings(std::vector<int>& open, std::vector<int>& partner_by_circle,
                         std::vector<std::vector<int>>& out) {
  if (open.empty()) {
    out.push_back(partner_by_circle);
    return;
  }
  const int first = open.front();
  for (std::size_t j = 1; j < open.size(); j += 2) {
    const int second = open[j];
    std::vector<int> inside(open.begin() + 1, open.begin() + static_cast<std::ptrdiff_t>(j));
    std::vector<int> outside(open.begin() + static_cast<std::ptrdiff_t>(j) + 1, open.end());
    partner_by_circle[static_cast<std::size_t>(first)] = second;
    partner_by_circle[static_cast<std::size_t>(second)] = first;
    std::vector<std::vector<int>> inner;
    enumerate_matchings(inside, partner_by_circle, inner);
    for (auto& m : inner) {
      std::vector<std::vector<int>> rest;
      enumerate_matchings(outside, m, rest);
      for (auto& r : rest) out.push_back(std::move(r));
    }
  }
}

int closure_loop_count(const std::vector<std::uint8_t>& partner, int n) {
  // Closure joins top k to bottom k. Walk alternating matching/closure edges.
  std::vector<bool> seen(partner.size(), false);
  int loops = 0;
  for (std::size_t start = 0; start < partner.size(); ++start) {
    if (seen[start]) continue;
    ++loops;
    std::size_t p = start;
    while (!seen[p]) {
      seen[p] = true;
      const std::size_t q = partner[p];
      seen[q] = true;
      p = q < static_cast<std::size_t>(n) ? q + static_cast<std::size_t>(n)
                                          : q - static_cast<std::size_t>(n);
    }
  }
  return loops;
}

std::shared_ptr<const TLTables> build_tables(int n) {
  auto t = std::make_shared<TLTables>();
  t->strands = n;
  const int points = 2 * n;
  std::vector<int> open(static_cast<std::size_t>(points));
  for (int c = 0; c < points; ++c) open[static_cast<std::size_t>(c)] = c;
  std::vector<int> scratch(static_cast<std::size_t>(points), -1);
  std::vector<std::vector<int>> by_circle;
  enumerate_matchings(open, scratch, by_circle);

  auto label = [n](int c) { return c < n ? c : n + (2 * n - 1 - c); };
  std::map<std::vector<std::uint8_t>, std::size_t> index;
  for (const auto& m : by_circle) {
    std::vector<std::uint8_t> partner(static_cast<std::size_t>(points));
    for (int c = 0; c < points; ++c)
      partner[static_cast<std::size_t>(label(c))] =
          static_cast<std::uint8_t>(label(m[static_cast<std::size_t>(c)]));
    index.emplace(partner, t->basis.size());
    t->basis.push_back(std::move(partner));
  }

  std::vector<std::uint8_t> id(static_cast<std::size_t>(points));
  for (int k = 0; k < n; ++k) {
    id[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(n + k);
    id[static_cast<std::size_t>(n + k)] = static_cast<std::uint8_t>(k);
  }
  t->identity = index.at(id);

  t->act_target.assign(static_cast<std::size_t>(n - 1), std::vector<std::size_t>(t->basis.size()));
  t->act_loop.assign(static_cast<std::size_t>(n - 1), std::vector<bool>(t->basis.size()));
  for (int i = 0; i + 1 < n; ++i) {
    const auto ti = static_cast<std::uint8_t>(n + i);
    const auto tj = static_cast<std::uint8_t>(n + i + 1);
    for (std::size_t b = 0; b < t->basis.size(); ++b) {
      auto m = t->basis[b];
      bool loop = false;
      if (m[ti] == tj) {
        loop = true;
      } else {
        const auto a = m[ti], c = m[tj];
        m[a] = c;
        m[c] = a;
        m[ti] = tj;
        m[tj] = ti;
      }
      t->act_target[static_cast<std::size_t>(i)][b] = index.at(m);
      t->act_loop[static_cast<std::size_t>(i)][b] = loop;
    }
  }
  t->closure_loops.reserve(t->basis.size());
  for (const auto& m : t->basis) t->closure_loops.push_back(closure_loop_count(m, n));
  return t;
}

std::shared_ptr<const TLTables> tables_for(int n) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const TLTables>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = build_tables(n);
  return slot;
}

LaurentPolynomial delta() {
  return LaurentPolynomial(-2, {-1, 0, 0, 0, -1});  // -A^2 - A^-2
}

// ---------------------------------------------------------------------------

__int128 abs128(__int128 v) { return v < 0 ? -v : v; }

}  // namespace

LaurentPolynomial kauffman_bracket(const BraidWord& w, int strand_cap) {
  const int n = w.strands();
  if (n > strand_cap) {
    throw Error(Errc::StrandLimitExceeded,
                std::to_string(n) + " strands exceed cap " + std::to_string(strand_cap));
  }
  const auto tables = tables_for(n);
  const std::size_t dim = tables->basis.size();
  const LaurentPolynomial d = delta();

  std::vector<LaurentPolynomial> state(dim);
  state[tables->identity] = LaurentPolynomial::constant(1);
  std::vector<LaurentPolynomial> next(dim);
  for (int k : w.letters()) {
    const auto i = static_cast<std::size_t>(std::abs(k) - 1);
    const int id_exp = k > 0 ? 1 : -1;
    const int e_exp = -id_exp;
    for (auto& p : next) p = {};
    for (std::size_t b = 0; b < dim; ++b) {
      if (state[b].is_zero()) continue;
      next[b] += state[b].shifted(id_exp);
      const std::size_t target = tables->act_target[i][b];
      if (tables->act_loop[i][b]) {
        next[target] += (state[b] * d).shifted(e_exp);
      } else {
        next[target] += state[b].shifted(e_exp);
      }
    }
    std::swap(state, next);
  }

  std::vector<LaurentPolynomial> delta_pow{LaurentPolynomial::constant(1)};
  LaurentPolynomial result;
  for (std::size_t b = 0; b < dim; ++b) {
    if (state[b].is_zero()) continue;
    const auto loops = static_cast<std::size_t>(tables->closure_loops[b] - 1);
    while (delta_pow.size() <= loops) delta_pow.push_back(delta_pow.back() * d);
    result += state[b] * delta_pow[loops];
  }
  return result;
}

JonesPolynomial jones_polynomial(const BraidWord& w, int strand_cap) {
  const int wr = writhe(w);
  // (-A)^(-3w)
  const std::int64_t sign = (std::abs(wr) % 2 == 0) ? 1 : -1;
  const LaurentPolynomial in_a = kauffman_bracket(w, strand_cap).shifted(-3 * wr).scaled(sign);
  // A = t^(-1/4): A^e becomes t^(-e/4); store exponents in quarter units first.
  const LaurentPolynomial quarters = in_a.inverted_variable();
  JonesPolynomial j;
  if (quarters.exponents_divisible_by(4)) {
    j.poly = quarters.exponents_divided(4);
    j.root = 1;
  } else {
    j.poly = quarters.exponents_divided(2);
    j.root = 2;
  }
  return j;
}

int jones_span(const LaurentPolynomial& p) {
  if (p.is_zero()) throw Error(Errc::ZeroPolynomial, "span of zero polynomial");
  return p.max_exponent() - p.min_exponent();
}

double jones_span(const JonesPolynomial& j) {
  return static_cast<double>(jones_span(j.poly)) / j.root;
}

PolyMatrix burau_reduced(const BraidWord& w) {
  const auto m = static_cast<std::size_t>(w.strands() - 1);
  PolyMatrix M(m, std::vector<LaurentPolynomial>(m));
  for (std::size_t a = 0; a < m; ++a) M[a][a] = LaurentPolynomial::constant(1);

  const auto t = LaurentPolynomial::monomial(1, 1);
  const auto neg_t = LaurentPolynomial::monomial(-1, 1);
  const auto one = LaurentPolynomial::constant(1);
  const auto t_inv = LaurentPolynomial::monomial(1, -1);
  const auto neg_t_inv = LaurentPolynomial::monomial(-1, -1);

  for (int k : w.letters()) {
    const auto r = static_cast<std::size_t>(std::abs(k) - 1);
    // Generator equals the identity except in row r.
    const LaurentPolynomial& left = k > 0 ? t : one;           // G[r][r-1]
    const LaurentPolynomial& diag = k > 0 ? neg_t : neg_t_inv;  // G[r][r]
    const LaurentPolynomial& right = k > 0 ? one : t_inv;       // G[r][r+1]
    for (std::size_t a = 0; a < m; ++a) {
      const LaurentPolynomial mr = M[a][r];
      if (mr.is_zero()) continue;
      if (r > 0) M[a][r - 1] += mr * left;
      if (r + 1 < m) M[a][r + 1] += mr * right;
      M[a][r] = mr * diag;
    }
  }
  return M;
}

LaurentPolynomial determinant(const PolyMatrix& m) {
  const std::size_t n = m.size();
  if (n == 0) return LaurentPolynomial::constant(1);
  if (n > 20) throw std::invalid_argument("polynomial determinant limited to 20x20");
  // Laplace expansion by rows over column subsets.
  std::vector<LaurentPolynomial> dp(std::size_t{1} << n);
  dp[0] = LaurentPolynomial::constant(1);
  for (std::size_t mask = 0; mask < dp.size(); ++mask) {
    if (dp[mask].is_zero()) continue;
    const auto row = static_cast<std::size_t>(__builtin_popcountll(mask));
    if (row >= n) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (mask & (std::size_t{1} << c)) continue;
      if (m[row][c].is_zero()) continue;
      const int above = __builtin_popcountll(mask >> (c + 1));
      LaurentPolynomial term = dp[mask] * m[row][c];
      dp[mask | (std::size_t{1} << c)] += (above % 2 == 0) ? term : -term;
    }
  }
  return dp.back();
}

LaurentPolynomial alexander_polynomial(const BraidWord& w) {
  if (component_count(w) != 1) throw Error(Errc::NotAKnot, w.to_string());
  PolyMatrix b = burau_reduced(w);
  for (std::size_t a = 0; a < b.size(); ++a) b[a][a] = b[a][a] - LaurentPolynomial::constant(1);
  const LaurentPolynomial det = determinant(b);
  const LaurentPolynomial cyclotomic(0, std::vector<std::int64_t>(static_cast<std::size_t>(w.strands()), 1));
  LaurentPolynomial delta_poly;
  if (!det.divide_exact(cyclotomic, delta_poly) || delta_poly.is_zero()) {
    throw std::logic_error("Burau determinant not divisible for " + w.to_string());
  }
  const int lo = delta_poly.min_exponent(), hi = delta_poly.max_exponent();
  if ((hi - lo) % 2 != 0) throw std::logic_error("odd Alexander span for " + w.to_string());
  delta_poly = delta_poly.shifted(-(lo + hi) / 2);
  if (delta_poly.evaluate(std::int64_t{1}) < 0) delta_poly = -delta_poly;
  return delta_poly;
}

GoeritzMatrix goeritz_matrix(const BraidWord& w) {
  if (component_count(w) != 1) throw Error(Errc::NotAKnot, w.to_string());
  const int n = w.strands();
  const auto& letters = w.letters();

  // Crossing positions per gap (gap g lies between strands g and g+1).
  std::vector<std::vector<std::size_t>> gap_positions(static_cast<std::size_t>(n + 1));
  for (std::size_t p = 0; p < letters.size(); ++p)
    gap_positions[static_cast<std::size_t>(std::abs(letters[p]))].push_back(p);

  // Region ids: inner (gap 0), gap regions, outer (gap n). Colour of gap g is g % 2.
  const int none = -1;
  std::vector<std::vector<int>> region_id(static_cast<std::size_t>(n + 1));
  int white = 0;
  for (int g = 0; g <= n; ++g) {
    const std::size_t count = (g == 0 || g == n) ? 1 : gap_positions[static_cast<std::size_t>(g)].size();
    region_id[static_cast<std::size_t>(g)].assign(count, none);
    if (g % 2 != 0) continue;
    for (auto& id : region_id[static_cast<std::size_t>(g)]) id = white++;
  }

  // Region of gap h at the level of word position p.
  auto region_at = [&](int h, std::size_t p) {
    if (h == 0 || h == n) return region_id[static_cast<std::size_t>(h)][0];
    const auto& pos = gap_positions[static_cast<std::size_t>(h)];
    const auto before = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), p) - pos.begin());
    return region_id[static_cast<std::size_t>(h)][before % pos.size()];
  };

  GoeritzMatrix g;
  g.entries.assign(static_cast<std::size_t>(white), std::vector<std::int64_t>(static_cast<std::size_t>(white), 0));
  for (std::size_t p = 0; p < letters.size(); ++p) {
    const int gap = std::abs(letters[p]);
    const int eps = letters[p] > 0 ? 1 : -1;
    int x, y, eta;
    if (gap % 2 == 0) {
      const auto& pos = gap_positions[static_cast<std::size_t>(gap)];
      const auto m = static_cast<std::size_t>(std::lower_bound(pos.begin(), pos.end(), p) - pos.begin());
      x = region_id[static_cast<std::size_t>(gap)][m];
      y = region_id[static_cast<std::size_t>(gap)][(m + 1) % pos.size()];
      eta = eps;
    } else {
      x = region_at(gap - 1, p);
      y = region_at(gap + 1, p);
      eta = -eps;
    }
    if (x == y) continue;
    g.entries[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] -= eta;
    g.entries[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] -= eta;
  }
  for (std::size_t i = 0; i < g.entries.size(); ++i) {
    std::int64_t off = 0;
    for (std::size_t j = 0; j < g.entries.size(); ++j)
      if (j != i) off += g.entries[i][j];
    g.entries[i][i] = -off;
  }
  return g;
}

GoeritzMatrix reduce(const GoeritzMatrix& g) {
  GoeritzMatrix r;
  r.reduced = true;
  if (g.size() == 0) return r;
  const std::size_t n = g.size() - 1;
  r.entries.assign(n, std::vector<std::int64_t>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r.entries[i][j] = g.entries[i][j];
  return r;
}

std::int64_t determinant(const GoeritzMatrix& g) {
  const std::size_t n = g.size();
  if (n == 0) return 1;
  // Fraction-free Bareiss elimination.
  std::vector<std::vector<__int128>> a(n, std::vector<__int128>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = g.entries[i][j];
  __int128 prev = 1;
  int sign = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a[k][k] == 0) {
      std::size_t swap_row = k + 1;
      while (swap_row < n && a[swap_row][k] == 0) ++swap_row;
      if (swap_row == n) return 0;
      std::swap(a[k], a[swap_row]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    }
    prev = a[k][k];
  }
  const __int128 det = a[n - 1][n - 1] * sign;
  if (abs128(det) > static_cast<__int128>(INT64_MAX)) throw std::overflow_error("Goeritz determinant");
  return static_cast<std::int64_t>(det);
}

std::int64_t knot_determinant(const BraidWord& w) {
  const std::int64_t d = determinant(reduce(goeritz_matrix(w)));
  return d < 0 ? -d : d;
}

LaurentPolynomial InvariantFeatures::jones() const { return LaurentPolynomial(jones_offset, jones_coeffs); }

LaurentPolynomial InvariantFeatures::alexander() const {
  return LaurentPolynomial(alexander_offset, alexander_coeffs);
}

namespace {

std::vector<std::int64_t> pad_poly(const LaurentPolynomial& p, int min_exp, int length, const char* what) {
  if (p.min_exponent() < min_exp || p.max_exponent() >= min_exp + length) {
    throw Error(Errc::PaddingOverflow, std::string(what) + " " + p.to_string() + " outside padding");
  }
  std::vector<std::int64_t> out(static_cast<std::size_t>(length), 0);
  for (int e = p.min_exponent(); e <= p.max_exponent(); ++e)
    out[static_cast<std::size_t>(e - min_exp)] = p.coefficient(e);
  return out;
}

}  // namespace

InvariantFeatures invariant_features(const BraidWord& w, const PaddingSpec& spec, int strand_cap) {
  if (component_count(w) != 1) throw Error(Errc::NotAKnot, w.to_string());
  InvariantFeatures f;
  const JonesPolynomial j = jones_polynomial(w, strand_cap);
  f.jones_coeffs = pad_poly(j.poly, spec.jones_min_exponent, spec.jones_length, "Jones");
  f.jones_offset = spec.jones_min_exponent;
  const LaurentPolynomial alex = alexander_polynomial(w);
  f.alexander_coeffs = pad_poly(alex, spec.alexander_min_exponent, spec.alexander_length, "Alexander");
  f.alexander_offset = spec.alexander_min_exponent;

  const GoeritzMatrix g = reduce(goeritz_matrix(w));
  if (static_cast<int>(g.size()) > spec.goeritz_dim) {
    throw Error(Errc::PaddingOverflow, "Goeritz matrix of size " + std::to_string(g.size()));
  }
  f.goeritz_dim = spec.goeritz_dim;
  const auto dim = static_cast<std::size_t>(spec.goeritz_dim);
  f.goeritz_flat.assign(dim * dim, 0);
  for (std::size_t r = 0; r < g.size(); ++r)
    for (std::size_t c = 0; c < g.size(); ++c) f.goeritz_flat[r * dim + c] = g.entries[r][c];
  const std::int64_t det = determinant(g);
  f.determinant = det < 0 ? -det : det;
  f.jones_span = jones_span(j.poly);
  f.writhe = writhe(w);
  return f;
}

PaddingSpec fit_padding(std::span<const BraidWord> words, int strand_cap) {
  int jlo = 0, jhi = 0, alo = 0, ahi = 0;
  std::size_t gdim = 0;
  for (const auto& w : words) {
    if (component_count(w) != 1) continue;
    const auto j = jones_polynomial(w, strand_cap).poly;
    jlo = std::min(jlo, j.min_exponent());
    jhi = std::max(jhi, j.max_exponent());
    const auto a = alexander_polynomial(w);
    alo = std::min(alo, a.min_exponent());
    ahi = std::max(ahi, a.max_exponent());
    gdim = std::max(gdim, goeritz_matrix(w).size() - 1);
  }
  PaddingSpec spec;
  spec.jones_min_exponent = jlo;
  spec.jones_length = jhi - jlo + 1;
  spec.alexander_min_exponent = alo;
  spec.alexander_length = ahi - alo + 1;
  spec.goeritz_dim = static_cast<int>(gdim);
  return spec;
}

}  // namespace braidforge
