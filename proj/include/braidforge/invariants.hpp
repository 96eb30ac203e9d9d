#pragma once

// Classical knot invariants computed natively from braid words.
//
// Conventions: positive letters are positive crossings. The Kauffman bracket
// is a Laurent polynomial in A normalised so that the unknot evaluates to 1.
// The Jones polynomial substitutes A = t^(-1/4) after the writhe correction
// (-A)^(-3w); with this convention sigma_1^3 has J = t + t^3 - t^4.

#include <cstdint>
#include <span>
#include <vector>

#include "braidforge/braid.hpp"
#include "braidforge/laurent.hpp"

namespace braidforge {

inline constexpr int kDefaultStrandCap = 9;

LaurentPolynomial kauffman_bracket(const BraidWord& w, int strand_cap = kDefaultStrandCap);

/// Jones polynomial in the variable t^(1/root). Knots (odd component count)
/// always have root == 1; even component counts give half-integral powers
/// and root == 2.
struct JonesPolynomial {
  LaurentPolynomial poly;
  int root = 1;

  bool operator==(const JonesPolynomial&) const = default;
  bool is_one() const { return poly == LaurentPolynomial::constant(1); }
};

JonesPolynomial jones_polynomial(const BraidWord& w, int strand_cap = kDefaultStrandCap);

/// max exponent - min exponent. Throws ZeroPolynomial.
int jones_span(const LaurentPolynomial& p);
double jones_span(const JonesPolynomial& j);

using PolyMatrix = std::vector<std::vector<LaurentPolynomial>>;

/// Product of reduced Burau matrices over Z[t, t^-1], size strands - 1.
PolyMatrix burau_reduced(const BraidWord& w);
LaurentPolynomial determinant(const PolyMatrix& m);

/// Symmetric representative (Delta(t) = Delta(1/t)) with Delta(1) = 1.
/// Throws NotAKnot unless the closure has one component.
LaurentPolynomial alexander_polynomial(const BraidWord& w);

struct GoeritzMatrix {
  std::vector<std::vector<std::int64_t>> entries;
  bool reduced = false;

  std::size_t size() const noexcept { return entries.size(); }
};

/// Unreduced Goeritz matrix over the white regions of the checkerboard
/// colouring of the closed-braid diagram. White regions are those of the
/// same colour as the region around the braid axis.
GoeritzMatrix goeritz_matrix(const BraidWord& w);
/// Deletes the last row and column.
GoeritzMatrix reduce(const GoeritzMatrix& g);
/// Exact integer determinant; the 0x0 determinant is 1.
std::int64_t determinant(const GoeritzMatrix& g);

std::int64_t knot_determinant(const BraidWord& w);

struct PaddingSpec {
  int jones_min_exponent = -2;
  int jones_length = 5;
  int alexander_min_exponent = -2;
  int alexander_length = 5;
  int goeritz_dim = 4;
};

struct InvariantFeatures {
  std::vector<std::int64_t> jones_coeffs;
  int jones_offset = 0;  ///< exponent of jones_coeffs[0]
  std::vector<std::int64_t> alexander_coeffs;
  int alexander_offset = 0;
  std::vector<std::int64_t> goeritz_flat;  ///< row-major, goeritz_dim x goeritz_dim
  int goeritz_dim = 0;
  std::int64_t determinant = 0;
  int jones_span = 0;
  int writhe = 0;

  LaurentPolynomial jones() const;
  LaurentPolynomial alexander() const;
};

/// Throws NotAKnot or PaddingOverflow.
InvariantFeatures invariant_features(const BraidWord& w, const PaddingSpec& spec,
                                     int strand_cap = kDefaultStrandCap);

/// Smallest padding that fits every knot in `words`.
PaddingSpec fit_padding(std::span<const BraidWord> words, int strand_cap = kDefaultStrandCap);

}  // namespace braidforge
