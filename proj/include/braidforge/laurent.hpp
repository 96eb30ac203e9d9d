#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace braidforge {

/// Integer Laurent polynomial sum_k c_k x^k, stored densely from the lowest
/// nonzero exponent. The zero polynomial has no coefficients.
///
/// Coefficient arithmetic wraps modulo 2^64. Ring operations commute with
/// reduction mod 2^64, so every result is exact as long as the true
/// coefficients of that result fit in int64, even if intermediates overflow.
class LaurentPolynomial {
public:
  LaurentPolynomial() = default;
  LaurentPolynomial(int offset, std::vector<std::int64_t> coeffs);

  static LaurentPolynomial constant(std::int64_t c);
  static LaurentPolynomial monomial(std::int64_t c, int exponent);

  bool is_zero() const noexcept { return coeffs_.empty(); }
  int min_exponent() const noexcept { return offset_; }
  int max_exponent() const noexcept { return offset_ + static_cast<int>(coeffs_.size()) - 1; }
  int offset() const noexcept { return offset_; }
  const std::vector<std::int64_t>& coeffs() const noexcept { return coeffs_; }
  std::int64_t coefficient(int exponent) const noexcept;
  /// Number of nonzero terms.
  std::size_t term_count() const noexcept;

  LaurentPolynomial operator+(const LaurentPolynomial& o) const;
  LaurentPolynomial operator-(const LaurentPolynomial& o) const;
  LaurentPolynomial operator*(const LaurentPolynomial& o) const;
  LaurentPolynomial operator-() const;
  LaurentPolynomial& operator+=(const LaurentPolynomial& o);
  LaurentPolynomial scaled(std::int64_t c) const;
  /// Multiplies by x^k.
  LaurentPolynomial shifted(int k) const;
  /// x -> x^{-1}.
  LaurentPolynomial inverted_variable() const;
  /// x -> x^{m}; m must be nonzero.
  LaurentPolynomial substitute_power(int m) const;
  /// Divides every exponent by d; all exponents must be multiples of d.
  LaurentPolynomial exponents_divided(int d) const;
  bool exponents_divisible_by(int d) const noexcept;

  /// Exact division by a polynomial whose lowest and highest coefficients are
  /// units (+-1). Returns false when the remainder is nonzero.
  bool divide_exact(const LaurentPolynomial& divisor, LaurentPolynomial& quotient) const;

  std::int64_t evaluate(std::int64_t x) const;  ///< wrapping; x must be +-1 for negative exponents
  double evaluate(double x) const;

  bool operator==(const LaurentPolynomial&) const = default;

  /// Human-readable form in variable `var`, highest power first.
  std::string to_string(const std::string& var = "t") const;

private:
  void normalize();

  int offset_ = 0;
  std::vector<std::int64_t> coeffs_;
};

}  // namespace braidforge
