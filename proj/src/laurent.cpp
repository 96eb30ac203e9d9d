#include "braidforge/laurent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace braidforge {

namespace {

std::int64_t wadd(std::int64_t a, std::int64_t b) noexcept {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wsub(std::int64_t a, std::int64_t b) noexcept {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wmul(std::int64_t a, std::int64_t b) noexcept {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

}  // namespace

LaurentPolynomial::LaurentPolynomial(int offset, std::vector<std::int64_t> coeffs)
    : offset_(offset), coeffs_(std::move(coeffs)) {
  normalize();
}

LaurentPolynomial LaurentPolynomial::constant(std::int64_t c) { return monomial(c, 0); }

LaurentPolynomial LaurentPolynomial::monomial(std::int64_t c, int exponent) {
  return LaurentPolynomial(exponent, {c});
}

void LaurentPolynomial::normalize() {
  auto first = std::find_if(coeffs_.begin(), coeffs_.end(), [](auto c) { return c != 0; });
  if (first == coeffs_.end()) {
    coeffs_.clear();
    offset_ = 0;
    return;
  }
  offset_ += static_cast<int>(first - coeffs_.begin());
  coeffs_.erase(coeffs_.begin(), first);
  while (coeffs_.back() == 0) coeffs_.pop_back();
}

std::int64_t LaurentPolynomial::coefficient(int exponent) const noexcept {
  if (is_zero() || exponent < min_exponent() || exponent > max_exponent()) return 0;
  return coeffs_[static_cast<std::size_t>(exponent - offset_)];
}

std::size_t LaurentPolynomial::term_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(coeffs_.begin(), coeffs_.end(), [](auto c) { return c != 0; }));
}

LaurentPolynomial LaurentPolynomial::operator+(const LaurentPolynomial& o) const {
  LaurentPolynomial r = *this;
  r += o;
  return r;
}

LaurentPolynomial& LaurentPolynomial::operator+=(const LaurentPolynomial& o) {
  if (o.is_zero()) return *this;
  if (is_zero()) return *this = o;
  const int lo = std::min(min_exponent(), o.min_exponent());
  const int hi = std::max(max_exponent(), o.max_exponent());
  std::vector<std::int64_t> c(static_cast<std::size_t>(hi - lo + 1), 0);
  for (std::size_t i = 0; i < coeffs_.size(); ++i)
    c[static_cast<std::size_t>(offset_ - lo) + i] = coeffs_[i];
  for (std::size_t i = 0; i < o.coeffs_.size(); ++i) {
    auto& slot = c[static_cast<std::size_t>(o.offset_ - lo) + i];
    slot = wadd(slot, o.coeffs_[i]);
  }
  offset_ = lo;
  coeffs_ = std::move(c);
  normalize();
  return *this;
}

LaurentPolynomial LaurentPolynomial::operator-() const { return scaled(-1); }

LaurentPolynomial LaurentPolynomial::operator-(const LaurentPolynomial& o) const {
  return *this + (-o);
}

LaurentPolynomial LaurentPolynomial::operator*(const LaurentPolynomial& o) const {
  if (is_zero() || o.is_zero()) return {};
  std::vector<std::int64_t> c(coeffs_.size() + o.coeffs_.size() - 1, 0);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    if (coeffs_[i] == 0) continue;
    for (std::size_t j = 0; j < o.coeffs_.size(); ++j)
      c[i + j] = wadd(c[i + j], wmul(coeffs_[i], o.coeffs_[j]));
  }
  return LaurentPolynomial(offset_ + o.offset_, std::move(c));
}

LaurentPolynomial LaurentPolynomial::scaled(std::int64_t s) const {
  auto c = coeffs_;
  for (auto& x : c) x = wmul(x, s);
  return LaurentPolynomial(offset_, std::move(c));
}

LaurentPolynomial LaurentPolynomial::shifted(int k) const {
  if (is_zero()) return {};
  return LaurentPolynomial(offset_ + k, coeffs_);
}

LaurentPolynomial LaurentPolynomial::inverted_variable() const {
  if (is_zero()) return {};
  std::vector<std::int64_t> c(coeffs_.rbegin(), coeffs_.rend());
  return LaurentPolynomial(-max_exponent(), std::move(c));
}

LaurentPolynomial LaurentPolynomial::substitute_power(int m) const {
  if (m == 0) throw std::invalid_argument("substitute_power: zero power");
  if (is_zero()) return {};
  if (m < 0) return substitute_power(-m).inverted_variable();
  std::vector<std::int64_t> c((coeffs_.size() - 1) * static_cast<std::size_t>(m) + 1, 0);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) c[i * static_cast<std::size_t>(m)] = coeffs_[i];
  return LaurentPolynomial(offset_ * m, std::move(c));
}

bool LaurentPolynomial::exponents_divisible_by(int d) const noexcept {
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    if (coeffs_[i] != 0 && (offset_ + static_cast<int>(i)) % d != 0) return false;
  }
  return true;
}

LaurentPolynomial LaurentPolynomial::exponents_divided(int d) const {
  if (!exponents_divisible_by(d)) throw std::invalid_argument("exponents not divisible");
  if (is_zero()) return {};
  std::vector<std::int64_t> c(static_cast<std::size_t>((max_exponent() - min_exponent()) / d + 1), 0);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    if (coeffs_[i] != 0) c[i / static_cast<std::size_t>(d)] = coeffs_[i];
  }
  return LaurentPolynomial(offset_ / d, std::move(c));
}

bool LaurentPolynomial::divide_exact(const LaurentPolynomial& divisor,
                                     LaurentPolynomial& quotient) const {
  if (divisor.is_zero()) throw std::invalid_argument("division by zero polynomial");
  const std::int64_t lead = divisor.coeffs_.back();
  if (lead != 1 && lead != -1) throw std::invalid_argument("divisor must have unit leading term");
  if (is_zero()) {
    quotient = {};
    return true;
  }
  std::vector<std::int64_t> rem = coeffs_;
  const std::size_t dn = divisor.coeffs_.size();
  if (rem.size() < dn) return false;
  std::vector<std::int64_t> q(rem.size() - dn + 1, 0);
  for (std::size_t i = q.size(); i-- > 0;) {
    const std::int64_t factor = wmul(rem[i + dn - 1], lead);  // lead^-1 == lead
    q[i] = factor;
    if (factor == 0) continue;
    for (std::size_t j = 0; j < dn; ++j) rem[i + j] = wsub(rem[i + j], wmul(factor, divisor.coeffs_[j]));
  }
  if (std::any_of(rem.begin(), rem.end(), [](auto c) { return c != 0; })) return false;
  quotient = LaurentPolynomial(offset_ - divisor.offset_, std::move(q));
  return true;
}

std::int64_t LaurentPolynomial::evaluate(std::int64_t x) const {
  if (offset_ < 0 && x != 1 && x != -1) throw std::invalid_argument("negative exponent at non-unit");
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < coeffs_.size(); ++i) {
    const int e = offset_ + static_cast<int>(i);
    std::int64_t p = 1;
    if (x == -1) {
      p = (std::abs(e) % 2 == 0) ? 1 : -1;
    } else if (x != 1) {
      for (int k = 0; k < e; ++k) p = wmul(p, x);
    }
    sum = wadd(sum, wmul(coeffs_[i], p));
  }
  return sum;
}

double LaurentPolynomial::evaluate(double x) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < coeffs_.size(); ++i)
    sum += static_cast<double>(coeffs_[i]) * std::pow(x, offset_ + static_cast<int>(i));
  return sum;
}

std::string LaurentPolynomial::to_string(const std::string& var) const {
  if (is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = coeffs_.size(); i-- > 0;) {
    const std::int64_t c = coeffs_[i];
    if (c == 0) continue;
    const int e = offset_ + static_cast<int>(i);
    const std::int64_t mag = c < 0 ? -c : c;
    os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + "));
    if (mag != 1 || e == 0) os << mag;
    if (e != 0) {
      os << var;
      if (e != 1) os << '^' << e;
    }
    first = false;
  }
  return os.str();
}

}  // namespace braidforge
