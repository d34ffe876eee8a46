#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace reflect {

// Arithmetic domain for calculator annotations. A value is an exact scaled
// integer (units * 10^-scale) until an operation overflows int64 range or a
// division fails to terminate within kMaxScale digits; it then degrades to a
// binary double and stays inexact.
class Decimal {
 public:
  Decimal() = default;

  // Accepts [-]digits[.digits] with optional thousands commas between digits.
  static std::optional<Decimal> parse(std::string_view text);
  static Decimal from_int(std::int64_t v);
  static Decimal from_double(double v);

  bool exact() const { return exact_; }
  bool is_zero() const;
  double value() const;

  // Canonical rendering: minimal decimal form for exact values ("320", not
  // "320.0"); shortest round-trip form for inexact ones.
  std::string str() const;

  // Stable identity for value matching during chain propagation. Exact values
  // key on normalized (units, scale); inexact values key on the double bits.
  std::string key() const;

  Decimal operator-() const;
  friend Decimal operator+(const Decimal& a, const Decimal& b);
  friend Decimal operator-(const Decimal& a, const Decimal& b);
  friend Decimal operator*(const Decimal& a, const Decimal& b);
  // Throws std::domain_error on a zero divisor.
  friend Decimal operator/(const Decimal& a, const Decimal& b);

  // Exact when both sides are exact, bitwise double compare otherwise.
  bool operator==(const Decimal& rhs) const;
  bool operator!=(const Decimal& rhs) const { return !(*this == rhs); }

  // |a - b| <= rel_tol * max(1, |b|)
  static bool approx_equal(const Decimal& a, const Decimal& b,
                           double rel_tol = 1e-6);

  // Exact compare for exact pairs, approx_equal fallback when either side is
  // an inexact division artifact.
  static bool same_answer(const Decimal& a, const Decimal& b);

  static constexpr int kMaxScale = 18;

 private:
  bool exact_ = true;
  std::int64_t units_ = 0;
  int scale_ = 0;
  double approx_ = 0.0;

  void normalize();
};

}  // namespace reflect
