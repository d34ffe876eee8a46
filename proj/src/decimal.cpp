#include "reflect/decimal.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace reflect {

namespace {

constexpr std::array<std::int64_t, 19> kPow10 = {
    1LL,
    10LL,
    100LL,
    1000LL,
    10000LL,
    100000LL,
    1000000LL,
    10000000LL,
    100000000LL,
    1000000000LL,
    10000000000LL,
    100000000000LL,
    1000000000000LL,
    10000000000000LL,
    100000000000000LL,
    1000000000000000LL,
    10000000000000000LL,
    100000000000000000LL,
    1000000000000000000LL,
};

bool mul_overflow(std::int64_t a, std::int64_t b, std::int64_t* out) {
  return __builtin_mul_overflow(a, b, out);
}

bool add_overflow(std::int64_t a, std::int64_t b, std::int64_t* out) {
  return __builtin_add_overflow(a, b, out);
}

std::string shortest_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace

std::optional<Decimal> Decimal::parse(std::string_view text) {
  // strip surrounding whitespace
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  bool neg = false;
  std::size_t i = 0;
  if (text[i] == '-') {
    neg = true;
    ++i;
  } else if (text[i] == '+') {
    ++i;
  }

  std::string digits;
  int scale = -1;  // -1 until a '.' is seen
  bool any_digit = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      any_digit = true;
      if (scale >= 0) ++scale;
    } else if (c == ',') {
      // thousands separator: must sit between digits
      if (!any_digit || scale >= 0 || i + 1 >= text.size() ||
          !(text[i + 1] >= '0' && text[i + 1] <= '9')) {
        return std::nullopt;
      }
    } else if (c == '.') {
      if (scale >= 0) return std::nullopt;
      scale = 0;
    } else {
      return std::nullopt;
    }
  }
  if (!any_digit) return std::nullopt;
  if (scale < 0) scale = 0;

  // strip leading zeros so long inputs like 000...1 still fit
  std::size_t nz = 0;
  while (nz + 1 < digits.size() && digits[nz] == '0') ++nz;
  digits.erase(0, nz);

  if (digits.size() > 18 || scale > kMaxScale) {
    std::string plain(text.begin(), text.end());
    std::erase(plain, ',');
    return from_double(std::strtod(plain.c_str(), nullptr));
  }

  std::int64_t units = 0;
  for (char c : digits) units = units * 10 + (c - '0');
  Decimal d;
  d.exact_ = true;
  d.units_ = neg ? -units : units;
  d.scale_ = scale;
  d.normalize();
  return d;
}

Decimal Decimal::from_int(std::int64_t v) {
  Decimal d;
  d.units_ = v;
  return d;
}

Decimal Decimal::from_double(double v) {
  Decimal d;
  d.exact_ = false;
  d.approx_ = v;
  return d;
}

void Decimal::normalize() {
  if (!exact_) return;
  while (scale_ > 0 && units_ % 10 == 0) {
    units_ /= 10;
    --scale_;
  }
  if (units_ == 0) scale_ = 0;
}

bool Decimal::is_zero() const { return exact_ ? units_ == 0 : approx_ == 0.0; }

double Decimal::value() const {
  if (!exact_) return approx_;
  return static_cast<double>(units_) / static_cast<double>(kPow10[scale_]);
}

std::string Decimal::str() const {
  if (!exact_) return shortest_double(approx_);
  std::int64_t u = units_;
  bool neg = u < 0;
  std::string digits;
  if (u == 0) digits = "0";
  while (u != 0) {
    digits.push_back(static_cast<char>('0' + std::abs(u % 10)));
    u /= 10;
  }
  while (static_cast<int>(digits.size()) <= scale_) digits.push_back('0');
  std::string out;
  if (neg) out.push_back('-');
  for (std::size_t i = digits.size(); i-- > 0;) {
    out.push_back(digits[i]);
    if (scale_ > 0 && static_cast<int>(i) == scale_) out.push_back('.');
  }
  return out;
}

std::string Decimal::key() const {
  if (exact_) return "d:" + std::to_string(units_) + ":" + std::to_string(scale_);
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(approx_));
  __builtin_memcpy(&bits, &approx_, sizeof(bits));
  return "f:" + std::to_string(bits);
}

Decimal Decimal::operator-() const {
  Decimal d = *this;
  if (d.exact_)
    d.units_ = -d.units_;
  else
    d.approx_ = -d.approx_;
  return d;
}

namespace {

Decimal inexact(double v) { return Decimal::from_double(v); }

}  // namespace

Decimal operator+(const Decimal& a, const Decimal& b) {
  if (!a.exact_ || !b.exact_) return inexact(a.value() + b.value());
  int scale = std::max(a.scale_, b.scale_);
  std::int64_t au, bu, sum;
  if (mul_overflow(a.units_, kPow10[scale - a.scale_], &au) ||
      mul_overflow(b.units_, kPow10[scale - b.scale_], &bu) ||
      add_overflow(au, bu, &sum)) {
    return inexact(a.value() + b.value());
  }
  Decimal d;
  d.units_ = sum;
  d.scale_ = scale;
  d.normalize();
  return d;
}

Decimal operator-(const Decimal& a, const Decimal& b) { return a + (-b); }

Decimal operator*(const Decimal& a, const Decimal& b) {
  if (!a.exact_ || !b.exact_) return inexact(a.value() * b.value());
  __int128 prod = static_cast<__int128>(a.units_) * b.units_;
  int scale = a.scale_ + b.scale_;
  while (scale > 0 && prod % 10 == 0) {
    prod /= 10;
    --scale;
  }
  if (scale > Decimal::kMaxScale || prod > INT64_MAX || prod < INT64_MIN) {
    return inexact(a.value() * b.value());
  }
  Decimal d;
  d.units_ = static_cast<std::int64_t>(prod);
  d.scale_ = scale;
  d.normalize();
  return d;
}

Decimal operator/(const Decimal& a, const Decimal& b) {
  if (b.is_zero()) throw std::domain_error("division by zero");
  if (!a.exact_ || !b.exact_) return inexact(a.value() / b.value());

  // exact long division: a/b = (ua/ub) * 10^(sb - sa)
  bool neg = (a.units_ < 0) != (b.units_ < 0);
  __int128 num = a.units_ < 0 ? -static_cast<__int128>(a.units_) : a.units_;
  __int128 den = b.units_ < 0 ? -static_cast<__int128>(b.units_) : b.units_;

  __int128 quot = num / den;
  __int128 rem = num % den;
  int extra = 0;
  while (rem != 0 && extra < Decimal::kMaxScale) {
    num = rem * 10;
    quot = quot * 10 + num / den;
    rem = num % den;
    ++extra;
    if (quot > INT64_MAX) break;
  }
  int scale = extra + a.scale_ - b.scale_;
  while (scale < 0 && quot <= INT64_MAX / 10) {
    quot *= 10;
    ++scale;
  }
  if (rem != 0 || scale < 0 || scale > Decimal::kMaxScale || quot > INT64_MAX) {
    return inexact(a.value() / b.value());
  }
  Decimal d;
  d.units_ = neg ? -static_cast<std::int64_t>(quot) : static_cast<std::int64_t>(quot);
  d.scale_ = scale;
  d.normalize();
  return d;
}

bool Decimal::operator==(const Decimal& rhs) const {
  if (exact_ && rhs.exact_) {
    int scale = std::max(scale_, rhs.scale_);
    __int128 a = static_cast<__int128>(units_) * kPow10[scale - scale_];
    __int128 b = static_cast<__int128>(rhs.units_) * kPow10[scale - rhs.scale_];
    return a == b;
  }
  return value() == rhs.value();
}

bool Decimal::approx_equal(const Decimal& a, const Decimal& b, double rel_tol) {
  double av = a.value(), bv = b.value();
  return std::fabs(av - bv) <= rel_tol * std::max(1.0, std::fabs(bv));
}

bool Decimal::same_answer(const Decimal& a, const Decimal& b) {
  if (a.exact_ && b.exact_) return a == b;
  return approx_equal(a, b);
}

}  // namespace reflect
