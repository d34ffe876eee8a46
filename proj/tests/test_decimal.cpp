#include <stdexcept>

#include "doctest.h"
#include "reflect/decimal.hpp"
#include "reflect/textutil.hpp"

using namespace reflect;

TEST_CASE("decimal parsing and canonical form") {
  CHECK(Decimal::parse("320")->str() == "320");
  CHECK(Decimal::parse("0.8")->str() == "0.8");
  CHECK(Decimal::parse("320.0")->str() == "320");
  CHECK(Decimal::parse("-3.50")->str() == "-3.5");
  CHECK(Decimal::parse("1,200")->str() == "1200");
  CHECK(Decimal::parse("6,000")->str() == "6000");
  CHECK(Decimal::parse("0.0375")->str() == "0.0375");
  CHECK(Decimal::parse(" 42 ")->str() == "42");
  CHECK(!Decimal::parse(""));
  CHECK(!Decimal::parse("abc"));
  CHECK(!Decimal::parse("1.2.3"));
  CHECK(!Decimal::parse(",5"));
  CHECK(!Decimal::parse("5,"));
}

TEST_CASE("decimal arithmetic stays exact") {
  auto mul = *Decimal::parse("400") * *Decimal::parse("0.8");
  CHECK(mul.exact());
  CHECK(mul.str() == "320");

  auto div = *Decimal::parse("75") / *Decimal::parse("2000");
  CHECK(div.exact());
  CHECK(div.str() == "0.0375");

  auto sum = *Decimal::parse("0.1") + *Decimal::parse("0.2");
  CHECK(sum.exact());
  CHECK(sum.str() == "0.3");

  CHECK((*Decimal::parse("14") - *Decimal::parse("14")).str() == "0");
}

TEST_CASE("non-terminating division degrades to a double") {
  auto d = *Decimal::parse("1") / *Decimal::parse("3");
  CHECK(!d.exact());
  CHECK(d.value() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("division by zero is rejected") {
  CHECK_THROWS_AS(*Decimal::parse("5") / *Decimal::parse("0"), std::domain_error);
}

TEST_CASE("equality and tolerance") {
  CHECK(*Decimal::parse("230") == *Decimal::parse("230.0"));
  CHECK(Decimal::same_answer(*Decimal::parse("320"), *Decimal::parse("320")));
  CHECK(!Decimal::same_answer(*Decimal::parse("320"), *Decimal::parse("640")));
  Decimal third = *Decimal::parse("1") / *Decimal::parse("3");
  Decimal third_approx = Decimal::from_double(0.333333433333);
  CHECK(!Decimal::approx_equal(third, Decimal::from_double(0.5)));
  CHECK(Decimal::approx_equal(third, third_approx, 1e-3));
}

TEST_CASE("value matching keys normalize representation") {
  CHECK(Decimal::parse("12")->key() == Decimal::parse("12.0")->key());
  CHECK(Decimal::parse("12")->key() != Decimal::parse("12.5")->key());
}

TEST_CASE("splitmix rng is platform stable") {
  SplitMix64 a(42), b(42);
  CHECK(a.next() == b.next());
  SplitMix64 c(7);
  for (int i = 0; i < 100; ++i) CHECK(c.below(7) < 7);
}

TEST_CASE("word count splits on whitespace runs") {
  CHECK(word_count("") == 0);
  CHECK(word_count("   ") == 0);
  CHECK(word_count("one") == 1);
  CHECK(word_count("a b\tc\nd") == 4);
  CHECK(word_count("  spaced   out  ") == 2);
}
