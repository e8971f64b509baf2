#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "slowfast/errors.hpp"
#include "slowfast/series.hpp"

using namespace slowfast;
using namespace slowfast::series;

namespace {

TruncatedSeries X(int g = TruncatedSeries::kNoCap) {
  return TruncatedSeries::variable(Symbol::x, g);
}
TruncatedSeries L(int g = TruncatedSeries::kNoCap) {
  return TruncatedSeries::variable(Symbol::l1, g);
}
TruncatedSeries E(int g = TruncatedSeries::kNoCap) {
  return TruncatedSeries::variable(Symbol::e, g);
}

// Random sparse series with small integer/fractional coefficients.
TruncatedSeries random_series(std::mt19937_64& rng, int max_deg) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::uniform_int_distribution<int> num(-5, 5);
  std::uniform_int_distribution<int> den(1, 4);
  std::uniform_int_distribution<int> count(0, 6);
  TruncatedSeries s;
  int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Exponents ex{std::uint16_t(deg(rng)), std::uint16_t(deg(rng)),
                 std::uint16_t(deg(rng))};
    s.add_term(ex, Rational(num(rng), den(rng)));
  }
  return s;
}

}  // namespace

TEST_CASE("rational parsing") {
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("-2") == Rational(-2));
  CHECK(parse_rational("0.125") == Rational(1, 8));
  CHECK(parse_rational("-1.5") == Rational(-3, 2));
  CHECK_THROWS_AS(parse_rational("abc"), ConfigError);
  CHECK_THROWS_AS(parse_rational("1/0"), ConfigError);
}

TEST_CASE("truncation drops terms above the caps") {
  auto s = power(X(3) + L(3), 4);
  CHECK(s.is_zero());
  auto t = (X(4) + E(4)) * (X(4) + E(4));
  CHECK(t.coefficient({1, 0, 1}) == 2);
  CHECK(t.grade_cap() == 4);
  TruncatedSeries u(TruncatedSeries::kNoCap, 1);
  u.add_term({0, 0, 2}, 1);
  CHECK(u.is_zero());
}

TEST_CASE("arithmetic and calculus on small polynomials") {
  auto f = X() - power(X(), 3);
  CHECK(f.to_string() == "x - x^3");
  CHECK(diff(f, Symbol::x).to_string() == "1 - 3x^2");
  auto g = f * L();
  CHECK(g.coefficient({3, 1, 0}) == -1);
  CHECK(integrate_x_definite(f, -1, 0) == TruncatedSeries::constant(Rational(-1, 4)));
  auto c = compose(f, {{Symbol::x, L() + E()}});
  CHECK(c.coefficient({0, 2, 1}) == -3);
  CHECK(c.coefficient({0, 0, 1}) == 1);
}

TEST_CASE("rendering groups powers of e") {
  auto h = X() - power(X(), 3) -
           (X() + L() - 4 * power(X(), 3) - 3 * power(X(), 2) * L()) * E();
  CHECK(h.to_string() == "x - x^3 - (x + l1 - 4x^3 - 3x^2*l1)*e");
  CHECK((Rational(5) * L() * power(E(), 3)).to_string() == "5l1*e^3");
  CHECK((Rational(2) * power(E(), 2)).to_string() == "2*e^2");
  CHECK(TruncatedSeries().to_string() == "0");
}

TEST_CASE("exact division by a polynomial in x") {
  auto d = X() - power(X(), 3);
  auto q = L() * power(X(), 2) + Rational(1, 3) * E();
  CHECK(divide_exact_by_x_polynomial(q * d, d) == q);
  CHECK_THROWS_AS(divide_exact_by_x_polynomial(q * d + X(), d),
                  ConsistencyError);
}

TEST_CASE("compiled evaluation agrees with exact evaluation") {
  auto s = Rational(3, 2) * power(X(), 3) * L() - Rational(1, 7) * E() * X() +
           power(L(), 2) * power(E(), 2);
  CompiledSeries c(s, 0.3);
  CHECK(c(0.7, -1.2) == doctest::Approx(s.evaluate(0.7, -1.2, 0.3)).epsilon(1e-14));
  auto g = c.with_gradient(0.7, -1.2);
  CHECK(g.d_x == doctest::Approx(diff(s, Symbol::x).evaluate(0.7, -1.2, 0.3)));
  CHECK(g.d_l1 == doctest::Approx(diff(s, Symbol::l1).evaluate(0.7, -1.2, 0.3)));
}

TEST_CASE("ring laws hold on random series") {
  std::mt19937_64 rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    auto a = random_series(rng, 3);
    auto b = random_series(rng, 3);
    auto c = random_series(rng, 3);
    CHECK(a + b == b + a);
    CHECK(a * b == b * a);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * (b + c) == a * b + a * c);
    CHECK((a - a).is_zero());
    // Leibniz rule.
    CHECK(diff(a * b, Symbol::x) == diff(a, Symbol::x) * b + a * diff(b, Symbol::x));
    // Truncation is a ring homomorphism.
    CHECK((a * b).truncated(4) == (a.truncated(4) * b.truncated(4)).truncated(4));
  }
}

TEST_CASE("integration inverts differentiation on random series") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_series(rng, 3);
    auto d = diff(a, Symbol::x);
    auto lhs = integrate_x_definite(d, -1, 2);
    auto rhs = compose(a, {{Symbol::x, TruncatedSeries::constant(2)}}) -
               compose(a, {{Symbol::x, TruncatedSeries::constant(-1)}});
    CHECK(lhs == rhs);
  }
}
