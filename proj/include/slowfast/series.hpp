#pragma once

// Exact arithmetic on truncated polynomial series in the three symbols
// x, l1 (the slow momentum) and e (the timescale ratio).

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace slowfast::series {

using Rational = mpq_class;

enum class Symbol { x, l1, e };

struct Exponents {
  std::uint16_t x = 0;
  std::uint16_t l1 = 0;
  std::uint16_t e = 0;

  int grade() const { return int(x) + int(l1) + int(e); }
  std::uint16_t of(Symbol s) const;
  friend auto operator<=>(const Exponents&, const Exponents&) = default;
};

Rational parse_rational(const std::string& text);
std::string to_string(const Rational& q);

/// Sparse polynomial in (x, l1, e) with exact rational coefficients.
///
/// Two truncation caps are carried: `grade_cap` bounds the total degree
/// x^i l1^j e^k with i + j + k, and `eps_cap` bounds k alone. Every stored
/// term satisfies both caps and no stored coefficient is zero. Binary
/// operations produce a result carrying the smaller of each cap.
class TruncatedSeries {
 public:
  static constexpr int kNoCap = 1 << 14;
  using TermMap = std::map<Exponents, Rational>;

  explicit TruncatedSeries(int grade_cap = kNoCap, int eps_cap = kNoCap);

  static TruncatedSeries constant(const Rational& c, int grade_cap = kNoCap,
                                  int eps_cap = kNoCap);
  static TruncatedSeries variable(Symbol s, int grade_cap = kNoCap,
                                  int eps_cap = kNoCap);
  static TruncatedSeries monomial(Exponents exps, const Rational& c,
                                  int grade_cap = kNoCap,
                                  int eps_cap = kNoCap);
  /// c0 + c1 x + c2 x^2 + ...
  static TruncatedSeries univariate_x(const std::vector<Rational>& coeffs,
                                      int grade_cap = kNoCap,
                                      int eps_cap = kNoCap);

  int grade_cap() const { return grade_cap_; }
  int eps_cap() const { return eps_cap_; }
  const TermMap& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  bool admits(Exponents exps) const;
  Rational coefficient(Exponents exps) const;
  int max_power(Symbol s) const;
  bool depends_on(Symbol s) const { return max_power(s) > 0; }

  /// Adds c * monomial, dropping it when it lies above a cap.
  void add_term(Exponents exps, const Rational& c);

  TruncatedSeries truncated(int grade_cap, int eps_cap = kNoCap) const;
  /// Terms of total grade exactly g.
  TruncatedSeries grade_part(int g) const;
  /// Coefficient of e^k as a series in (x, l1).
  TruncatedSeries eps_coefficient(int k) const;
  /// Univariate coefficients in x; requires no l1 or e dependence.
  std::vector<Rational> x_coefficients() const;

  double evaluate(double x, double l1, double e) const;

  TruncatedSeries& operator+=(const TruncatedSeries& rhs);
  TruncatedSeries& operator-=(const TruncatedSeries& rhs);
  TruncatedSeries& operator*=(const Rational& c);

  friend bool operator==(const TruncatedSeries& a, const TruncatedSeries& b) {
    return a.terms_ == b.terms_;
  }

  /// Rendering grouped by e-power, e.g. "x - x^3 - (x + l1 - 4x^3)*e".
  std::string to_string() const;

 private:
  int grade_cap_;
  int eps_cap_;
  TermMap terms_;
};

TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b);
TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b);
TruncatedSeries operator-(TruncatedSeries a);
TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b);
TruncatedSeries operator*(const Rational& c, TruncatedSeries a);

TruncatedSeries add(const TruncatedSeries& a, const TruncatedSeries& b);
TruncatedSeries mul(const TruncatedSeries& a, const TruncatedSeries& b);
TruncatedSeries power(const TruncatedSeries& a, int n);

/// Formal partial derivative; caps preserved.
TruncatedSeries diff(const TruncatedSeries& a, Symbol s);

/// Simultaneous substitution of symbols by series, re-truncated at the caps
/// of `a`. Symbols without a binding are kept.
TruncatedSeries compose(const TruncatedSeries& a,
                        const std::map<Symbol, TruncatedSeries>& bindings);

/// Term-wise antiderivative in x evaluated between the bounds; the result
/// depends on l1 and e only.
TruncatedSeries integrate_x_definite(const TruncatedSeries& a,
                                     const Rational& lo, const Rational& hi);

/// Exact quotient a / d where d is univariate in x. Throws ConsistencyError
/// when the division leaves a remainder.
TruncatedSeries divide_exact_by_x_polynomial(const TruncatedSeries& a,
                                             const TruncatedSeries& d);

/// Evaluation of a series at fixed e in double precision, with the
/// partial derivatives in x and l1.
class CompiledSeries {
 public:
  CompiledSeries() = default;
  CompiledSeries(const TruncatedSeries& s, double e);

  double operator()(double x, double l1) const;
  struct WithGradient {
    double value;
    double d_x;
    double d_l1;
  };
  WithGradient with_gradient(double x, double l1) const;

 private:
  struct Term {
    int i;
    int j;
    double c;
  };
  std::vector<Term> terms_;
  int max_x_ = 0;
  int max_l1_ = 0;
};

}  // namespace slowfast::series
