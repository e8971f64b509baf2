#include "slowfast/series.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "slowfast/errors.hpp"

namespace slowfast::series {

std::uint16_t Exponents::of(Symbol s) const {
  switch (s) {
    case Symbol::x:
      return x;
    case Symbol::l1:
      return l1;
    case Symbol::e:
      return e;
  }
  return 0;
}

namespace {

Exponents with_power(Exponents exps, Symbol s, int p) {
  switch (s) {
    case Symbol::x:
      exps.x = std::uint16_t(p);
      break;
    case Symbol::l1:
      exps.l1 = std::uint16_t(p);
      break;
    case Symbol::e:
      exps.e = std::uint16_t(p);
      break;
  }
  return exps;
}

Exponents operator+(Exponents a, Exponents b) {
  return {std::uint16_t(a.x + b.x), std::uint16_t(a.l1 + b.l1),
          std::uint16_t(a.e + b.e)};
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string t;
  for (char c : text) {
    if (c != ' ') t.push_back(c);
  }
  if (t.empty()) throw ConfigError("empty rational literal");
  try {
    if (t.find_first_of(".eE") != std::string::npos) {
      // Decimal input is converted exactly from its decimal expansion.
      std::size_t pos = 0;
      double check = std::stod(t, &pos);
      (void)check;
      if (pos != t.size()) throw ConfigError("bad rational literal '" + text + "'");
      std::string mant = t;
      long exp10 = 0;
      auto epos = mant.find_first_of("eE");
      if (epos != std::string::npos) {
        exp10 = std::stol(mant.substr(epos + 1));
        mant = mant.substr(0, epos);
      }
      auto dot = mant.find('.');
      if (dot != std::string::npos) {
        exp10 -= long(mant.size() - dot - 1);
        mant.erase(dot, 1);
      }
      if (!mant.empty() && mant[0] == '+') mant.erase(0, 1);
      mpz_class num(mant, 10);
      mpz_class scale;
      mpz_ui_pow_ui(scale.get_mpz_t(), 10, (unsigned long)std::labs(exp10));
      Rational q = exp10 >= 0 ? Rational(num * scale) : Rational(num, scale);
      q.canonicalize();
      return q;
    }
    if (!t.empty() && t[0] == '+') t.erase(0, 1);
    Rational q(t, 10);
    if (q.get_den() == 0) throw ConfigError("zero denominator in '" + text + "'");
    q.canonicalize();
    return q;
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad rational literal '" + text + "'");
  }
}

std::string to_string(const Rational& q) { return q.get_str(); }

TruncatedSeries::TruncatedSeries(int grade_cap, int eps_cap)
    : grade_cap_(grade_cap), eps_cap_(eps_cap) {
  if (grade_cap < 0 || eps_cap < 0) {
    throw ConfigError("series caps must be nonnegative");
  }
}

TruncatedSeries TruncatedSeries::constant(const Rational& c, int grade_cap,
                                          int eps_cap) {
  return monomial({}, c, grade_cap, eps_cap);
}

TruncatedSeries TruncatedSeries::variable(Symbol s, int grade_cap,
                                          int eps_cap) {
  return monomial(with_power({}, s, 1), 1, grade_cap, eps_cap);
}

TruncatedSeries TruncatedSeries::monomial(Exponents exps, const Rational& c,
                                          int grade_cap, int eps_cap) {
  TruncatedSeries s(grade_cap, eps_cap);
  s.add_term(exps, c);
  return s;
}

TruncatedSeries TruncatedSeries::univariate_x(
    const std::vector<Rational>& coeffs, int grade_cap, int eps_cap) {
  TruncatedSeries s(grade_cap, eps_cap);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    s.add_term({std::uint16_t(i), 0, 0}, coeffs[i]);
  }
  return s;
}

bool TruncatedSeries::admits(Exponents exps) const {
  return exps.grade() <= grade_cap_ && exps.e <= eps_cap_;
}

Rational TruncatedSeries::coefficient(Exponents exps) const {
  auto it = terms_.find(exps);
  return it == terms_.end() ? Rational(0) : it->second;
}

int TruncatedSeries::max_power(Symbol s) const {
  int m = 0;
  for (const auto& [exps, c] : terms_) m = std::max(m, int(exps.of(s)));
  return m;
}

void TruncatedSeries::add_term(Exponents exps, const Rational& c) {
  if (c == 0 || !admits(exps)) return;
  // mpq_class(n, d) built by callers is not necessarily in lowest terms.
  Rational v = c;
  v.canonicalize();
  auto [it, inserted] = terms_.try_emplace(exps, v);
  if (!inserted) {
    it->second += v;
    if (it->second == 0) terms_.erase(it);
  }
}

TruncatedSeries TruncatedSeries::truncated(int grade_cap, int eps_cap) const {
  TruncatedSeries out(std::min(grade_cap, grade_cap_),
                      std::min(eps_cap, eps_cap_));
  for (const auto& [exps, c] : terms_) out.add_term(exps, c);
  return out;
}

TruncatedSeries TruncatedSeries::grade_part(int g) const {
  TruncatedSeries out(grade_cap_, eps_cap_);
  for (const auto& [exps, c] : terms_) {
    if (exps.grade() == g) out.terms_.emplace(exps, c);
  }
  return out;
}

TruncatedSeries TruncatedSeries::eps_coefficient(int k) const {
  TruncatedSeries out(grade_cap_, eps_cap_);
  for (const auto& [exps, c] : terms_) {
    if (exps.e == k) out.terms_.emplace(Exponents{exps.x, exps.l1, 0}, c);
  }
  return out;
}

std::vector<Rational> TruncatedSeries::x_coefficients() const {
  if (depends_on(Symbol::l1) || depends_on(Symbol::e)) {
    throw ConfigError("series is not univariate in x: " + to_string());
  }
  std::vector<Rational> out(std::size_t(max_power(Symbol::x)) + 1);
  for (const auto& [exps, c] : terms_) out[exps.x] = c;
  return out;
}

double TruncatedSeries::evaluate(double x, double l1, double e) const {
  double sum = 0.0;
  for (const auto& [exps, c] : terms_) {
    sum += c.get_d() * std::pow(x, exps.x) * std::pow(l1, exps.l1) *
           std::pow(e, exps.e);
  }
  return sum;
}

TruncatedSeries& TruncatedSeries::operator+=(const TruncatedSeries& rhs) {
  if (rhs.grade_cap_ < grade_cap_ || rhs.eps_cap_ < eps_cap_) {
    *this = truncated(rhs.grade_cap_, rhs.eps_cap_);
  }
  for (const auto& [exps, c] : rhs.terms_) add_term(exps, c);
  return *this;
}

TruncatedSeries& TruncatedSeries::operator-=(const TruncatedSeries& rhs) {
  if (rhs.grade_cap_ < grade_cap_ || rhs.eps_cap_ < eps_cap_) {
    *this = truncated(rhs.grade_cap_, rhs.eps_cap_);
  }
  for (const auto& [exps, c] : rhs.terms_) add_term(exps, -c);
  return *this;
}

TruncatedSeries& TruncatedSeries::operator*=(const Rational& c) {
  if (c == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [exps, v] : terms_) v *= c;
  return *this;
}

TruncatedSeries operator+(TruncatedSeries a, const TruncatedSeries& b) {
  a += b;
  return a;
}

TruncatedSeries operator-(TruncatedSeries a, const TruncatedSeries& b) {
  a -= b;
  return a;
}

TruncatedSeries operator-(TruncatedSeries a) {
  a *= Rational(-1);
  return a;
}

TruncatedSeries operator*(const Rational& c, TruncatedSeries a) {
  a *= c;
  return a;
}

TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b) {
  TruncatedSeries out(std::min(a.grade_cap(), b.grade_cap()),
                      std::min(a.eps_cap(), b.eps_cap()));
  Rational prod;
  for (const auto& [ea, ca] : a.terms()) {
    for (const auto& [eb, cb] : b.terms()) {
      Exponents sum = ea + eb;
      if (!out.admits(sum)) continue;
      prod = ca * cb;
      out.add_term(sum, prod);
    }
  }
  return out;
}

TruncatedSeries add(const TruncatedSeries& a, const TruncatedSeries& b) {
  return a + b;
}

TruncatedSeries mul(const TruncatedSeries& a, const TruncatedSeries& b) {
  return a * b;
}

TruncatedSeries power(const TruncatedSeries& a, int n) {
  TruncatedSeries out =
      TruncatedSeries::constant(1, a.grade_cap(), a.eps_cap());
  for (int i = 0; i < n; ++i) out = out * a;
  return out;
}

TruncatedSeries diff(const TruncatedSeries& a, Symbol s) {
  TruncatedSeries out(a.grade_cap(), a.eps_cap());
  for (const auto& [exps, c] : a.terms()) {
    int p = exps.of(s);
    if (p == 0) continue;
    out.add_term(with_power(exps, s, p - 1), c * p);
  }
  return out;
}

TruncatedSeries compose(const TruncatedSeries& a,
                        const std::map<Symbol, TruncatedSeries>& bindings) {
  const int gcap = a.grade_cap();
  const int ecap = a.eps_cap();
  // Cached powers of each bound symbol.
  std::map<Symbol, std::vector<TruncatedSeries>> powers;
  for (const auto& [sym, value] : bindings) {
    auto& list = powers[sym];
    list.push_back(TruncatedSeries::constant(1, gcap, ecap));
    const int need = a.max_power(sym);
    const TruncatedSeries v = value.truncated(gcap, ecap);
    for (int p = 1; p <= need; ++p) list.push_back(list.back() * v);
  }
  TruncatedSeries out(gcap, ecap);
  for (const auto& [exps, c] : a.terms()) {
    TruncatedSeries term = TruncatedSeries::constant(c, gcap, ecap);
    Exponents kept{};
    for (Symbol s : {Symbol::x, Symbol::l1, Symbol::e}) {
      int p = exps.of(s);
      auto it = powers.find(s);
      if (it == powers.end()) {
        kept = with_power(kept, s, p);
      } else if (p > 0) {
        term = term * it->second[std::size_t(p)];
      }
    }
    if (kept.grade() > 0) {
      term = term * TruncatedSeries::monomial(kept, 1, gcap, ecap);
    }
    out += term;
  }
  return out;
}

TruncatedSeries integrate_x_definite(const TruncatedSeries& a,
                                     const Rational& lo, const Rational& hi) {
  TruncatedSeries out(a.grade_cap(), a.eps_cap());
  for (const auto& [exps, c] : a.terms()) {
    const unsigned long p = exps.x + 1UL;
    mpq_class hi_pow, lo_pow;
    mpz_class num, den;
    mpz_pow_ui(num.get_mpz_t(), hi.get_num_mpz_t(), p);
    mpz_pow_ui(den.get_mpz_t(), hi.get_den_mpz_t(), p);
    hi_pow = Rational(num, den);
    mpz_pow_ui(num.get_mpz_t(), lo.get_num_mpz_t(), p);
    mpz_pow_ui(den.get_mpz_t(), lo.get_den_mpz_t(), p);
    lo_pow = Rational(num, den);
    Rational v = c * (hi_pow - lo_pow) / Rational(long(p));
    v.canonicalize();
    out.add_term({0, exps.l1, exps.e}, v);
  }
  return out;
}

TruncatedSeries divide_exact_by_x_polynomial(const TruncatedSeries& a,
                                             const TruncatedSeries& d) {
  const std::vector<Rational> dc = d.x_coefficients();
  const int dd = int(dc.size()) - 1;
  if (d.is_zero()) throw ConsistencyError("division by the zero polynomial");
  // Group the dividend by (l1, e) exponents.
  std::map<std::pair<int, int>, std::vector<Rational>> groups;
  for (const auto& [exps, c] : a.terms()) {
    auto& v = groups[{exps.l1, exps.e}];
    if (v.size() <= exps.x) v.resize(exps.x + 1UL);
    v[exps.x] = c;
  }
  TruncatedSeries out(a.grade_cap(), a.eps_cap());
  for (auto& [key, rem] : groups) {
    const int n = int(rem.size()) - 1;
    if (n < dd) {
      throw ConsistencyError("division by x-polynomial leaves a remainder");
    }
    std::vector<Rational> q(std::size_t(n - dd + 1));
    for (int i = n - dd; i >= 0; --i) {
      q[std::size_t(i)] = rem[std::size_t(i + dd)] / dc[std::size_t(dd)];
      for (int j = 0; j <= dd; ++j) {
        rem[std::size_t(i + j)] -= q[std::size_t(i)] * dc[std::size_t(j)];
      }
    }
    for (const auto& r : rem) {
      if (r != 0) {
        throw ConsistencyError("division by x-polynomial leaves a remainder");
      }
    }
    for (std::size_t i = 0; i < q.size(); ++i) {
      out.add_term({std::uint16_t(i), std::uint16_t(key.first),
                    std::uint16_t(key.second)},
                   q[i]);
    }
  }
  return out;
}

namespace {

// Coefficient text juxtaposed with the monomial: "4x^3", "x", "1/2*x".
std::string monomial_text(Exponents exps) {
  std::string out;
  auto part = [&](const char* name, int p) {
    if (p == 0) return;
    if (!out.empty()) out += "*";
    out += name;
    if (p > 1) out += "^" + std::to_string(p);
  };
  part("x", exps.x);
  part("l1", exps.l1);
  return out;
}

std::string term_text(const Rational& magnitude, Exponents exps) {
  const std::string mono = monomial_text(exps);
  if (mono.empty()) return magnitude.get_str();
  if (magnitude == 1) return mono;
  if (magnitude.get_den() == 1) return magnitude.get_str() + mono;
  return magnitude.get_str() + "*" + mono;
}

// Terms of one e-group as (coefficient, exponents) in rendering order.
using Group = std::vector<std::pair<Rational, Exponents>>;

std::string group_text(const Group& g) {
  std::string out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& [c, exps] = g[i];
    const bool neg = c < 0;
    const Rational mag = neg ? Rational(-c) : c;
    if (i == 0) {
      out += neg ? "-" : "";
    } else {
      out += neg ? " - " : " + ";
    }
    out += term_text(mag, exps);
  }
  return out;
}

}  // namespace

std::string TruncatedSeries::to_string() const {
  if (terms_.empty()) return "0";
  std::map<int, Group> groups;
  for (const auto& [exps, c] : terms_) {
    groups[exps.e].emplace_back(c, Exponents{exps.x, exps.l1, 0});
  }
  for (auto& [k, g] : groups) {
    std::sort(g.begin(), g.end(), [](const auto& a, const auto& b) {
      const int da = a.second.x + a.second.l1;
      const int db = b.second.x + b.second.l1;
      if (da != db) return da < db;
      return a.second.x > b.second.x;
    });
  }
  std::string out;
  bool first = true;
  for (auto& [k, g] : groups) {
    if (k == 0) {
      out += group_text(g);
      first = false;
      continue;
    }
    std::string factor = k == 1 ? "e" : "e^" + std::to_string(k);
    const bool neg = g.front().first < 0;
    Group shown = g;
    if (neg) {
      for (auto& t : shown) t.first = -t.first;
    }
    std::string body;
    if (shown.size() == 1) {
      const auto& [c, exps] = shown.front();
      body = monomial_text(exps).empty()
                 ? (c == 1 ? factor : c.get_str() + "*" + factor)
                 : term_text(c, exps) + "*" + factor;
    } else {
      body = "(" + group_text(shown) + ")*" + factor;
    }
    if (first) {
      out += (neg ? "-" : "") + body;
    } else {
      out += (neg ? " - " : " + ") + body;
    }
    first = false;
  }
  return out;
}

CompiledSeries::CompiledSeries(const TruncatedSeries& s, double e) {
  std::map<std::pair<int, int>, double> folded;
  for (const auto& [exps, c] : s.terms()) {
    folded[{exps.x, exps.l1}] += c.get_d() * std::pow(e, exps.e);
  }
  for (const auto& [key, c] : folded) {
    if (c == 0.0) continue;
    terms_.push_back({key.first, key.second, c});
    max_x_ = std::max(max_x_, key.first);
    max_l1_ = std::max(max_l1_, key.second);
  }
}

double CompiledSeries::operator()(double x, double l1) const {
  return with_gradient(x, l1).value;
}

CompiledSeries::WithGradient CompiledSeries::with_gradient(double x,
                                                           double l1) const {
  // Small fixed-size power tables; degrees stay well below 64 in practice.
  thread_local std::vector<double> px, pl;
  px.assign(std::size_t(max_x_) + 1, 1.0);
  pl.assign(std::size_t(max_l1_) + 1, 1.0);
  for (int i = 1; i <= max_x_; ++i) px[i] = px[i - 1] * x;
  for (int j = 1; j <= max_l1_; ++j) pl[j] = pl[j - 1] * l1;
  WithGradient g{0.0, 0.0, 0.0};
  for (const auto& t : terms_) {
    g.value += t.c * px[t.i] * pl[t.j];
    if (t.i > 0) g.d_x += t.c * t.i * px[t.i - 1] * pl[t.j];
    if (t.j > 0) g.d_l1 += t.c * t.j * px[t.i] * pl[t.j - 1];
  }
  return g;
}

}  // namespace slowfast::series
