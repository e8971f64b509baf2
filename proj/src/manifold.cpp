#include "slowfast/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slowfast/errors.hpp"

namespace slowfast::manifold {

namespace {

Rational eval_exact(const std::vector<Rational>& c, const Rational& x) {
  Rational acc = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

std::vector<Rational> derivative(const std::vector<Rational>& c) {
  std::vector<Rational> d;
  for (std::size_t i = 1; i < c.size(); ++i) d.push_back(c[i] * long(i));
  if (d.empty()) d.push_back(0);
  return d;
}

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

TruncatedSeries l1_symbol() { return TruncatedSeries::variable(Symbol::l1); }
TruncatedSeries e_symbol() { return TruncatedSeries::variable(Symbol::e); }
TruncatedSeries one() { return TruncatedSeries::constant(1); }
TruncatedSeries zero_series() { return TruncatedSeries(); }

}  // namespace

std::string to_string(Stability s) {
  return s == Stability::sink ? "sink" : "saddle";
}

SlowFastModel::SlowFastModel(std::string name, TruncatedSeries fast_drift,
                             double epsilon, double noise_d,
                             std::vector<Equilibrium> equilibria)
    : name_(std::move(name)),
      f_(std::move(fast_drift)),
      epsilon_(epsilon),
      noise_d_(noise_d),
      equilibria_(std::move(equilibria)) {
  if (f_.depends_on(Symbol::l1) || f_.depends_on(Symbol::e)) {
    throw ConfigError("fast drift must be a univariate polynomial in x, got " +
                      f_.to_string());
  }
  if (!(epsilon_ > 0.0) || !std::isfinite(epsilon_)) {
    throw ConfigError("epsilon must be a positive finite number");
  }
  if (!(noise_d_ >= 0.0) || !std::isfinite(noise_d_)) {
    throw ConfigError("noise intensity D must be nonnegative and finite");
  }
  fc_ = f_.is_zero() ? std::vector<Rational>{0} : f_.x_coefficients();
  df_ = diff(f_, Symbol::x);
  for (const auto& c : fc_) fc_double_.push_back(c.get_d());

  std::sort(equilibria_.begin(), equilibria_.end(),
            [](const Equilibrium& a, const Equilibrium& b) { return a.x < b.x; });
  const auto dfc = derivative(fc_);
  for (std::size_t i = 0; i < equilibria_.size(); ++i) {
    const auto& eq = equilibria_[i];
    if (i > 0 && equilibria_[i - 1].x == eq.x) {
      throw ConfigError("duplicate equilibrium x* = " + eq.x.get_str());
    }
    if (eval_exact(fc_, eq.x) != 0) {
      throw ConfigError("x* = " + eq.x.get_str() + " is not a root of f(x) = " +
                        f_.to_string());
    }
    const Rational slope = eval_exact(dfc, eq.x);
    if (slope == 0) {
      throw ConfigError("equilibrium x* = " + eq.x.get_str() +
                        " is not hyperbolic (f'(x*) = 0)");
    }
    const Stability expected = slope < 0 ? Stability::sink : Stability::saddle;
    if (expected != eq.stability) {
      throw ConfigError("equilibrium x* = " + eq.x.get_str() + " labelled " +
                        to_string(eq.stability) + " but f'(x*) = " +
                        slope.get_str());
    }
  }
  bool bistable = false;
  for (std::size_t i = 0; i + 2 < equilibria_.size(); ++i) {
    if (equilibria_[i].stability == Stability::sink &&
        equilibria_[i + 1].stability == Stability::saddle &&
        equilibria_[i + 2].stability == Stability::sink) {
      bistable = true;
    }
  }
  if (!bistable) {
    throw ConfigError("model needs two sinks separated by one saddle");
  }
}

SlowFastModel SlowFastModel::duffing(double epsilon, double noise_d) {
  return SlowFastModel(
      "duffing", TruncatedSeries::univariate_x({0, 1, 0, -1}), epsilon,
      noise_d,
      {{-1, Stability::sink}, {0, Stability::saddle}, {1, Stability::sink}});
}

SlowFastModel SlowFastModel::asymmetric(double epsilon, double noise_d) {
  // f = x(1 + x)(2 - x) = 2x + x^2 - x^3
  return SlowFastModel(
      "asymmetric", TruncatedSeries::univariate_x({0, 2, 1, -1}), epsilon,
      noise_d,
      {{-1, Stability::sink}, {0, Stability::saddle}, {2, Stability::sink}});
}

SlowFastModel SlowFastModel::from_coefficients(
    std::string name, const std::vector<Rational>& f,
    const std::vector<Rational>& roots, double epsilon, double noise_d) {
  const auto df = derivative(f);
  std::vector<Equilibrium> eqs;
  for (const auto& r : roots) {
    const Rational s = eval_exact(df, r);
    eqs.push_back({r, s < 0 ? Stability::sink : Stability::saddle});
  }
  return SlowFastModel(std::move(name), TruncatedSeries::univariate_x(f),
                       epsilon, noise_d, std::move(eqs));
}

double SlowFastModel::sigma() const { return std::sqrt(2.0 * noise_d_); }

double SlowFastModel::f(double x) const { return horner(fc_double_, x); }

double SlowFastModel::df(double x) const {
  double acc = 0.0;
  for (std::size_t i = fc_double_.size(); i-- > 1;) {
    acc = acc * x + double(i) * fc_double_[i];
  }
  return acc;
}

double SlowFastModel::d2f(double x) const {
  double acc = 0.0;
  for (std::size_t i = fc_double_.size(); i-- > 2;) {
    acc = acc * x + double(i * (i - 1)) * fc_double_[i];
  }
  return acc;
}

std::vector<Equilibrium> SlowFastModel::sinks() const {
  std::vector<Equilibrium> out;
  for (const auto& e : equilibria_) {
    if (e.stability == Stability::sink) out.push_back(e);
  }
  return out;
}

const Equilibrium& SlowFastModel::equilibrium_at(const Rational& x) const {
  for (const auto& e : equilibria_) {
    if (e.x == x) return e;
  }
  throw ConfigError("x = " + x.get_str() + " is not an equilibrium of " +
                    name_);
}

Equilibrium SlowFastModel::adjacent_saddle(const Rational& sink) const {
  const auto& s = equilibrium_at(sink);
  if (s.stability != Stability::sink) {
    throw ConfigError("x = " + sink.get_str() + " is not a sink");
  }
  const Equilibrium* best = nullptr;
  for (std::size_t i = 0; i < equilibria_.size(); ++i) {
    if (equilibria_[i].x != sink) continue;
    for (std::size_t j : {i + 1, i - 1}) {
      if (j >= equilibria_.size()) continue;
      const auto& cand = equilibria_[j];
      if (cand.stability != Stability::saddle) continue;
      if (!best || abs(cand.x - sink) < abs(best->x - sink)) best = &cand;
    }
  }
  if (!best) {
    throw ConfigError("sink x = " + sink.get_str() + " has no adjacent saddle");
  }
  return *best;
}

bool SlowFastModel::adjacent(const Rational& a, const Rational& b) const {
  bool found_a = false, found_b = false;
  for (const auto& e : equilibria_) {
    found_a |= e.x == a;
    found_b |= e.x == b;
  }
  if (!found_a || !found_b || a == b) return false;
  const Rational lo = a < b ? a : b;
  const Rational hi = a < b ? b : a;
  for (const auto& e : equilibria_) {
    if (e.x > lo && e.x < hi) return false;
  }
  return true;
}

SlowFastModel SlowFastModel::with_epsilon(double epsilon) const {
  return SlowFastModel(name_, f_, epsilon, noise_d_, equilibria_);
}

SlowFastModel SlowFastModel::with_noise(double noise_d) const {
  return SlowFastModel(name_, f_, epsilon_, noise_d, equilibria_);
}

// ---------------------------------------------------------------------------

FastAffine FastAffine::zero() {
  return {zero_series(), zero_series(), zero_series(), zero_series()};
}

double FastAffine::evaluate(double x, double l1, double y, double l2,
                            double e) const {
  return c0.evaluate(x, l1, e) + y * cy.evaluate(x, l1, e) +
         l2 * cl2.evaluate(x, l1, e) + y * l2 * cyl2.evaluate(x, l1, e);
}

FastAffine FastAffine::d_slow(Symbol s) const {
  return {diff(c0, s), diff(cy, s), diff(cl2, s), diff(cyl2, s)};
}

FastAffine FastAffine::d_y() const {
  return {cy, zero_series(), cyl2, zero_series()};
}

FastAffine FastAffine::d_l2() const {
  return {cl2, cyl2, zero_series(), zero_series()};
}

TruncatedSeries FastAffine::on_graph(const TruncatedSeries& h,
                                     const TruncatedSeries& k) const {
  return c0 + h * cy + k * cl2 + h * k * cyl2;
}

FastAffine& FastAffine::operator+=(const FastAffine& o) {
  c0 += o.c0;
  cy += o.cy;
  cl2 += o.cl2;
  cyl2 += o.cyl2;
  return *this;
}

FastAffine FastAffine::scaled(const Rational& c) const {
  return {c * c0, c * cy, c * cl2, c * cyl2};
}

FastAffine FastAffine::times_eps() const {
  const auto e = e_symbol();
  return {e * c0, e * cy, e * cl2, e * cyl2};
}

std::string FastAffine::to_string() const {
  std::string out;
  auto part = [&](const TruncatedSeries& c, const char* var) {
    if (c.is_zero()) return;
    if (!out.empty()) out += " + ";
    std::string body = c.to_string();
    if (var[0] == '\0') {
      out += body;
    } else if (body == "1") {
      out += var;
    } else if (body == "-1") {
      out += std::string("-") + var;
    } else {
      out += "(" + body + ")*" + var;
    }
  };
  part(c0, "");
  part(cy, "y");
  part(cl2, "l2");
  part(cyl2, "y*l2");
  return out.empty() ? "0" : out;
}

AuxiliarySystem build_auxiliary_system(const SlowFastModel& model) {
  const auto& f = model.fast_drift();
  if (f.depends_on(Symbol::l1) || f.depends_on(Symbol::e)) {
    throw ConfigError("fast drift must be a univariate polynomial in x");
  }
  AuxiliarySystem sys;
  sys.x_rate = {l1_symbol(), one(), zero_series(), zero_series()};
  sys.l1_rate = {zero_series(), zero_series(), -model.fast_drift_slope(),
                 zero_series()};
  sys.y_rate_times_eps = {f, -one(), zero_series(), zero_series()};
  sys.l2_rate_times_eps = {-l1_symbol(), zero_series(), one(), zero_series()};
  return sys;
}

AuxiliarySystem::State AuxiliarySystem::rate(const State& z, double e) const {
  const auto [x, l1, y, l2] = z;
  return {x_rate.evaluate(x, l1, y, l2, e), l1_rate.evaluate(x, l1, y, l2, e),
          y_rate_times_eps.evaluate(x, l1, y, l2, e) / e,
          l2_rate_times_eps.evaluate(x, l1, y, l2, e) / e};
}

std::array<std::array<double, 4>, 4> AuxiliarySystem::jacobian(
    const State& z, double e) const {
  const auto [x, l1, y, l2] = z;
  const std::array<const FastAffine*, 4> rows{&x_rate, &l1_rate,
                                              &y_rate_times_eps,
                                              &l2_rate_times_eps};
  std::array<std::array<double, 4>, 4> j{};
  for (std::size_t r = 0; r < 4; ++r) {
    const double scale = r >= 2 ? 1.0 / e : 1.0;
    j[r][0] = scale * rows[r]->d_slow(Symbol::x).evaluate(x, l1, y, l2, e);
    j[r][1] = scale * rows[r]->d_slow(Symbol::l1).evaluate(x, l1, y, l2, e);
    j[r][2] = scale * rows[r]->d_y().evaluate(x, l1, y, l2, e);
    j[r][3] = scale * rows[r]->d_l2().evaluate(x, l1, y, l2, e);
  }
  return j;
}

std::array<FastAffine, 4> AuxiliarySystem::layer_field() const {
  return {x_rate.times_eps(), l1_rate.times_eps(), y_rate_times_eps,
          l2_rate_times_eps};
}

std::array<double, 5> AuxiliarySystem::layer_rate(
    const std::array<double, 5>& z) const {
  const auto [x, l1, y, l2, e] = z;
  return {e * x_rate.evaluate(x, l1, y, l2, e),
          e * l1_rate.evaluate(x, l1, y, l2, e),
          y_rate_times_eps.evaluate(x, l1, y, l2, e),
          l2_rate_times_eps.evaluate(x, l1, y, l2, e), 0.0};
}

std::vector<std::string> AuxiliarySystem::equations() const {
  return {"x' = " + x_rate.to_string(), "l1' = " + l1_rate.to_string(),
          "e*y' = " + y_rate_times_eps.to_string(),
          "e*l2' = " + l2_rate_times_eps.to_string()};
}

FastAffine hamiltonian_polynomial(const SlowFastModel& model) {
  const auto l1 = l1_symbol();
  return {Rational(1, 2) * (l1 * l1), l1, model.fast_drift(), -one()};
}

// ---------------------------------------------------------------------------

namespace {

TruncatedSeries level_part(const TruncatedSeries& s, TruncationKind kind,
                           int level) {
  if (kind == TruncationKind::total_grade) return s.grade_part(level);
  TruncatedSeries out(s.grade_cap(), s.eps_cap());
  for (const auto& [exps, c] : s.terms()) {
    if (exps.e == level) out.add_term(exps, c);
  }
  return out;
}

struct ConditionTerms {
  TruncatedSeries h_rhs;  // f - (h_x x' + h_l1 l1')
  TruncatedSeries k_rhs;  // l1 + k_x x' + k_l1 l1'
};

ConditionTerms condition_terms(const TruncatedSeries& h,
                               const TruncatedSeries& k,
                               const TruncatedSeries& f,
                               const TruncatedSeries& fp) {
  const int g = h.grade_cap();
  const int ec = h.eps_cap();
  const auto e = TruncatedSeries::variable(Symbol::e, g, ec);
  const auto l1 = TruncatedSeries::variable(Symbol::l1, g, ec);
  const TruncatedSeries x_rate = e * (h + l1);
  const TruncatedSeries l1_rate = -(e * (fp * k));
  ConditionTerms out;
  out.h_rhs = f - (diff(h, Symbol::x) * x_rate + diff(h, Symbol::l1) * l1_rate);
  out.k_rhs = l1 + diff(k, Symbol::x) * x_rate + diff(k, Symbol::l1) * l1_rate;
  return out;
}

void require_origin_equilibrium(const SlowFastModel& model) {
  if (model.fast_drift().coefficient({0, 0, 0}) != 0) {
    throw ConfigError(
        "center-manifold expansion is taken at the origin, which must be an "
        "equilibrium (f(0) = 0)");
  }
}

CenterManifold solve_levels(const SlowFastModel& model, TruncationKind kind,
                            int cap) {
  if (cap < 1) throw ConfigError("center-manifold cap must be >= 1");
  require_origin_equilibrium(model);
  const int gcap = kind == TruncationKind::total_grade ? cap
                                                       : TruncatedSeries::kNoCap;
  const int ecap = kind == TruncationKind::eps_order ? cap
                                                     : TruncatedSeries::kNoCap;
  const TruncatedSeries f = model.fast_drift().truncated(gcap, ecap);
  const TruncatedSeries fp = model.fast_drift_slope().truncated(gcap, ecap);
  TruncatedSeries h(gcap, ecap);
  TruncatedSeries k(gcap, ecap);
  // The level-L part of each right-hand side involves only levels < L of
  // (h, k): the chain-rule terms carry a factor e and at least one further
  // power of the state. Each level is therefore a direct solve.
  for (int level = 0; level <= cap; ++level) {
    const ConditionTerms t = condition_terms(h, k, f, fp);
    h += level_part(t.h_rhs, kind, level);
    k += level_part(t.k_rhs, kind, level);
  }
  CenterManifold cm{h, k, kind, cap};
  for (const auto* s : {&cm.h, &cm.k}) {
    for (const auto& [exps, c] : s->terms()) {
      if (exps.x == 0 && exps.l1 == 0) {
        throw ConsistencyError(
            "center manifold acquired a constant or pure-e term");
      }
    }
  }
  if (!manifold_residuals(cm, model).vanish()) {
    throw ConsistencyError("center-manifold conditions not satisfied");
  }
  return cm;
}

}  // namespace

CenterManifold solve_center_manifold(const SlowFastModel& model,
                                     int grade_cap) {
  return solve_levels(model, TruncationKind::total_grade, grade_cap);
}

CenterManifold solve_center_manifold_eps(const SlowFastModel& model,
                                         int eps_order) {
  return solve_levels(model, TruncationKind::eps_order, eps_order);
}

ManifoldResiduals manifold_residuals(const CenterManifold& cm,
                                     const SlowFastModel& model) {
  const int g = cm.h.grade_cap();
  const int ec = cm.h.eps_cap();
  const TruncatedSeries f = model.fast_drift().truncated(g, ec);
  const TruncatedSeries fp = model.fast_drift_slope().truncated(g, ec);
  const ConditionTerms t = condition_terms(cm.h, cm.k, f, fp);
  return {t.h_rhs - cm.h, t.k_rhs - cm.k};
}

ReducedField reduced_field(const CenterManifold& cm,
                           const SlowFastModel& model) {
  const int g = cm.h.grade_cap();
  const int ec = cm.h.eps_cap();
  const auto l1 = TruncatedSeries::variable(Symbol::l1, g, ec);
  const TruncatedSeries fp = model.fast_drift_slope().truncated(g, ec);
  return {cm.h + l1, -(fp * cm.k)};
}

CompiledReducedField::CompiledReducedField(const ReducedField& field,
                                           const CenterManifold& cm, double e)
    : x_rate_(field.x_rate, e),
      l1_rate_(field.l1_rate, e),
      h_(cm.h, e),
      k_(cm.k, e),
      e_(e) {}

std::array<double, 2> CompiledReducedField::rate(double x, double l1) const {
  return {x_rate_(x, l1), l1_rate_(x, l1)};
}

std::array<std::array<double, 2>, 2> CompiledReducedField::jacobian(
    double x, double l1) const {
  const auto a = x_rate_.with_gradient(x, l1);
  const auto b = l1_rate_.with_gradient(x, l1);
  return {{{a.d_x, a.d_l1}, {b.d_x, b.d_l1}}};
}

double slow_manifold_existence_bound(const SlowFastModel& model,
                                     const Rational& sink) {
  const double slope = std::abs(model.df(sink.get_d()));
  return 1.0 / (4.0 * slope);
}

}  // namespace slowfast::manifold
