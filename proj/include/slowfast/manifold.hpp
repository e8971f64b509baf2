#pragma once

#include <array>
#include <string>
#include <vector>

#include "slowfast/series.hpp"

namespace slowfast::manifold {

using series::Rational;
using series::Symbol;
using series::TruncatedSeries;

enum class Stability { sink, saddle };

std::string to_string(Stability s);

struct Equilibrium {
  Rational x;
  Stability stability;
  double value() const { return x.get_d(); }
};

/// Bistable slow-fast model  x' = y + eta(t),  e*y' = f(x) - y,
/// with <eta(t) eta(t')> = 2 D delta(t - t').
///
/// Construction validates the equilibria exactly: each listed x* is a root
/// of f, its label matches the sign of f'(x*), and somewhere two sinks are
/// separated by a single saddle.
class SlowFastModel {
 public:
  SlowFastModel(std::string name, TruncatedSeries fast_drift, double epsilon,
                double noise_d, std::vector<Equilibrium> equilibria);

  static SlowFastModel duffing(double epsilon = 0.1, double noise_d = 0.05);
  static SlowFastModel asymmetric(double epsilon = 0.1,
                                  double noise_d = 0.05);
  /// Stability labels are derived from the sign of f' at each root.
  static SlowFastModel from_coefficients(std::string name,
                                         const std::vector<Rational>& f,
                                         const std::vector<Rational>& roots,
                                         double epsilon, double noise_d);

  const std::string& name() const { return name_; }
  const TruncatedSeries& fast_drift() const { return f_; }
  const TruncatedSeries& fast_drift_slope() const { return df_; }
  const std::vector<Rational>& drift_coefficients() const { return fc_; }
  double epsilon() const { return epsilon_; }
  double noise_d() const { return noise_d_; }
  double sigma() const;
  const std::vector<Equilibrium>& equilibria() const { return equilibria_; }

  double f(double x) const;
  double df(double x) const;
  double d2f(double x) const;

  std::vector<Equilibrium> sinks() const;
  /// Nearest saddle neighbouring `sink`. Throws ConfigError if none.
  Equilibrium adjacent_saddle(const Rational& sink) const;
  /// True when `sink` and `saddle` are equilibria with no other equilibrium
  /// strictly between them.
  bool adjacent(const Rational& sink, const Rational& saddle) const;
  const Equilibrium& equilibrium_at(const Rational& x) const;

  SlowFastModel with_epsilon(double epsilon) const;
  SlowFastModel with_noise(double noise_d) const;

 private:
  std::string name_;
  TruncatedSeries f_;
  TruncatedSeries df_;
  std::vector<Rational> fc_;
  std::vector<double> fc_double_;
  double epsilon_;
  double noise_d_;
  std::vector<Equilibrium> equilibria_;
};

/// A polynomial in (x, l1, y, l2, e) that is affine in each of the fast
/// coordinates y and l2:  c0 + y*cy + l2*cl2 + y*l2*cyl2, with every
/// coefficient a series in (x, l1, e).
struct FastAffine {
  TruncatedSeries c0;
  TruncatedSeries cy;
  TruncatedSeries cl2;
  TruncatedSeries cyl2;

  static FastAffine zero();
  double evaluate(double x, double l1, double y, double l2, double e) const;
  FastAffine d_slow(Symbol s) const;
  FastAffine d_y() const;
  FastAffine d_l2() const;
  /// Substitutes y = h and l2 = k.
  TruncatedSeries on_graph(const TruncatedSeries& h,
                           const TruncatedSeries& k) const;
  std::string to_string() const;

  friend bool operator==(const FastAffine&, const FastAffine&) = default;
  FastAffine& operator+=(const FastAffine& o);
  FastAffine scaled(const Rational& c) const;
  FastAffine times_eps() const;
};

/// Optimal-path equations in slow time for state (x, l1, y, l2):
///   x'     = y + l1
///   l1'    = -f'(x) l2
///   e y'   = f(x) - y
///   e l2'  = l2 - l1
/// The noise has been eliminated through eta = l1.
struct AuxiliarySystem {
  // Right-hand sides as written above; the `fast` entries are the ones
  // multiplied by e on the left.
  FastAffine x_rate;
  FastAffine l1_rate;
  FastAffine y_rate_times_eps;
  FastAffine l2_rate_times_eps;

  using State = std::array<double, 4>;  // x, l1, y, l2
  State rate(const State& z, double e) const;
  std::array<std::array<double, 4>, 4> jacobian(const State& z,
                                                 double e) const;
  /// Layer-time field with e carried as a state whose rate is zero.
  std::array<double, 5> layer_rate(const std::array<double, 5>& z) const;
  /// Layer-time right-hand sides (x', l1', y', l2') as symbolic objects.
  std::array<FastAffine, 4> layer_field() const;
  std::vector<std::string> equations() const;
};

AuxiliarySystem build_auxiliary_system(const SlowFastModel& model);

/// Full Hamiltonian H = l1*y + l1^2/2 + l2*(f(x) - y) in symbolic form.
FastAffine hamiltonian_polynomial(const SlowFastModel& model);

enum class TruncationKind { total_grade, eps_order };

struct CenterManifold {
  TruncatedSeries h;  // y on the manifold
  TruncatedSeries k;  // l2 on the manifold
  TruncationKind kind;
  int cap;

  int grade_cap() const { return h.grade_cap(); }
};

/// Solves the invariance conditions
///   h_x x' + h_l1 l1' = f(x) - h,   k_x x' + k_l1 l1' = k - l1,
/// with x' = e(h + l1), l1' = -e f'(x) k, grade by grade up to `grade_cap`.
CenterManifold solve_center_manifold(const SlowFastModel& model,
                                     int grade_cap);

/// Same conditions solved order by order in e with exact polynomials in
/// (x, l1) at each order. Used for numerics, where |x| ~ 1 makes
/// truncation by total grade inaccurate.
CenterManifold solve_center_manifold_eps(const SlowFastModel& model,
                                         int eps_order);

struct ManifoldResiduals {
  TruncatedSeries h_condition;
  TruncatedSeries k_condition;
  bool vanish() const { return h_condition.is_zero() && k_condition.is_zero(); }
};

ManifoldResiduals manifold_residuals(const CenterManifold& cm,
                                     const SlowFastModel& model);

/// Reduced field on the manifold: x' = h + l1, l1' = -f'(x) k.
struct ReducedField {
  TruncatedSeries x_rate;
  TruncatedSeries l1_rate;
};

ReducedField reduced_field(const CenterManifold& cm,
                           const SlowFastModel& model);

/// Double-precision evaluation of the reduced field at a fixed e.
class CompiledReducedField {
 public:
  CompiledReducedField(const ReducedField& field, const CenterManifold& cm,
                       double e);

  std::array<double, 2> rate(double x, double l1) const;
  std::array<std::array<double, 2>, 2> jacobian(double x, double l1) const;
  double h(double x, double l1) const { return h_(x, l1); }
  double k(double x, double l1) const { return k_(x, l1); }
  series::CompiledSeries::WithGradient h_with_gradient(double x,
                                                       double l1) const {
    return h_.with_gradient(x, l1);
  }
  double epsilon() const { return e_; }

 private:
  series::CompiledSeries x_rate_;
  series::CompiledSeries l1_rate_;
  series::CompiledSeries h_;
  series::CompiledSeries k_;
  double e_;
};

/// Largest e for which the linearization at `sink` of the deterministic
/// slow-fast system has real eigenvalues, 1 / (4 |f'(x*)|). Beyond it the
/// sink is a focus and no real slow manifold passes through it.
double slow_manifold_existence_bound(const SlowFastModel& model,
                                     const Rational& sink);

}  // namespace slowfast::manifold
