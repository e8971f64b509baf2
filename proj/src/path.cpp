#include "slowfast/path.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>

#include "slowfast/regression.hpp"

namespace slowfast::path {

namespace odeint = boost::numeric::odeint;
using series::Symbol;
using series::TruncatedSeries;

std::string to_string(Route r) {
  switch (r) {
    case Route::singular:
      return "singular";
    case Route::reduced:
      return "reduced";
    case Route::full:
      return "full";
  }
  return "?";
}

double singular_path(double t) {
  // -(1 + e^{2t})^{-1/2}, written to stay finite for large |t|.
  if (t > 0) {
    const double u = std::exp(-2.0 * t);
    return -std::sqrt(u / (1.0 + u));
  }
  return -1.0 / std::sqrt(1.0 + std::exp(2.0 * t));
}

double zero_hamiltonian_curve(const SlowFastModel& model, double x) {
  return -2.0 * model.f(x);
}

Rational singular_action(const SlowFastModel& model, const Rational& sink,
                         const Rational& saddle) {
  const auto& a = model.equilibrium_at(sink);
  const auto& b = model.equilibrium_at(saddle);
  if (a.stability != manifold::Stability::sink ||
      b.stability != manifold::Stability::saddle) {
    throw ConfigError("singular_action needs a sink and a saddle");
  }
  if (!model.adjacent(sink, saddle)) {
    throw ConfigError("equilibria " + sink.get_str() + " and " +
                      saddle.get_str() + " are not adjacent");
  }
  const TruncatedSeries integrand = Rational(-2) * model.fast_drift();
  return integrate_x_definite(integrand, sink, saddle).coefficient({0, 0, 0});
}

Rational default_sink(const SlowFastModel& model) {
  for (const auto& s : model.sinks()) {
    try {
      model.adjacent_saddle(s.x);
      return s.x;
    } catch (const ConfigError&) {
    }
  }
  throw ConfigError("model has no sink with an adjacent saddle");
}

std::vector<Rational> action_series(const SlowFastModel& model, int order,
                                    std::optional<Rational> sink_opt) {
  if (order < 0 || order > 8) {
    throw ConfigError("action series order must lie in [0, 8]");
  }
  const Rational sink = sink_opt ? *sink_opt : default_sink(model);
  const Rational saddle = model.adjacent_saddle(sink).x;
  if (order == 0) return {singular_action(model, sink, saddle)};

  const int cap = TruncatedSeries::kNoCap;
  const auto cm = manifold::solve_center_manifold_eps(model, order);
  const TruncatedSeries f = model.fast_drift().truncated(cap, order);
  const auto L = TruncatedSeries::variable(Symbol::l1, cap, order);
  const auto E = TruncatedSeries::variable(Symbol::e, cap, order);
  // Hamiltonian restricted to the manifold y = h, l2 = k.
  const TruncatedSeries H =
      L * cm.h + Rational(1, 2) * (L * L) + cm.k * (f - cm.h);

  // Zero-energy branch l1 = Lambda(x, e), Lambda_0 = -2 f. At each order,
  // dH/dl1 on the leading branch is -f, so Lambda_n = C_n / f.
  TruncatedSeries lambda = Rational(-2) * f;
  for (int n = 1; n <= order; ++n) {
    const TruncatedSeries c =
        compose(H, {{Symbol::l1, lambda}}).eps_coefficient(n);
    const TruncatedSeries ln = divide_exact_by_x_polynomial(c, f);
    for (const auto& [exps, v] : ln.terms()) {
      lambda.add_term({exps.x, 0, std::uint16_t(n)}, v);
    }
  }
  if (!compose(H, {{Symbol::l1, lambda}}).is_zero()) {
    throw ConsistencyError("zero-energy branch does not annihilate H");
  }

  const TruncatedSeries h_on =
      compose(cm.h, {{Symbol::l1, lambda}});
  const TruncatedSeries k_on = compose(cm.k, {{Symbol::l1, lambda}});
  // Along the branch, dy = (d/dx h(x, Lambda)) dx.
  const TruncatedSeries integrand = lambda + E * k_on * diff(h_on, Symbol::x);
  const TruncatedSeries R = integrate_x_definite(integrand, sink, saddle);
  std::vector<Rational> out;
  for (int n = 0; n <= order; ++n) {
    out.push_back(R.coefficient({0, 0, std::uint16_t(n)}));
  }
  return out;
}

double full_hamiltonian(const SlowFastModel& model, double x, double l1,
                        double y, double l2) {
  return l1 * y + 0.5 * l1 * l1 + l2 * (model.f(x) - y);
}

// ---------------------------------------------------------------------------
// Reduced heteroclinic

namespace {

using State2 = std::array<double, 2>;

struct Box {
  double x_lo, x_hi;
  bool contains(const State2& z) const {
    return std::isfinite(z[0]) && std::isfinite(z[1]) && z[0] >= x_lo &&
           z[0] <= x_hi && z[1] >= -2.0 && z[1] <= 2.0;
  }
};

// Composite Simpson on uniform samples; n - 1 must be even.
double simpson(const std::vector<double>& g, double h, std::size_t stride) {
  const std::size_t n = (g.size() - 1) / stride;
  double s = g.front() + g[n * stride];
  for (std::size_t i = 1; i < n; ++i) {
    s += (i % 2 ? 4.0 : 2.0) * g[i * stride];
  }
  return s * h * double(stride) / 3.0;
}

double checked_simpson(const std::vector<double>& g, double h) {
  if (g.size() < 5 || (g.size() - 1) % 4 != 0) {
    throw ConfigError("quadrature needs 4m + 1 uniform samples");
  }
  const double fine = simpson(g, h, 1);
  const double coarse = simpson(g, h, 2);
  if (std::abs(fine - coarse) > 1e-6) {
    throw QuadratureNotConverged(
        "action changes by " + std::to_string(std::abs(fine - coarse)) +
        " when the sample set is halved");
  }
  return fine;
}

double uniform_spacing(const PathSolution& path) {
  const auto& s = path.samples;
  if (s.size() < 2) throw ConfigError("path has fewer than two samples");
  const double h = (s.back().t - s.front().t) / double(s.size() - 1);
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (std::abs(s[i].t - s[i - 1].t - h) > 1e-9 * std::max(1.0, h)) {
      throw ConfigError("path samples are not uniformly spaced in t");
    }
  }
  return h;
}

}  // namespace

PathSolution reduced_heteroclinic(const SlowFastModel& model,
                                  const CenterManifold& cm, double epsilon,
                                  double delta,
                                  std::optional<Rational> sink_opt) {
  if (!(epsilon >= 0.0 && epsilon <= 0.3)) {
    throw ConfigError("reduced_heteroclinic: epsilon must lie in [0, 0.3]");
  }
  if (!(delta > 0.0 && delta <= 1e-3)) {
    throw ConfigError("reduced_heteroclinic: delta must lie in (0, 1e-3]");
  }
  const Rational sink = sink_opt ? *sink_opt : default_sink(model);
  const Rational saddle_q = model.adjacent_saddle(sink).x;
  const double xs = sink.get_d();
  const double xd = saddle_q.get_d();
  const double dir = xd > xs ? 1.0 : -1.0;
  const Box box{std::min(xs, xd) - 0.5, std::max(xs, xd) + 0.5};

  const auto field = manifold::reduced_field(cm, model);
  const manifold::CompiledReducedField rf(field, cm, epsilon);
  auto rhs = [&rf](const State2& z, State2& dz, double) {
    dz = rf.rate(z[0], z[1]);
  };

  // Unstable eigenvector of the 2x2 Jacobian at the sink.
  const auto j = rf.jacobian(xs, 0.0);
  const double tr = j[0][0] + j[1][1];
  const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
  const double disc = tr * tr / 4.0 - det;
  if (disc <= 0.0) {
    throw NoConnection("reduced sink is not a saddle point in (x, l1)",
                       {0.0, xs, 0.0});
  }
  const double mu = tr / 2.0 + std::sqrt(disc);
  State2 v = std::abs(j[0][1]) > std::abs(mu - j[0][0]) * 1e-14
                 ? State2{j[0][1], mu - j[0][0]}
                 : State2{mu - j[1][1], j[1][0]};
  const double vn = std::hypot(v[0], v[1]);
  v = {v[0] / vn, v[1] / vn};
  if (v[0] * dir < 0) v = {-v[0], -v[1]};
  const State2 z0{xs + delta * v[0], delta * v[1]};

  auto distance = [xd](const State2& z) { return std::hypot(z[0] - xd, z[1]); };

  // Pass 1: locate the closest approach to the saddle.
  auto stepper = odeint::make_dense_output(
      1e-14, 1e-12, odeint::runge_kutta_dopri5<State2>());
  stepper.initialize(z0, 0.0, 1e-3);
  double best = distance(z0), t_best = 0.0;
  const double t_max = 500.0;
  while (true) {
    const auto [t0, t1] = stepper.do_step(rhs);
    const State2& z = stepper.current_state();
    if (!box.contains(z)) {
      throw NoConnection("reduced path left the bounding box at t = " +
                             std::to_string(t1),
                         {t1, z[0], z[1]});
    }
    // The escape segment ends at closest approach or where x stops moving
    // toward the saddle, whichever comes first.
    constexpr int kSub = 16;
    State2 zs, dzs;
    bool turned = false;
    for (int i = 1; i <= kSub && !turned; ++i) {
      const double t = t0 + (t1 - t0) * i / kSub;
      stepper.calc_state(t, zs);
      rhs(zs, dzs, t);
      if (dzs[0] * dir <= 0.0 && t > 0.0) {
        turned = true;
        break;
      }
      const double d = distance(zs);
      if (d < best) {
        best = d;
        t_best = t;
      }
    }
    if (turned) break;
    if (distance(z) > 2.0 * best + 1e-12 && best < 0.25) break;
    if (t1 > t_max) {
      throw NoConnection("reduced path did not reach the saddle",
                         {t1, z[0], z[1]});
    }
  }
  if (best > 1e-3) {
    throw NoConnection("reduced path misses the saddle by " +
                           std::to_string(best),
                       {t_best, 0.0, 0.0});
  }

  // Pass 2: uniform resampling on [0, t_best] with 4m + 1 points.
  const std::size_t m =
      std::max<std::size_t>(8, std::size_t(std::ceil(t_best / (4 * 0.004))));
  const std::size_t n = 4 * m + 1;
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) times[i] = t_best * double(i) / double(n - 1);
  PathSolution out;
  out.route = Route::reduced;
  out.epsilon = epsilon;
  out.sink = sink;
  out.saddle = saddle_q;
  out.samples.reserve(n);
  State2 z = z0;
  odeint::integrate_times(
      odeint::make_dense_output(1e-14, 1e-12,
                                odeint::runge_kutta_dopri5<State2>()),
      rhs, z, times.begin(), times.end(), 1e-3,
      [&](const State2& s, double t) {
        out.samples.push_back(
            {t, s[0], s[1], rf.h(s[0], s[1]), rf.k(s[0], s[1])});
      });
  out.launch_distance = delta;
  out.miss_distance = distance({out.samples.back().x, out.samples.back().l1});
  for (const auto& s : out.samples) {
    out.hamiltonian_drift =
        std::max(out.hamiltonian_drift,
                 std::abs(full_hamiltonian(model, s.x, s.l1, s.y, s.l2)));
  }
  out.action = action_along_path(out, cm, model);
  return out;
}

double action_along_path(const PathSolution& path, const CenterManifold& cm,
                         const SlowFastModel& model) {
  const double h = uniform_spacing(path);
  const double e = path.epsilon;
  const auto field = manifold::reduced_field(cm, model);
  const manifold::CompiledReducedField rf(field, cm, e);
  std::vector<double> g;
  g.reserve(path.samples.size());
  for (const auto& s : path.samples) {
    const auto r = rf.rate(s.x, s.l1);
    const auto hg = rf.h_with_gradient(s.x, s.l1);
    const double dy = hg.d_x * r[0] + hg.d_l1 * r[1];
    g.push_back(s.l1 * r[0] + e * rf.k(s.x, s.l1) * dy);
  }
  return checked_simpson(g, h);
}

// ---------------------------------------------------------------------------
// Forward integration of the full system

PathSolution integrate_full_system(const SlowFastModel& model, double epsilon,
                                   const std::array<double, 4>& z0,
                                   double t_end, int intervals) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
  if (intervals < 4 || intervals % 4 != 0) {
    throw ConfigError("intervals must be a positive multiple of 4");
  }
  using State4 = std::array<double, 4>;
  auto rhs = [&](const State4& z, State4& dz, double) {
    const double f = model.f(z[0]);
    dz = {z[2] + z[1], -model.df(z[0]) * z[3], (f - z[2]) / epsilon,
          (z[3] - z[1]) / epsilon};
  };
  std::vector<double> times(std::size_t(intervals) + 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    times[i] = t_end * double(i) / double(intervals);
  }
  PathSolution out;
  out.route = Route::full;
  out.epsilon = epsilon;
  State4 z = z0;
  odeint::integrate_times(
      odeint::make_dense_output(1e-12, 1e-10,
                                odeint::runge_kutta_dopri5<State4>()),
      rhs, z, times.begin(), times.end(), 1e-4,
      [&](const State4& s, double t) {
        out.samples.push_back({t, s[0], s[1], s[2], s[3]});
      });
  for (const auto& s : out.samples) {
    if (!std::isfinite(s.x + s.l1 + s.y + s.l2)) {
      throw NoConnection("full-system trajectory diverged", {s.t, s.x, s.l1});
    }
  }
  const double h0 = full_hamiltonian(model, z0[0], z0[1], z0[2], z0[3]);
  for (const auto& s : out.samples) {
    out.hamiltonian_drift =
        std::max(out.hamiltonian_drift,
                 std::abs(full_hamiltonian(model, s.x, s.l1, s.y, s.l2) - h0));
  }
  std::vector<double> g;
  for (const auto& s : out.samples) {
    g.push_back(s.l1 * (s.y + s.l1) + s.l2 * (model.f(s.x) - s.y));
  }
  out.action = simpson(g, times[1] - times[0], 1);
  return out;
}

std::vector<double> accumulated_action(const PathSolution& path,
                                       const SlowFastModel& model) {
  std::vector<double> acc;
  acc.reserve(path.samples.size());
  double total = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < path.samples.size(); ++i) {
    const auto& s = path.samples[i];
    const double g = s.l1 * (s.y + s.l1) + s.l2 * (model.f(s.x) - s.y);
    if (i > 0) total += 0.5 * (g + prev) * (s.t - path.samples[i - 1].t);
    acc.push_back(total);
    prev = g;
  }
  return acc;
}

// ---------------------------------------------------------------------------

double fit_eps2(const std::vector<double>& eps, const std::vector<double>& R,
                double R0) {
  if (eps.size() != R.size()) throw ConfigError("fit_eps2: size mismatch");
  std::vector<double> scaled;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw ConfigError("fit_eps2: epsilon must be > 0");
    scaled.push_back((R[i] - R0) / (eps[i] * eps[i]));
  }
  return fit_line(eps, scaled).intercept;
}

Eps2Result eps2_fit(const SlowFastModel& model, const CenterManifold* cm,
                    const std::vector<double>& eps_grid,
                    const Eps2Options& options) {
  if (eps_grid.size() < 4) {
    throw ConfigError("eps2 fit needs at least four epsilon values");
  }
  for (double e : eps_grid) {
    if (!(e > 0.0 && e <= 0.2)) {
      throw ConfigError("eps2 fit: epsilon values must lie in (0, 0.2]");
    }
  }
  const Rational sink = default_sink(model);
  const Rational saddle = model.adjacent_saddle(sink).x;
  const double R0 = singular_action(model, sink, saddle).get_d();

  Eps2Result out;
  out.eps = eps_grid;
  if (options.route == Route::full) {
    out.paths = full_paths(model, eps_grid, options.delta, sink, options.full);
  } else if (options.route == Route::reduced) {
    std::optional<CenterManifold> own;
    if (!cm) {
      own = manifold::solve_center_manifold_eps(model, 4);
      cm = &*own;
    }
    for (double e : eps_grid) {
      out.paths.push_back(
          reduced_heteroclinic(model, *cm, e, std::min(options.delta, 1e-3), sink));
    }
  } else {
    throw ConfigError("eps2 fit: route must be reduced or full");
  }
  std::vector<double> R;
  for (const auto& p : out.paths) R.push_back(p.action);
  out.coefficient = fit_eps2(eps_grid, R, R0);
  return out;
}

double eps2_coefficient(const SlowFastModel& model, const CenterManifold& cm,
                        const std::vector<double>& eps_grid,
                        const Eps2Options& options) {
  return eps2_fit(model, &cm, eps_grid, options).coefficient;
}

}  // namespace slowfast::path
