// Boundary-value computation of the full four-dimensional heteroclinic.
//
// Unknowns are the states at the nodes of a uniform mesh plus an unfolding
// parameter mu multiplying grad H; the collocation scheme is Hermite-Simpson.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <limits>

#include "slowfast/path.hpp"

namespace slowfast::path {

namespace {

using Eigen::Matrix4d;
using Eigen::Vector4d;

struct Field {
  const SlowFastModel& model;
  double e;

  Vector4d F(const Vector4d& z) const {
    const double f = model.f(z[0]);
    return {z[2] + z[1], -model.df(z[0]) * z[3], (f - z[2]) / e,
            (z[3] - z[1]) / e};
  }
  Vector4d gradH(const Vector4d& z) const {
    return {z[3] * model.df(z[0]), z[2] + z[1], z[1] - z[3],
            model.f(z[0]) - z[2]};
  }
  Matrix4d DF(const Vector4d& z) const {
    const double fp = model.df(z[0]);
    Matrix4d j;
    j << 0, 1, 1, 0,                              //
        -model.d2f(z[0]) * z[3], 0, 0, -fp,       //
        fp / e, 0, -1 / e, 0,                     //
        0, -1 / e, 0, 1 / e;
    return j;
  }
  Matrix4d hessH(const Vector4d& z) const {
    const double fp = model.df(z[0]);
    Matrix4d j;
    j << z[3] * model.d2f(z[0]), 0, 0, fp,  //
        0, 1, 1, 0,                         //
        0, 1, 0, -1,                        //
        fp, 0, -1, 0;
    return j;
  }
  Vector4d rate(const Vector4d& z, double mu) const {
    return F(z) + mu * gradH(z);
  }
  Matrix4d jac(const Vector4d& z, double mu) const {
    return DF(z) + mu * hessH(z);
  }
};

// Linear boundary conditions at an equilibrium: P (z - z*) = 0 confines z to
// the unstable (keep_unstable) or stable subspace.
struct Projection {
  Eigen::Matrix<double, 2, 4> P;
  double rate;  // slowest decay rate within the kept subspace
};

Projection projection(const Field& fd, const Vector4d& zstar,
                      bool keep_unstable) {
  const Matrix4d J = fd.DF(zstar);
  Eigen::EigenSolver<Matrix4d> es(J, false);
  Projection out;
  out.rate = std::numeric_limits<double>::infinity();
  int kept = 0;
  for (int i = 0; i < 4; ++i) {
    const double re = es.eigenvalues()[i].real();
    if (re == 0.0) {
      throw NoConnection("equilibrium of the full system is not hyperbolic",
                         {0.0, zstar[0], zstar[1]});
    }
    if ((re > 0.0) == keep_unstable) {
      out.rate = std::min(out.rate, std::abs(re));
      ++kept;
    }
  }
  if (kept != 2) {
    throw NoConnection("equilibrium of the full system has unexpected spectrum",
                       {0.0, zstar[0], zstar[1]});
  }
  // Matrix sign function by scaled Newton iteration. Unlike an eigenvector
  // basis it stays well conditioned where eigenvalues coalesce.
  Matrix4d S = J;
  for (int it = 0; it < 100; ++it) {
    const double c = std::pow(std::abs(S.determinant()), -0.25);
    const Matrix4d next = 0.5 * (c * S + S.inverse() / c);
    const double change = (next - S).norm();
    S = next;
    if (change < 1e-14 * S.norm()) break;
  }
  const Matrix4d I = Matrix4d::Identity();
  // Spectral projector onto the discarded subspace; it must vanish on z - z*.
  const Matrix4d discard = 0.5 * (keep_unstable ? Matrix4d(I - S) : Matrix4d(I + S));
  Eigen::JacobiSVD<Matrix4d> svd(discard, Eigen::ComputeFullV);
  out.P = svd.matrixV().leftCols<2>().transpose();
  return out;
}

struct Mesh {
  double h;
  int M;       // number of intervals (even)
  int pin;     // node index where x is pinned
  double t0;   // time of node 0 relative to the pin
  double t(int i) const { return t0 + h * i; }
};

struct Problem {
  Field fd;
  Vector4d sink, saddle;
  Projection left, right;
  double x_pin;
  Mesh mesh;
};

Problem make_problem(const SlowFastModel& model, double e, double delta,
                     const Rational& sink, const Rational& saddle,
                     double step) {
  Problem p{Field{model, e},
            Vector4d(sink.get_d(), 0, 0, 0),
            Vector4d(saddle.get_d(), 0, 0, 0),
            {},
            {},
            0.5 * (sink.get_d() + saddle.get_d()),
            {}};
  p.left = projection(p.fd, p.sink, true);
  p.right = projection(p.fd, p.saddle, false);
  const double half = 0.5 * std::abs(saddle.get_d() - sink.get_d());
  const double tl = std::max(2.0, std::log(half / delta) / p.left.rate);
  const double tr = std::max(2.0, std::log(half / delta) / p.right.rate);
  Mesh& m = p.mesh;
  m.h = step;
  m.pin = int(std::ceil(tl / step));
  m.M = m.pin + int(std::ceil(tr / step));
  if (m.M % 2) ++m.M;
  m.t0 = -m.h * m.pin;
  return p;
}

using Nodes = std::vector<Vector4d>;

// e = 0 path: x' = -f(x), l1 = -2 f, y = f, l2 = l1.
Nodes singular_guess(const Problem& p) {
  const auto& model = p.fd.model;
  const Mesh& m = p.mesh;
  std::vector<double> x(std::size_t(m.M) + 1);
  auto rhs = [&](const std::array<double, 1>& z, std::array<double, 1>& dz,
                 double) { dz[0] = -model.f(z[0]); };
  namespace odeint = boost::numeric::odeint;
  odeint::runge_kutta4<std::array<double, 1>> rk;
  std::array<double, 1> z{p.x_pin};
  x[std::size_t(m.pin)] = z[0];
  for (int i = m.pin; i < m.M; ++i) {
    for (int k = 0; k < 4; ++k) rk.do_step(rhs, z, 0.0, m.h / 4);
    x[std::size_t(i + 1)] = z[0];
  }
  z = {p.x_pin};
  for (int i = m.pin; i > 0; --i) {
    for (int k = 0; k < 4; ++k) rk.do_step(rhs, z, 0.0, -m.h / 4);
    x[std::size_t(i - 1)] = z[0];
  }
  Nodes out;
  for (double xi : x) {
    const double f = model.f(xi);
    out.emplace_back(xi, -2 * f, f, -2 * f);
  }
  return out;
}

// Linear interpolation of a previous solution onto a new mesh; both meshes
// have t = 0 at the pin.
Nodes remesh(const Nodes& z, const Mesh& from, const Mesh& to) {
  Nodes out;
  for (int i = 0; i <= to.M; ++i) {
    const double s = (to.t(i) - from.t0) / from.h;
    if (s <= 0) {
      out.push_back(z.front());
    } else if (s >= from.M) {
      out.push_back(z.back());
    } else {
      const int k = int(s);
      const double w = s - k;
      out.push_back((1 - w) * z[std::size_t(k)] + w * z[std::size_t(k + 1)]);
    }
  }
  return out;
}

struct Collocation {
  Vector4d mid;
  Vector4d residual;
};

Collocation collocate(const Field& fd, const Vector4d& a, const Vector4d& b,
                      double mu, double h) {
  const Vector4d fa = fd.rate(a, mu), fb = fd.rate(b, mu);
  Collocation c;
  c.mid = 0.5 * (a + b) + h / 8 * (fa - fb);
  c.residual = b - a - h / 6 * (fa + 4 * fd.rate(c.mid, mu) + fb);
  return c;
}

Eigen::VectorXd residual(const Problem& p, const Nodes& z, double mu) {
  const int M = p.mesh.M;
  Eigen::VectorXd r(4 * M + 5);
  r.segment<2>(0) = p.left.P * (z.front() - p.sink);
  for (int i = 0; i < M; ++i) {
    r.segment<4>(2 + 4 * i) =
        collocate(p.fd, z[std::size_t(i)], z[std::size_t(i + 1)], mu, p.mesh.h)
            .residual;
  }
  r.segment<2>(4 * M + 2) = p.right.P * (z.back() - p.saddle);
  r[4 * M + 4] = z[std::size_t(p.mesh.pin)][0] - p.x_pin;
  return r;
}

Eigen::SparseMatrix<double> jacobian(const Problem& p, const Nodes& z,
                                     double mu) {
  const int M = p.mesh.M;
  const double h = p.mesh.h;
  const int n = 4 * (M + 1) + 1;
  const int mu_col = n - 1;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(std::size_t(M) * 36 + 32);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) {
      t.emplace_back(r, c, p.left.P(r, c));
      t.emplace_back(4 * M + 2 + r, 4 * M + c, p.right.P(r, c));
    }
  }
  t.emplace_back(4 * M + 4, 4 * p.mesh.pin, 1.0);
  const Matrix4d I = Matrix4d::Identity();
  for (int i = 0; i < M; ++i) {
    const Vector4d& a = z[std::size_t(i)];
    const Vector4d& b = z[std::size_t(i + 1)];
    const Field& fd = p.fd;
    const Matrix4d ja = fd.jac(a, mu), jb = fd.jac(b, mu);
    const Vector4d ga = fd.gradH(a), gb = fd.gradH(b);
    const Collocation c = collocate(fd, a, b, mu, h);
    const Matrix4d jm = fd.jac(c.mid, mu);
    const Matrix4d dm_da = 0.5 * I + h / 8 * ja;
    const Matrix4d dm_db = 0.5 * I - h / 8 * jb;
    const Vector4d dm_dmu = h / 8 * (ga - gb);
    const Matrix4d dr_da = -I - h / 6 * (ja + 4 * jm * dm_da);
    const Matrix4d dr_db = I - h / 6 * (jb + 4 * jm * dm_db);
    const Vector4d dr_dmu =
        -h / 6 * (ga + 4 * (fd.gradH(c.mid) + jm * dm_dmu) + gb);
    const int row = 2 + 4 * i;
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) {
        t.emplace_back(row + r, 4 * i + col, dr_da(r, col));
        t.emplace_back(row + r, 4 * (i + 1) + col, dr_db(r, col));
      }
      t.emplace_back(row + r, mu_col, dr_dmu[r]);
    }
  }
  Eigen::SparseMatrix<double> J(n, n);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

struct Solved {
  Nodes z;
  double mu;
};

Solved newton(const Problem& p, Nodes z, const FullPathOptions& opt) {
  const int M = p.mesh.M;
  double mu = 0.0;
  Eigen::VectorXd r = residual(p, z, mu);
  double norm = r.lpNorm<Eigen::Infinity>();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  for (int it = 0; it < opt.max_newton_iterations; ++it) {
    if (norm < opt.newton_tolerance) return {z, mu};
    const auto J = jacobian(p, z, mu);
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) {
      throw NoConnection("collocation Jacobian is singular",
                         {0.0, z[std::size_t(p.mesh.pin)][0], 0.0});
    }
    const Eigen::VectorXd dz = lu.solve(-r);
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 20; ++k, alpha *= 0.5) {
      Nodes trial = z;
      for (int i = 0; i <= M; ++i) {
        trial[std::size_t(i)] += alpha * dz.segment<4>(4 * i);
      }
      const double trial_mu = mu + alpha * dz[4 * (M + 1)];
      const Eigen::VectorXd rt = residual(p, trial, trial_mu);
      const double tn = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(tn) && tn < (1.0 - 1e-4 * alpha) * norm) {
        z = std::move(trial);
        mu = trial_mu;
        r = rt;
        norm = tn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (norm < opt.newton_tolerance) return {z, mu};
  throw NoConnection("full-system boundary-value solve did not converge "
                     "(residual " + std::to_string(norm) + ", e = " +
                         std::to_string(p.fd.e) + ")",
                     {0.0, z[std::size_t(p.mesh.pin)][0], 0.0});
}

PathSolution finish(const Problem& p, const Solved& s, const Rational& sink,
                    const Rational& saddle, const FullPathOptions& opt) {
  const auto& model = p.fd.model;
  const Mesh& m = p.mesh;
  PathSolution out;
  out.route = Route::full;
  out.epsilon = p.fd.e;
  out.sink = sink;
  out.saddle = saddle;
  for (int i = 0; i <= m.M; ++i) {
    const Vector4d& z = s.z[std::size_t(i)];
    out.samples.push_back({m.h * i, z[0], z[1], z[2], z[3]});
    out.hamiltonian_drift = std::max(
        out.hamiltonian_drift,
        std::abs(full_hamiltonian(model, z[0], z[1], z[2], z[3])));
  }
  out.launch_distance = (s.z.front() - p.sink).norm();
  out.miss_distance = (s.z.back() - p.saddle).norm();

  auto integrand = [&](const Vector4d& z) {
    return z[1] * (z[2] + z[1]) + z[3] * (model.f(z[0]) - z[2]);
  };
  // Simpson per interval using the collocation midpoints, checked against
  // Simpson on node pairs.
  double fine = 0.0, coarse = 0.0;
  for (int i = 0; i < m.M; ++i) {
    const Vector4d& a = s.z[std::size_t(i)];
    const Vector4d& b = s.z[std::size_t(i + 1)];
    const Vector4d mid = collocate(p.fd, a, b, s.mu, m.h).mid;
    fine += m.h / 6 * (integrand(a) + 4 * integrand(mid) + integrand(b));
  }
  for (int i = 0; i + 2 <= m.M; i += 2) {
    coarse += m.h / 3 *
              (integrand(s.z[std::size_t(i)]) +
               4 * integrand(s.z[std::size_t(i + 1)]) +
               integrand(s.z[std::size_t(i + 2)]));
  }
  if (std::abs(fine - coarse) > 1e-6) {
    throw QuadratureNotConverged("full-path action changes by " +
                                 std::to_string(std::abs(fine - coarse)) +
                                 " between mesh and half mesh");
  }
  out.action = fine;

  const auto cm = manifold::solve_center_manifold_eps(model, opt.manifold_order);
  const series::CompiledSeries h(cm.h, p.fd.e), k(cm.k, p.fd.e);
  for (const auto& z : s.z) {
    out.manifold_deviation_y =
        std::max(out.manifold_deviation_y, std::abs(z[2] - h(z[0], z[1])));
    out.manifold_deviation_l2 =
        std::max(out.manifold_deviation_l2, std::abs(z[3] - k(z[0], z[1])));
  }
  return out;
}

void check_inputs(double e, double delta, const FullPathOptions& opt) {
  if (!(e > 0.0 && e <= 0.5)) {
    throw ConfigError("full system: epsilon must lie in (0, 0.5]");
  }
  if (!(delta > 0.0 && delta <= 1e-3)) {
    throw ConfigError("full system: delta must lie in (0, 1e-3]");
  }
  if (!(opt.step > 0.0 && opt.step <= 0.1) || !(opt.continuation_step > 0.0) ||
      !(opt.start_epsilon > 0.0) || opt.max_newton_iterations < 1) {
    throw ConfigError("full system: invalid solver options");
  }
}

}  // namespace

std::vector<PathSolution> full_paths(const SlowFastModel& model,
                                     const std::vector<double>& eps_values,
                                     double delta,
                                     std::optional<Rational> sink_opt,
                                     const FullPathOptions& opt) {
  if (eps_values.empty()) return {};
  for (double e : eps_values) check_inputs(e, delta, opt);
  const Rational sink = sink_opt ? *sink_opt : default_sink(model);
  const Rational saddle = model.adjacent_saddle(sink).x;

  std::vector<std::size_t> order(eps_values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return eps_values[a] < eps_values[b];
  });

  // Continuation stations: a start near e = 0, then steps no longer than
  // continuation_step through every requested value.
  std::vector<std::pair<double, int>> stations;  // (e, index or -1)
  double current = std::min(opt.start_epsilon, eps_values[order.front()]);
  if (current < eps_values[order.front()]) stations.push_back({current, -1});
  for (std::size_t idx : order) {
    const double target = eps_values[idx];
    const int steps =
        std::max(0, int(std::ceil((target - current) / opt.continuation_step -
                                  1e-9)));
    for (int s = 1; s < steps; ++s) {
      stations.push_back(
          {current + (target - current) * s / steps, -1});
    }
    stations.push_back({target, int(idx)});
    current = target;
  }

  std::vector<PathSolution> out(eps_values.size());
  std::optional<Solved> prev;
  Mesh prev_mesh{};
  for (const auto& [e, idx] : stations) {
    const Problem p = make_problem(model, e, delta, sink, saddle, opt.step);
    const Nodes guess = prev ? remesh(prev->z, prev_mesh, p.mesh)
                             : singular_guess(p);
    Solved s = newton(p, guess, opt);
    if (idx >= 0) out[std::size_t(idx)] = finish(p, s, sink, saddle, opt);
    prev = std::move(s);
    prev_mesh = p.mesh;
  }
  return out;
}

PathSolution full_system_crosscheck(const SlowFastModel& model,
                                    double epsilon, double delta,
                                    std::optional<Rational> sink,
                                    const FullPathOptions& options) {
  return full_paths(model, {epsilon}, delta, sink, options).front();
}

}  // namespace slowfast::path
