#pragma once

// Optimal escape paths from a sink to its adjacent saddle and their actions.

#include <optional>
#include <string>
#include <vector>

#include "slowfast/errors.hpp"
#include "slowfast/manifold.hpp"

namespace slowfast::path {

using manifold::CenterManifold;
using manifold::SlowFastModel;
using series::Rational;

/// The integrated path fails to reach the saddle. `last_state` holds
/// (t, x, l1) at the point of failure.
class NoConnection : public Error {
 public:
  NoConnection(const std::string& what, std::vector<double> last_state)
      : Error(what), last_state(std::move(last_state)) {}
  std::vector<double> last_state;
};

class QuadratureNotConverged : public Error {
 public:
  using Error::Error;
};

struct PathSample {
  double t;
  double x;
  double l1;
  double y;
  double l2;
};

enum class Route { singular, reduced, full };

std::string to_string(Route r);

struct PathSolution {
  std::vector<PathSample> samples;
  double action = 0.0;
  double hamiltonian_drift = 0.0;  // max |H| over the samples
  double epsilon = 0.0;
  double miss_distance = 0.0;      // distance of the end point from the saddle
  double launch_distance = 0.0;    // distance of the first point from the sink
  // Largest |y - h| and |l2 - k| against a center manifold; full route only.
  double manifold_deviation_y = 0.0;
  double manifold_deviation_l2 = 0.0;
  Route route = Route::reduced;
  Rational sink = -1;
  Rational saddle = 0;
};

/// x(t) = -(1 + e^{2t})^{-1/2}: the Duffing escape path in the singular
/// limit with the integration constant A = -1.
double singular_path(double t);

/// l1 = -2 f(x), the nontrivial branch of the zero-energy curve.
double zero_hamiltonian_curve(const SlowFastModel& model, double x);

/// Exact integral of -2 f(x) from the sink to the adjacent saddle.
Rational singular_action(const SlowFastModel& model, const Rational& sink,
                         const Rational& saddle);

/// Exact coefficients R_0 ... R_order of the action series in e, found by
/// solving the zero-energy condition of the manifold-reduced Hamiltonian
/// order by order and integrating the momentum line integral.
std::vector<Rational> action_series(const SlowFastModel& model, int order,
                                    std::optional<Rational> sink = {});

/// Leftmost sink that has an adjacent saddle.
Rational default_sink(const SlowFastModel& model);

/// Heteroclinic of the manifold-reduced field, launched `delta` from the
/// sink along its unstable eigenvector and stopped at closest approach to
/// the saddle. y and l2 are filled from h and k.
PathSolution reduced_heteroclinic(const SlowFastModel& model,
                                  const CenterManifold& cm, double epsilon,
                                  double delta,
                                  std::optional<Rational> sink = {});

/// R = int l1 dx + e int l2 dy along a reduced path, with dy taken from
/// the differential of h. Throws QuadratureNotConverged when halving the
/// sample set changes the result by more than 1e-6.
double action_along_path(const PathSolution& path, const CenterManifold& cm,
                         const SlowFastModel& model);

/// H = l1 y + l1^2/2 + l2 (f(x) - y).
double full_hamiltonian(const SlowFastModel& model, double x, double l1,
                        double y, double l2);

struct FullPathOptions {
  double step = 0.01;             // collocation mesh width in slow time
  double newton_tolerance = 1e-10;
  int max_newton_iterations = 40;
  double continuation_step = 0.025;
  double start_epsilon = 0.02;    // continuation starts here from the e = 0 path
  int manifold_order = 3;         // e-order of the manifold used for deviations
};

/// Heteroclinic of the full four-dimensional optimal-path system, computed
/// as a boundary-value problem: the first point lies on the unstable
/// subspace of the sink and the last on the stable subspace of the saddle,
/// each about `delta` from its equilibrium. Larger e are reached by
/// continuation from the singular path.
PathSolution full_system_crosscheck(const SlowFastModel& model,
                                    double epsilon, double delta,
                                    std::optional<Rational> sink = {},
                                    const FullPathOptions& options = {});

/// Same computation over several e values, continuing from one solution to
/// the next. Results follow the order of `eps_values`.
std::vector<PathSolution> full_paths(const SlowFastModel& model,
                                     const std::vector<double>& eps_values,
                                     double delta,
                                     std::optional<Rational> sink = {},
                                     const FullPathOptions& options = {});

/// Forward integration of the full system from z0 = (x, l1, y, l2) with an
/// adaptive embedded Runge-Kutta pair at relative tolerance 1e-10. The
/// action accumulated along the way is stored in `action`.
PathSolution integrate_full_system(const SlowFastModel& model, double epsilon,
                                   const std::array<double, 4>& z0,
                                   double t_end, int intervals);

/// Partial action int_0^t (l1 x' + e l2 y') dt at each sample of a full
/// path, using the full-system rates.
std::vector<double> accumulated_action(const PathSolution& path,
                                       const SlowFastModel& model);

/// Least-squares fit of (R - R0) / e^2 = c + d e; returns c.
double fit_eps2(const std::vector<double>& eps, const std::vector<double>& R,
                double R0);

struct Eps2Options {
  Route route = Route::full;
  double delta = 1e-6;
  FullPathOptions full;
};

struct Eps2Result {
  double coefficient = 0.0;
  std::vector<double> eps;
  std::vector<PathSolution> paths;
};

/// e^2 coefficient of the action from numerically computed R(e) over
/// `eps_grid`. The reduced route needs `cm`; the full route ignores it.
Eps2Result eps2_fit(const SlowFastModel& model, const CenterManifold* cm,
                    const std::vector<double>& eps_grid,
                    const Eps2Options& options = {});

double eps2_coefficient(const SlowFastModel& model, const CenterManifold& cm,
                        const std::vector<double>& eps_grid,
                        const Eps2Options& options = {});

}  // namespace slowfast::path
