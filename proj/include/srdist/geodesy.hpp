#pragma once

#include <optional>
#include <vector>

#include "srdist/flow.hpp"

namespace srdist {

// Closed-form first cut time along exp_x(t lam): 2*pi/|w0| (Heisenberg),
// pi/|v0| (Grushin), +inf for the straight branches.
double cut_time(const Model& model, const VectorXd& lam);

// First t in (0, horizon] with det N^V_0(t) = 0, from a sign-change scan
// on a 1000-point grid refined by bisection to 1e-10.  A graze of the zero
// line (|det| dipping below 1e-14 * scale without a sign change, as for
// even-multiplicity roots) is reported at the dip.
std::optional<double> conjugate_time(const Model& model, const VectorXd& x,
                                     const VectorXd& lam, double horizon,
                                     const OdeOptions& opt = {});

struct GeodesicSolution {
  VectorXd lambda;      // initial covector at x, horizon T = 1
  double length = 0.0;  // sqrt(2 H(lambda))
  double residual = 0.0;
  double t_cut = 0.0;
  bool minimizing = false;
};

struct InverseExpOptions {
  int starts = 64;
  std::uint64_t seed = 0;
  double tol = 1e-9;  // accepted endpoint residual (max-norm)
  int max_iter = 60;
};

struct InverseExpResult {
  // Sorted by energy, then lexicographically by covector.
  std::vector<GeodesicSolution> solutions;
  bool multiple_minimizers = false;
  int converged_starts = 0;
};

// Solves exp_x(lambda) = y by damped multi-start Newton.  Starts combine
// model-reduced seeds (Heisenberg: swept-angle equation solved on the
// chord; Grushin: u0 eliminated through the x-equation, v0 bracketed on
// the y-residual) with a low-discrepancy grid over the admissible
// frequency band.  Throws NotFoundError when nothing converges.
InverseExpResult inverse_exp(const Model& model, const VectorXd& x,
                             const VectorXd& y,
                             const InverseExpOptions& opt = {});

// Min of length over solutions whose cut time allows minimality at T = 1.
double distance(const Model& model, const VectorXd& x, const VectorXd& y,
                const InverseExpOptions& opt = {});

// exp_x(t lambda*) for the minimal solution; ties broken lexicographically.
VectorXd midpoint(const Model& model, const VectorXd& x, const VectorXd& y,
                  double t, const InverseExpOptions& opt = {});

struct ProbePoint {
  double r;
  double q;
};

// q(r) = min over 64 directions v of
//   (d^2(x+rv, y) + d^2(x-rv, y) - 2 d^2(x, y)) / r^2;
// q(r) -> -inf as r -> 0 exactly at cut points of y, stays bounded at
// smooth points.  Radii below 1e-4 are rejected: distances are solved to
// 1e-11 and the quotient amplifies their error by r^{-2}.
std::vector<ProbePoint> semiconvexity_probe(const Model& model,
                                            const VectorXd& y,
                                            const VectorXd& x,
                                            const std::vector<double>& radii);

}  // namespace srdist
