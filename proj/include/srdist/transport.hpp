#pragma once

#include <string>
#include <vector>

#include "srdist/measure.hpp"

namespace srdist {

struct DiscreteMeasure {
  std::vector<VectorXd> support;
  VectorXd weights;  // nonnegative, sums to 1 within 1e-12

  static DiscreteMeasure uniform(std::vector<VectorXd> pts);
  void validate() const;
};

struct TransportPlan {
  MatrixXd coupling;  // rows follow mu0's support, columns mu1's
  double cost = 0.0;

  // marginals against the measures and the cost recomputation, both 1e-10
  void validate(const DiscreteMeasure& m0, const DiscreteMeasure& m1,
                const MatrixXd& cost_mat) const;
};

// Entries 0.5 * d(x_i, y_j)^2; an unsolved boundary-value pair aborts with
// the offending indices in the message.
MatrixXd cost_matrix(const Model& model, const DiscreteMeasure& m0,
                     const DiscreteMeasure& m1,
                     const InverseExpOptions& opt = {});

// Exact transportation linear program by successive shortest augmenting
// paths on the dense bipartite graph.  The returned duals are checked:
// u_i + v_j <= C_ij everywhere and equality on every flow-carrying arc,
// which certifies optimality of the plan.  Supports up to 512 atoms.
TransportPlan solve_ot(const MatrixXd& cost, const DiscreteMeasure& m0,
                       const DiscreteMeasure& m1);

// Minimum of sum_i C(i, sigma(i))/n over permutations, accumulated in
// ascending row order (so an optimal assignment plan reproduces the same
// floating-point sum).  Reference oracle for small uniform problems.
double assignment_brute_force(const MatrixXd& cost);

// W2(mu0, mu1) = sqrt(2 * optimal half-squared-distance cost).
double wasserstein2(const Model& model, const DiscreteMeasure& m0,
                    const DiscreteMeasure& m1);

// Pushforward of the coupling along geodesic t-points.  Coincident output
// atoms are merged; pairs whose boundary-value problem admits several
// minimizers follow the deterministic tie-break and are counted in
// *flagged when given.
DiscreteMeasure displacement_interpolation(const Model& model,
                                           const TransportPlan& plan,
                                           const DiscreteMeasure& m0,
                                           const DiscreteMeasure& m1, double t,
                                           int* flagged = nullptr);

struct InterpolationCheckReport {
  double t = 0.0;
  double bandwidth = 0.0;
  double exponent = 0.0;  // N used in the weakened inequality
  int checked_points = 0;
  int excluded = 0;     // cut pairs (several minimizers), skipped
  double min_slack = 0.0;  // min over pairs of lhs/rhs
  bool consistent = false;

  std::string verdict() const { return consistent ? "consistent" : "violated"; }
};

// Interpolation-density inequality along discrete optimal transport:
// densities become atoms at their cell centers, the plan is solved exactly,
// rho_t is kernel-estimated (product Epanechnikov, the bandwidth must
// exceed both grid pitches) at the transported atoms, and each coupled
// pair (x, z = gamma_{x->y}(t)) is tested against
//   1/rho_t(z)^{1/n} >= (1-t)^{N/n}/rho_0(x)^{1/n} + t^{N/n}/rho_1(y)^{1/n}
// up to the factor 0.8 of kernel-estimator allowance.  Cut pairs are
// excluded and must stay below 1% of the coupled mass points.
InterpolationCheckReport interpolation_density_check(
    const Model& model, const GriddedFunction& rho0,
    const GriddedFunction& rho1, double t, double bandwidth, double n_bound);

}  // namespace srdist
