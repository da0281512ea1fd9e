#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srdist/geodesy.hpp"

namespace srdist {

// Distortion coefficient beta_t(x, exp_x(lambda)) along the minimizing
// geodesic with initial covector lambda, horizon 1.
//
// Closed forms (in cancellation-free trig ratios, h = w0/2, s = v0 t):
//   Heisenberg:  t^5 (sinc(th)/sinc(h)) (scr(th)/scr(h)),
//   Grushin:     t^2 (u0^2 t^2 scr(tv0) + (t u0 x0 + x0^2) sinc(tv0))
//                    / (u0^2 scr(v0) + (u0 x0 + x0^2) sinc(v0)),
// where scr(s) = (sin s - s cos s)/s^3.  Requires |w0| < 2 pi resp.
// |v0| < pi (inside the cut band) and t in [0, 1].
double beta_closed(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t);

// Jacobian-determinant form: beta_t = (det N^V_0(t) / det N^V_0(1)) times
// the measure-density ratio rho(gamma(t))/rho(gamma(1)).  Works for every
// model; determinants are combined in log space.  Throws DomainError when
// the endpoint Jacobian det N^V_0(1) is singular (conjugate endpoint).
double beta_numeric(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t, const OdeOptions& opt = {});

// Reverse-direction coefficient beta_{1-t}(y, x) for y = exp_x(lambda),
// computed from the Jacobi family anchored at the far endpoint:
// det N^V_1(t) / det N^V_1(0) times the density ratio.  Equals 1 at t = 0
// and 0 at t = 1.
double beta_reverse(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t, const OdeOptions& opt = {});

struct DistortionCurve {
  VectorXd x;
  VectorXd lambda;
  std::vector<double> t;
  std::vector<double> beta;
  std::string method;  // "closed" or "numeric"
};

DistortionCurve distortion_curve(const Model& model, const VectorXd& x,
                                 const VectorXd& lam,
                                 const std::vector<double>& ts,
                                 const std::string& method);

struct ExponentFit {
  double exponent;  // fitted N in beta_t ~ C t^N
  double constant;  // fitted C
};

// Least-squares slope of log beta against log t on a 50-point log grid in
// [t_min, t_max] (defaults [1e-3, 1e-1]); log beta comes straight from
// log-determinant differences so small-t values cannot underflow.
ExponentFit fit_geodesic_exponent(const Model& model, const VectorXd& x,
                                  const VectorXd& lam, double t_min = 1e-3,
                                  double t_max = 1e-1);

// Cartesian sampling grid for bound verification.  Each base-point and
// covector coordinate gets a range split into `count` cells, sampled at
// the centers (count 1 pins the coordinate to the range midpoint); time is
// sampled at t = j/t_count, j = 1..t_count.  With a nonzero seed every
// sample is jittered uniformly within its own grid cell, so jitter never
// leaves the range.
struct BoundGrid {
  std::vector<std::pair<double, double>> x_ranges;
  std::vector<int> x_counts;
  std::vector<std::pair<double, double>> lam_ranges;
  std::vector<int> lam_counts;
  int t_count = 50;

  std::string describe() const;
};

BoundGrid heisenberg_bound_grid(int nw, int nt, double delta = 1e-3);
BoundGrid grushin_bound_grid(int nx, int nu, int nv, int nt,
                             double delta = 1e-3);

struct BoundViolation {
  VectorXd x;
  VectorXd lambda;
  double t = 0.0;
  double beta = 0.0;
  double tn = 0.0;  // t^N
};

struct BoundReport {
  double exponent = 0.0;
  std::string grid;
  double min_ratio = 0.0;  // min over the grid of beta / t^N
  double min_diff = 0.0;   // min over the grid of beta - t^N
  std::vector<BoundViolation> violations;  // beta - t^N < -1e-12, sorted
  bool pass = false;
};

BoundReport verify_power_bound(const Model& model, double exponent,
                               const BoundGrid& grid, std::uint64_t seed = 0);

// Searches for a configuration violating beta_t >= t^N'.  For Grushin the
// straight branch v0 = 0, u0 < 0 is scanned first: there
//   beta - t^N < 0  iff  (N-4) z^2 + 3 x0 (N-3) z + 3 x0^2 (N-2) < 0
// can occur with z = t u0, which needs N < 5.  Returns the most negative
// configuration found, or nothing if the bound holds on the search grid.
std::optional<BoundViolation> sharpness_search(const Model& model,
                                               double n_prime);

// Ingredients of the Grushin bound's inequality chain.
double wbar(double z);               // alpha sin^2 + beta sin cos + gamma cos^2
double wbar_taylor_bound(double z);  // z^6 (8/45 - z^2/105 - 4 z^6/13365)
double wa(double a, double z);       // Q_a sin z - z P_a cos z
double wa_min_arg(double z);         // argmin_a W_a(z)

struct ProofChainReport {
  double min_wbar = 0.0;
  double min_wa = 0.0;          // min over samples of W_{a_min}(z)
  double max_identity_gap = 0.0;  // |4 (4 sin z - z cos z) W_a_min - wbar|
  bool taylor_below = false;    // taylor bound <= wbar on samples < 2.67
  double taylor_root = 0.0;     // first positive root of the taylor bound
  bool pass = false;
};

ProofChainReport grushin_proof_chain(const std::vector<double>& z_samples);

struct DiagonalRow {
  double t = 0.0;
  double r = 0.0;
  double ratio = 0.0;  // estimated mu(Z_t(x, B_r)) / mu(B_r)
};

struct DiagonalReport {
  double q = 0.0;  // sum of coordinate weights at x
  std::vector<DiagonalRow> rows;
  bool pass = false;  // all ratios <= t^Q * 1.1
};

// On-diagonal contraction estimate beta_t(x, x) via occupancy-grid volumes
// of midpoint sets of shrinking anisotropic balls around x.
DiagonalReport diagonal_bound_check(const Model& model, const VectorXd& x,
                                    const std::vector<double>& ts,
                                    const std::vector<double>& rs,
                                    std::uint64_t seed = 0);

// M_t^p(a, b): the weighted p-mean of a, b >= 0, with the conventions
// M = 0 whenever ab = 0 (p != +inf), M^0 = a^{1-t} b^t, M^{+inf} = max,
// M^{-inf} = min.
double pmean(double p, double t, double a, double b);

}  // namespace srdist
