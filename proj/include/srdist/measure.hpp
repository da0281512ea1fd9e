#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srdist/geodesy.hpp"

namespace srdist {

struct SetSpec {
  enum class Kind { Box, Ball, Points };
  Kind kind = Kind::Box;
  VectorXd lo, hi;  // box bounds
  VectorXd center;  // metric-ball center
  double radius = 0.0;
  std::vector<VectorXd> points;

  static SetSpec box(VectorXd lo, VectorXd hi);
  static SetSpec ball(VectorXd center, double radius);
  static SetSpec point_list(std::vector<VectorXd> pts);
  std::string describe() const;
};

struct SampledSet {
  std::string description;
  std::vector<VectorXd> points;
  std::optional<double> exact_volume;  // boxes carry it, clouds do not
  std::uint64_t seed = 0;
};

// Seeded uniform samples: direct for boxes, rejection against the
// sub-Riemannian distance for metric balls (bounding boxes are exact for
// the built-in models).  Point lists pass through unchanged.
SampledSet sample_set(const Model& model, const SetSpec& spec, int count,
                      std::uint64_t seed);

struct MidpointSet {
  std::vector<VectorXd> points;
  double failure_fraction = 0.0;
  long long pairs = 0;
};

// gamma(t) over minimizing geodesics for sampled pairs (a, b); the full
// Cartesian product is used up to 1e6 pairs, beyond that pairs are
// uniformly subsampled.  Throws NumericalError when more than 5% of the
// boundary-value solves fail.
MidpointSet midpoint_set(const Model& model, const SampledSet& a,
                         const SampledSet& b, double t,
                         std::uint64_t seed = 0);

struct VolumeEstimate {
  VectorXd pitch;
  long long occupied = 0;
  double value = 0.0;       // occupied * prod(pitch)
  bool statistical = true;  // consistent under-count, not a certificate
};

VolumeEstimate volume_estimate(const std::vector<VectorXd>& cloud, double h);
VolumeEstimate volume_estimate(const std::vector<VectorXd>& cloud,
                               const VectorXd& pitch);

// Anisotropic pitch matched to the cloud: per-axis extent / cells_per_dim.
// Using the same cell count on both clouds of a ratio makes the boundary
// over-count cancel to first order.
VectorXd cloud_pitch(const std::vector<VectorXd>& cloud,
                     int cells_per_dim = 15);

struct InequalityRow {
  double t = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;  // slack already applied
  double failure_fraction = 0.0;
  bool pass = false;
};

struct InequalityReport {
  std::string name;
  double exponent = 0.0;
  double h = 0.0;
  double slack = 0.05;  // statistical allowance on the RHS
  std::uint64_t seed = 0;
  int samples = 0;
  std::vector<InequalityRow> rows;
  bool pass = false;
};

// mu(Z_t(A,B))^{1/n} >= (1-t)^{N/n} mu(A)^{1/n} + t^{N/n} mu(B)^{1/n},
// Monte-Carlo midpoints against exact box volumes (estimates otherwise).
// Boundary-value solutions are computed once per pair and reused across
// the whole t grid.
InequalityReport bm_check(const Model& model, const SetSpec& a,
                          const SetSpec& b, double exponent,
                          const std::vector<double>& ts, double h, int samples,
                          std::uint64_t seed);

// mu(Z_t(x,B)) >= t^N mu(B).
InequalityReport mcp_check(const Model& model, const VectorXd& x,
                           const SetSpec& b, double exponent,
                           const std::vector<double>& ts, double h,
                           int samples, std::uint64_t seed);

struct GriddedFunction {
  VectorXd lo, hi;
  std::vector<int> shape;      // cells per axis
  std::vector<double> values;  // row-major cell values

  double cell_volume() const;
  double integral() const;
  VectorXd cell_center(long long flat) const;
  static GriddedFunction indicator_box(const VectorXd& lo, const VectorXd& hi,
                                       const std::vector<int>& shape);
};

// Borell-Brascamp-Lieb: builds the minimal admissible h from sampled
// (x, y) pairs via h(z) >= M_t^p((1-t)^{n-N} f(x), t^{n-N} g(y)) at
// midpoints z (the distortion coefficients replaced by their power-law
// bounds), then checks
//   integral(h) >= M_t^{p/(1+np)}(integral(f), integral(g)) * (1 - slack),
// with the conventions p = +inf -> 1/n and p = -1/n -> -inf.
InequalityReport bbl_check(const Model& model, const GriddedFunction& f,
                           const GriddedFunction& g, double t, double p,
                           double n_bound, int samples, std::uint64_t seed);

}  // namespace srdist
