#include "srdist/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "srdist/measure.hpp"

namespace srdist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError("distortion: t must lie in [0, 1]");
}

double heis_beta(double w0, double t) {
  if (std::abs(w0) >= 2 * kPi)
    throw DomainError("beta_closed: |w0| >= 2 pi is outside the cut band");
  const double h = w0 / 2;
  const double t2 = t * t;
  return t * t2 * t2 * (sinc(t * h) / sinc(h)) *
         (sincos_defect(t * h) / sincos_defect(h));
}

double grushin_beta(double x0, double u0, double v0, double t) {
  if (std::abs(v0) >= kPi)
    throw DomainError("beta_closed: |v0| >= pi is outside the cut band");
  auto num = [&](double s) {
    return u0 * u0 * s * s * sincos_defect(s * v0) +
           (s * u0 * x0 + x0 * x0) * sinc(s * v0);
  };
  const double den = num(1.0);
  if (den == 0.0)
    throw DomainError("beta_closed: zero-energy covector");
  return t * t * num(t) / den;
}

}  // namespace

double beta_closed(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t) {
  model.check_point(x);
  model.check_point(lam);
  check_time(t);
  switch (model.kind()) {
    case ModelKind::Heisenberg3:
      return heis_beta(lam[2], t);
    case ModelKind::Grushin2:
      return grushin_beta(x[0], lam[0], lam[1], t);
    default:
      throw CapabilityError("no closed-form distortion for " + model.name() +
                            "; use beta_numeric");
  }
}

double beta_numeric(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t, const OdeOptions& opt) {
  check_time(t);
  const int n = model.dim();
  JacobiFlow flow(model, x, lam, 1.0, {vertical_init(n)}, opt);
  auto [la1, sg1] = flow.log_abs_det_N(0, 1.0);
  if (sg1 == 0)
    throw DomainError("beta_numeric: det N^V_0(1) is singular (conjugate "
                      "endpoint)");
  if (t == 0.0) return 0.0;
  auto [lat, sgt] = flow.log_abs_det_N(0, t);
  double rho_t = model.measure_density(flow.state(t).q);
  double rho_1 = model.measure_density(flow.state(1.0).q);
  return sgt * sg1 * std::exp(lat - la1) * (rho_t / rho_1);
}

double beta_reverse(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t, const OdeOptions& opt) {
  check_time(t);
  const int n = model.dim();
  ExtremalState far = exp_state(model, x, lam, 1.0);
  JacobiFlow flow(model, far.q, far.p, -1.0, {vertical_init(n)}, opt);
  auto [la0, sg0] = flow.log_abs_det_N(0, -1.0);
  if (sg0 == 0)
    throw DomainError("beta_reverse: det N^V_1(0) is singular (conjugate "
                      "endpoint)");
  if (t == 1.0) return 0.0;
  auto [lat, sgt] = flow.log_abs_det_N(0, t - 1.0);
  double rho_t = model.measure_density(flow.state(t - 1.0).q);
  double rho_0 = model.measure_density(x);
  return sgt * sg0 * std::exp(lat - la0) * (rho_t / rho_0);
}

DistortionCurve distortion_curve(const Model& model, const VectorXd& x,
                                 const VectorXd& lam,
                                 const std::vector<double>& ts,
                                 const std::string& method) {
  if (method != "closed" && method != "numeric")
    throw InputError("distortion_curve: method must be closed or numeric");
  DistortionCurve curve;
  curve.x = x;
  curve.lambda = lam;
  curve.t = ts;
  curve.method = method;
  curve.beta.reserve(ts.size());
  if (method == "closed") {
    for (double t : ts) curve.beta.push_back(beta_closed(model, x, lam, t));
  } else {
    const int n = model.dim();
    JacobiFlow flow(model, x, lam, 1.0, {vertical_init(n)});
    auto [la1, sg1] = flow.log_abs_det_N(0, 1.0);
    if (sg1 == 0)
      throw DomainError("distortion_curve: conjugate endpoint");
    double rho_1 = model.measure_density(flow.state(1.0).q);
    for (double t : ts) {
      check_time(t);
      if (t == 0.0) {
        curve.beta.push_back(0.0);
        continue;
      }
      auto [lat, sgt] = flow.log_abs_det_N(0, t);
      double rho_t = model.measure_density(flow.state(t).q);
      curve.beta.push_back(sgt * sg1 * std::exp(lat - la1) * (rho_t / rho_1));
    }
  }
  return curve;
}

ExponentFit fit_geodesic_exponent(const Model& model, const VectorXd& x,
                                  const VectorXd& lam, double t_min,
                                  double t_max) {
  if (!(0 < t_min && t_min < t_max && t_max <= 0.1))
    throw InputError("fit_geodesic_exponent: need 0 < t_min < t_max <= 0.1");
  const int n = model.dim();
  JacobiFlow flow(model, x, lam, 1.0, {vertical_init(n)});
  auto [la1, sg1] = flow.log_abs_det_N(0, 1.0);
  if (sg1 == 0)
    throw DomainError("fit_geodesic_exponent: conjugate endpoint");
  double log_rho_1 = std::log(model.measure_density(flow.state(1.0).q));

  const int kPoints = 50;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < kPoints; ++i) {
    double lt = std::log(t_min) +
                i * (std::log(t_max) - std::log(t_min)) / (kPoints - 1);
    double t = std::exp(lt);
    auto [lat, sgt] = flow.log_abs_det_N(0, t);
    if (sgt != sg1)
      throw DomainError("fit_geodesic_exponent: non-positive distortion in "
                        "the fit range");
    double lb = (lat - la1) +
                (std::log(model.measure_density(flow.state(t).q)) - log_rho_1);
    sx += lt;
    sy += lb;
    sxx += lt * lt;
    sxy += lt * lb;
  }
  double denom = kPoints * sxx - sx * sx;
  double slope = (kPoints * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / kPoints;
  return {slope, std::exp(intercept)};
}

namespace {

// Cell centers of a uniform partition; jitter of less than half a cell
// width can never leave the range.
std::vector<double> linspace_cells(std::pair<double, double> range, int count) {
  std::vector<double> vals;
  if (count <= 1) {
    vals.push_back((range.first + range.second) / 2);
    return vals;
  }
  for (int i = 0; i < count; ++i)
    vals.push_back(range.first +
                   (range.second - range.first) * (i + 0.5) / count);
  return vals;
}

void enumerate_boxes(const std::vector<std::vector<double>>& axes,
                     std::vector<VectorXd>& out) {
  const int n = static_cast<int>(axes.size());
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = axes[i][idx[i]];
    out.push_back(std::move(v));
    int d = n - 1;
    while (d >= 0 && ++idx[d] == axes[d].size()) idx[d--] = 0;
    if (d < 0) break;
  }
}

}  // namespace

std::string BoundGrid::describe() const {
  std::ostringstream os;
  auto dims = [&os](const char* tag,
                    const std::vector<std::pair<double, double>>& ranges,
                    const std::vector<int>& counts) {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (counts[i] <= 1 && ranges[i].first == ranges[i].second &&
          ranges[i].first == 0.0)
        continue;
      os << tag << i << " in [" << ranges[i].first << ", " << ranges[i].second
         << "] x" << std::max(1, counts[i]) << "; ";
    }
  };
  dims("x", x_ranges, x_counts);
  dims("lam", lam_ranges, lam_counts);
  os << "t in (0, 1] x" << t_count;
  return os.str();
}

BoundGrid heisenberg_bound_grid(int nw, int nt, double delta) {
  BoundGrid g;
  g.x_ranges.assign(3, {0.0, 0.0});
  g.x_counts.assign(3, 1);
  double wmax = 2 * kPi * (1 - delta);
  g.lam_ranges = {{1.0, 1.0}, {0.0, 0.0}, {-wmax, wmax}};
  g.lam_counts = {1, 1, nw};
  g.t_count = nt;
  return g;
}

BoundGrid grushin_bound_grid(int nx, int nu, int nv, int nt, double delta) {
  BoundGrid g;
  g.x_ranges = {{-2.0, 2.0}, {0.0, 0.0}};
  g.x_counts = {nx, 1};
  double vmax = kPi * (1 - delta);
  g.lam_ranges = {{-2.0, 2.0}, {-vmax, vmax}};
  g.lam_counts = {nu, nv};
  g.t_count = nt;
  return g;
}

BoundReport verify_power_bound(const Model& model, double exponent,
                               const BoundGrid& grid, std::uint64_t seed) {
  const int n = model.dim();
  if (static_cast<int>(grid.x_ranges.size()) != n ||
      static_cast<int>(grid.lam_ranges.size()) != n ||
      grid.x_counts.size() != grid.x_ranges.size() ||
      grid.lam_counts.size() != grid.lam_ranges.size() || grid.t_count < 1)
    throw InputError("verify_power_bound: grid does not match model dimension");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-0.45, 0.45);
  auto axis = [&](std::pair<double, double> range, int count) {
    std::vector<double> vals = linspace_cells(range, count);
    if (seed != 0 && count > 1) {
      double w = (range.second - range.first) / count;
      for (double& v : vals) v += w * jit(rng);
    }
    return vals;
  };

  std::vector<std::vector<double>> x_axes, lam_axes;
  for (std::size_t i = 0; i < grid.x_ranges.size(); ++i)
    x_axes.push_back(axis(grid.x_ranges[i], grid.x_counts[i]));
  for (std::size_t i = 0; i < grid.lam_ranges.size(); ++i)
    lam_axes.push_back(axis(grid.lam_ranges[i], grid.lam_counts[i]));
  std::vector<VectorXd> xs, lams;
  enumerate_boxes(x_axes, xs);
  enumerate_boxes(lam_axes, lams);

  BoundReport report;
  report.exponent = exponent;
  {
    std::ostringstream os;
    os << grid.describe() << "; seed=" << seed;
    report.grid = os.str();
  }
  report.min_ratio = kInf;
  report.min_diff = kInf;

  const bool closed = has_closed_exp(model);
  for (const VectorXd& x : xs) {
    for (const VectorXd& lam : lams) {
      JacobiFlow* flow = nullptr;
      std::unique_ptr<JacobiFlow> holder;
      double la1 = 0.0;
      int sg1 = 0;
      double rho_1 = 0.0;
      if (!closed) {
        holder = std::make_unique<JacobiFlow>(model, x, lam, 1.0,
                                              std::vector<JacobiInit>{
                                                  vertical_init(n)});
        flow = holder.get();
        std::tie(la1, sg1) = flow->log_abs_det_N(0, 1.0);
        if (sg1 == 0)
          throw DomainError("verify_power_bound: conjugate endpoint in grid");
        rho_1 = model.measure_density(flow->state(1.0).q);
      }
      for (int j = 1; j <= grid.t_count; ++j) {
        double t = static_cast<double>(j) / grid.t_count;
        double beta;
        if (closed) {
          beta = beta_closed(model, x, lam, t);
        } else {
          auto [lat, sgt] = flow->log_abs_det_N(0, t);
          double rho_t = model.measure_density(flow->state(t).q);
          beta = sgt * sg1 * std::exp(lat - la1) * (rho_t / rho_1);
        }
        double tn = std::pow(t, exponent);
        double diff = beta - tn;
        report.min_diff = std::min(report.min_diff, diff);
        if (tn > 0) report.min_ratio = std::min(report.min_ratio, beta / tn);
        if (diff < -1e-12)
          report.violations.push_back({x, lam, t, beta, tn});
      }
    }
  }
  std::sort(report.violations.begin(), report.violations.end(),
            [](const BoundViolation& a, const BoundViolation& b) {
              return a.beta - a.tn < b.beta - b.tn;
            });
  report.pass = report.violations.empty();
  return report;
}

std::optional<BoundViolation> sharpness_search(const Model& model,
                                               double n_prime) {
  VectorXd best_x, best_lam;
  double best_diff = -1e-12, best_t = 0, best_beta = 0, best_tn = 0;
  auto consider = [&](const VectorXd& x, const VectorXd& lam, double t) {
    double beta = beta_closed(model, x, lam, t);
    double tn = std::pow(t, n_prime);
    if (beta - tn < best_diff) {
      best_diff = beta - tn;
      best_x = x;
      best_lam = lam;
      best_t = t;
      best_beta = beta;
      best_tn = tn;
    }
  };

  if (model.kind() == ModelKind::Heisenberg3) {
    VectorXd x = VectorXd::Zero(3);
    VectorXd lam(3);
    for (int i = 0; i < 60; ++i) {
      double w0 = std::exp(std::log(1e-3) +
                           i * (std::log(6.0) - std::log(1e-3)) / 59);
      lam << 1.0, 0.0, w0;
      for (int j = 1; j < 64; ++j) consider(x, lam, j / 64.0);
    }
  } else if (model.kind() == ModelKind::Grushin2) {
    // The straight branch v0 = 0, u0 < 0 carries the proof's sharpness
    // witnesses; scan it first, then a coarse in-band sweep.
    VectorXd x(2), lam(2);
    for (int a = 1; a <= 8; ++a) {
      x << a / 4.0, 0.0;
      for (int b = 1; b <= 60; ++b) {
        lam << -4.0 * b / 60, 0.0;
        for (int j = 1; j < 64; ++j) consider(x, lam, j / 64.0);
      }
    }
    if (best_diff >= -1e-12) {
      for (int a = -6; a <= 6; ++a) {
        x << a / 3.0, 0.0;
        for (int b = -10; b <= 10; ++b) {
          if (a == 0 && b == 0) continue;  // zero-energy covector
          for (int c = -6; c <= 6; ++c) {
            lam << b / 5.0, c * kPi * (1 - 1e-3) / 6;
            for (int j = 1; j < 32; ++j) consider(x, lam, j / 32.0);
          }
        }
      }
    }
  } else {
    throw CapabilityError("sharpness_search supports closed-form models only");
  }

  if (best_diff >= -1e-12) return std::nullopt;
  return BoundViolation{best_x, best_lam, best_t, best_beta, best_tn};
}

double wbar(double z) {
  double s = std::sin(z), c = std::cos(z);
  double z2 = z * z;
  return (64 - 25 * z2) * s * s + 10 * z * (z2 - 8) * s * c +
         z2 * (16 - z2) * c * c;
}

double wbar_taylor_bound(double z) {
  double z2 = z * z;
  double z6 = z2 * z2 * z2;
  return z6 * (8.0 / 45 - z2 / 105 - 4 * z6 / 13365);
}

double wa(double a, double z) {
  double p = a * (a + z) + 4;
  double q = (a + z) * (4 * a - z) + 4;
  return q * std::sin(z) - z * p * std::cos(z);
}

double wa_min_arg(double z) {
  double s = std::sin(z), c = std::cos(z);
  return -(z / 2) * (3 * s - z * c) / (4 * s - z * c);
}

ProofChainReport grushin_proof_chain(const std::vector<double>& z_samples) {
  ProofChainReport report;
  report.min_wbar = kInf;
  report.min_wa = kInf;
  report.taylor_below = true;
  for (double z : z_samples) {
    if (!(z > 0 && z < kPi))
      throw InputError("grushin_proof_chain: samples must lie in (0, pi)");
    double w = wbar(z);
    double wm = wa(wa_min_arg(z), z);
    report.min_wbar = std::min(report.min_wbar, w);
    report.min_wa = std::min(report.min_wa, wm);
    // Completing the square in W_a gives W_bar = 4 (4 sin z - z cos z) W_a_min.
    double gap = std::abs(4 * (4 * std::sin(z) - z * std::cos(z)) * wm - w);
    report.max_identity_gap =
        std::max(report.max_identity_gap, gap / std::max(1.0, std::abs(w)));
    if (z < 2.67 && wbar_taylor_bound(z) > w + 1e-12)
      report.taylor_below = false;
  }
  // First positive root of 8/45 - z^2/105 - 4 z^6/13365 (decreasing there).
  double lo = 1.0, hi = kPi;
  for (int it = 0; it < 200; ++it) {
    double mid = (lo + hi) / 2;
    (wbar_taylor_bound(mid) > 0 ? lo : hi) = mid;
  }
  report.taylor_root = (lo + hi) / 2;
  report.pass = report.min_wbar >= -1e-12 && report.min_wa >= -1e-12 &&
                report.taylor_below &&
                std::abs(report.taylor_root - 2.67491) <= 1e-3;
  return report;
}

DiagonalReport diagonal_bound_check(const Model& model, const VectorXd& x,
                                    const std::vector<double>& ts,
                                    const std::vector<double>& rs,
                                    std::uint64_t seed) {
  model.check_point(x);
  double q;
  switch (model.kind()) {
    case ModelKind::Heisenberg3:
      q = 4.0;  // coordinate weights (1, 1, 2)
      break;
    case ModelKind::Grushin2:
      q = x[0] == 0.0 ? 3.0 : 2.0;  // weights (1, 2) on the singular line
      break;
    default:
      throw CapabilityError("diagonal_bound_check needs known weights; " +
                            model.name() + " is unsupported");
  }

  DiagonalReport report;
  report.q = q;
  report.pass = true;
  const int kCount = 40000;
  InverseExpOptions bulk;
  bulk.starts = 0;

  for (double r : rs) {
    if (!(r > 0 && r <= 0.5))
      throw InputError("diagonal_bound_check: radii must lie in (0, 0.5]");
    SampledSet ball = sample_set(model, SetSpec::ball(x, r), kCount, seed);
    VolumeEstimate vb = volume_estimate(ball.points, cloud_pitch(ball.points));
    for (double t : ts) {
      check_time(t);
      std::vector<VectorXd> mids;
      mids.reserve(ball.points.size());
      for (const VectorXd& y : ball.points)
        mids.push_back(midpoint(model, x, y, t, bulk));
      VolumeEstimate vz = volume_estimate(mids, cloud_pitch(mids));
      double ratio = vz.value / vb.value;
      report.rows.push_back({t, r, ratio});
      if (ratio > std::pow(t, q) * 1.1) report.pass = false;
    }
  }
  return report;
}

double pmean(double p, double t, double a, double b) {
  if (!(a >= 0 && b >= 0)) throw InputError("pmean: a, b must be >= 0");
  check_time(t);
  if (std::isinf(p) && p > 0) return std::max(a, b);
  if (std::isinf(p)) return std::min(a, b);
  if (a == 0.0 || b == 0.0) return 0.0;
  if (p == 0.0) return std::pow(a, 1 - t) * std::pow(b, t);
  return std::pow((1 - t) * std::pow(a, p) + t * std::pow(b, p), 1 / p);
}

}  // namespace srdist
