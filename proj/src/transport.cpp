#include "srdist/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "srdist/flow.hpp"

namespace srdist {
namespace {

constexpr double kDust = 1e-15;     // leftover supply treated as routed
constexpr double kDualTol = 1e-9;   // optimality certificate tolerance
const double kInf = std::numeric_limits<double>::infinity();

std::vector<double> key_of(const VectorXd& p) {
  return std::vector<double>(p.data(), p.data() + p.size());
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(std::vector<VectorXd> pts) {
  DiscreteMeasure m;
  m.weights =
      VectorXd::Constant(static_cast<Eigen::Index>(pts.size()),
                         1.0 / static_cast<double>(pts.size()));
  m.support = std::move(pts);
  m.validate();
  return m;
}

void DiscreteMeasure::validate() const {
  if (support.empty() || weights.size() != static_cast<Eigen::Index>(support.size()))
    throw InputError("DiscreteMeasure: support and weights disagree");
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights[i] >= 0.0))
      throw InputError("DiscreteMeasure: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw InputError("DiscreteMeasure: weights must sum to 1 within 1e-12");
  std::map<std::vector<double>, int> seen;
  for (const VectorXd& p : support)
    if (!seen.emplace(key_of(p), 1).second)
      throw InputError("DiscreteMeasure: duplicate support point");
}

void TransportPlan::validate(const DiscreteMeasure& m0,
                             const DiscreteMeasure& m1,
                             const MatrixXd& cost_mat) const {
  const Eigen::Index n = m0.weights.size(), m = m1.weights.size();
  if (coupling.rows() != n || coupling.cols() != m)
    throw InputError("TransportPlan: coupling shape mismatch");
  if ((coupling.rowwise().sum() - m0.weights).cwiseAbs().maxCoeff() > 1e-10 ||
      (coupling.colwise().sum().transpose() - m1.weights)
              .cwiseAbs()
              .maxCoeff() > 1e-10)
    throw NumericalError("TransportPlan: marginals off by more than 1e-10");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (coupling(i, j) > 0) acc += coupling(i, j) * cost_mat(i, j);
  if (std::abs(acc - cost) > 1e-10)
    throw NumericalError("TransportPlan: cost does not match the coupling");
}

MatrixXd cost_matrix(const Model& model, const DiscreteMeasure& m0,
                     const DiscreteMeasure& m1,
                     const InverseExpOptions& opt) {
  m0.validate();
  m1.validate();
  MatrixXd c(m0.support.size(), m1.support.size());
  for (std::size_t i = 0; i < m0.support.size(); ++i)
    for (std::size_t j = 0; j < m1.support.size(); ++j) {
      try {
        double d = distance(model, m0.support[i], m1.support[j], opt);
        c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            0.5 * d * d;
      } catch (const std::runtime_error& e) {
        std::ostringstream os;
        os << "cost_matrix: pair (" << i << ", " << j
           << ") has no resolved geodesic: " << e.what();
        throw NumericalError(os.str());
      }
    }
  return c;
}

TransportPlan solve_ot(const MatrixXd& cost, const DiscreteMeasure& m0,
                       const DiscreteMeasure& m1) {
  m0.validate();
  m1.validate();
  const int n = static_cast<int>(m0.weights.size());
  const int m = static_cast<int>(m1.weights.size());
  if (n > 512 || m > 512)
    throw InputError("solve_ot: supports are limited to 512 atoms");
  if (cost.rows() != n || cost.cols() != m)
    throw InputError("solve_ot: cost matrix shape mismatch");

  VectorXd excess = m0.weights, deficit = m1.weights;
  std::vector<double> pot(static_cast<std::size_t>(n + m), 0.0);
  MatrixXd flow = MatrixXd::Zero(n, m);

  // Successive shortest augmenting paths with node potentials; reduced
  // costs stay nonnegative so plain Dijkstra applies throughout.
  std::vector<double> dist(static_cast<std::size_t>(n + m));
  std::vector<int> parent(static_cast<std::size_t>(n + m));
  std::vector<char> done(static_cast<std::size_t>(n + m));
  while (true) {
    int s = -1;
    for (int i = 0; i < n; ++i)
      if (excess[i] > kDust) {
        s = i;
        break;
      }
    if (s < 0) break;

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    dist[static_cast<std::size_t>(s)] = 0.0;
    while (true) {
      int x = -1;
      double dx = kInf;
      for (int k = 0; k < n + m; ++k)
        if (!done[static_cast<std::size_t>(k)] &&
            dist[static_cast<std::size_t>(k)] < dx) {
          dx = dist[static_cast<std::size_t>(k)];
          x = k;
        }
      if (x < 0) break;
      done[static_cast<std::size_t>(x)] = 1;
      if (x < n) {
        for (int j = 0; j < m; ++j) {
          double rc = cost(x, j) - pot[static_cast<std::size_t>(x)] +
                      pot[static_cast<std::size_t>(n + j)];
          if (rc < 0) rc = 0;
          if (dx + rc < dist[static_cast<std::size_t>(n + j)]) {
            dist[static_cast<std::size_t>(n + j)] = dx + rc;
            parent[static_cast<std::size_t>(n + j)] = x;
          }
        }
      } else {
        const int j = x - n;
        for (int i = 0; i < n; ++i) {
          if (flow(i, j) <= 0) continue;
          double rc = pot[static_cast<std::size_t>(i)] -
                      pot[static_cast<std::size_t>(x)] - cost(i, j);
          if (rc < 0) rc = 0;
          if (dx + rc < dist[static_cast<std::size_t>(i)]) {
            dist[static_cast<std::size_t>(i)] = dx + rc;
            parent[static_cast<std::size_t>(i)] = x;
          }
        }
      }
    }

    int tau = -1;
    double dtau = kInf;
    for (int j = 0; j < m; ++j)
      if (deficit[j] > kDust &&
          dist[static_cast<std::size_t>(n + j)] < dtau) {
        dtau = dist[static_cast<std::size_t>(n + j)];
        tau = n + j;
      }
    if (tau < 0)
      throw NumericalError("solve_ot: no augmenting path (unbalanced data)");

    for (int k = 0; k < n + m; ++k)
      pot[static_cast<std::size_t>(k)] -=
          std::min(dist[static_cast<std::size_t>(k)], dtau);

    double delta = std::min(excess[s], deficit[tau - n]);
    for (int x = tau; x != s;) {
      const int p = parent[static_cast<std::size_t>(x)];
      if (x >= n)
        ;  // forward arc p -> x, uncapacitated
      else
        delta = std::min(delta, flow(x, p - n));  // backward arc p -> x
      x = p;
    }
    for (int x = tau; x != s;) {
      const int p = parent[static_cast<std::size_t>(x)];
      if (x >= n)
        flow(p, x - n) += delta;
      else
        flow(x, p - n) -= delta;
      x = p;
    }
    excess[s] -= delta;
    deficit[tau - n] -= delta;
    if (excess[s] <= kDust) excess[s] = 0.0;
    if (deficit[tau - n] <= kDust) deficit[tau - n] = 0.0;
  }

  // Optimality certificate: u_i + v_j <= C_ij with equality on flow arcs.
  const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double rc = cost(i, j) - pot[static_cast<std::size_t>(i)] +
                        pot[static_cast<std::size_t>(n + j)];
      if (rc < -kDualTol * scale ||
          (flow(i, j) > 0 && std::abs(rc) > kDualTol * scale))
        throw NumericalError("solve_ot: dual certificate failed");
    }

  TransportPlan plan;
  plan.coupling = std::move(flow);
  plan.cost = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (plan.coupling(i, j) > 0) plan.cost += plan.coupling(i, j) * cost(i, j);
  plan.validate(m0, m1, cost);
  return plan;
}

double assignment_brute_force(const MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n < 1 || n > 8)
    throw InputError("assignment_brute_force: needs a square cost, n <= 8");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  const double w = 1.0 / n;
  double best = kInf;
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += w * cost(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double wasserstein2(const Model& model, const DiscreteMeasure& m0,
                    const DiscreteMeasure& m1) {
  MatrixXd c = cost_matrix(model, m0, m1);
  TransportPlan plan = solve_ot(c, m0, m1);
  return std::sqrt(std::max(0.0, 2.0 * plan.cost));
}

DiscreteMeasure displacement_interpolation(const Model& model,
                                           const TransportPlan& plan,
                                           const DiscreteMeasure& m0,
                                           const DiscreteMeasure& m1, double t,
                                           int* flagged) {
  m0.validate();
  m1.validate();
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError("displacement_interpolation: t must lie in [0, 1]");
  const Eigen::Index n = m0.weights.size(), m = m1.weights.size();
  if (plan.coupling.rows() != n || plan.coupling.cols() != m)
    throw InputError("displacement_interpolation: plan shape mismatch");
  if ((plan.coupling.rowwise().sum() - m0.weights).cwiseAbs().maxCoeff() >
          1e-10 ||
      (plan.coupling.colwise().sum().transpose() - m1.weights)
              .cwiseAbs()
              .maxCoeff() > 1e-10)
    throw NumericalError("displacement_interpolation: bad plan marginals");

  int ties = 0;
  std::map<std::vector<double>, double> merged;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double w = plan.coupling(i, j);
      if (w <= 0) continue;
      VectorXd z;
      if (t == 0.0) {
        z = m0.support[static_cast<std::size_t>(i)];
      } else if (t == 1.0) {
        z = m1.support[static_cast<std::size_t>(j)];
      } else {
        InverseExpResult res =
            inverse_exp(model, m0.support[static_cast<std::size_t>(i)],
                        m1.support[static_cast<std::size_t>(j)]);
        ties += res.multiple_minimizers ? 1 : 0;
        const GeodesicSolution* pick = nullptr;
        for (const GeodesicSolution& sol : res.solutions)
          if (sol.minimizing) {
            pick = &sol;
            break;
          }
        if (!pick)
          throw NumericalError(
              "displacement_interpolation: pair without a minimizing "
              "geodesic");
        z = exp_point(model, m0.support[static_cast<std::size_t>(i)],
                      pick->lambda, t);
      }
      merged[key_of(z)] += w;
    }
  if (flagged) *flagged = ties;

  // fold atoms that agree to 1e-8 in every coordinate (endpoint solves of
  // the same target differ only by solver residuals)
  DiscreteMeasure out;
  std::vector<double> ws;
  for (const auto& [key, w] : merged) {
    VectorXd p = Eigen::Map<const VectorXd>(key.data(),
                                            static_cast<Eigen::Index>(key.size()));
    if (!out.support.empty()) {
      const VectorXd& prev = out.support.back();
      if ((p - prev).cwiseAbs().maxCoeff() <= 1e-8) {
        ws.back() += w;
        continue;
      }
    }
    out.support.push_back(std::move(p));
    ws.push_back(w);
  }
  out.weights = Eigen::Map<const VectorXd>(ws.data(),
                                           static_cast<Eigen::Index>(ws.size()));
  const double total = out.weights.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw NumericalError("displacement_interpolation: mass not conserved");
  out.weights /= total;  // shed accumulated dust
  out.validate();
  return out;
}

InterpolationCheckReport interpolation_density_check(
    const Model& model, const GriddedFunction& rho0,
    const GriddedFunction& rho1, double t, double bandwidth, double n_bound) {
  const int n = model.dim();
  if (rho0.lo.size() != n || rho1.lo.size() != n)
    throw InputError("interpolation_density_check: grid dimension mismatch");
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError("interpolation_density_check: t must lie in [0, 1]");
  auto max_pitch = [](const GriddedFunction& f) {
    double p = 0.0;
    for (std::size_t d = 0; d < f.shape.size(); ++d)
      p = std::max(p, (f.hi[static_cast<Eigen::Index>(d)] -
                       f.lo[static_cast<Eigen::Index>(d)]) /
                          f.shape[d]);
    return p;
  };
  if (!(bandwidth > std::max(max_pitch(rho0), max_pitch(rho1))))
    throw InputError(
        "interpolation_density_check: bandwidth must exceed the grid pitch");

  // Cell centers become atoms; values become normalized densities.
  struct Atomized {
    DiscreteMeasure mu;
    std::vector<double> density;  // normalized density at each atom
  };
  auto atomize = [](const GriddedFunction& f) {
    const double total = f.integral();
    if (!(total > 0.0))
      throw InputError("interpolation_density_check: density has zero mass");
    Atomized a;
    std::vector<double> w;
    for (std::size_t c = 0; c < f.values.size(); ++c) {
      if (!(f.values[c] >= 0.0))
        throw InputError("interpolation_density_check: negative density");
      if (f.values[c] == 0.0) continue;
      a.mu.support.push_back(f.cell_center(static_cast<long long>(c)));
      w.push_back(f.values[c] * f.cell_volume() / total);
      a.density.push_back(f.values[c] / total);
    }
    if (a.mu.support.size() > 512)
      throw InputError(
          "interpolation_density_check: more than 512 atoms; coarsen the "
          "grid");
    a.mu.weights = Eigen::Map<const VectorXd>(
        w.data(), static_cast<Eigen::Index>(w.size()));
    a.mu.validate();
    return a;
  };
  Atomized a0 = atomize(rho0), a1 = atomize(rho1);

  MatrixXd c = cost_matrix(model, a0.mu, a1.mu);
  TransportPlan plan = solve_ot(c, a0.mu, a1.mu);

  struct Moved {
    VectorXd z;
    double w;
    std::size_t i, j;
    bool cut;
  };
  std::vector<Moved> moved;
  for (Eigen::Index i = 0; i < plan.coupling.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.coupling.cols(); ++j) {
      const double w = plan.coupling(i, j);
      if (w <= 0) continue;
      InverseExpResult res =
          inverse_exp(model, a0.mu.support[static_cast<std::size_t>(i)],
                      a1.mu.support[static_cast<std::size_t>(j)]);
      const GeodesicSolution* pick = nullptr;
      for (const GeodesicSolution& sol : res.solutions)
        if (sol.minimizing) {
          pick = &sol;
          break;
        }
      if (!pick)
        throw NumericalError(
            "interpolation_density_check: pair without a minimizing "
            "geodesic");
      moved.push_back({exp_point(model,
                                 a0.mu.support[static_cast<std::size_t>(i)],
                                 pick->lambda, t),
                       w, static_cast<std::size_t>(i),
                       static_cast<std::size_t>(j),
                       res.multiple_minimizers});
    }

  // product Epanechnikov kernel density of the transported atoms
  auto rho_t = [&](const VectorXd& z) {
    double acc = 0.0;
    for (const Moved& mv : moved) {
      double k = mv.w;
      for (int d = 0; d < n && k > 0; ++d) {
        const double u = (z[d] - mv.z[d]) / bandwidth;
        k *= u * u < 1.0 ? 0.75 * (1.0 - u * u) / bandwidth : 0.0;
      }
      acc += k;
    }
    return acc;
  };

  InterpolationCheckReport rep;
  rep.t = t;
  rep.bandwidth = bandwidth;
  rep.exponent = n_bound;
  rep.min_slack = kInf;
  const double wf = std::pow(1.0 - t, n_bound / n);
  const double wg = std::pow(t, n_bound / n);
  for (const Moved& mv : moved) {
    if (mv.cut) {
      ++rep.excluded;
      continue;
    }
    const double est = rho_t(mv.z);
    const double lhs = est > 0 ? std::pow(est, -1.0 / n) : kInf;
    const double rhs = wf * std::pow(a0.density[mv.i], -1.0 / n) +
                       wg * std::pow(a1.density[mv.j], -1.0 / n);
    rep.min_slack = std::min(rep.min_slack, lhs / rhs);
    ++rep.checked_points;
  }
  const double frac =
      moved.empty() ? 1.0
                    : static_cast<double>(rep.excluded) /
                          static_cast<double>(moved.size());
  rep.consistent =
      rep.checked_points > 0 && rep.min_slack >= 0.8 && frac < 0.01;
  return rep;
}

}  // namespace srdist
