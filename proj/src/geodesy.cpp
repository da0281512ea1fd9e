#include "srdist/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace srdist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Swept-angle equation for the Heisenberg chord: mu(theta) = Z / rho^2
// where mu(theta) = (theta - sin theta) / (8 sin^2(theta/2)), written in
// cancellation-free ratios; odd and increasing on (-2pi, 2pi).
double mu_fn(double th) {
  double sc = sinc(th / 2);
  return th * sin_defect(th) / (2 * sc * sc);
}

void heis_seeds(const VectorXd& x, const VectorXd& y,
                std::vector<VectorXd>& seeds) {
  VectorXd d = heisenberg_mul(heisenberg_inverse(x), y);
  const double X = d[0], Y = d[1], Z = d[2];
  const double rho2 = X * X + Y * Y;
  auto to_base = [&](double u0, double v0, double w0) {
    VectorXd lam(3);
    lam << u0 + x[1] * w0 / 2, v0 - x[0] * w0 / 2, w0;
    return lam;
  };
  if (rho2 > 0.0) {
    const double m = Z / rho2;
    const double B = 2 * kPi * (1 - 1e-12);
    double lo = m >= 0 ? 0.0 : -B;
    double hi = m >= 0 ? B : 0.0;
    for (int it = 0; it < 90; ++it) {
      double mid = (lo + hi) / 2;
      (mu_fn(mid) < m ? lo : hi) = mid;
    }
    const double th = (lo + hi) / 2;
    const double g1 = sinc(th), g2 = versinc(th);
    const double sc = sinc(th / 2);
    const double det = sc * sc;
    seeds.push_back(to_base((g1 * X + th * g2 * Y) / det,
                            (-th * g2 * X + g1 * Y) / det, th));
  } else if (Z != 0.0) {
    // Vertical-axis family: one full turn, any horizontal phase.
    const double E = std::sqrt(4 * kPi * std::abs(Z));
    const double w0 = Z > 0 ? 2 * kPi : -2 * kPi;
    seeds.push_back(to_base(E, 0, w0));
    seeds.push_back(to_base(-E, 0, w0));
    seeds.push_back(to_base(0, E, w0));
    seeds.push_back(to_base(0, -E, w0));
  }
}

void grushin_seeds(const VectorXd& x, const VectorXd& y,
                   std::vector<VectorXd>& seeds) {
  const double x0 = x[0], y0 = x[1], x1 = y[0], y1 = y[1];
  const double B = kPi * (1 - 1e-6);
  auto u_of_v = [&](double v) { return (x1 - x0 * std::cos(v)) / sinc(v); };
  auto f = [&](double v) {
    double u0 = u_of_v(v);
    double yv = y0 + v * (0.5 * x0 * x0 * (1 + sinc(2 * v)) +
                          2 * u0 * x0 * versinc(2 * v) +
                          2 * u0 * u0 * sin_defect(2 * v));
    return yv - y1;
  };
  const int K = 64;
  double prev_v = -B, prev_f = f(prev_v);
  for (int i = 1; i <= K; ++i) {
    double v = -B + 2 * B * i / K;
    double fv = f(v);
    if ((prev_f < 0) != (fv < 0)) {
      double lo = prev_v, hi = v, flo = prev_f;
      for (int it = 0; it < 90; ++it) {
        double mid = (lo + hi) / 2;
        double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      double vs = (lo + hi) / 2;
      VectorXd lam(2);
      lam << u_of_v(vs), vs;
      seeds.push_back(lam);
    }
    prev_v = v;
    prev_f = fv;
  }
  if (std::abs(x0) < 1e-12 && std::abs(x1) < 1e-12 && y1 != y0) {
    // Singular-line pair: half turn, mirror-symmetric two-element family.
    const double u = std::sqrt(2 * kPi * std::abs(y1 - y0));
    const double v = y1 > y0 ? kPi : -kPi;
    VectorXd a(2), b(2);
    a << u, v;
    b << -u, v;
    seeds.push_back(a);
    seeds.push_back(b);
  }
}

void lowdisc_starts(const Model& m, const VectorXd& x, const VectorXd& y,
                    int count, std::uint64_t seed,
                    std::vector<VectorXd>& seeds) {
  if (count <= 0) return;
  const int n = m.dim();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  VectorXd shift(n);
  for (int i = 0; i < n; ++i) shift[i] = uu(rng);
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  double R, band = 0.0;
  if (m.kind() == ModelKind::Heisenberg3) {
    VectorXd d = heisenberg_mul(heisenberg_inverse(x), y);
    R = 3 * (std::hypot(d[0], d[1]) + std::sqrt(4 * kPi * std::abs(d[2]))) + 1;
    band = 2 * kPi * (1 - 1e-6);
  } else if (m.kind() == ModelKind::Grushin2) {
    R = 3 * (std::abs(y[0] - x[0]) + std::sqrt(2 * kPi * std::abs(y[1] - x[1]))) +
        1;
    band = kPi * (1 - 1e-6);
  } else {
    R = 3 * (y - x).norm() + 1;
  }
  for (int k = 0; k < count; ++k) {
    VectorXd lam(n);
    for (int i = 0; i < n; ++i) {
      double h = halton(static_cast<std::uint64_t>(k), primes[i % 10]) + shift[i];
      lam[i] = 2 * (h - std::floor(h)) - 1;
    }
    if (m.kind() == ModelKind::Heisenberg3) {
      lam[0] *= R;
      lam[1] *= R;
      lam[2] *= band;
    } else if (m.kind() == ModelKind::Grushin2) {
      lam[0] *= R;
      lam[1] *= band;
    } else {
      lam *= R;
    }
    seeds.push_back(lam);
  }
}

MatrixXd bvp_jacobian(const Model& m, const VectorXd& x, const VectorXd& lam) {
  if (has_closed_exp(m)) return exp_jacobian_fd(m, x, lam, 1.0);
  return exp_jacobian(m, x, lam, 1.0);
}

bool newton_polish(const Model& m, const VectorXd& x, const VectorXd& y,
                   VectorXd& lam, int max_iter, double* resid_out) {
  VectorXd F = exp_point(m, x, lam, 1.0) - y;
  double fn = F.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < max_iter && fn > 1e-13; ++iter) {
    MatrixXd J = bvp_jacobian(m, x, lam);
    VectorXd step = J.colPivHouseholderQr().solve(-F);
    if (!step.allFinite()) break;
    double alpha = 1.0;
    bool moved = false;
    while (alpha >= 1.0 / 1024) {
      VectorXd trial = lam + alpha * step;
      VectorXd Ft = exp_point(m, x, trial, 1.0) - y;
      double ftn = Ft.lpNorm<Eigen::Infinity>();
      if (ftn < fn) {
        lam = trial;
        F = Ft;
        fn = ftn;
        moved = true;
        break;
      }
      alpha /= 2;
    }
    if (!moved) break;
  }
  *resid_out = fn;
  return std::isfinite(fn);
}

double cut_time_or_inf(const Model& m, const VectorXd& lam) {
  if (m.kind() == ModelKind::Heisenberg3 || m.kind() == ModelKind::Grushin2)
    return cut_time(m, lam);
  return kInf;
}

bool lex_less(const VectorXd& a, const VectorXd& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace

double cut_time(const Model& model, const VectorXd& lam) {
  model.check_point(lam);
  double w;
  switch (model.kind()) {
    case ModelKind::Heisenberg3:
      w = lam[2];
      return w == 0.0 ? kInf : 2 * kPi / std::abs(w);
    case ModelKind::Grushin2:
      w = lam[1];
      return w == 0.0 ? kInf : kPi / std::abs(w);
    default:
      throw CapabilityError(
          "no closed-form cut time for " + model.name() +
          "; use conjugate_time");
  }
}

std::optional<double> conjugate_time(const Model& model, const VectorXd& x,
                                     const VectorXd& lam, double horizon,
                                     const OdeOptions& opt) {
  if (horizon <= 0) throw InputError("conjugate_time: horizon must be > 0");
  const int n = model.dim();
  JacobiFlow flow(model, x, lam, horizon, {vertical_init(n)}, opt);
  const int kGrid = 1000;
  std::vector<double> ts(kGrid), la(kGrid);
  std::vector<int> sg(kGrid);
  for (int i = 0; i < kGrid; ++i) {
    ts[i] = horizon * (i + 1) / kGrid;
    std::tie(la[i], sg[i]) = flow.log_abs_det_N(0, ts[i]);
    if (sg[i] == 0) return ts[i];
  }
  double first = kInf;

  // Simple roots flip the sign of det N^V_0 between grid points.
  for (int i = 1; i < kGrid; ++i) {
    if (sg[i] == sg[i - 1]) continue;
    double lo = ts[i - 1], hi = ts[i];
    int lo_s = sg[i - 1];
    while (hi - lo > 1e-10) {
      double mid = (lo + hi) / 2;
      int ms = flow.log_abs_det_N(0, mid).second;
      if (ms == 0) {
        lo = hi = mid;
        break;
      }
      (ms == lo_s ? lo : hi) = mid;
    }
    first = (lo + hi) / 2;
    break;
  }

  // Even-multiplicity roots only graze zero: look for interior dips of
  // log|det| far below the scale seen so far, refined by ternary search so
  // the grid does not need to land on the tangency.  Comparing against the
  // running prefix maximum keeps the t -> 0 startup (where det N^V_0 grows
  // from zero) from masquerading as a graze.
  double prefix = la[0];
  for (int i = 1; i + 1 < kGrid && ts[i] < first; ++i) {
    prefix = std::max(prefix, la[i - 1]);
    if (!(la[i] <= la[i - 1] && la[i] <= la[i + 1])) continue;
    double lo = ts[i - 1], hi = ts[i + 1];
    while (hi - lo > 1e-10) {
      double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
      if (flow.log_abs_det_N(0, m1).first < flow.log_abs_det_N(0, m2).first)
        hi = m2;
      else
        lo = m1;
    }
    double tm = (lo + hi) / 2;
    if (flow.log_abs_det_N(0, tm).first <= prefix + std::log(1e-14)) {
      first = tm;
      break;
    }
  }

  if (std::isfinite(first)) return first;
  return std::nullopt;
}

InverseExpResult inverse_exp(const Model& model, const VectorXd& x,
                             const VectorXd& y, const InverseExpOptions& opt) {
  model.check_point(x);
  model.check_point(y);
  InverseExpResult out;
  const int n = model.dim();
  if ((y - x).lpNorm<Eigen::Infinity>() == 0.0) {
    GeodesicSolution s;
    s.lambda = VectorXd::Zero(n);
    s.t_cut = kInf;
    s.minimizing = true;
    out.solutions.push_back(std::move(s));
    out.converged_starts = 1;
    return out;
  }

  std::vector<VectorXd> seeds;
  if (model.kind() == ModelKind::Heisenberg3) heis_seeds(x, y, seeds);
  if (model.kind() == ModelKind::Grushin2) grushin_seeds(x, y, seeds);
  lowdisc_starts(model, x, y, opt.starts, opt.seed, seeds);

  std::vector<GeodesicSolution> sols;
  for (VectorXd lam : seeds) {
    double resid;
    if (!newton_polish(model, x, y, lam, opt.max_iter, &resid)) continue;
    if (resid > opt.tol) continue;
    ++out.converged_starts;
    bool dup = false;
    for (GeodesicSolution& s : sols) {
      if ((s.lambda - lam).lpNorm<Eigen::Infinity>() < 1e-6) {
        dup = true;
        if (resid < s.residual) {
          s.lambda = lam;
          s.residual = resid;
        }
        break;
      }
    }
    if (dup) continue;
    GeodesicSolution s;
    s.lambda = lam;
    s.residual = resid;
    s.length = std::sqrt(2 * std::max(0.0, model.hamiltonian(x, lam)));
    s.t_cut = cut_time_or_inf(model, lam);
    sols.push_back(std::move(s));
  }
  if (sols.empty())
    throw NotFoundError("inverse_exp: no start converged to residual <= " +
                        std::to_string(opt.tol) + " out of " +
                        std::to_string(seeds.size()) + " starts");

  std::sort(sols.begin(), sols.end(),
            [](const GeodesicSolution& a, const GeodesicSolution& b) {
              if (a.length != b.length) return a.length < b.length;
              return lex_less(a.lambda, b.lambda);
            });
  // Lexicographic order inside groups of numerically tied lengths keeps
  // the selection deterministic across runs.
  std::size_t g0 = 0;
  for (std::size_t i = 1; i <= sols.size(); ++i) {
    bool close = i < sols.size() &&
                 sols[i].length - sols[i - 1].length <=
                     1e-9 * std::max(1.0, sols[i].length);
    if (!close) {
      std::sort(sols.begin() + g0, sols.begin() + i,
                [](const GeodesicSolution& a, const GeodesicSolution& b) {
                  return lex_less(a.lambda, b.lambda);
                });
      g0 = i;
    }
  }

  double best = kInf;
  for (const GeodesicSolution& s : sols)
    if (s.t_cut >= 1 - 1e-9) best = std::min(best, s.length);
  int minimizers = 0;
  for (GeodesicSolution& s : sols) {
    s.minimizing = s.t_cut >= 1 - 1e-9 &&
                   s.length <= best + 1e-9 * std::max(1.0, best);
    minimizers += s.minimizing;
  }
  out.multiple_minimizers = minimizers >= 2;
  out.solutions = std::move(sols);
  return out;
}

double distance(const Model& model, const VectorXd& x, const VectorXd& y,
                const InverseExpOptions& opt) {
  InverseExpResult res = inverse_exp(model, x, y, opt);
  for (const GeodesicSolution& s : res.solutions)
    if (s.minimizing) return s.length;
  throw NotFoundError("distance: no solution admissible at its cut time");
}

VectorXd midpoint(const Model& model, const VectorXd& x, const VectorXd& y,
                  double t, const InverseExpOptions& opt) {
  InverseExpResult res = inverse_exp(model, x, y, opt);
  for (const GeodesicSolution& s : res.solutions)
    if (s.minimizing) return exp_point(model, x, s.lambda, t);
  throw NotFoundError("midpoint: no solution admissible at its cut time");
}

namespace {

std::vector<VectorXd> sphere_directions(int n, int count) {
  std::vector<VectorXd> dirs;
  dirs.reserve(count);
  if (n == 1) {
    VectorXd v(1);
    v << 1.0;
    dirs.push_back(v);
    v << -1.0;
    dirs.push_back(v);
    return dirs;
  }
  if (n == 2) {
    for (int i = 0; i < count; ++i) {
      double a = 2 * kPi * i / count;
      VectorXd v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
    return dirs;
  }
  if (n == 3) {
    // Fibonacci sphere
    const double ga = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = ga * i;
      VectorXd v(3);
      v << r * std::cos(a), r * std::sin(a), z;
      dirs.push_back(v);
    }
    return dirs;
  }
  // Gaussians from low-discrepancy uniforms, normalized.
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  for (int i = 0; i < count; ++i) {
    VectorXd v(n);
    for (int j = 0; j < n; j += 2) {
      double u1 = halton(static_cast<std::uint64_t>(i), primes[(2 * j) % 10]);
      double u2 =
          halton(static_cast<std::uint64_t>(i), primes[(2 * j + 1) % 10]);
      u1 = std::max(u1, 1e-12);
      double rad = std::sqrt(-2 * std::log(u1));
      v[j] = rad * std::cos(2 * kPi * u2);
      if (j + 1 < n) v[j + 1] = rad * std::sin(2 * kPi * u2);
    }
    double nn = v.norm();
    if (nn == 0.0) {
      v.setZero();
      v[0] = 1.0;
      nn = 1.0;
    }
    dirs.push_back(v / nn);
  }
  return dirs;
}

}  // namespace

std::vector<ProbePoint> semiconvexity_probe(const Model& model,
                                            const VectorXd& y,
                                            const VectorXd& x,
                                            const std::vector<double>& radii) {
  model.check_point(x);
  model.check_point(y);
  if ((x - y).lpNorm<Eigen::Infinity>() == 0.0)
    throw InputError("semiconvexity_probe: x must differ from y");
  for (double r : radii)
    if (r < 1e-4)
      throw InputError("semiconvexity_probe: radius below 1e-4 rejected");
  InverseExpOptions opt;
  opt.tol = 1e-11;
  const double d0 = distance(model, x, y, opt);
  std::vector<VectorXd> dirs = sphere_directions(model.dim(), 64);
  std::vector<ProbePoint> out;
  for (double r : radii) {
    double qmin = kInf;
    for (const VectorXd& v : dirs) {
      double dp = distance(model, x + r * v, y, opt);
      double dm = distance(model, x - r * v, y, opt);
      qmin = std::min(qmin, (dp * dp + dm * dm - 2 * d0 * d0) / (r * r));
    }
    out.push_back({r, qmin});
  }
  return out;
}

}  // namespace srdist
