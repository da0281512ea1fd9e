// Acceptance gate: twelve end-to-end criteria, one [PASS]/[FAIL] line each.
// argv[1] names the CLI binary (used by the determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "srdist/distortion.hpp"
#include "srdist/io.hpp"

using namespace srdist;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string g_cli_path;

Model htype54() {
  MatrixXd J = MatrixXd::Zero(4, 4);
  J(0, 1) = -1;
  J(1, 0) = 1;
  J(2, 3) = -1;
  J(3, 2) = 1;
  return Model::htype(5, 4, {J}, MatrixXd::Identity(4, 4));
}

VectorXd vec3(double a, double b, double c) {
  VectorXd v(3);
  v << a, b, c;
  return v;
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

double slope_fit(const std::vector<double>& logt,
                 const std::vector<double>& logy) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logt.size(); ++i) {
    mx += logt[i];
    my += logy[i];
  }
  mx /= logt.size();
  my /= logy.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < logt.size(); ++i) {
    sxy += (logt[i] - mx) * (logy[i] - my);
    sxx += (logt[i] - mx) * (logt[i] - mx);
  }
  return sxy / sxx;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// 1. closed-form exponential against the adaptive integrator
Outcome criterion1() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double worst = 0.0;
  for (const Model& model : {Model::heisenberg3(), Model::grushin2()}) {
    const int n = model.dim();
    for (int i = 0; i < 500; ++i) {
      VectorXd x(n), lam(n);
      for (int k = 0; k < n; ++k) {
        x[k] = 0.5 * u(rng);
        lam[k] = 2.0 * u(rng);
      }
      double t = ut(rng);
      double err = (exp_closed(model, x, lam, t) -
                    exp_numeric(model, x, lam, t))
                       .cwiseAbs()
                       .maxCoeff();
      worst = std::max(worst, err);
    }
  }
  std::ostringstream os;
  os << "max coordinate error " << worst << " over 1000 draws";
  return {worst <= 1e-8, os.str()};
}

// 2. closed distortion against the Jacobian-determinant form
Outcome criterion2() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ut(0.05, 1.0);
  double worst = 0.0;
  Model heis = Model::heisenberg3();
  for (int i = 0; i < 1000; ++i) {
    VectorXd x = vec3(0.5 * u(rng), 0.5 * u(rng), 0.5 * u(rng));
    VectorXd lam = vec3(1.5 * u(rng), 1.5 * u(rng), 1.9 * kPi * u(rng));
    double t = ut(rng);
    double a = beta_closed(heis, x, lam, t);
    double b = beta_numeric(heis, x, lam, t);
    if (a > 0) worst = std::max(worst, std::abs(a - b) / a);
  }
  Model gru = Model::grushin2();
  int kept = 0;
  while (kept < 1000) {
    double x0 = 1.5 * u(rng), u0 = 2.0 * u(rng), v0 = 0.95 * kPi * u(rng);
    if (std::abs(x0) < 0.05 && std::abs(u0) < 0.05) continue;
    ++kept;
    VectorXd x = vec2(x0, u(rng));
    VectorXd lam = vec2(u0, v0);
    double t = ut(rng);
    double a = beta_closed(gru, x, lam, t);
    double b = beta_numeric(gru, x, lam, t);
    if (a > 0) worst = std::max(worst, std::abs(a - b) / a);
  }
  std::ostringstream os;
  os << "max relative error " << worst << " over 1000 in-cut samples/model";
  return {worst <= 1e-6, os.str()};
}

// 3. numeric conjugate time against 2 pi / |w0|
Outcome criterion3() {
  Model heis = Model::heisenberg3();
  VectorXd x = VectorXd::Zero(3);
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> uw(0.5, 3.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    double w0 = (i % 2 ? 1 : -1) * uw(rng);
    VectorXd lam = vec3(u(rng), u(rng), w0);
    double expected = 2 * kPi / std::abs(w0);
    std::optional<double> got = conjugate_time(heis, x, lam, 1.4 * expected);
    if (!got) return {false, "no conjugate time found"};
    worst = std::max(worst, std::abs(*got - expected) / expected);
  }
  std::ostringstream os;
  os << "max relative error " << worst << " over 50 covectors";
  return {worst <= 1e-6, os.str()};
}

// 4. power bound at N=5 with sharpness just below
Outcome criterion4() {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();
  BoundReport rh = verify_power_bound(heis, 5.0,
                                      heisenberg_bound_grid(200, 200));
  BoundReport rg = verify_power_bound(gru, 5.0,
                                      grushin_bound_grid(20, 20, 20, 50));
  std::optional<BoundViolation> wh = sharpness_search(heis, 4.9);
  std::optional<BoundViolation> wg = sharpness_search(gru, 4.9);
  std::ostringstream os;
  os << "min(beta - t^5): heisenberg " << rh.min_diff << ", grushin "
     << rg.min_diff << "; witnesses at 4.9: "
     << (wh ? "found" : "missing") << "/" << (wg ? "found" : "missing");
  bool pass = rh.pass && rg.pass && rh.min_diff >= -1e-12 &&
              rg.min_diff >= -1e-12 && wh.has_value() && wg.has_value();
  return {pass, os.str()};
}

// 5. rank-4 step-2 group: exponent k + 3(n-k) = 7
Outcome criterion5() {
  Model model = htype54();
  VectorXd x = VectorXd::Zero(5);
  VectorXd lam(5);
  lam << 1.0, 0.4, -0.7, 0.3, 0.8;
  ExponentFit fit = fit_geodesic_exponent(model, x, lam);

  BoundGrid grid;
  for (int i = 0; i < 5; ++i) {
    grid.x_ranges.emplace_back(0.0, 0.0);
    grid.x_counts.push_back(1);
  }
  for (int i = 0; i < 4; ++i) {
    grid.lam_ranges.emplace_back(-2.0, 2.0);
    grid.lam_counts.push_back(4);
  }
  grid.lam_ranges.emplace_back(-3.0, 3.0);
  grid.lam_counts.push_back(2);
  grid.t_count = 20;  // 4^4 * 2 * 20 = 10240 points
  BoundReport report = verify_power_bound(model, 7.0, grid);

  std::ostringstream os;
  os << "fitted exponent " << fit.exponent << "; min(beta - t^7) = "
     << report.min_diff << " on 10240 grid points";
  bool pass = std::abs(fit.exponent - 7.0) <= 0.1 && report.pass &&
              report.min_diff >= -1e-12;
  return {pass, os.str()};
}

// 6. trigonometric minorant nonnegative; taylor-bound root location
Outcome criterion6() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(0.0, kPi);
  double min_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000000; ++i) min_v = std::min(min_v, wbar(u(rng)));
  std::vector<double> zs;
  for (int i = 1; i <= 2000; ++i) zs.push_back(kPi * i / 2001.0);
  ProofChainReport chain = grushin_proof_chain(zs);
  std::ostringstream os;
  os << "min wbar " << min_v << " at 1e6 points; taylor root "
     << chain.taylor_root;
  bool pass = min_v >= -1e-12 && chain.pass &&
              std::abs(chain.taylor_root - 2.67491) <= 1e-3;
  return {pass, os.str()};
}

// 7. matrix S(t) is monotone decreasing between conjugate points
Outcome criterion7() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> uw(0.5, 2.0);
  double worst = std::numeric_limits<double>::infinity();
  std::vector<Model> models{Model::heisenberg3(), Model::grushin2(),
                            htype54()};
  for (const Model& model : models) {
    const int n = model.dim();
    for (int trial = 0; trial < 50; ++trial) {
      VectorXd x(n), lam(n);
      for (int k = 0; k < n; ++k) {
        x[k] = 0.4 * u(rng);
        lam[k] = 1.2 * u(rng);
      }
      double horizon;
      if (model.kind() == ModelKind::Heisenberg3) {
        lam[2] = (trial % 2 ? 1 : -1) * uw(rng);
        horizon = 2 * kPi / std::abs(lam[2]);
      } else if (model.kind() == ModelKind::Grushin2) {
        x[0] = (trial % 2 ? 1 : -1) * (0.3 + 0.5 * std::abs(u(rng)));
        lam[1] = (trial % 2 ? 1 : -1) * uw(rng);
        horizon = conjugate_time(model, x, lam, 8.0).value_or(8.0);
      } else {
        lam[4] = (trial % 2 ? 1 : -1) * uw(rng);
        horizon = conjugate_time(model, x, lam, 8.0).value_or(8.0);
      }
      double T = 0.8 * horizon;
      std::vector<double> ts{0.3 * T, 0.55 * T, 0.8 * T, T};
      std::vector<MatrixXd> mats;
      for (double t : ts) mats.push_back(s_matrix(model, x, lam, t));
      for (std::size_t i = 0; i < ts.size(); ++i)
        for (std::size_t j = i + 1; j < ts.size(); ++j) {
          MatrixXd d = mats[i] - mats[j];
          d = 0.5 * (d + d.transpose()).eval();
          Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d);
          worst = std::min(worst, eig.eigenvalues().minCoeff());
        }
    }
  }
  std::ostringstream os;
  os << "min eigenvalue of S(t1) - S(t2) over all pairs: " << worst;
  return {worst >= -1e-7, os.str()};
}

// 8. small-time exponents: 5 off-diagonal, 4 from the singular base, and
// the homogeneous ball scaling Q=4 that caps the diagonal ratio
Outcome criterion8() {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();
  ExponentFit fh =
      fit_geodesic_exponent(heis, VectorXd::Zero(3), vec3(1.0, 0.3, 1.0));
  ExponentFit fg =
      fit_geodesic_exponent(gru, VectorXd::Zero(2), vec2(1.0, 1.0));

  // vol(B_{tr}) / vol(B_r) = t^4: the scaling behind the diagonal cap
  VectorXd origin = VectorXd::Zero(3);
  std::vector<double> scales{0.3, 0.45, 0.65, 1.0}, lt, lv;
  for (double s : scales) {
    SampledSet ball =
        sample_set(heis, SetSpec::ball(origin, 0.4 * s), 40000, 808);
    VolumeEstimate v = volume_estimate(ball.points, cloud_pitch(ball.points));
    lt.push_back(std::log(s));
    lv.push_back(std::log(v.value));
  }
  double slope = slope_fit(lt, lv);

  // and the cap itself: the diagonal ratio stays below 1.1 * t^4
  DiagonalReport diag = diagonal_bound_check(
      heis, origin, {0.25, 0.5, 0.75, 1.0}, {0.25}, 808);

  std::ostringstream os;
  os << "fits: heisenberg generic " << fh.exponent
     << ", grushin singular base " << fg.exponent << ", ball scaling "
     << slope << "; diagonal cap " << (diag.pass ? "holds" : "violated");
  bool pass = std::abs(fh.exponent - 5.0) <= 0.05 &&
              std::abs(fg.exponent - 4.0) <= 0.05 &&
              std::abs(slope - 4.0) <= 0.05 && diag.pass && diag.q == 4.0;
  return {pass, os.str()};
}

// 9. Monte-Carlo interpolation and contraction inequalities at N=5
Outcome criterion9() {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();
  const int samples = 100000;
  SetSpec cube = SetSpec::box(VectorXd::Zero(3), VectorXd::Ones(3));
  InequalityReport bm_h =
      bm_check(heis, cube, cube, 5.0, {0.5}, 0.0, samples, 901);
  SetSpec ga = SetSpec::box(vec2(-2, 0), vec2(-1, 1));
  SetSpec gb = SetSpec::box(vec2(1, 0), vec2(2, 1));
  InequalityReport bm_g =
      bm_check(gru, ga, gb, 5.0, {0.25, 0.5, 0.75}, 0.0, samples, 902);
  SetSpec shifted = SetSpec::box(0.5 * VectorXd::Ones(3),
                                 1.5 * VectorXd::Ones(3));
  InequalityReport mcp_h =
      mcp_check(heis, VectorXd::Zero(3), shifted, 5.0, {0.5}, 0.0, samples,
                903);
  InequalityReport mcp_g =
      mcp_check(gru, vec2(0, 0), gb, 5.0, {0.5}, 0.0, samples, 904);
  auto margin = [](const InequalityReport& r) {
    double m = std::numeric_limits<double>::infinity();
    for (const InequalityRow& row : r.rows)
      m = std::min(m, row.rhs > 0 ? row.lhs / row.rhs : 1.0);
    return m;
  };
  std::ostringstream os;
  os << "lhs/rhs margins: bm " << margin(bm_h) << "/" << margin(bm_g)
     << ", mcp " << margin(mcp_h) << "/" << margin(mcp_g);
  return {bm_h.pass && bm_g.pass && mcp_h.pass && mcp_g.pass, os.str()};
}

// 10. exact transport against brute force; Wasserstein speed additivity
Outcome criterion10() {
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = u(rng);
    std::vector<VectorXd> p0, p1;
    for (int i = 0; i < n; ++i) {
      p0.push_back(vec2(i, 0));
      p1.push_back(vec2(i, 1));
    }
    DiscreteMeasure m0 = DiscreteMeasure::uniform(p0);
    DiscreteMeasure m1 = DiscreteMeasure::uniform(p1);
    TransportPlan plan = solve_ot(c, m0, m1);
    if (plan.cost != assignment_brute_force(c))
      return {false, "cost mismatch against brute force"};
    double res = std::max(
        (plan.coupling.rowwise().sum() - m0.weights).cwiseAbs().maxCoeff(),
        (plan.coupling.colwise().sum().transpose() - m1.weights)
            .cwiseAbs()
            .maxCoeff());
    if (res > 1e-10) return {false, "marginal residual above 1e-10"};
  }

  Model heis = Model::heisenberg3();
  std::uniform_real_distribution<double> su(-0.5, 0.5);
  std::vector<VectorXd> c0, c1;
  for (int i = 0; i < 16; ++i) {
    c0.push_back(vec3(su(rng), su(rng), su(rng)));
    c1.push_back(vec3(su(rng) + 1.5, su(rng), su(rng)));
  }
  DiscreteMeasure m0 = DiscreteMeasure::uniform(c0);
  DiscreteMeasure m1 = DiscreteMeasure::uniform(c1);
  TransportPlan plan = solve_ot(cost_matrix(heis, m0, m1), m0, m1);
  double w01 = std::sqrt(2.0 * plan.cost);
  std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<DiscreteMeasure> mts;
  for (double t : grid)
    mts.push_back(displacement_interpolation(heis, plan, m0, m1, t));
  double worst = 0.0;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      double w = wasserstein2(heis, mts[a], mts[b]);
      worst = std::max(worst,
                       std::abs(w - (grid[b] - grid[a]) * w01) /
                           std::max(1.0, w01));
    }
  std::ostringstream os;
  os << "100 brute-force matches; additivity deviation " << worst;
  return {worst <= 1e-6, os.str()};
}

// 11. semiconvexity quotient: blows down at a cut point, bounded at a
// smooth point
Outcome criterion11() {
  Model heis = Model::heisenberg3();
  std::vector<double> radii{1e-3, 3.16e-3, 1e-2};
  std::vector<ProbePoint> at_cut =
      semiconvexity_probe(heis, vec3(0, 0, 0), vec3(0, 0, 0.5), radii);
  std::vector<ProbePoint> at_smooth =
      semiconvexity_probe(heis, vec3(0, 0, 0), vec3(1, 0, 0), radii);
  double q_cut = at_cut.front().q;
  double lo = 0, hi = 0;
  for (const ProbePoint& p : at_smooth) {
    lo = std::min(lo, p.q);
    hi = std::max(hi, p.q);
  }
  std::ostringstream os;
  os << "q(1e-3) = " << q_cut << " at the vertical axis; smooth range ["
     << lo << ", " << hi << "]";
  return {q_cut <= -1e3 && lo >= -50 && hi <= 50, os.str()};
}

// 12. byte-identical repeated selftest output
Outcome criterion12() {
  if (g_cli_path.empty())
    return {false, "cli path not provided as argv[1]"};
  auto run = [&](std::string& out) -> int {
    std::string cmd = g_cli_path + " selftest --json 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
    return pclose(pipe);
  };
  std::string a, b;
  int ra = run(a), rb = run(b);
  std::ostringstream os;
  os << "two runs, " << a.size() << " bytes each, "
     << (a == b ? "identical" : "DIFFERENT");
  return {ra == 0 && rb == 0 && !a.empty() && a == b, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];
  struct Entry {
    int id;
    const char* title;
    double limit;  // seconds
    std::function<Outcome()> run;
  };
  std::vector<Entry> entries{
      {1, "closed-form exponential fidelity", 10, criterion1},
      {2, "distortion cross-validation", 30, criterion2},
      {3, "conjugate time against the closed form", 30, criterion3},
      {4, "sharp power bound at N=5", 120, criterion4},
      {5, "rank-4 group exponent k+3(n-k)=7", 120, criterion5},
      {6, "bound minorant and taylor root", 10, criterion6},
      {7, "matrix S monotonicity", 60, criterion7},
      {8, "geodesic-dimension fits", 60, criterion8},
      {9, "interpolation and contraction Monte Carlo", 300, criterion9},
      {10, "exact optimal transport", 60, criterion10},
      {11, "cut-locus semiconvexity probe", 120, criterion11},
      {12, "deterministic selftest output", 120, criterion12},
  };
  int failures = 0;
  for (const Entry& e : entries) {
    auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = e.run();
    } catch (const std::exception& ex) {
      out = {false, std::string("exception: ") + ex.what()};
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    bool pass = out.pass && secs <= e.limit;
    failures += pass ? 0 : 1;
    std::printf("[%s] %2d: %s (%s; %.1fs of %.0fs)\n",
                pass ? "PASS" : "FAIL", e.id, e.title, out.detail.c_str(),
                secs, e.limit);
    std::fflush(stdout);
  }
  if (failures == 0)
    std::printf("acceptance: all 12 criteria passed\n");
  else
    std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
