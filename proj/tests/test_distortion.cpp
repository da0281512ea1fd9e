#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "srdist/distortion.hpp"
#include "srdist/flow.hpp"

using namespace srdist;

namespace {

const double kPi = 3.14159265358979323846;
const double kInf = std::numeric_limits<double>::infinity();

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

Model htype54() {
  Eigen::MatrixXd J(4, 4);
  J << 0, -1, 0, 0,  //
      1, 0, 0, 0,    //
      0, 0, 0, -1,   //
      0, 0, 1, 0;
  return Model::htype(5, 4, {J}, Eigen::MatrixXd::Identity(4, 4));
}

}  // namespace

TEST_CASE("closed distortion at pinned configurations") {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();

  // values fixed from 30-digit evaluations of the trig closed forms
  CHECK(beta_closed(heis, vec3(0, 0, 0), vec3(1, 0, kPi), 0.5) ==
        doctest::Approx(0.053650459150637923).epsilon(1e-13));
  CHECK(beta_closed(heis, vec3(0.4, -0.2, 1.0), vec3(0.3, -0.7, 1.0), 0.3) ==
        doctest::Approx(0.0025831179475109889).epsilon(1e-13));
  CHECK(beta_closed(gru, vec2(1, 0), vec2(1, 0), 0.5) ==
        doctest::Approx(0.16964285714285714).epsilon(1e-13));
  CHECK(beta_closed(gru, vec2(0, 2), vec2(1, kPi / 2), 0.5) ==
        doctest::Approx(0.075873206958375872).epsilon(1e-13));
}

TEST_CASE("distortion endpoints and the vanishing-rotation limit") {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();
  const VectorXd lam = vec3(0.7, -0.4, 2.0);

  CHECK(beta_closed(heis, vec3(0, 0, 0), lam, 0.0) == 0.0);
  CHECK(beta_closed(heis, vec3(0, 0, 0), lam, 1.0) == 1.0);
  CHECK(beta_closed(gru, vec2(0.3, 1), vec2(1, 2), 0.0) == 0.0);
  CHECK(beta_closed(gru, vec2(0.3, 1), vec2(1, 2), 1.0) == 1.0);

  // w0 = 0 collapses the ratio factors to 1: beta = t^5 on the nose
  for (double t : {0.1, 0.37, 0.81})
    CHECK(beta_closed(heis, vec3(0, 0, 0), vec3(1, 2, 0), t) ==
          doctest::Approx(std::pow(t, 5)).epsilon(1e-15));
  // and a tiny rotation stays within O(w0^2) of it
  CHECK(beta_closed(heis, vec3(0, 0, 0), vec3(1, 0, 1e-6), 0.4) ==
        doctest::Approx(std::pow(0.4, 5)).epsilon(1e-10));
}

TEST_CASE("covectors outside the cut band are rejected") {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();
  CHECK_THROWS_AS(beta_closed(heis, vec3(0, 0, 0), vec3(1, 0, 2 * kPi), 0.5),
                  DomainError);
  CHECK_THROWS_AS(beta_closed(gru, vec2(0, 0), vec2(1, kPi), 0.5),
                  DomainError);
  // zero-energy covector from the singular line: the denominator vanishes
  CHECK_THROWS_AS(beta_closed(gru, vec2(0, 0), vec2(0, 1), 0.5), DomainError);
  CHECK_THROWS_AS(beta_closed(heis, vec3(0, 0, 0), vec3(1, 0, 1), 1.5),
                  InputError);
  CHECK_THROWS_AS(beta_closed(htype54(), VectorXd::Zero(5),
                              VectorXd::Ones(5), 0.5),
                  CapabilityError);
}

TEST_CASE("jacobian-determinant distortion matches the closed forms") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  Model heis = Model::heisenberg3();
  for (int k = 0; k < 40; ++k) {
    VectorXd x = vec3(u(rng), u(rng), u(rng));
    VectorXd lam = vec3(u(rng) + 2.0, u(rng), 1.9 * kPi * u(rng));
    double t = 0.5 * (u(rng) + 1.0);
    if (t < 0.05) t = 0.05;
    const double closed = beta_closed(heis, x, lam, t);
    CHECK(beta_numeric(heis, x, lam, t) ==
          doctest::Approx(closed).epsilon(1e-6));
  }

  Model gru = Model::grushin2();
  for (int k = 0; k < 40; ++k) {
    VectorXd x = vec2(1.5 * u(rng), u(rng));
    VectorXd lam = vec2(u(rng) + 1.5, 0.95 * kPi * u(rng));
    double t = 0.5 * (u(rng) + 1.0);
    if (t < 0.05) t = 0.05;
    const double closed = beta_closed(gru, x, lam, t);
    CHECK(beta_numeric(gru, x, lam, t) ==
          doctest::Approx(closed).epsilon(1e-6));
  }
}

TEST_CASE("reverse coefficient runs the geodesic backwards") {
  Model gru = Model::grushin2();
  const VectorXd x = vec2(0.5, 0);
  const VectorXd lam = vec2(1, 1);

  CHECK(beta_reverse(gru, x, lam, 0.0) == 1.0);
  CHECK(beta_reverse(gru, x, lam, 1.0) == 0.0);

  // beta_reverse(x, lam, t) = beta_{1-t}(y, x): flip the endpoint covector
  ExtremalState far = exp_state(gru, x, lam, 1.0);
  for (double t : {0.2, 0.3, 0.7})
    CHECK(beta_reverse(gru, x, lam, t) ==
          doctest::Approx(beta_closed(gru, far.q, -far.p, 1.0 - t))
              .epsilon(1e-8));

  Model heis = Model::heisenberg3();
  const VectorXd xh = vec3(0.1, -0.2, 0.05);
  const VectorXd lh = vec3(1.0, 0.4, 2.0);
  ExtremalState farh = exp_state(heis, xh, lh, 1.0);
  for (double t : {0.25, 0.6})
    CHECK(beta_reverse(heis, xh, lh, t) ==
          doctest::Approx(beta_closed(heis, farh.q, -farh.p, 1.0 - t))
              .epsilon(1e-8));
}

TEST_CASE("distortion curves agree between methods") {
  Model heis = Model::heisenberg3();
  const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};
  DistortionCurve closed =
      distortion_curve(heis, vec3(0, 0, 0), vec3(1, 0.5, 3.0), ts, "closed");
  DistortionCurve numeric =
      distortion_curve(heis, vec3(0, 0, 0), vec3(1, 0.5, 3.0), ts, "numeric");
  REQUIRE(closed.beta.size() == ts.size());
  REQUIRE(numeric.beta.size() == ts.size());
  CHECK(closed.beta.front() == 0.0);
  CHECK(closed.beta.back() == 1.0);
  for (std::size_t i = 0; i < ts.size(); ++i)
    CHECK(numeric.beta[i] == doctest::Approx(closed.beta[i]).epsilon(1e-6));

  CHECK_THROWS_AS(distortion_curve(heis, vec3(0, 0, 0), vec3(1, 0, 1), ts,
                                   "analytic"),
                  InputError);
  CHECK_THROWS_AS(distortion_curve(htype54(), VectorXd::Zero(5),
                                   VectorXd::Ones(5), ts, "closed"),
                  CapabilityError);
}

TEST_CASE("small-time exponents recover the geodesic dimension") {
  Model heis = Model::heisenberg3();
  ExponentFit f = fit_geodesic_exponent(heis, vec3(0, 0, 0), vec3(1, 0, 1));
  CHECK(f.exponent == doctest::Approx(5.0).epsilon(2e-3));
  CHECK(f.constant == doctest::Approx(1.0694125285229246).epsilon(1e-2));

  Model gru = Model::grushin2();
  // from the singular line the volume contracts one power slower
  ExponentFit g0 = fit_geodesic_exponent(gru, vec2(0, 0), vec2(1, 0.5));
  CHECK(g0.exponent == doctest::Approx(4.0).epsilon(2e-3));
  CHECK(g0.constant == doctest::Approx(1.0254073549543715).epsilon(1e-2));
  // away from it the model is Riemannian: dimension 2.  The subleading
  // term is O(t) here (odd in u0), so the window shrinks a decade.
  ExponentFit g1 = fit_geodesic_exponent(gru, vec2(1, 0), vec2(1, 0.5),
                                         1e-4, 1e-2);
  CHECK(g1.exponent == doctest::Approx(2.0).epsilon(2e-3));

  // corank-1 group with a 4-dimensional first layer: N = 4 + 3
  ExponentFit h = fit_geodesic_exponent(htype54(), VectorXd::Zero(5),
                                        VectorXd::Ones(5));
  CHECK(h.exponent == doctest::Approx(7.0).epsilon(2e-3));

  // flat frame sanity: the fit sees plain Euclidean scaling
  std::vector<std::vector<Polynomial>> fields(2);
  fields[0] = {Polynomial::constant(2, 1), Polynomial::constant(2, 0)};
  fields[1] = {Polynomial::constant(2, 0), Polynomial::constant(2, 1)};
  Model flat = Model::generic_frame(2, fields, std::nullopt);
  ExponentFit e = fit_geodesic_exponent(flat, vec2(0.2, -0.1), vec2(1, 0.7));
  CHECK(e.exponent == doctest::Approx(2.0).epsilon(2e-3));
}

TEST_CASE("power bound holds at 5 and breaks below it") {
  Model heis = Model::heisenberg3();
  BoundReport ok = verify_power_bound(heis, 5.0, heisenberg_bound_grid(40, 30));
  CHECK(ok.pass);
  CHECK(ok.violations.empty());
  CHECK(ok.min_diff >= -1e-12);

  BoundReport bad =
      verify_power_bound(heis, 4.9, heisenberg_bound_grid(40, 30));
  CHECK_FALSE(bad.pass);
  REQUIRE_FALSE(bad.violations.empty());
  const BoundViolation& v = bad.violations.front();
  CHECK(v.beta < v.tn);
  // the recorded witness reproduces under direct evaluation
  CHECK(beta_closed(heis, v.x, v.lambda, v.t) ==
        doctest::Approx(v.beta).epsilon(1e-12));

  Model gru = Model::grushin2();
  BoundReport gok =
      verify_power_bound(gru, 5.0, grushin_bound_grid(8, 8, 8, 20));
  CHECK(gok.pass);
  CHECK(gok.min_diff >= -1e-12);

  // jittered grids stay deterministic for a fixed seed
  BoundGrid grid = heisenberg_bound_grid(12, 10);
  BoundReport a = verify_power_bound(heis, 5.0, grid, 7);
  BoundReport b = verify_power_bound(heis, 5.0, grid, 7);
  CHECK(a.min_ratio == b.min_ratio);
  CHECK(a.min_diff == b.min_diff);
}

TEST_CASE("sharpness witnesses appear for any smaller exponent") {
  Model heis = Model::heisenberg3();
  Model gru = Model::grushin2();

  auto wh = sharpness_search(heis, 4.99);
  REQUIRE(wh.has_value());
  CHECK(beta_closed(heis, wh->x, wh->lambda, wh->t) < wh->tn);

  auto wg = sharpness_search(gru, 4.9);
  REQUIRE(wg.has_value());
  CHECK(beta_closed(gru, wg->x, wg->lambda, wg->t) < wg->tn);

  CHECK_FALSE(sharpness_search(gru, 5.0).has_value());

  // the straight-branch witness pinned by hand: x0=1, u0=-3, t=0.9
  CHECK(beta_closed(gru, vec2(1, 0), vec2(-3, 0), 0.9) ==
        doctest::Approx(0.5913).epsilon(1e-13));
  CHECK(0.5913 < std::pow(0.9, 4.9));
}

TEST_CASE("inequality chain behind the grushin bound") {
  CHECK(wbar(1.0) == doctest::Approx(0.16835209966684931).epsilon(1e-10));
  CHECK(wbar(kPi) == doctest::Approx(60.504579383427301).epsilon(1e-13));

  std::vector<double> zs;
  for (int i = 1; i < 2000; ++i) zs.push_back(kPi * i / 2000.0);
  ProofChainReport rep = grushin_proof_chain(zs);
  CHECK(rep.pass);
  CHECK(rep.min_wbar >= -1e-12);
  CHECK(rep.min_wa >= -1e-12);
  CHECK(rep.max_identity_gap <= 1e-9);
  CHECK(rep.taylor_below);
  CHECK(rep.taylor_root == doctest::Approx(2.6749078045813766).epsilon(1e-6));

  // leading Taylor behaviour at small z
  CHECK(wbar(0.05) == doctest::Approx(std::pow(0.05, 6) * 8.0 / 45.0)
                          .epsilon(1e-3));
  CHECK(wbar_taylor_bound(0.05) <= wbar(0.05));

  CHECK_THROWS_AS(grushin_proof_chain({-0.5}), InputError);
  CHECK_THROWS_AS(grushin_proof_chain({kPi + 0.1}), InputError);
}

TEST_CASE("weighted power means and their conventions") {
  CHECK(pmean(0.25, 0.0, 16, 1) == doctest::Approx(16.0).epsilon(1e-14));
  CHECK(pmean(0.25, 1.0, 16, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pmean(0.0, 0.25, 16, 1) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(pmean(1.0, 0.5, 2, 4) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(pmean(kInf, 0.5, 2, 4) == 4.0);
  CHECK(pmean(-kInf, 0.5, 2, 4) == 2.0);
  CHECK(pmean(2.0, 0.5, 0, 4) == 0.0);
  CHECK(pmean(kInf, 0.5, 0, 4) == 4.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int k = 0; k < 100; ++k) {
    double a = u(rng), b = u(rng);
    double t = 0.2 * (k % 5) + 0.1;
    double prev = pmean(-kInf, t, a, b);
    for (double p : {-2.0, -0.5, 0.0, 0.5, 1.0, 3.0, kInf}) {
      double cur = pmean(p, t, a, b);
      CHECK(cur >= prev - 1e-12);
      prev = cur;
    }
  }
  CHECK_THROWS_AS(pmean(1.0, 0.5, -1.0, 2.0), InputError);
  CHECK_THROWS_AS(pmean(1.0, 1.5, 1.0, 2.0), InputError);
}

TEST_CASE("on-diagonal contraction follows the weighted dimension") {
  Model heis = Model::heisenberg3();
  DiagonalReport rh = diagonal_bound_check(heis, vec3(0, 0, 0), {0.5}, {0.3});
  CHECK(rh.q == 4.0);
  REQUIRE(rh.rows.size() == 1);
  CHECK(rh.rows[0].ratio <= std::pow(0.5, 4.0) * 1.1);
  CHECK(rh.rows[0].ratio >= std::pow(0.5, 4.0) * 0.7);
  CHECK(rh.pass);

  Model gru = Model::grushin2();
  DiagonalReport rr = diagonal_bound_check(gru, vec2(1, 0), {0.5}, {0.25});
  CHECK(rr.q == 2.0);
  REQUIRE(rr.rows.size() == 1);
  CHECK(rr.rows[0].ratio <= 0.25 * 1.1);
  CHECK(rr.rows[0].ratio >= 0.25 * 0.7);

  DiagonalReport rs = diagonal_bound_check(gru, vec2(0, 0), {0.5}, {0.3});
  CHECK(rs.q == 3.0);
  CHECK(rs.rows[0].ratio <= std::pow(0.5, 3.0) * 1.1);
  CHECK(rs.rows[0].ratio >= std::pow(0.5, 3.0) * 0.7);

  CHECK_THROWS_AS(
      diagonal_bound_check(gru, vec2(1, 0), {0.5}, {0.8}), InputError);
}
