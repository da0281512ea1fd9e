#include <cmath>
#include <random>

#include "doctest.h"
#include "srdist/transport.hpp"

using namespace srdist;

namespace {

const double kPi = 3.14159265358979323846;

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

std::vector<VectorXd> heis_cloud(int count, std::uint64_t seed,
                                 double shift_x = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<VectorXd> pts;
  for (int i = 0; i < count; ++i)
    pts.push_back(vec3(u(rng) + shift_x, u(rng), u(rng)));
  return pts;
}

}  // namespace

TEST_CASE("discrete measures enforce their invariants") {
  DiscreteMeasure m = DiscreteMeasure::uniform({vec2(0, 0), vec2(1, 1)});
  CHECK(m.weights.sum() == doctest::Approx(1.0).epsilon(1e-15));

  DiscreteMeasure bad = m;
  bad.weights[0] = 0.7;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad.weights[0] = -0.5;
  bad.weights[1] = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);

  CHECK_THROWS_AS(DiscreteMeasure::uniform({vec2(0, 0), vec2(0, 0)}),
                  InputError);
}

TEST_CASE("quadratic cost matrix from the geodesic distance") {
  Model heis = Model::heisenberg3();
  DiscreteMeasure m0 = DiscreteMeasure::uniform(
      {vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 0, 1)});
  MatrixXd c = cost_matrix(heis, m0, m0);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(1, 1) == 0.0);
  CHECK(c(0, 1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(c(1, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(c(0, 2) == doctest::Approx(2 * kPi).epsilon(1e-9));
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("transport between equal measures is free") {
  Model heis = Model::heisenberg3();
  DiscreteMeasure m = DiscreteMeasure::uniform(heis_cloud(5, 3));
  TransportPlan plan = solve_ot(cost_matrix(heis, m, m), m, m);
  CHECK(plan.cost == 0.0);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(plan.coupling(i, i) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("two-by-two crossing costs pick the diagonal") {
  DiscreteMeasure m0 = DiscreteMeasure::uniform({vec2(0, 0), vec2(1, 0)});
  DiscreteMeasure m1 = DiscreteMeasure::uniform({vec2(0, 1), vec2(1, 1)});
  MatrixXd c(2, 2);
  c << 0, 1, 1, 0;
  TransportPlan plan = solve_ot(c, m0, m1);
  CHECK(plan.cost == 0.0);
  CHECK(plan.coupling(0, 0) == 0.5);
  CHECK(plan.coupling(1, 1) == 0.5);
  CHECK(plan.coupling(0, 1) == 0.0);
}

TEST_CASE("exact solver matches the permutation oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);  // 2..7
    MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = u(rng);
    std::vector<VectorXd> pts0, pts1;
    for (int i = 0; i < n; ++i) {
      pts0.push_back(vec2(i, 0));
      pts1.push_back(vec2(i, 1));
    }
    DiscreteMeasure m0 = DiscreteMeasure::uniform(pts0);
    DiscreteMeasure m1 = DiscreteMeasure::uniform(pts1);
    TransportPlan plan = solve_ot(c, m0, m1);
    CHECK(plan.cost == assignment_brute_force(c));
  }
}

TEST_CASE("marginals hold on unbalanced supports") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // weights shaped like a geometric profile, 6 sources vs 4 sinks
  VectorXd w0(6), w1(4);
  for (int i = 0; i < 6; ++i) w0[i] = std::pow(0.6, i);
  for (int j = 0; j < 4; ++j) w1[j] = std::pow(0.3, j);
  w0 /= w0.sum();
  w1 /= w1.sum();
  DiscreteMeasure m0, m1;
  for (int i = 0; i < 6; ++i) m0.support.push_back(vec2(u(rng), u(rng)));
  for (int j = 0; j < 4; ++j) m1.support.push_back(vec2(u(rng), u(rng)));
  m0.weights = w0;
  m1.weights = w1;
  MatrixXd c(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) c(i, j) = u(rng) * 3.0;
  TransportPlan plan = solve_ot(c, m0, m1);
  CHECK((plan.coupling.rowwise().sum() - w0).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((plan.coupling.colwise().sum().transpose() - w1)
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
  CHECK(plan.coupling.minCoeff() >= 0.0);

  // any feasible plan is at least as expensive: product coupling
  MatrixXd prod = w0 * w1.transpose();
  double prod_cost = (prod.array() * c.array()).sum();
  CHECK(plan.cost <= prod_cost + 1e-12);
}

TEST_CASE("displacement interpolation walks the geodesics") {
  Model heis = Model::heisenberg3();
  DiscreteMeasure m0 = DiscreteMeasure::uniform(heis_cloud(8, 1));
  DiscreteMeasure m1 = DiscreteMeasure::uniform(heis_cloud(8, 2, 2.0));
  MatrixXd c = cost_matrix(heis, m0, m1);
  TransportPlan plan = solve_ot(c, m0, m1);

  // endpoints reproduce the marginals as weighted point sets (the
  // interpolation reports its support in lexicographic order)
  auto matches_measure = [](const DiscreteMeasure& got,
                            const DiscreteMeasure& want) {
    REQUIRE(got.support.size() == want.support.size());
    for (std::size_t i = 0; i < want.support.size(); ++i) {
      bool found = false;
      for (std::size_t j = 0; j < got.support.size(); ++j) {
        if ((got.support[j] - want.support[i]).norm() <= 1e-12) {
          CHECK(got.weights[j] ==
                doctest::Approx(want.weights[i]).epsilon(1e-12));
          found = true;
          break;
        }
      }
      CHECK(found);
    }
  };
  matches_measure(displacement_interpolation(heis, plan, m0, m1, 0.0), m0);
  matches_measure(displacement_interpolation(heis, plan, m0, m1, 1.0), m1);

  // single atoms ride to the metric midpoint
  DiscreteMeasure dx = DiscreteMeasure::uniform({vec3(0, 0, 0)});
  DiscreteMeasure dy = DiscreteMeasure::uniform({vec3(1, 1, 0.3)});
  TransportPlan single = solve_ot(cost_matrix(heis, dx, dy), dx, dy);
  DiscreteMeasure half =
      displacement_interpolation(heis, single, dx, dy, 0.5);
  REQUIRE(half.support.size() == 1);
  CHECK((half.support[0] -
         midpoint(heis, vec3(0, 0, 0), vec3(1, 1, 0.3), 0.5))
            .norm() <= 1e-12);
  CHECK(half.weights[0] == 1.0);
}

TEST_CASE("wasserstein speed is constant along the interpolation") {
  Model heis = Model::heisenberg3();
  DiscreteMeasure m0 = DiscreteMeasure::uniform(heis_cloud(8, 21));
  DiscreteMeasure m1 = DiscreteMeasure::uniform(heis_cloud(8, 22, 1.5));
  MatrixXd c = cost_matrix(heis, m0, m1);
  TransportPlan plan = solve_ot(c, m0, m1);
  const double w01 = std::sqrt(2.0 * plan.cost);

  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<DiscreteMeasure> mts;
  for (double t : grid)
    mts.push_back(displacement_interpolation(heis, plan, m0, m1, t));
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b) {
      const double w = wasserstein2(heis, mts[a], mts[b]);
      CHECK(w == doctest::Approx((grid[b] - grid[a]) * w01).epsilon(1e-6));
    }
}

TEST_CASE("interpolated densities satisfy the weakened inequality") {
  Model heis = Model::heisenberg3();
  GriddedFunction f = GriddedFunction::indicator_box(
      vec3(0, 0, 0), vec3(1, 1, 1), {4, 4, 4});
  GriddedFunction g = GriddedFunction::indicator_box(
      vec3(2.5, 0, 0), vec3(3.5, 1, 1), {4, 4, 4});
  InterpolationCheckReport rep =
      interpolation_density_check(heis, f, g, 0.5, 0.5, 5.0);
  CHECK(rep.consistent);
  CHECK(rep.verdict() == "consistent");
  CHECK(rep.checked_points > 0);
  CHECK(rep.excluded <= rep.checked_points / 100);
  CHECK(rep.min_slack >= 0.8);

  // identical densities: T = id and the bound reduces to
  // (1-t)^{N/n} + t^{N/n} <= 1
  InterpolationCheckReport same =
      interpolation_density_check(heis, f, f, 0.5, 0.5, 5.0);
  CHECK(same.consistent);

  Model gru = Model::grushin2();
  GriddedFunction gf = GriddedFunction::indicator_box(
      vec2(-2, 0), vec2(-1, 1), {6, 6});
  GriddedFunction gg = GriddedFunction::indicator_box(
      vec2(1, 0), vec2(2, 1), {6, 6});
  InterpolationCheckReport grep =
      interpolation_density_check(gru, gf, gg, 0.5, 0.4, 5.0);
  CHECK(grep.consistent);

  CHECK_THROWS_AS(
      interpolation_density_check(heis, f, g, 0.5, 0.1, 5.0), InputError);
  GriddedFunction zero = f;
  for (double& v : zero.values) v = 0.0;
  CHECK_THROWS_AS(
      interpolation_density_check(heis, f, zero, 0.5, 0.5, 5.0), InputError);
}
