#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "gmmamp/phase_diagram.hpp"

using namespace gmmamp;

TEST_CASE("the linear-stability threshold is r over sqrt alpha") {
  REQUIRE(rho_c(2, 2.0) == Catch::Approx(std::sqrt(2.0)).margin(1e-14));
  REQUIRE(rho_c(20, 2.0) == Catch::Approx(20.0 / std::sqrt(2.0)).margin(1e-12));
  REQUIRE(rho_c(7, 4.0) == Catch::Approx(3.5).margin(1e-14));
  REQUIRE_THROWS_AS(rho_c(1, 2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(rho_c(3, 0.0), std::invalid_argument);
}

TEST_CASE("the tricritical number of clusters is 4 + 2 sqrt alpha") {
  REQUIRE(r_c(2.0) == Catch::Approx(4.0 + 2.0 * std::sqrt(2.0)).margin(1e-14));
  REQUIRE(r_c(4.0) == Catch::Approx(8.0).margin(1e-14));
}

TEST_CASE("rho_of_x inverts the fixed-point relation") {
  // If x = se_arg(c, rho) then rho_of_x(x, c) recovers rho.
  for (int r : {2, 7, 20}) {
    for (double alpha : {0.5, 2.0}) {
      for (double c : {0.05, 0.4, 0.95}) {
        for (double rho : {0.7, 3.0, 12.0}) {
          const double x = se_arg(c, rho, alpha, r);
          REQUIRE(rho_of_x(x, r, alpha, c) == Catch::Approx(rho).epsilon(1e-9));
        }
      }
    }
  }
  REQUIRE(std::isinf(rho_of_x(1.0, 3, 2.0, 0.0)));
  REQUIRE_THROWS_AS(rho_of_x(0.0, 3, 2.0, 0.5), std::invalid_argument);
}

TEST_CASE("the fixed-point line approaches rho_c at small x") {
  // With the small-x posterior weight c = x / r^2 the existence line tends
  // to the linear-stability threshold.
  for (int r : {2, 20}) {
    const double alpha = 2.0;
    const double x = 1e-2 * r;
    const double rho = rho_of_x(x, r, alpha, x / (static_cast<double>(r) * r));
    REQUIRE(rho == Catch::Approx(rho_c(r, alpha)).epsilon(0.05));
    REQUIRE(rho > rho_c(r, alpha));
  }
}

TEST_CASE("first-order thresholds are refused below the tricritical r") {
  PhaseOptions opts;
  opts.samples = 20000;
  REQUIRE_THROWS_AS(rho_sp(5, 2.0, opts), NotFirstOrderError);
  REQUIRE_THROWS_AS(rho_it(5, 2.0, opts), NotFirstOrderError);
  const auto point = phase_point(5, 2.0, opts);
  REQUIRE(!point.rho_sp_value.has_value());
  REQUIRE(!point.rho_it_value.has_value());
}

TEST_CASE("thresholds order as spinodal < information-theoretic < algorithmic") {
  PhaseOptions opts;
  opts.samples = 50000;
  opts.grid_points = 120;
  const int r = 20;
  const double alpha = 2.0;
  const auto sp = rho_sp(r, alpha, opts);
  const auto it = rho_it(r, alpha, opts);
  const double rc = rho_c(r, alpha);
  REQUIRE(sp.value > 1.0);
  REQUIRE(sp.value < it.value);
  REQUIRE(it.value < rc);
  REQUIRE(sp.std_error > 0.0);
  REQUIRE(sp.std_error < 0.1);
  REQUIRE(it.std_error > 0.0);
  REQUIRE(it.std_error < 0.3);
}

TEST_CASE("the ordering persists at other cluster counts") {
  PhaseOptions opts;
  opts.samples = 30000;
  opts.grid_points = 100;
  for (int r : {10, 25}) {
    const auto sp = rho_sp(r, 2.0, opts);
    const auto it = rho_it(r, 2.0, opts);
    REQUIRE(sp.value < it.value);
    REQUIRE(it.value < rho_c(r, 2.0));
  }
}

TEST_CASE("classification is monotone in rho and labels the three regions") {
  PhaseOptions opts;
  opts.samples = 50000;
  opts.grid_points = 120;
  const int r = 20;
  const double alpha = 2.0;
  const auto point = phase_point(r, alpha, opts);
  REQUIRE(point.rho_it_value.has_value());
  const double it = point.rho_it_value->value;
  const double rc = point.rho_c_value;

  REQUIRE(point.phase_at(0.8 * it) == Phase::kImpossible);
  REQUIRE(point.phase_at(0.5 * (it + rc)) == Phase::kHard);
  REQUIRE(point.phase_at(1.1 * rc) == Phase::kEasy);

  int rank_prev = 0;
  for (double rho = 0.5; rho < 1.3 * rc; rho += 0.25) {
    const Phase p = classify(rho, r, alpha, opts);
    const int rank = p == Phase::kImpossible ? 0 : (p == Phase::kHard ? 1 : 2);
    REQUIRE(rank >= rank_prev);
    rank_prev = rank;
  }
}

TEST_CASE("without a first-order transition only rho_c separates phases") {
  PhaseOptions opts;
  opts.samples = 20000;
  const auto point = phase_point(4, 2.0, opts);
  REQUIRE(point.phase_at(0.9 * point.rho_c_value) == Phase::kImpossible);
  REQUIRE(point.phase_at(1.1 * point.rho_c_value) == Phase::kEasy);
}

TEST_CASE("phase names render for reports") {
  REQUIRE(std::string(phase_name(Phase::kEasy)) == "EASY");
  REQUIRE(std::string(phase_name(Phase::kHard)) == "HARD");
  REQUIRE(std::string(phase_name(Phase::kImpossible)) == "IMPOSSIBLE");
}

TEST_CASE("asymptotic threshold formulas evaluate as documented") {
  const double lr = std::log(200.0);
  REQUIRE(asymptotic_rho_sp(200, 2.0) ==
          Catch::Approx(std::sqrt(2.0 * 200 * lr / 2.0)).margin(1e-12));
  REQUIRE(asymptotic_rho_it(200, 2.0) ==
          Catch::Approx(2.0 * std::sqrt(200 * lr / 2.0)).margin(1e-12));
  // the two scalings keep their ratio sqrt(2) apart
  REQUIRE(asymptotic_rho_it(200, 2.0) / asymptotic_rho_sp(200, 2.0) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-12));
}
