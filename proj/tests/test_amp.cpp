#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>

#include "gmmamp/amp.hpp"
#include "gmmamp/state_evolution.hpp"
#include "gmmamp/threading.hpp"

using Eigen::MatrixXd;
using namespace gmmamp;

namespace {

ModelParams params_for(int n, int m, int r, double rho, std::uint64_t seed,
                       double delta = 1.0) {
  ModelParams p;
  p.n = n;
  p.m = m;
  p.r = r;
  p.rho = rho;
  p.delta = delta;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("amp runs are bitwise reproducible and thread-count independent") {
  const auto p = params_for(300, 600, 2, 2.5, 5);
  const int saved = num_threads();
  set_num_threads(1);
  const auto inst1 = generate_instance(p);
  const auto res1 = amp_iterate(inst1);
  set_num_threads(3);
  const auto inst2 = generate_instance(p);
  const auto res2 = amp_iterate(inst2);
  set_num_threads(saved);

  REQUIRE(inst1.X == inst2.X);
  REQUIRE(res1.s_hat == res2.s_hat);
  REQUIRE(res1.v_hat == res2.v_hat);
  REQUIRE(res1.iterations == res2.iterations);
}

TEST_CASE("above the transition amp recovers the clusters from scratch") {
  const auto inst = generate_instance(params_for(500, 1000, 2, 3.0, 11));
  const auto res = amp_iterate(inst);
  REQUIRE(res.converged);
  REQUIRE(res.overlap.overlap > 0.55);

  AmpConfig informed;
  informed.init = AmpInit::kInformative;
  const auto res_inf = amp_iterate(inst, informed);
  REQUIRE(res_inf.converged);
  REQUIRE(res_inf.iterations < 50);
  REQUIRE(std::abs(res_inf.overlap.overlap - res.overlap.overlap) < 0.05);
}

TEST_CASE("below the transition the overlap stays at chance level") {
  const auto inst = generate_instance(params_for(500, 1000, 2, 1.0, 13));
  const auto res = amp_iterate(inst);
  REQUIRE(res.converged);
  REQUIRE(std::abs(res.overlap.overlap) < 0.15);
}

TEST_CASE("empirical order parameters read one on planted input") {
  const auto inst = generate_instance(params_for(2000, 2000, 3, 2.0, 17));
  const auto params =
      empirical_order_params(inst.centers, one_hot(inst.labels, 3), inst);
  REQUIRE(fit_b_s(params.M_s) == Catch::Approx(1.0).margin(0.05));
  REQUIRE(fit_b_v(params.M_v) == Catch::Approx(1.0).margin(0.1));
  // label block diagonal carries the cluster frequencies
  REQUIRE(params.M_s.trace() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("converged runs sit on the state-evolution fixed point") {
  const double rho = 2.5, alpha = 2.0;
  const auto inst = generate_instance(params_for(800, 1600, 2, rho, 7));
  SeOptions opts;
  opts.samples = 100000;
  const double b_star = se_fixed_point(SeInit::kUninformative, rho, alpha, 2, opts).b_s;

  const auto res = amp_iterate(inst);
  REQUIRE(res.converged);
  const double fitted = fit_b_s(empirical_order_params(res, inst).M_s);
  REQUIRE(std::abs(fitted - b_star) < 0.08);
}

TEST_CASE("dropping the onsager terms pushes the iteration off the fixed point") {
  const double rho = 2.5, alpha = 2.0;
  const auto inst = generate_instance(params_for(800, 1600, 2, rho, 7));
  SeOptions opts;
  opts.samples = 100000;
  const double b_star = se_fixed_point(SeInit::kUninformative, rho, alpha, 2, opts).b_s;

  const auto res = amp_iterate(inst);
  const double fit_full = fit_b_s(empirical_order_params(res, inst).M_s);

  AmpConfig ablated;
  ablated.onsager = false;
  ablated.max_iters = 400;
  bool off_track = false;
  try {
    const auto res_ab = amp_iterate(inst, ablated);
    const double fit_ab = fit_b_s(empirical_order_params(res_ab, inst).M_s);
    off_track = !res_ab.converged ||
                std::abs(fit_ab - b_star) > 2.0 * std::abs(fit_full - b_star) + 0.05;
  } catch (const AmpDivergedError&) {
    off_track = true;
  }
  REQUIRE(off_track);
}

TEST_CASE("damping reaches the same fixed point more slowly") {
  const auto inst = generate_instance(params_for(400, 800, 2, 3.0, 19));
  const auto plain = amp_iterate(inst);
  AmpConfig damped;
  damped.damping = 0.2;
  const auto slow = amp_iterate(inst, damped);
  REQUIRE(plain.converged);
  REQUIRE(slow.converged);
  REQUIRE(slow.iterations > plain.iterations);
  // the runs may break the label symmetry differently; align each to the
  // truth through its own best permutation before comparing
  auto aligned = [&](const AmpResult& res) {
    MatrixXd out(res.s_hat.rows(), res.s_hat.cols());
    for (int k = 0; k < out.cols(); ++k)
      out.col(res.overlap.permutation[k]) = res.s_hat.col(k);
    return out;
  };
  REQUIRE((aligned(slow) - aligned(plain)).cwiseAbs().maxCoeff() < 5e-3);
  REQUIRE(std::abs(slow.overlap.correct_rate - plain.overlap.correct_rate) < 0.01);

  // informative starts tolerate heavy damping and land on the same point
  AmpConfig informed;
  informed.init = AmpInit::kInformative;
  const auto inf_plain = amp_iterate(inst, informed);
  informed.damping = 0.5;
  const auto inf_heavy = amp_iterate(inst, informed);
  REQUIRE(inf_plain.converged);
  REQUIRE(inf_heavy.converged);
  REQUIRE(inf_heavy.iterations > inf_plain.iterations);
  REQUIRE((aligned(inf_heavy) - aligned(inf_plain)).cwiseAbs().maxCoeff() < 5e-3);
}

TEST_CASE("config validation rejects out-of-range settings") {
  const auto inst = generate_instance(params_for(50, 100, 2, 2.0, 23));
  AmpConfig bad;
  bad.damping = 1.0;
  REQUIRE_THROWS_AS(amp_iterate(inst, bad), std::invalid_argument);
  bad = AmpConfig{};
  bad.damping = -0.1;
  REQUIRE_THROWS_AS(amp_iterate(inst, bad), std::invalid_argument);
  bad = AmpConfig{};
  bad.tol = 0.0;
  REQUIRE_THROWS_AS(amp_iterate(inst, bad), std::invalid_argument);
  bad = AmpConfig{};
  bad.max_iters = 0;
  REQUIRE_THROWS_AS(amp_iterate(inst, bad), std::invalid_argument);
}

TEST_CASE("the trajectory records every iteration until convergence") {
  const auto inst = generate_instance(params_for(300, 600, 2, 3.0, 29));
  const auto res = amp_iterate(inst);
  REQUIRE(res.converged);
  REQUIRE(res.trajectory.size() == static_cast<size_t>(res.iterations));
  REQUIRE(res.trajectory.front().iteration == 1);
  REQUIRE(res.trajectory.back().iteration == res.iterations);
  REQUIRE(res.trajectory.back().max_change < 1e-7);
  REQUIRE(res.trajectory.back().max_change < res.trajectory.front().max_change);

  AmpConfig quiet;
  quiet.record_trajectory = false;
  REQUIRE(amp_iterate(inst, quiet).trajectory.empty());
}

TEST_CASE("an exhausted iteration budget reports rather than throws") {
  const auto inst = generate_instance(params_for(300, 600, 2, 2.5, 31));
  AmpConfig strict;
  strict.max_iters = 3;
  const auto res = amp_iterate(inst, strict);
  REQUIRE(!res.converged);
  REQUIRE(res.iterations == 3);
  REQUIRE(res.s_hat.rows() == 600);
}

TEST_CASE("non-finite messages raise a diverged error with the last state") {
  auto inst = generate_instance(params_for(4, 6, 2, 1.0, 37));
  inst.X.setConstant(1e308);
  try {
    amp_iterate(inst);
    FAIL("expected AmpDivergedError");
  } catch (const AmpDivergedError& e) {
    REQUIRE(!e.last_state.converged);
    REQUIRE(e.last_state.iterations == 0);
    REQUIRE(e.last_state.s_hat.rows() == 6);
    REQUIRE(e.last_state.s_hat.cols() == 2);
  }
}

TEST_CASE("noise variance folds into an equivalent rescaled model") {
  // (rho, delta) = (10, 4) and (2.5, 1) describe the same inference problem;
  // the generated data differ by an exact factor of two and amp must produce
  // identical iterates.
  const auto scaled = generate_instance(params_for(200, 400, 3, 10.0, 41, 4.0));
  const auto base = generate_instance(params_for(200, 400, 3, 2.5, 41, 1.0));
  REQUIRE(scaled.X == MatrixXd(2.0 * base.X));
  REQUIRE(scaled.labels == base.labels);

  const auto res_scaled = amp_iterate(scaled);
  const auto res_base = amp_iterate(base);
  REQUIRE(res_scaled.s_hat == res_base.s_hat);
  REQUIRE(res_scaled.v_hat == res_base.v_hat);
  REQUIRE(res_scaled.iterations == res_base.iterations);
}
