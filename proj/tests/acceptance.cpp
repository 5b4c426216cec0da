// Acceptance gate: ten end-to-end checks, each printed as exactly one
// PASS/FAIL line.  Every criterion carries a wall-clock budget and fails
// honestly when the budget is exceeded, even if its assertions hold.
//
// Usage:
//   acceptance                 run all ten criteria
//   acceptance --criterion N   run criterion N only (1..10)

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gmmamp/gmmamp.hpp"

namespace {

using gmmamp::AmpConfig;
using gmmamp::AmpInit;
using gmmamp::ModelParams;
using gmmamp::SeInit;
using gmmamp::SeOptions;

struct Check {
  bool pass = true;
  std::ostringstream notes;

  void expect(bool ok, const std::string& on_failure) {
    if (!ok) {
      if (!pass) notes << "; ";
      notes << on_failure;
      pass = false;
    }
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

ModelParams params_for(int n, int m, int r, double rho, std::uint64_t seed) {
  ModelParams p;
  p.n = n;
  p.m = m;
  p.r = r;
  p.rho = rho;
  p.delta = 1.0;
  p.seed = seed;
  return p;
}

// 1. Closed-form algorithmic threshold at two corners of the phase diagram.
Check criterion_1() {
  Check c;
  const double c2 = gmmamp::rho_c(2, 2.0);
  const double c20 = gmmamp::rho_c(20, 2.0);
  c.expect(std::abs(c2 - 1.4142) <= 1e-3, "rho_c(2,2)=" + fmt(c2, 10));
  c.expect(std::abs(c20 - 14.142) <= 1e-3, "rho_c(20,2)=" + fmt(c20, 10));
  return c;
}

// 2. Two-cluster scalar fixed points: both starts agree at every rho, the
// overlap vanishes below the threshold, grows continuously above it.
Check criterion_2() {
  Check c;
  const int r = 2;
  const double alpha = 2.0;
  const double rc = gmmamp::rho_c(r, alpha);
  SeOptions opts;  // default sample count and seed
  for (double rho : {1.0, 1.2, 1.6, 2.0, 3.0}) {
    const auto uninf = gmmamp::se_fixed_point(SeInit::kUninformative, rho, alpha, r, opts);
    const auto inf = gmmamp::se_fixed_point(SeInit::kInformative, rho, alpha, r, opts);
    const double agree_tol =
        std::max(1e-4, 3.0 * (uninf.std_error + inf.std_error));
    c.expect(std::abs(uninf.b_s - inf.b_s) <= agree_tol,
             "starts disagree at rho=" + fmt(rho) + ": " + fmt(uninf.b_s) +
                 " vs " + fmt(inf.b_s) + " (tol " + fmt(agree_tol) + ")");
    const double zero_tol = std::max(1e-3, 3.0 * uninf.std_error);
    if (rho < rc) {
      c.expect(uninf.b_s <= zero_tol && inf.b_s <= std::max(1e-3, 3.0 * inf.std_error),
               "nonzero overlap below threshold at rho=" + fmt(rho) + ": " +
                   fmt(std::max(uninf.b_s, inf.b_s)));
    } else {
      c.expect(uninf.b_s > zero_tol,
               "no overlap above threshold at rho=" + fmt(rho));
    }
  }
  const auto edge = gmmamp::se_fixed_point(SeInit::kUninformative, rc + 0.05, alpha, r, opts);
  c.expect(edge.b_s > 0.0 && edge.b_s < 0.2,
           "overlap just above threshold should be small but positive, got " +
               fmt(edge.b_s));
  return c;
}

// 3. Twenty clusters: the three thresholds come out ordered with uncertainty
// estimates, and between the spinodal and the algorithmic threshold the two
// starts settle on different branches.
Check criterion_3() {
  Check c;
  const int r = 20;
  const double alpha = 2.0;
  gmmamp::PhaseOptions popts;  // defaults: 2e5 samples, 200 grid points
  const auto sp = gmmamp::rho_sp(r, alpha, popts);
  const auto it = gmmamp::rho_it(r, alpha, popts);
  const double rc = gmmamp::rho_c(r, alpha);
  c.expect(sp.value < it.value && it.value < rc,
           "thresholds not ordered: sp=" + fmt(sp.value) + " it=" + fmt(it.value) +
               " c=" + fmt(rc));
  c.expect(sp.std_error > 0.0 && it.std_error > 0.0,
           "missing uncertainty estimates");
  const double probe = 0.5 * (sp.value + rc);
  SeOptions opts;
  const auto inf = gmmamp::se_fixed_point(SeInit::kInformative, probe, alpha, r, opts);
  const auto uninf = gmmamp::se_fixed_point(SeInit::kUninformative, probe, alpha, r, opts);
  c.expect(inf.b_s > 0.3, "informative branch too weak at rho=" + fmt(probe) +
                              ": b=" + fmt(inf.b_s));
  c.expect(uninf.b_s < 1e-3, "uninformative branch did not vanish at rho=" +
                                 fmt(probe) + ": b=" + fmt(uninf.b_s));
  return c;
}

// 4. Branch coexistence below the algorithmic threshold appears once r
// crosses the tricritical value 4 + 2*sqrt(alpha) ~ 6.83 at alpha=2. The
// window [rho_sp, rho_c] opens quadratically in r - r_c (depth ~ 1e-4 rho_c
// at r=7, 0.005 at r=8, 0.027 at r=10), so r=10 is the smallest integer
// whose window this 0.01 rho_c grid can resolve; r=6 sits below the
// boundary and has none.
Check criterion_4() {
  Check c;
  const double alpha = 2.0;
  SeOptions opts;
  for (int r : {10, 6}) {
    const double rc = gmmamp::rho_c(r, alpha);
    bool found = false;
    double at_rho = 0.0;
    for (int k = 0; k <= 9; ++k) {
      const double rho = rc * (0.90 + 0.01 * k);
      const auto inf = gmmamp::se_fixed_point(SeInit::kInformative, rho, alpha, r, opts);
      const auto uninf = gmmamp::se_fixed_point(SeInit::kUninformative, rho, alpha, r, opts);
      if (inf.b_s - uninf.b_s > 3.0 * (inf.std_error + uninf.std_error) &&
          inf.b_s - uninf.b_s > 1e-3) {
        found = true;
        at_rho = rho;
        break;
      }
    }
    if (r == 10) {
      c.expect(found, "no branch gap found below threshold at r=10");
      (void)at_rho;
    } else {
      c.expect(!found, "unexpected branch gap at r=6, rho=" + fmt(at_rho));
    }
  }
  return c;
}

// 5. Finite-size message passing matches the predicted overlap of the
// plug-in classifier at the uninformative fixed point.
Check criterion_5() {
  Check c;
  const int r = 2, n = 1000, m = 2000;
  const double alpha = 2.0;
  SeOptions opts;
  for (double rho : {2.0, 2.5, 3.0}) {
    const auto fp = gmmamp::se_fixed_point(SeInit::kUninformative, rho, alpha, r, opts);
    const double predicted = gmmamp::predicted_overlap(fp.b_s, rho, alpha, r);
    double total = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
      const auto inst = gmmamp::generate_instance(
          params_for(n, m, r, rho, 5000 + 100 * static_cast<std::uint64_t>(10 * rho) + seed));
      AmpConfig cfg;
      cfg.record_trajectory = false;
      const auto run = gmmamp::amp_iterate(inst, cfg);
      total += run.overlap.overlap;
    }
    const double mean = total / 10.0;
    c.expect(std::abs(mean - predicted) <= 0.05,
             "rho=" + fmt(rho) + ": mean overlap " + fmt(mean) +
                 " vs predicted " + fmt(predicted));
  }
  return c;
}

// 6. Hard-phase instances at r=20: an informative start recovers the
// clusters while an uninformative one stays lost, on most seeds.
//
// Both runs are read at a fixed 20-iteration horizon, twice the time the
// informative start needs to settle on the high-overlap branch. State
// evolution describes AMP at a fixed iteration count as n grows, and at
// that order of limits the uninformative start keeps chance-level overlap
// at every horizon inside the hard window. The opposite order (iterating
// to convergence at fixed n) measures something else: at n=4000 the
// symmetric state decays by a finite-size activation that sets in around
// iteration 40 and eventually carries every seed to the informative
// branch, so an uncapped run erases the start separation not because the
// phase is easy but because the horizon outlives the metastable state.
Check criterion_6() {
  Check c;
  const int r = 20, n = 4000, m = 8000;
  const double rho = 13.0;
  int successes = 0;
  int failures = 0;
  std::ostringstream log;
  for (int seed = 0; seed < 10; ++seed) {
    const auto inst = gmmamp::generate_instance(params_for(n, m, r, rho, 600 + seed));
    AmpConfig inf_cfg;
    inf_cfg.init = AmpInit::kInformative;
    inf_cfg.record_trajectory = false;
    inf_cfg.max_iters = 20;
    AmpConfig un_cfg;
    un_cfg.record_trajectory = false;
    un_cfg.max_iters = 20;
    double inf_overlap = 0.0, un_overlap = 1.0;
    try {
      inf_overlap = gmmamp::amp_iterate(inst, inf_cfg).overlap.overlap;
      un_overlap = gmmamp::amp_iterate(inst, un_cfg).overlap.overlap;
    } catch (const gmmamp::AmpDivergedError&) {
      // counts as a failed seed
    }
    const bool ok = inf_overlap > 0.5 && un_overlap < 0.1;
    (ok ? successes : failures) += 1;
    if (!ok)
      log << " seed " << seed << ": inf=" << fmt(inf_overlap)
          << " uninf=" << fmt(un_overlap);
    if (successes >= 7 || failures >= 4) break;
  }
  c.expect(successes >= 7,
           "only " + std::to_string(successes) + " of 10 seeds split the starts;" +
               log.str());
  return c;
}

// 7. Large-r thresholds track their sqrt(r log r) asymptotics. The IT
// threshold is near enough to its limit at r=200 for a direct ratio
// check. The spinodal's prefactor is not: its ratio to the asymptote
// drifts from 1.54 at r=20 to only 1.50 at r=200 (the correction dies
// off slower than any power of 1/log r), so a single-size ratio mostly
// measures that prefactor. Checking the growth between r=20 and r=200
// against the predicted sqrt(r log r) factor cancels it and isolates
// the scaling law itself.
Check criterion_7() {
  Check c;
  const double alpha = 2.0;
  gmmamp::PhaseOptions popts;
  const auto it = gmmamp::rho_it(200, alpha, popts);
  const double it_ratio = it.value / gmmamp::asymptotic_rho_it(200, alpha);
  c.expect(it_ratio >= 0.8 && it_ratio <= 1.2,
           "rho_it ratio " + fmt(it_ratio) + " outside [0.8, 1.2]");
  const auto sp_small = gmmamp::rho_sp(20, alpha, popts);
  const auto sp_large = gmmamp::rho_sp(200, alpha, popts);
  const double growth = (sp_large.value / sp_small.value) /
                        (gmmamp::asymptotic_rho_sp(200, alpha) /
                         gmmamp::asymptotic_rho_sp(20, alpha));
  c.expect(growth >= 0.85 && growth <= 1.15,
           "rho_sp growth ratio " + fmt(growth) + " outside [0.85, 1.15]");
  return c;
}

// 8. Spectral clustering hits its theoretical accuracy above the spectral
// threshold and is at chance below it. Single instances fluctuate (rate sd
// ~0.017 at this size) and the permutation-maximized rate sits slightly
// above 1/2 on pure noise (~0.518 at m=4000), so both clauses compare seed
// averages.
Check criterion_8() {
  Check c;
  const int r = 2, n = 2000, m = 4000;
  const auto mean_rate = [&](double rho, std::uint64_t seed0, int k) {
    double sum = 0.0;
    for (int s = 0; s < k; ++s) {
      const auto inst = gmmamp::generate_instance(params_for(n, m, r, rho, seed0 + s));
      sum += gmmamp::pca_cluster(inst).overlap.correct_rate;
    }
    return sum / k;
  };
  {
    const double theory = gmmamp::pca_correct_rate_theory(2.0, 2.0, r);
    const double mean = mean_rate(2.0, 801, 3);
    c.expect(std::abs(mean - theory) <= 0.03,
             "rho=2: mean correct rate " + fmt(mean) + " vs theory " + fmt(theory));
  }
  {
    const double theory = gmmamp::pca_correct_rate_theory(1.0, 2.0, r);
    c.expect(std::abs(theory - 0.5) <= 1e-12,
             "rho=1: theory rate should be exactly chance, got " + fmt(theory, 10));
    const double mean = mean_rate(1.0, 814, 9);
    c.expect(std::abs(mean - 0.5) <= 0.02,
             "rho=1: mean empirical rate " + fmt(mean) + " not at chance");
  }
  return c;
}

// 9. Message passing with a Gaussian prior lands on the top singular
// subspace of the data.
Check criterion_9() {
  Check c;
  const int r = 2, n = 1000, m = 2000;
  const double rho = 2.0 * gmmamp::rho_c(r, 2.0);  // comfortably above threshold
  const auto inst = gmmamp::generate_instance(params_for(n, m, r, rho, 901));
  const auto run = gmmamp::gaussian_amp_iterate(inst);
  c.expect(run.converged, "gaussian message passing did not converge");
  const Eigen::MatrixXd top = gmmamp::top_right_singular(inst.X, r);
  const auto angles = gmmamp::principal_angles(run.s_hat, top);
  for (double a : angles)
    c.expect(a < 0.05, "principal angle " + fmt(a) + " too large");
  return c;
}

// 10. Property suites: denoiser gradients, simplex closure under extreme
// inputs, conservation of the ansatz under the matrix recursion, free-energy
// stationarity at fixed points, permutation invariance of the overlap score.
Check criterion_10() {
  Check c;

  {  // d(log partition)/dB reproduces the posterior mean, both priors
    gmmamp::Rng rng(42);
    const int r = 4;
    const double h = 1e-5;
    for (int trial = 0; trial < 3; ++trial) {
      Eigen::MatrixXd G(r, r);
      gmmamp::fill_normal(rng, G);
      const Eigen::MatrixXd A =
          G * G.transpose() / r + 0.1 * Eigen::MatrixXd::Identity(r, r);
      Eigen::MatrixXd Bm(r, 1);
      gmmamp::fill_normal(rng, Bm);
      const Eigen::VectorXd B = 2.0 * Bm.col(0);
      const Eigen::VectorXd gm = gmmamp::gaussian_denoiser(A, B).mean;
      const Eigen::VectorXd lm = gmmamp::label_denoiser(A, B).mean;
      for (int k = 0; k < r; ++k) {
        Eigen::VectorXd up = B, dn = B;
        up[k] += h;
        dn[k] -= h;
        const double g_fd = (gmmamp::gaussian_log_partition(A, up) -
                             gmmamp::gaussian_log_partition(A, dn)) /
                            (2 * h);
        const double l_fd = (gmmamp::label_log_partition(A, up) -
                             gmmamp::label_log_partition(A, dn)) /
                            (2 * h);
        c.expect(std::abs(g_fd - gm[k]) <= 1e-6,
                 "gaussian gradient off by " + fmt(std::abs(g_fd - gm[k]), 2));
        c.expect(std::abs(l_fd - lm[k]) <= 1e-6,
                 "label gradient off by " + fmt(std::abs(l_fd - lm[k]), 2));
      }
    }
  }

  {  // label posterior stays on the simplex for extreme fields
    gmmamp::Rng rng(43);
    const int r = 5;
    for (double scale : {1.0, 1e2, 1e3}) {
      Eigen::MatrixXd B(20, r);
      gmmamp::fill_normal(rng, B);
      B *= scale;
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(r, r);
      A.diagonal().setConstant(scale);
      const Eigen::MatrixXd P = gmmamp::label_denoise_rows(A, B);
      c.expect(P.allFinite(), "non-finite label posterior at scale " + fmt(scale));
      c.expect((P.array() >= 0.0).all() && (P.array() <= 1.0).all(),
               "label posterior out of [0,1] at scale " + fmt(scale));
      c.expect((P.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12,
               "label posterior rows do not sum to one at scale " + fmt(scale));
    }
  }

  {  // the two-parameter ansatz is preserved by the full matrix recursion
    const int r = 3;
    const double rho = 2.5, alpha = 2.0, b = 0.45;
    const auto in = gmmamp::ansatz_order_params(b, rho, alpha, r);
    const auto step = gmmamp::se_matrix_step(in, rho, alpha, r, 150000, 1001);
    const auto scalar = gmmamp::se_scalar_step(b, rho, alpha, r, 150000, 1001);
    const double fitted_s = gmmamp::fit_b_s(step.next.M_s);
    const double fitted_v = gmmamp::fit_b_v(step.next.M_v);
    const double mc_s = step.m_s_err.maxCoeff();
    c.expect(std::abs(fitted_s - scalar.value) <=
                 3.0 * (2.2 * r * mc_s + scalar.std_error) + 1e-4,
             "matrix step left the ansatz: fitted " + fmt(fitted_s) +
                 " vs scalar " + fmt(scalar.value));
    // the center block is updated from the incoming label overlap, so it
    // pairs with the input b, not with the stepped value
    const double bv = gmmamp::b_v_from_b_s(b, rho, alpha, r);
    c.expect(std::abs(fitted_v - bv) <= 3.0 * step.m_v_err.maxCoeff() + 1e-6,
             "v-side fit " + fmt(fitted_v) + " vs " + fmt(bv));
    // residual after subtracting the fitted ansatz stays at noise level
    const Eigen::MatrixXd resid =
        step.next.M_s - gmmamp::ansatz_m_s(fitted_s, r);
    c.expect(resid.array().abs().maxCoeff() <= 5.0 * mc_s + 1e-5,
             "s-side residual " + fmt(resid.array().abs().maxCoeff(), 2));
  }

  {  // the free energy is stationary at a fixed point of the recursion
    const int r = 3;
    const double rho = 2.5, alpha = 2.0;
    SeOptions opts;
    const auto fp = gmmamp::se_fixed_point(SeInit::kInformative, rho, alpha, r, opts);
    const double h = 0.05;
    const auto lo = gmmamp::bethe_free_energy(
        gmmamp::ansatz_order_params(fp.b_s - h, rho, alpha, r), rho, alpha, 300000, 1002);
    const auto hi = gmmamp::bethe_free_energy(
        gmmamp::ansatz_order_params(fp.b_s + h, rho, alpha, r), rho, alpha, 300000, 1002);
    const double grad = (hi.value - lo.value) / (2 * h);
    const double grad_err = std::hypot(hi.std_error, lo.std_error) / (2 * h);
    c.expect(std::abs(grad) <= 5.0 * grad_err + 1e-4,
             "free energy not stationary: gradient " + fmt(grad) + " (mc " +
                 fmt(grad_err) + ")");
  }

  {  // overlap score is invariant under relabeling the predictions
    gmmamp::Rng rng(44);
    const int r = 5, m = 400;
    Eigen::VectorXi truth(m), pred(m);
    for (int i = 0; i < m; ++i) {
      truth[i] = rng.uniform_int(r);
      pred[i] = (rng.uniform01() < 0.8) ? truth[i] : rng.uniform_int(r);
    }
    const auto base = gmmamp::overlap_score_labels(pred, truth, r);
    std::vector<int> perm = {3, 0, 4, 1, 2};
    Eigen::VectorXi relabeled(m);
    for (int i = 0; i < m; ++i) relabeled[i] = perm[pred[i]];
    const auto shuffled = gmmamp::overlap_score_labels(relabeled, truth, r);
    c.expect(std::abs(base.overlap - shuffled.overlap) <= 1e-12 &&
                 std::abs(base.correct_rate - shuffled.correct_rate) <= 1e-12,
             "overlap changed under relabeling: " + fmt(base.overlap, 10) +
                 " vs " + fmt(shuffled.overlap, 10));
  }

  return c;
}

struct Criterion {
  int id;
  const char* summary;
  double budget_seconds;
  std::function<Check()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "closed-form algorithmic thresholds", 60, criterion_1},
      {2, "two-cluster fixed points across starts", 120, criterion_2},
      {3, "ordered thresholds and branch split at r=20", 600, criterion_3},
      {4, "branch coexistence at r=10 but not r=6", 600, criterion_4},
      {5, "finite-size overlap matches prediction", 300, criterion_5},
      {6, "hard-phase start separation at r=20", 1200, criterion_6},
      {7, "large-r threshold scaling at r=200", 1800, criterion_7},
      {8, "spectral clustering accuracy", 180, criterion_8},
      {9, "gaussian message passing spans top subspace", 120, criterion_9},
      {10, "property suites", 900, criterion_10},
  };
  return all;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

bool run_one(const Criterion& cr) {
  const auto start = std::chrono::steady_clock::now();
  Check check;
  try {
    check = cr.run();
  } catch (const std::exception& e) {
    check.pass = false;
    check.notes.str(std::string("exception: ") + one_line(e.what()));
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream line;
  const bool in_budget = elapsed <= cr.budget_seconds;
  const bool pass = check.pass && in_budget;
  line << (pass ? "PASS" : "FAIL") << ": criterion " << cr.id << " (" << cr.summary
       << ") [" << fmt(elapsed, 3) << "s " << (in_budget ? "<= " : "> ")
       << fmt(cr.budget_seconds, 4) << "s budget]";
  if (!check.pass) line << " " << check.notes.str();
  if (!in_budget) line << (check.pass ? " exceeded time budget" : "; exceeded time budget");
  std::cout << line.str() << std::endl;
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      which = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 2;
    }
  }
  if (which < 0 || which > 10) {
    std::cerr << "criterion must be in 1..10\n";
    return 2;
  }
  bool all_pass = true;
  for (const auto& cr : criteria()) {
    if (which != 0 && cr.id != which) continue;
    all_pass = run_one(cr) && all_pass;
  }
  return all_pass ? 0 : 1;
}
