#pragma once

// Approximate message passing for the mixture. One iteration:
//
//   A_v = (rho/n) S'S                B_v = sqrt(rho/n) X S - (rho/n) V Sum(sigma_s)
//   V   = B_v (I + A_v)^{-1}         sigma_v = (I + A_v)^{-1}, same for every row
//   A_s = (rho/n) V'V                B_s = sqrt(rho/n) X'V - rho S sigma_v
//   S   = row softmax(B_s - diag(A_s)/2)
//
// with the running covariance sums kept as r x r accumulators:
// Sum(sigma_v) = n sigma_v and Sum(sigma_s) = diag(colsum S) - S'S, both
// closed forms of the denoiser covariances. The first iteration uses
// Sum(sigma_s) = 0. A noise variance delta != 1 is folded in by rescaling
// to X/sqrt(delta) and rho/delta, which leaves the model invariant.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gmmamp/denoisers.hpp"
#include "gmmamp/errors.hpp"
#include "gmmamp/model.hpp"
#include "gmmamp/rng.hpp"
#include "gmmamp/state_evolution.hpp"

namespace gmmamp {

enum class AmpInit { kUninformative, kInformative };

struct AmpConfig {
  AmpInit init = AmpInit::kUninformative;
  int max_iters = 1000;
  double tol = 1e-7;        // on the max label-weight change
  // Fraction of the previous iterate kept. Keep it small (<= 0.2) for
  // uninformative starts: heavy damping can trap the iteration near the
  // symmetric state instead of letting the instability break the label
  // symmetry. Informative starts tolerate any value in [0, 1).
  double damping = 0.0;
  double init_noise = 1e-3;
  std::uint64_t seed = 0;   // stirred into the init stream
  bool onsager = true;      // drop the memory terms only for ablation runs
  bool record_trajectory = true;
};

struct AmpTrajectoryPoint {
  int iteration = 0;
  double max_change = 0.0;
  double overlap = 0.0;
};

struct AmpResult {
  Eigen::MatrixXd s_hat;  // m x r posterior label weights
  Eigen::MatrixXd v_hat;  // n x r center estimates
  int iterations = 0;
  bool converged = false;
  OverlapReport overlap;
  std::vector<AmpTrajectoryPoint> trajectory;
};

// Divergence to non-finite values; carries the last finite state.
class AmpDivergedError : public NumericalError {
 public:
  AmpDivergedError(const std::string& what, AmpResult snapshot)
      : NumericalError(what), last_state(std::move(snapshot)) {}

  AmpResult last_state;
};

inline AmpResult amp_iterate(const GmmInstance& inst, const AmpConfig& config = {}) {
  const ModelParams& mp = inst.params;
  if (config.damping < 0.0 || config.damping >= 1.0)
    throw std::invalid_argument("amp_iterate: damping must be in [0, 1)");
  if (config.tol <= 0 || config.max_iters < 1)
    throw std::invalid_argument("amp_iterate: bad tolerance or iteration budget");

  const int n = mp.n, m = mp.m, r = mp.r;
  const double rho = mp.rho / mp.delta;
  const double coef = std::sqrt(rho / n) / std::sqrt(mp.delta);
  const double gamma = config.damping;

  Eigen::MatrixXd S(m, r), V(n, r);
  if (config.init == AmpInit::kInformative) {
    S = one_hot(inst.labels, r);
    V = inst.centers;
  } else {
    Rng rng(derive_seed(mp.seed, kStreamAmpInit, config.seed));
    fill_normal(rng, S);
    const Eigen::VectorXd row_means = S.rowwise().mean();
    S.colwise() -= row_means;
    S.array() = (S.array() * config.init_noise + 1.0 / r).max(1e-12);
    const Eigen::ArrayXd row_sums = S.rowwise().sum();
    S.array().colwise() /= row_sums;
    fill_normal(rng, V);
    V *= config.init_noise;
  }

  Eigen::MatrixXd sum_sigma_s = Eigen::MatrixXd::Zero(r, r);
  Eigen::MatrixXd A_v(r, r), A_s(r, r), sigma_v(r, r);
  Eigen::MatrixXd B_v(n, r), B_s(m, r), V_new(n, r), S_new(m, r);

  AmpResult result;
  auto snapshot = [&](int t, bool converged) {
    result.s_hat = S;
    result.v_hat = V;
    result.iterations = t;
    result.converged = converged;
    result.overlap = overlap_score_labels(hard_assign(S, 1e-6), inst.labels, r);
    return result;
  };

  for (int t = 1; t <= config.max_iters; ++t) {
    A_v.noalias() = (rho / n) * S.transpose() * S;
    B_v.noalias() = coef * (inst.X * S);
    if (config.onsager) B_v.noalias() -= (rho / n) * V * sum_sigma_s;
    if (!B_v.allFinite())
      throw AmpDivergedError("amp_iterate: diverged at iteration " + std::to_string(t),
                             snapshot(t - 1, false));

    V_new = gaussian_denoise_rows(A_v, B_v, &sigma_v);
    if (gamma > 0.0) V_new = (1 - gamma) * V_new + gamma * V;
    V.swap(V_new);

    A_s.noalias() = (rho / n) * V.transpose() * V;
    B_s.noalias() = coef * (inst.X.transpose() * V);
    if (config.onsager) B_s.noalias() -= rho * S * sigma_v;
    if (!B_s.allFinite())
      throw AmpDivergedError("amp_iterate: diverged at iteration " + std::to_string(t),
                             snapshot(t - 1, false));

    S_new = label_denoise_rows(A_s, B_s);
    if (gamma > 0.0) S_new = (1 - gamma) * S_new + gamma * S;
    const double max_change = (S_new - S).cwiseAbs().maxCoeff();
    S.swap(S_new);
    if (config.onsager) {
      sum_sigma_s = Eigen::MatrixXd(S.colwise().sum().asDiagonal());
      sum_sigma_s.noalias() -= S.transpose() * S;
    }

    if (config.record_trajectory) {
      AmpTrajectoryPoint point;
      point.iteration = t;
      point.max_change = max_change;
      point.overlap = overlap_score_labels(hard_assign(S, 1e-6), inst.labels, r).overlap;
      result.trajectory.push_back(point);
    }
    if (max_change < config.tol) return snapshot(t, true);
  }
  return snapshot(config.max_iters, false);
}

// Empirical r x r overlap matrices, aligned by the best label permutation:
// M_s = (S P)' S0 / m and M_v = (V P)' V0 / n against the planted one-hot
// labels S0 and centers V0.
inline OrderParams empirical_order_params(const Eigen::MatrixXd& v_hat,
                                          const Eigen::MatrixXd& s_hat,
                                          const GmmInstance& inst) {
  const int r = inst.params.r;
  if (s_hat.cols() != r || v_hat.cols() != r)
    throw std::invalid_argument("empirical_order_params: column count must be r");
  const OverlapReport report =
      overlap_score_labels(hard_assign(s_hat, 1e-6), inst.labels, r);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(r, r);
  for (int k = 0; k < r; ++k) P(k, report.permutation[k]) = 1.0;
  const Eigen::MatrixXd S0 = one_hot(inst.labels, r);
  OrderParams out;
  out.M_s = (s_hat * P).transpose() * S0 / static_cast<double>(inst.params.m);
  out.M_v = (v_hat * P).transpose() * inst.centers / static_cast<double>(inst.params.n);
  return out;
}

inline OrderParams empirical_order_params(const AmpResult& result, const GmmInstance& inst) {
  return empirical_order_params(result.v_hat, result.s_hat, inst);
}

}  // namespace gmmamp
