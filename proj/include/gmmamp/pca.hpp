#pragma once

// Spectral baseline: k-means on the top right singular vectors of X, the
// Gaussian-prior message-passing iteration that matches PCA, and the
// closed-form overlaps of its state evolution. All of it turns on at the
// same threshold rho_c = r / sqrt(alpha) as the linear stability of the
// Bayes iteration, but with a smaller overlap above it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gmmamp/errors.hpp"
#include "gmmamp/model.hpp"
#include "gmmamp/quadrature.hpp"
#include "gmmamp/rng.hpp"

namespace gmmamp {

struct GaussianOrderParams {
  double m_v = 0.0;  // center-side overlap, in [0, rho)
  double m_s = 0.0;  // label-side overlap, in [0, 1)
};

// Fixed point of the Gaussian state evolution in closed form; both
// overlaps vanish at and below rho_c = r / sqrt(alpha).
inline GaussianOrderParams gaussian_se_fixed_point(double rho, double alpha, int r) {
  if (rho < 0 || alpha <= 0 || r < 2)
    throw std::invalid_argument("gaussian_se_fixed_point: bad arguments");
  const double excess = alpha * rho * rho - static_cast<double>(r) * r;
  GaussianOrderParams out;
  if (excess <= 0) return out;
  out.m_v = excess / (r + rho * alpha);
  out.m_s = excess / (alpha * rho * (r + rho));
  return out;
}

// The same fixed point by iterating the two-dimensional map from the
// fully informative start,
//   mtv <- alpha rho m_s / (r + alpha rho m_s),
//   m_s <- rho mtv / (r + rho mtv),
// where mtv = m_v / rho. Converges to the closed form above rho_c and to
// zero below it (slowly near the threshold).
inline GaussianOrderParams gaussian_se_iterate(double rho, double alpha, int r,
                                               double tol = 1e-13,
                                               long max_iters = 1000000) {
  if (rho < 0 || alpha <= 0 || r < 2)
    throw std::invalid_argument("gaussian_se_iterate: bad arguments");
  double mtv = 1.0, m_s = 1.0;
  for (long t = 0; t < max_iters; ++t) {
    const double mtv_next = alpha * rho * m_s / (r + alpha * rho * m_s);
    const double m_s_next = rho * mtv_next / (r + rho * mtv_next);
    const double change = std::max(std::abs(mtv_next - mtv), std::abs(m_s_next - m_s));
    mtv = mtv_next;
    m_s = m_s_next;
    if (change < tol || m_s < 1e-15) break;
  }
  if (m_s < 1e-12) return GaussianOrderParams{};
  return GaussianOrderParams{rho * mtv, m_s};
}

// Cluster separation seen on the spectral projection: the signal
// coordinate leads the r - 1 noise coordinates by sqrt(m_v).
inline double pca_effective_separation(double rho, double alpha, int r) {
  return std::sqrt(gaussian_se_fixed_point(rho, alpha, r).m_v);
}

// Fraction of points assigned to the right cluster by an optimal split of
// the spectral projection; 1/r at and below the threshold.
inline double pca_correct_rate_theory(double rho, double alpha, int r) {
  return argmax_correct_rate(pca_effective_separation(rho, alpha, r), r);
}

inline double pca_overlap_theory(double rho, double alpha, int r) {
  return (pca_correct_rate_theory(rho, alpha, r) - 1.0 / r) / (1.0 - 1.0 / r);
}

// Total squared center-reconstruction error of the spectral estimate, in
// overlap units: r rho below threshold, decreasing as m_v grows.
inline double pca_mse_theory(double rho, double alpha, int r) {
  return r * (rho - gaussian_se_fixed_point(rho, alpha, r).m_v);
}

// Top r right singular vectors of X (orthonormal columns, descending
// singular values) via the smaller Gram matrix side.
inline Eigen::MatrixXd top_right_singular(const Eigen::MatrixXd& X, int r,
                                          Eigen::VectorXd* singular_values = nullptr) {
  const Eigen::Index n = X.rows(), m = X.cols();
  if (r < 1 || r > std::min(n, m))
    throw std::invalid_argument("top_right_singular: bad rank");
  Eigen::MatrixXd out(m, r);
  Eigen::VectorXd svals(r);
  // The Gram route squares the condition number, so anything below about
  // sqrt(machine epsilon) relative to the top singular value is numerically
  // rank deficient.
  const auto check_rank = [](double sigma, double sigma_top) {
    if (sigma <= 1e-7 * sigma_top)
      throw NumericalError("top_right_singular: rank deficient");
  };
  if (n <= m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X * X.transpose());
    if (eig.info() != Eigen::Success)
      throw NumericalError("top_right_singular: eigensolver failed");
    const double sigma_top = std::sqrt(std::max(eig.eigenvalues()(n - 1), 0.0));
    for (int k = 0; k < r; ++k) {
      const Eigen::Index idx = n - 1 - k;  // eigenvalues ascend
      const double sigma = std::sqrt(std::max(eig.eigenvalues()(idx), 0.0));
      check_rank(sigma, sigma_top);
      out.col(k) = X.transpose() * eig.eigenvectors().col(idx) / sigma;
      svals(k) = sigma;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X.transpose() * X);
    if (eig.info() != Eigen::Success)
      throw NumericalError("top_right_singular: eigensolver failed");
    const double sigma_top = std::sqrt(std::max(eig.eigenvalues()(m - 1), 0.0));
    for (int k = 0; k < r; ++k) {
      const Eigen::Index idx = m - 1 - k;
      const double sigma = std::sqrt(std::max(eig.eigenvalues()(idx), 0.0));
      check_rank(sigma, sigma_top);
      out.col(k) = eig.eigenvectors().col(idx);
      svals(k) = sigma;
    }
  }
  if (singular_values != nullptr) *singular_values = svals;
  return out;
}

namespace detail {

inline double kmeans_lloyd(const Eigen::MatrixXd& pts, int r, Rng& rng, int max_iters,
                           Eigen::VectorXi& assign) {
  const Eigen::Index m = pts.rows();
  Eigen::MatrixXd centers(r, pts.cols());
  // Greedy farthest-point start from a random point.
  Eigen::VectorXd nearest = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  Eigen::Index pick = rng.uniform_int(static_cast<int>(m));
  for (int k = 0; k < r; ++k) {
    centers.row(k) = pts.row(pick);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = (pts.row(j) - centers.row(k)).squaredNorm();
      if (d < nearest(j)) nearest(j) = d;
    }
    nearest.maxCoeff(&pick);
  }

  assign.setConstant(m, -1);
  double objective = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    objective = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      int best = 0;
      double best_d = (pts.row(j) - centers.row(0)).squaredNorm();
      for (int k = 1; k < r; ++k) {
        const double d = (pts.row(j) - centers.row(k)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      objective += best_d;
      if (assign(j) != best) {
        assign(j) = best;
        changed = true;
      }
    }
    if (!changed) break;
    centers.setZero();
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(r);
    for (Eigen::Index j = 0; j < m; ++j) {
      centers.row(assign(j)) += pts.row(j);
      counts(assign(j)) += 1;
    }
    for (int k = 0; k < r; ++k) {
      if (counts(k) > 0) {
        centers.row(k) /= counts(k);
      } else {
        // Re-seed an empty cluster at the worst-served point.
        Eigen::Index worst = 0;
        double worst_d = -1.0;
        for (Eigen::Index j = 0; j < m; ++j) {
          const double d = (pts.row(j) - centers.row(assign(j))).squaredNorm();
          if (d > worst_d) {
            worst_d = d;
            worst = j;
          }
        }
        centers.row(k) = pts.row(worst);
      }
    }
  }
  return objective;
}

inline Eigen::VectorXi kmeans(const Eigen::MatrixXd& pts, int r, int restarts,
                              int max_iters, std::uint64_t seed) {
  Eigen::VectorXi best_assign, assign;
  double best_objective = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng(derive_seed(seed, kStreamKmeans, static_cast<std::uint64_t>(restart)));
    const double objective = kmeans_lloyd(pts, r, rng, max_iters, assign);
    if (objective < best_objective) {
      best_objective = objective;
      best_assign = assign;
    }
  }
  return best_assign;
}

}  // namespace detail

struct PcaOptions {
  int kmeans_restarts = 20;
  int kmeans_iters = 100;
  std::uint64_t seed = 0;  // stirred into the restart streams
};

struct PcaResult {
  Eigen::VectorXi assignments;  // m, 0-based
  OverlapReport overlap;
  Eigen::VectorXd singular_values;  // top r of X
  Eigen::MatrixXd projected;        // m x r spectral coordinates, sqrt(m)-scaled
};

inline PcaResult pca_cluster(const GmmInstance& inst, const PcaOptions& opts = {}) {
  const int r = inst.params.r;
  PcaResult out;
  out.projected = top_right_singular(inst.X, r, &out.singular_values);
  out.projected *= std::sqrt(static_cast<double>(inst.params.m));
  out.assignments = detail::kmeans(out.projected, r, opts.kmeans_restarts,
                                   opts.kmeans_iters,
                                   mix64(inst.params.seed, opts.seed));
  out.overlap = overlap_score_labels(out.assignments, inst.labels, r);
  return out;
}

struct GaussianAmpResult {
  Eigen::MatrixXd v_hat;  // n x r
  Eigen::MatrixXd s_hat;  // m x r
  int iterations = 0;
  bool converged = false;
};

// Message passing with a Gaussian prior on both sides; its fixed point
// spans the same subspace as the top singular vectors. Covariances are
// scalar matrices shared across rows, so the Onsager terms collapse to the
// r x r factors Sigma_v and Sigma_s.
inline GaussianAmpResult gaussian_amp_iterate(const GmmInstance& inst, int max_iters = 2000,
                                              double tol = 1e-9, std::uint64_t seed = 0) {
  const ModelParams& mp = inst.params;
  const int n = mp.n, m = mp.m, r = mp.r;
  const double rho = mp.rho / mp.delta;
  const double alpha = mp.alpha();
  const double coef = std::sqrt(rho / n) / std::sqrt(mp.delta);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(r, r);

  GaussianAmpResult out;
  out.s_hat.resize(m, r);
  Rng rng(derive_seed(mp.seed, kStreamGaussianAmpInit, seed));
  fill_normal(rng, out.s_hat);
  out.s_hat *= 1e-3;
  out.v_hat = Eigen::MatrixXd::Zero(n, r);
  Eigen::MatrixXd sigma_s = Eigen::MatrixXd::Zero(r, r);

  for (int t = 1; t <= max_iters; ++t) {
    const Eigen::MatrixXd sigma_v =
        (eye + (rho / n) * out.s_hat.transpose() * out.s_hat).ldlt().solve(eye);
    Eigen::MatrixXd v_new =
        (coef * (inst.X * out.s_hat) - rho * alpha * out.v_hat * sigma_s) * sigma_v;
    const Eigen::MatrixXd sigma_s_next =
        (r * eye + (rho / n) * v_new.transpose() * v_new).ldlt().solve(eye);
    Eigen::MatrixXd s_new =
        (coef * (inst.X.transpose() * v_new) - rho * out.s_hat * sigma_v) * sigma_s_next;
    if (!s_new.allFinite() || !v_new.allFinite())
      throw NumericalError("gaussian_amp_iterate: diverged at iteration " +
                           std::to_string(t));
    const double change =
        (s_new - out.s_hat).norm() / std::sqrt(static_cast<double>(m) * r);
    out.v_hat.swap(v_new);
    out.s_hat.swap(s_new);
    sigma_s = sigma_s_next;
    out.iterations = t;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// Principal angles (radians, ascending) between the column spans of A and B.
// Small angles come from the sine of the residual rather than acos of a
// cosine close to one, which would lose half the working precision.
inline std::vector<double> principal_angles(const Eigen::MatrixXd& A,
                                            const Eigen::MatrixXd& B) {
  if (A.rows() != B.rows()) throw std::invalid_argument("principal_angles: row mismatch");
  auto orth = [](const Eigen::MatrixXd& M) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(M.rows(), M.cols()));
  };
  const Eigen::MatrixXd Qa = orth(A), Qb = orth(B);
  const Eigen::MatrixXd cross = Qa.transpose() * Qb;
  Eigen::JacobiSVD<Eigen::MatrixXd> cos_svd(cross);
  Eigen::JacobiSVD<Eigen::MatrixXd> sin_svd(Qb - Qa * cross);
  std::vector<double> sines(sin_svd.singularValues().size());
  for (size_t i = 0; i < sines.size(); ++i)
    sines[i] = sin_svd.singularValues()(static_cast<Eigen::Index>(i));
  std::sort(sines.begin(), sines.end());  // ascending, matching angle order

  std::vector<double> angles(cos_svd.singularValues().size());
  for (size_t i = 0; i < angles.size(); ++i) {
    const double c = std::clamp(cos_svd.singularValues()(static_cast<Eigen::Index>(i)),
                                0.0, 1.0);
    const double s = std::clamp(sines[std::min(i, sines.size() - 1)], 0.0, 1.0);
    angles[i] = (c * c > 0.5) ? std::asin(s) : std::acos(c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace gmmamp
