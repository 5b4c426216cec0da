#pragma once

// Gaussian mixture instances on the hard scaling: r centers with squared
// norm ~ rho, m = alpha*n points, noise variance delta per component. Labels
// are stored 0-based in memory and 1-based on disk.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gmmamp/errors.hpp"
#include "gmmamp/rng.hpp"
#include "gmmamp/threading.hpp"

namespace gmmamp {

struct ModelParams {
  int n = 0;
  int m = 0;
  int r = 2;
  double rho = 1.0;
  double delta = 1.0;
  std::uint64_t seed = 0;

  double alpha() const { return static_cast<double>(m) / n; }

  void validate() const {
    if (n < 1 || m < 1) throw std::invalid_argument("model: n and m must be positive");
    if (r < 2) throw std::invalid_argument("model: r must be >= 2");
    if (rho < 0) throw std::invalid_argument("model: rho must be nonnegative");
    if (delta <= 0) throw std::invalid_argument("model: delta must be positive");
  }
};

struct GmmInstance {
  ModelParams params;
  Eigen::MatrixXd X;        // n x m observations
  Eigen::MatrixXd centers;  // n x r, entries N(0,1); true center k is sqrt(rho/n) * col k
  Eigen::VectorXi labels;   // m, values in [0, r)
};

inline Eigen::MatrixXd one_hot(const Eigen::VectorXi& labels, int r) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(labels.size(), r);
  for (Eigen::Index j = 0; j < labels.size(); ++j) {
    if (labels(j) < 0 || labels(j) >= r)
      throw std::invalid_argument("one_hot: label out of range");
    s(j, labels(j)) = 1.0;
  }
  return s;
}

// X_j = sqrt(rho/n) * v_{label j} + sqrt(delta) * noise. Each column draws
// noise from its own derived stream, so X is reproducible column by column
// and generation parallelizes without changing the result.
inline GmmInstance generate_instance(const ModelParams& params) {
  params.validate();
  GmmInstance inst;
  inst.params = params;

  Rng center_rng(derive_seed(params.seed, kStreamCenters));
  inst.centers.resize(params.n, params.r);
  fill_normal(center_rng, inst.centers);

  Rng label_rng(derive_seed(params.seed, kStreamLabels));
  inst.labels.resize(params.m);
  for (int j = 0; j < params.m; ++j) inst.labels(j) = label_rng.uniform_int(params.r);

  const double center_scale = std::sqrt(params.rho / params.n);
  const double noise_scale = std::sqrt(params.delta);
  inst.X.resize(params.n, params.m);
  constexpr long kColsPerChunk = 64;
  const long n_chunks = (params.m + kColsPerChunk - 1) / kColsPerChunk;
  parallel_chunks(n_chunks, [&](long chunk) {
    const int lo = static_cast<int>(chunk * kColsPerChunk);
    const int hi = std::min(params.m, lo + static_cast<int>(kColsPerChunk));
    for (int j = lo; j < hi; ++j) {
      Rng rng(derive_seed(params.seed, kStreamNoiseColumn, static_cast<std::uint64_t>(j)));
      auto col = inst.X.col(j);
      for (int i = 0; i < params.n; ++i) col(i) = noise_scale * rng.normal();
      col += center_scale * inst.centers.col(inst.labels(j));
    }
  });
  return inst;
}

// Maximum-total-score assignment of rows to columns (Kuhn-Munkres with
// potentials, O(r^3)). Returns perm with perm[row] = column.
inline std::vector<int> max_score_assignment(const Eigen::MatrixXd& score) {
  const int n = static_cast<int>(score.rows());
  if (score.cols() != n) throw std::invalid_argument("max_score_assignment: square matrix required");
  const double kInf = std::numeric_limits<double>::infinity();
  const double shift = score.maxCoeff();

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = (shift - score(i0 - 1, j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n);
  for (int j = 1; j <= n; ++j)
    if (match[j] != 0) perm[match[j] - 1] = j - 1;
  return perm;
}

struct OverlapReport {
  double correct_rate = 0.0;  // best-permutation fraction of correct labels
  double overlap = 0.0;     // rescaled to 0 at chance, 1 at perfect
  std::vector<int> permutation;
};

// Fraction of agreement maximized over label permutations. Exhaustive for
// r <= 8, Kuhn-Munkres above.
inline OverlapReport overlap_score_labels(const Eigen::VectorXi& predicted,
                                          const Eigen::VectorXi& truth, int r) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("overlap_score: size mismatch");
  const Eigen::Index m = predicted.size();
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int p = predicted(j), t = truth(j);
    if (p < 0 || p >= r || t < 0 || t >= r)
      throw std::invalid_argument("overlap_score: label out of range");
    confusion(p, t) += 1.0;
  }

  std::vector<int> best;
  if (r <= 8) {
    std::vector<int> perm(r);
    std::iota(perm.begin(), perm.end(), 0);
    double best_score = -1.0;
    do {
      double s = 0.0;
      for (int k = 0; k < r; ++k) s += confusion(k, perm[k]);
      if (s > best_score) {
        best_score = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best = max_score_assignment(confusion);
  }

  double correct = 0.0;
  for (int k = 0; k < r; ++k) correct += confusion(k, best[k]);
  OverlapReport report;
  report.correct_rate = correct / static_cast<double>(m);
  report.overlap = (report.correct_rate - 1.0 / r) / (1.0 - 1.0 / r);
  report.permutation = std::move(best);
  return report;
}

// Row-wise argmax; ties go to the lowest index. Rows must lie on the
// probability simplex.
inline Eigen::VectorXi hard_assign(const Eigen::MatrixXd& s_hat, double tol = 1e-6) {
  Eigen::VectorXi labels(s_hat.rows());
  for (Eigen::Index j = 0; j < s_hat.rows(); ++j) {
    double sum = 0.0, best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index k = 0; k < s_hat.cols(); ++k) {
      const double p = s_hat(j, k);
      sum += p;
      if (p > best) {
        best = p;
        arg = static_cast<int>(k);
      }
    }
    if (std::abs(sum - 1.0) > tol)
      throw std::invalid_argument("hard_assign: row does not sum to 1");
    labels(j) = arg;
  }
  return labels;
}

// One-hot matrix interface: rows must be exact vertex rows.
inline OverlapReport overlap_score(const Eigen::MatrixXd& predicted,
                                   const Eigen::MatrixXd& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
    throw std::invalid_argument("overlap_score: shape mismatch");
  const int r = static_cast<int>(predicted.cols());
  auto to_labels = [r](const Eigen::MatrixXd& s) {
    Eigen::VectorXi labels(s.rows());
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
      int arg = -1;
      for (int k = 0; k < r; ++k) {
        const double p = s(j, k);
        if (std::abs(p - 1.0) < 1e-9) {
          if (arg >= 0) throw std::invalid_argument("overlap_score: row not one-hot");
          arg = k;
        } else if (std::abs(p) > 1e-9) {
          throw std::invalid_argument("overlap_score: row not one-hot");
        }
      }
      if (arg < 0) throw std::invalid_argument("overlap_score: row not one-hot");
      labels(j) = arg;
    }
    return labels;
  };
  return overlap_score_labels(to_labels(predicted), to_labels(truth), r);
}

}  // namespace gmmamp
