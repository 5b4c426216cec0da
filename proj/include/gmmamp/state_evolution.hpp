#pragma once

// State evolution for the mixture: the r x r order parameters (M_v, M_s)
// and their scalar reduction along the symmetric ansatz
//
//   M_s = (b/r) I + (1-b)/r^2 J,   M_v = b_v I + (b_vJ / r) J,
//
// where b in [0,1] is the label overlap. One scalar step is
//
//   b' = cal_m( b rho^2 / (1/alpha + rho b / r) ),
//
// with cal_m(x) the Monte Carlo average of the posterior weight on the true
// label when the channel separates the means by x. All MC estimators are
// chunked and seeded per chunk, so estimates are reproducible and thread
//-count independent; cal_m is memoized on (x, r, samples, seed).

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gmmamp/denoisers.hpp"
#include "gmmamp/errors.hpp"
#include "gmmamp/quadrature.hpp"
#include "gmmamp/rng.hpp"
#include "gmmamp/threading.hpp"

namespace gmmamp {

inline constexpr long kDefaultMcSamples = 200000;
inline constexpr std::uint64_t kDefaultMcSeed = 0x5eed0001ULL;

struct CalMEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
  double x = 0.0;
  int r = 0;
};

namespace detail {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Raw estimator: the true-label posterior weight is
//   p1 = sigmoid( x/r + u1 sqrt(x/r) - logsumexp_{k>=2}( u_k sqrt(x/r) ) ),
// u iid standard normal, and cal_m = (r E[p1] - 1)/(r - 1). Each sample is
// an antithetic pair in u1 sharing the same tail logsumexp.
inline CalMEstimate cal_m_compute(double x, int r, long samples, std::uint64_t seed) {
  const double s = std::sqrt(x / r);
  const double x_over_r = x / r;
  constexpr long kChunk = 8192;
  const long n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<double> sums(n_chunks, 0.0), squares(n_chunks, 0.0);
  parallel_chunks(n_chunks, [&](long chunk) {
    Rng rng(derive_seed(seed, kStreamMcChunk, static_cast<std::uint64_t>(chunk)));
    const long lo = chunk * kChunk;
    const long hi = std::min(samples, lo + kChunk);
    double sum = 0.0, sq = 0.0;
    for (long i = lo; i < hi; ++i) {
      const double u1 = rng.normal();
      // streaming logsumexp of the r-1 rival terms
      double top = -std::numeric_limits<double>::infinity();
      double tail = 0.0;
      for (int k = 1; k < r; ++k) {
        const double t = rng.normal() * s;
        if (t <= top) {
          tail += std::exp(t - top);
        } else {
          tail = tail * std::exp(top - t) + 1.0;
          top = t;
        }
      }
      const double log_tail = top + std::log(tail);
      const double base = x_over_r - log_tail;
      const double value = 0.5 * (sigmoid(base + u1 * s) + sigmoid(base - u1 * s));
      sum += value;
      sq += value * value;
    }
    sums[chunk] = sum;
    squares[chunk] = sq;
  });
  double total = 0.0, total_sq = 0.0;
  for (long c = 0; c < n_chunks; ++c) {
    total += sums[c];
    total_sq += squares[c];
  }
  const double mean = total / samples;
  const double var =
      std::max(0.0, total_sq / samples - mean * mean) / std::max<long>(samples - 1, 1);
  const double rescale = static_cast<double>(r) / (r - 1);
  CalMEstimate est;
  est.value = rescale * mean - 1.0 / (r - 1);
  est.std_error = rescale * std::sqrt(var);
  est.samples = samples;
  est.x = x;
  est.r = r;
  return est;
}

}  // namespace detail

inline CalMEstimate cal_m(double x, int r, long samples = kDefaultMcSamples,
                          std::uint64_t seed = kDefaultMcSeed) {
  if (x < 0) throw std::invalid_argument("cal_m: x must be nonnegative");
  if (r < 2) throw std::invalid_argument("cal_m: r must be >= 2");
  if (samples < 2) throw std::invalid_argument("cal_m: need at least 2 samples");
  if (x == 0.0) return CalMEstimate{0.0, 0.0, samples, 0.0, r};

  using Key = std::tuple<std::uint64_t, int, long, std::uint64_t>;
  static std::map<Key, CalMEstimate> cache;
  static std::mutex mutex;
  const Key key{std::bit_cast<std::uint64_t>(x), r, samples, seed};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  CalMEstimate est = detail::cal_m_compute(x, r, samples, seed);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, est).first->second;
}

// Signal-to-noise argument of the scalar map at label overlap b_s.
inline double se_arg(double b_s, double rho, double alpha, int r) {
  return b_s * rho * rho / (1.0 / alpha + rho * b_s / r);
}

// Center-side overlap induced by a label overlap.
inline double b_v_from_b_s(double b_s, double rho, double alpha, int r) {
  return b_s * rho / (r / alpha + b_s * rho);
}

inline double b_s_from_b_v(double b_v, double rho, double alpha, int r) {
  return r * b_v / (alpha * rho * std::max(1.0 - b_v, 1e-300));
}

inline CalMEstimate se_scalar_step(double b_s, double rho, double alpha, int r,
                                   long samples = kDefaultMcSamples,
                                   std::uint64_t seed = kDefaultMcSeed) {
  return cal_m(se_arg(b_s, rho, alpha, r), r, samples, seed);
}

enum class SeInit { kUninformative, kInformative };

struct SeOptions {
  long samples = kDefaultMcSamples;
  std::uint64_t seed = kDefaultMcSeed;
  double tol = 1e-8;
  int max_iters = 4000;
  // Uninformative starting overlap. Large enough that the linear growth per
  // step, (alpha rho^2 / r^2 - 1) * epsilon, clears the Monte Carlo noise
  // floor at the default sample count; with a much smaller start the frozen
  // sampling noise can pin the iteration in a spurious fixed point near zero.
  double epsilon = 1e-3;
};

struct SeFixedPoint {
  double b_s = 0.0;
  double b_v = 0.0;
  double std_error = 0.0;  // MC std error of the final step
  int iterations = 0;
  std::vector<double> history;  // per-iteration |change|
};

// Iterates the scalar map to its fixed point. The same MC seed is reused at
// every step, so the iterated map is a fixed (noisy) function and the
// iteration is deterministic; it runs until the change falls below tol.
// Stopping earlier (say at the MC noise scale) would leave a truncation
// offset of order std_error / (1 - slope) whose sign depends on the start,
// and near a threshold, where the slope approaches one, that offset breaks
// cross-start agreement even though both starts share one basin. The MC
// uncertainty relative to the infinite-sample map is still reported via
// std_error; only the truncation error is driven to tol.
inline SeFixedPoint se_fixed_point(SeInit init, double rho, double alpha, int r,
                                   const SeOptions& opts = {}) {
  if (rho < 0 || alpha <= 0) throw std::invalid_argument("se_fixed_point: bad rho or alpha");
  if (r < 2) throw std::invalid_argument("se_fixed_point: r must be >= 2");
  double b = (init == SeInit::kInformative) ? 1.0 : opts.epsilon;
  std::vector<double> history;
  history.reserve(64);
  for (int t = 1; t <= opts.max_iters; ++t) {
    const CalMEstimate step = se_scalar_step(b, rho, alpha, r, opts.samples, opts.seed);
    const double b_next = std::clamp(step.value, 0.0, 1.0);
    const double change = std::abs(b_next - b);
    history.push_back(change);
    b = b_next;
    if (change < opts.tol) {
      SeFixedPoint out;
      out.b_s = b;
      out.b_v = b_v_from_b_s(b, rho, alpha, r);
      out.std_error = step.std_error;
      out.iterations = t;
      out.history = std::move(history);
      return out;
    }
  }
  throw ConvergenceError("se_fixed_point: no convergence in " +
                             std::to_string(opts.max_iters) + " iterations",
                         std::move(history));
}

// Symmetric PSD square root; eigenvalues below -1e-10 are an error, small
// negative ones are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigensolver failed");
  Eigen::VectorXd lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10)
      throw NumericalError("psd_sqrt: negative eigenvalue " + std::to_string(lam(i)));
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

namespace detail {
// Square root of a covariance assembled from Monte Carlo estimates. Such
// matrices can sit a noise margin below zero along directions whose exact
// eigenvalue vanishes; project those back onto the PSD cone and reject only
// genuinely indefinite input.
inline Eigen::MatrixXd sampling_root(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericalError("sampling_root: eigensolver failed");
  Eigen::VectorXd lam = eig.eigenvalues();
  const double floor = -1e-2 * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < floor)
      throw NumericalError("sampling_root: indefinite covariance, eigenvalue " +
                           std::to_string(lam(i)));
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}
}  // namespace detail

struct OrderParams {
  Eigen::MatrixXd M_v;
  Eigen::MatrixXd M_s;
};

inline Eigen::MatrixXd ansatz_m_s(double b_s, int r) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(r, r, (1.0 - b_s) / (r * static_cast<double>(r)));
  m.diagonal().array() += b_s / r;
  return m;
}

// The center-side matrix one update places on the ansatz: identity weight
// b_v and a rank-one J part fixed by trace conservation (every M_s on the
// ansatz has row sums 1/r, so the J eigenvalue of the update is
// alpha rho / (r + alpha rho) regardless of b_s).
inline Eigen::MatrixXd ansatz_m_v(double b_s, double rho, double alpha, int r) {
  const double b_v = b_v_from_b_s(b_s, rho, alpha, r);
  const double b_vj = alpha * rho / (r + alpha * rho) - b_v;
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(r, r, b_vj / r);
  m.diagonal().array() += b_v;
  return m;
}

inline OrderParams ansatz_order_params(double b_s, double rho, double alpha, int r) {
  return OrderParams{ansatz_m_v(b_s, rho, alpha, r), ansatz_m_s(b_s, r)};
}

namespace detail {
inline std::pair<double, double> diag_offdiag_means(const Eigen::MatrixXd& M) {
  const int r = static_cast<int>(M.rows());
  const double diag = M.diagonal().mean();
  const double off = (M.sum() - M.diagonal().sum()) / (static_cast<double>(r) * (r - 1));
  return {diag, off};
}
}  // namespace detail

// Overlap read off a label order parameter; exact on the ansatz, least
// sensitive projection off it.
inline double fit_b_s(const Eigen::MatrixXd& M_s) {
  auto [diag, off] = detail::diag_offdiag_means(M_s);
  return M_s.rows() * (diag - off);
}

inline double fit_b_v(const Eigen::MatrixXd& M_v) {
  auto [diag, off] = detail::diag_offdiag_means(M_v);
  return diag - off;
}

struct MatrixSeStep {
  OrderParams next;
  Eigen::MatrixXd m_v_err;  // per-entry MC std errors
  Eigen::MatrixXd m_s_err;
};

// One full sweep of the matrix state evolution: the center update from the
// incoming M_s, then the label update from the *new* M_v, matching the
// composite scalar step. Expectations are stratified over the true label
// and share the Gaussian draw across strata.
inline MatrixSeStep se_matrix_step(const OrderParams& in, double rho, double alpha,
                                   int r, long samples = 100000,
                                   std::uint64_t seed = kDefaultMcSeed) {
  if (in.M_s.rows() != r || in.M_s.cols() != r || in.M_v.rows() != r || in.M_v.cols() != r)
    throw std::invalid_argument("se_matrix_step: order parameters must be r x r");
  if (samples < 2) throw std::invalid_argument("se_matrix_step: need at least 2 samples");

  constexpr long kChunk = 4096;
  const long n_chunks = (samples + kChunk - 1) / kChunk;

  auto mc_pass = [&](const Eigen::MatrixXd& arg, bool label_side, std::uint64_t tag_offset,
                     Eigen::MatrixXd& mean_out, Eigen::MatrixXd& err_out) {
    const Eigen::MatrixXd A = 0.5 * (arg + arg.transpose());
    const Eigen::MatrixXd root = detail::sampling_root(A);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!label_side) {
      Eigen::MatrixXd shifted = A;
      shifted.diagonal().array() += 1.0;
      llt.compute(shifted);
      if (llt.info() != Eigen::Success)
        throw NumericalError("se_matrix_step: I + A not positive definite");
    }
    std::vector<Eigen::MatrixXd> sums(n_chunks), squares(n_chunks);
    parallel_chunks(n_chunks, [&](long chunk) {
      Rng rng(derive_seed(seed, kStreamMatrixSe,
                          2 * static_cast<std::uint64_t>(chunk) + tag_offset));
      const long lo = chunk * kChunk;
      const long hi = std::min(samples, lo + kChunk);
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(r, r);
      Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(r, r);
      Eigen::VectorXd w(r), b(r), mean(r), v0(r);
      for (long i = lo; i < hi; ++i) {
        for (int k = 0; k < r; ++k) w(k) = rng.normal();
        if (label_side) {
          const Eigen::VectorXd noise = root * w;
          for (int k = 0; k < r; ++k) {
            b = A.col(k) + noise - 0.5 * A.diagonal();
            const double top = b.maxCoeff();
            Eigen::VectorXd p = (b.array() - top).exp();
            p /= p.sum();
            p /= static_cast<double>(r);
            sum.col(k) += p;
            sq.col(k) += p.cwiseProduct(p);
          }
        } else {
          for (int k = 0; k < r; ++k) v0(k) = rng.normal();
          b = A * v0 + root * w;
          mean = llt.solve(b);
          sum += mean * v0.transpose();
          sq += (mean * v0.transpose()).cwiseProduct(mean * v0.transpose());
        }
      }
      sums[chunk] = std::move(sum);
      squares[chunk] = std::move(sq);
    });
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(r, r);
    Eigen::MatrixXd total_sq = Eigen::MatrixXd::Zero(r, r);
    for (long c = 0; c < n_chunks; ++c) {
      total += sums[c];
      total_sq += squares[c];
    }
    mean_out = total / static_cast<double>(samples);
    err_out = ((total_sq / static_cast<double>(samples) - mean_out.cwiseProduct(mean_out))
                   .cwiseMax(0.0) /
               static_cast<double>(std::max<long>(samples - 1, 1)))
                  .cwiseSqrt();
  };

  MatrixSeStep out;
  mc_pass(alpha * rho * in.M_s, false, 0, out.next.M_v, out.m_v_err);
  mc_pass(rho * out.next.M_v, true, 1, out.next.M_s, out.m_s_err);
  return out;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long samples = 0;
};

// Replica-symmetric potential at an order-parameter pair:
//   phi = (alpha rho / 2) Tr(M_v M_s') - E log Z_v - alpha E log Z_s,
// with the channel arguments alpha rho M_s (center side) and rho M_v (label
// side). Zero matrices give exactly zero.
inline McEstimate bethe_free_energy(const OrderParams& order, double rho, double alpha,
                                    long samples = 100000,
                                    std::uint64_t seed = kDefaultMcSeed) {
  const int r = static_cast<int>(order.M_s.rows());
  if (order.M_s.cols() != r || order.M_v.rows() != r || order.M_v.cols() != r)
    throw std::invalid_argument("bethe_free_energy: order parameters must be r x r");

  const Eigen::MatrixXd A_v = 0.5 * alpha * rho * (order.M_s + order.M_s.transpose());
  const Eigen::MatrixXd A_s = 0.5 * rho * (order.M_v + order.M_v.transpose());
  const Eigen::MatrixXd root_v = detail::sampling_root(A_v);
  const Eigen::MatrixXd root_s = detail::sampling_root(A_s);
  Eigen::MatrixXd shifted = A_v;
  shifted.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NumericalError("bethe_free_energy: I + A_v not positive definite");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double log_r = std::log(static_cast<double>(r));

  constexpr long kChunk = 4096;
  const long n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<double> v_sum(n_chunks), v_sq(n_chunks), s_sum(n_chunks), s_sq(n_chunks);
  parallel_chunks(n_chunks, [&](long chunk) {
    Rng rng(derive_seed(seed, kStreamBethe, static_cast<std::uint64_t>(chunk)));
    const long lo = chunk * kChunk;
    const long hi = std::min(samples, lo + kChunk);
    double sv = 0.0, sv2 = 0.0, ss = 0.0, ss2 = 0.0;
    Eigen::VectorXd v0(r), w(r), b(r);
    for (long i = lo; i < hi; ++i) {
      for (int k = 0; k < r; ++k) v0(k) = rng.normal();
      for (int k = 0; k < r; ++k) w(k) = rng.normal();
      b = A_v * v0 + root_v * w;
      const double log_z_v = 0.5 * b.dot(llt.solve(b)) - 0.5 * log_det;
      sv += log_z_v;
      sv2 += log_z_v * log_z_v;

      for (int k = 0; k < r; ++k) w(k) = rng.normal();
      const Eigen::VectorXd noise = root_s * w;
      double acc = 0.0;
      for (int k = 0; k < r; ++k) {
        b = A_s.col(k) + noise - 0.5 * A_s.diagonal();
        const double top = b.maxCoeff();
        acc += top + std::log((b.array() - top).exp().sum()) - log_r;
      }
      const double log_z_s = acc / r;
      ss += log_z_s;
      ss2 += log_z_s * log_z_s;
    }
    v_sum[chunk] = sv;
    v_sq[chunk] = sv2;
    s_sum[chunk] = ss;
    s_sq[chunk] = ss2;
  });
  double tv = 0.0, tv2 = 0.0, ts = 0.0, ts2 = 0.0;
  for (long c = 0; c < n_chunks; ++c) {
    tv += v_sum[c];
    tv2 += v_sq[c];
    ts += s_sum[c];
    ts2 += s_sq[c];
  }
  const double mean_v = tv / samples;
  const double mean_s = ts / samples;
  const double var_v =
      std::max(0.0, tv2 / samples - mean_v * mean_v) / std::max<long>(samples - 1, 1);
  const double var_s =
      std::max(0.0, ts2 / samples - mean_s * mean_s) / std::max<long>(samples - 1, 1);

  McEstimate est;
  est.value = 0.5 * alpha * rho * (order.M_v.cwiseProduct(order.M_s)).sum() - mean_v -
              alpha * mean_s;
  est.std_error = std::sqrt(var_v + alpha * alpha * var_s);
  est.samples = samples;
  return est;
}

// Monotone piecewise-cubic interpolant of x -> cal_m(x) on a fixed grid,
// with an exact running integral. Below the first node the curve is linear
// through the origin; past the last node it is constant. All nodes share
// one seed, so neighboring evaluations use common random numbers and the
// interpolated curve is smooth.
class CalMCurve {
 public:
  CalMCurve(int r, std::vector<double> xs, long samples = kDefaultMcSamples,
            std::uint64_t seed = kDefaultMcSeed)
      : r_(r), samples_(samples), seed_(seed), xs_(std::move(xs)) {
    if (xs_.size() < 4) throw std::invalid_argument("CalMCurve: need at least 4 nodes");
    if (!std::is_sorted(xs_.begin(), xs_.end()) || xs_.front() <= 0.0)
      throw std::invalid_argument("CalMCurve: nodes must be positive and sorted");
    vals_.resize(xs_.size());
    errs_.resize(xs_.size());
    for (size_t i = 0; i < xs_.size(); ++i) {
      const CalMEstimate est = cal_m(xs_[i], r_, samples_, seed_);
      vals_[i] = std::clamp(est.value, 0.0, 1.0);
      errs_[i] = est.std_error;
    }
    build();
  }

  static std::vector<double> log_grid(double lo, double hi, int points) {
    if (lo <= 0 || hi <= lo || points < 2)
      throw std::invalid_argument("log_grid: bad range");
    std::vector<double> xs(points);
    const double step = std::log(hi / lo) / (points - 1);
    for (int i = 0; i < points; ++i) xs[i] = lo * std::exp(step * i);
    xs.back() = hi;
    return xs;
  }

  // Grid used for threshold scans: 10^-2 r up to 10^3 r log r.
  static CalMCurve phase_grid(int r, long samples = kDefaultMcSamples,
                              std::uint64_t seed = kDefaultMcSeed, int points = 200) {
    return CalMCurve(r, log_grid(1e-2 * r, 1e3 * r * std::log(static_cast<double>(r)), points),
                     samples, seed);
  }

  double value(double x) const {
    if (x < 0) throw std::invalid_argument("CalMCurve: negative x");
    if (x == 0.0) return 0.0;
    if (x <= xs_.front()) return std::clamp(head_slope_ * x, 0.0, 1.0);
    if (x >= xs_.back()) return vals_.back();
    const size_t i = panel(x);
    return std::clamp(hermite(i, x), 0.0, 1.0);
  }

  // Integral of the interpolant from 0 to x.
  double integral_to(double x) const {
    if (x < 0) throw std::invalid_argument("CalMCurve: negative x");
    if (x <= xs_.front()) return 0.5 * head_slope_ * x * x;
    const double head = 0.5 * head_slope_ * xs_.front() * xs_.front();
    if (x >= xs_.back()) return head + cum_.back() + vals_.back() * (x - xs_.back());
    const size_t i = panel(x);
    // Simpson is exact on each cubic panel.
    const double mid = 0.5 * (xs_[i] + x);
    const double part =
        (x - xs_[i]) / 6.0 * (vals_[i] + 4.0 * hermite(i, mid) + hermite(i, x));
    return head + cum_[i] + part;
  }

  double std_error_at(double x) const {
    if (x <= xs_.front()) return errs_.front() * (x / xs_.front());
    if (x >= xs_.back()) return errs_.back();
    const size_t i = panel(x);
    const double t = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
    return (1.0 - t) * errs_[i] + t * errs_[i + 1];
  }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& values() const { return vals_; }
  const std::vector<double>& std_errors() const { return errs_; }
  int r() const { return r_; }
  long samples() const { return samples_; }
  std::uint64_t seed() const { return seed_; }

 private:
  size_t panel(double x) const {
    const size_t i =
        std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin();
    return std::min(std::max<size_t>(i, 1), xs_.size() - 1) - 1;
  }

  double hermite(size_t i, double x) const {
    const double h = xs_[i + 1] - xs_[i];
    const double t = (x - xs_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * vals_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] +
           (-2 * t3 + 3 * t2) * vals_[i + 1] + (t3 - t2) * h * slopes_[i + 1];
  }

  // Fritsch-Carlson slopes: monotone on each panel.
  void build() {
    const size_t n = xs_.size();
    std::vector<double> h(n - 1), d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
      h[i] = xs_[i + 1] - xs_[i];
      d[i] = (vals_[i + 1] - vals_[i]) / h[i];
    }
    slopes_.assign(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] * d[i] <= 0.0) {
        slopes_[i] = 0.0;
      } else {
        const double w1 = 2 * h[i] + h[i - 1];
        const double w2 = h[i] + 2 * h[i - 1];
        slopes_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (m * d0 <= 0.0) return 0.0;
      if (d0 * d1 <= 0.0 && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return m;
    };
    slopes_.front() = endpoint(h[0], h[1], d[0], d[1]);
    slopes_.back() = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);

    cum_.assign(n, 0.0);
    for (size_t i = 0; i + 1 < n; ++i) {
      const double panel_integral =
          h[i] * (0.5 * (vals_[i] + vals_[i + 1]) +
                  h[i] * (slopes_[i] - slopes_[i + 1]) / 12.0);
      cum_[i + 1] = cum_[i] + panel_integral;
    }
    head_slope_ = vals_.front() / xs_.front();
  }

  int r_;
  long samples_;
  std::uint64_t seed_;
  std::vector<double> xs_, vals_, errs_, slopes_, cum_;
  double head_slope_ = 0.0;
};

// Shared per-(r, samples, seed, points) curve for threshold scans.
inline const CalMCurve& shared_phase_curve(int r, long samples = kDefaultMcSamples,
                                           std::uint64_t seed = kDefaultMcSeed,
                                           int points = 200) {
  using Key = std::tuple<int, long, std::uint64_t, int>;
  static std::map<Key, CalMCurve> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  const Key key{r, samples, seed, points};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  return cache.emplace(key, CalMCurve::phase_grid(r, samples, seed, points)).first->second;
}

// Free-energy difference between the zero branch and the overlap-x branch,
// reduced to one dimension along the ansatz:
//   gap(x) = alpha (r-1)/(2 r^2) [ int_0^x M + I2(M(x)) - x M(x) ],
//   I2(c)  = rho r c - (r^2/alpha) log(1 + alpha rho c / r).
// Positive gap means the overlap branch has the lower potential and is
// thermodynamically dominant; its root in x along rho(x) locates the
// information-theoretic threshold.
inline double free_energy_gap_at(double x, double rho, double alpha, int r,
                                 const CalMCurve& curve) {
  if (x < 0) throw std::invalid_argument("free_energy_gap: x must be nonnegative");
  if (x == 0.0) return 0.0;
  const double c = curve.value(x);
  const double i1 = curve.integral_to(x);
  const double i2 = rho * r * c - (static_cast<double>(r) * r / alpha) *
                                      std::log1p(alpha * rho * c / r);
  return alpha * (r - 1) / (2.0 * r * static_cast<double>(r)) * (i1 + i2 - x * c);
}

inline double free_energy_gap(double x, double rho, double alpha, int r,
                              long samples = kDefaultMcSamples,
                              std::uint64_t seed = kDefaultMcSeed) {
  return free_energy_gap_at(x, rho, alpha, r, shared_phase_curve(r, samples, seed));
}

// Probability that the posterior-mode label is correct when the label
// overlap is b_s: an argmax over r jointly Gaussian coordinates whose
// signal coordinate leads by sqrt(rho * b_v).
inline double predicted_correct_rate(double b_s, double rho, double alpha, int r) {
  const double b_v = b_v_from_b_s(b_s, rho, alpha, r);
  return argmax_correct_rate(std::sqrt(std::max(rho * b_v, 0.0)), r);
}

inline double predicted_overlap(double b_s, double rho, double alpha, int r) {
  const double rate = predicted_correct_rate(b_s, rho, alpha, r);
  return (rate - 1.0 / r) / (1.0 - 1.0 / r);
}

}  // namespace gmmamp
