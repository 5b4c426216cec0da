#pragma once

// Posterior means of the two priors under a Gaussian measurement channel
// with precision shift A and field B: density proportional to
// prior(z) * exp(B'z - z'Az/2).
//
//   gaussian_denoiser: prior N(0, I_r)   -> mean (I+A)^{-1} B
//   label_denoiser:    uniform on e_1..e_r -> softmax(B_k - A_kk / 2)
//
// Each comes with its posterior covariance and log partition function; the
// partition functions feed the free-energy estimates and their B-gradients
// must reproduce the means.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "gmmamp/errors.hpp"

namespace gmmamp {

namespace detail {
inline Eigen::LLT<Eigen::MatrixXd> shifted_llt(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("denoiser: A must be square");
  Eigen::MatrixXd shifted = A;
  shifted.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian_denoiser: I + A is not positive definite");
  return llt;
}

inline double llt_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}
}  // namespace detail

struct DenoiserResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

inline DenoiserResult gaussian_denoiser(const Eigen::MatrixXd& A,
                                        const Eigen::VectorXd& B) {
  if (B.size() != A.rows()) throw std::invalid_argument("denoiser: size mismatch");
  auto llt = detail::shifted_llt(A);
  DenoiserResult out;
  out.mean = llt.solve(B);
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  return out;
}

inline double gaussian_log_partition(const Eigen::MatrixXd& A,
                                     const Eigen::VectorXd& B) {
  if (B.size() != A.rows()) throw std::invalid_argument("denoiser: size mismatch");
  auto llt = detail::shifted_llt(A);
  return 0.5 * B.dot(llt.solve(B)) - 0.5 * detail::llt_log_det(llt);
}

inline DenoiserResult label_denoiser(const Eigen::MatrixXd& A,
                                     const Eigen::VectorXd& B) {
  if (A.rows() != A.cols() || B.size() != A.rows())
    throw std::invalid_argument("denoiser: size mismatch");
  Eigen::VectorXd logits = B - 0.5 * A.diagonal();
  const double top = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - top).exp();
  p /= p.sum();
  DenoiserResult out;
  out.mean = p;
  out.covariance = Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose();
  return out;
}

inline double label_log_partition(const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& B) {
  if (A.rows() != A.cols() || B.size() != A.rows())
    throw std::invalid_argument("denoiser: size mismatch");
  Eigen::VectorXd logits = B - 0.5 * A.diagonal();
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - std::log(static_cast<double>(B.size()));
}

// Batch forms used by the message-passing loop: rows of B are independent
// problems sharing one A.

inline Eigen::MatrixXd gaussian_denoise_rows(const Eigen::MatrixXd& A,
                                             const Eigen::MatrixXd& B,
                                             Eigen::MatrixXd* covariance = nullptr) {
  auto llt = detail::shifted_llt(A);
  if (covariance != nullptr)
    *covariance = llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
  // Row problems: mean row = row * (I+A)^{-1}, using symmetry of I + A.
  return llt.solve(B.transpose()).transpose();
}

inline Eigen::MatrixXd label_denoise_rows(const Eigen::MatrixXd& A,
                                          const Eigen::MatrixXd& B) {
  Eigen::MatrixXd logits = B;
  logits.rowwise() -= 0.5 * A.diagonal().transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  Eigen::MatrixXd p = logits.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

}  // namespace gmmamp
