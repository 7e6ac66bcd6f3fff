#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "dcovica/core.hpp"

namespace dcovica {

// Observation blocks are n x d, one row per observation.

// PCA whitening transform: O = Lambda^{-1/2} Upsilon', from the
// eigendecomposition of the sample covariance (divisor n-1), eigenvalues
// sorted descending, eigenvector signs fixed so the largest-modulus entry
// of each eigenvector is positive.
template <typename Scalar>
struct Whitening {
  VectorX<Scalar> mean;          // column means removed before whitening
  MatrixX<Scalar> uncorrelating; // O, d x d
  VectorX<Scalar> eigenvalues;   // Lambda, descending
  MatrixX<Scalar> eigenvectors;  // Upsilon, columns match eigenvalues
};

template <typename Scalar>
VectorX<Scalar> column_means(const MatrixX<Scalar>& x) {
  require(x.rows() >= 1, "column_means: empty input");
  return x.colwise().mean();
}

// Subtract column means; returns the centered matrix and the means.
template <typename Scalar>
std::pair<MatrixX<Scalar>, VectorX<Scalar>> center(const MatrixX<Scalar>& x) {
  require(x.rows() >= 1, "center: empty input");
  VectorX<Scalar> mu = column_means(x);
  MatrixX<Scalar> out = x.rowwise() - mu.transpose();
  return {std::move(out), std::move(mu)};
}

// Sample covariance with divisor n-1.
template <typename Scalar>
MatrixX<Scalar> sample_covariance(const MatrixX<Scalar>& x) {
  require(x.rows() >= 2, "sample_covariance: need at least 2 rows");
  MatrixX<Scalar> c = x.rowwise() - x.colwise().mean();
  return (c.transpose() * c) / static_cast<Scalar>(x.rows() - 1);
}

// Divide each column by its sample standard deviation (divisor n-1).
template <typename Scalar>
std::pair<MatrixX<Scalar>, VectorX<Scalar>> standardize_columns(const MatrixX<Scalar>& x) {
  const Index n = x.rows(), d = x.cols();
  require(n >= 2, "standardize_columns: need at least 2 rows");
  VectorX<Scalar> sds(d);
  for (Index k = 0; k < d; ++k) {
    const Scalar mu = x.col(k).mean();
    const Scalar ss = (x.col(k).array() - mu).square().sum();
    const Scalar sd = std::sqrt(ss / static_cast<Scalar>(n - 1));
    if (!(sd > Scalar(0)))
      throw degenerate_data_error("standardize_columns: column " + std::to_string(k) +
                                  " has zero sample standard deviation");
    sds[k] = sd;
  }
  MatrixX<Scalar> out = x.array().rowwise() / sds.transpose().array();
  return {std::move(out), std::move(sds)};
}

// Center and whiten: Z = (X - mean) O' with O = Lambda^{-1/2} Upsilon'.
// The output has sample covariance I. Throws singular_covariance_error,
// naming the offending eigenvalue index, when some eigenvalue falls below
// 1e-12 times the largest.
template <typename Scalar>
std::pair<MatrixX<Scalar>, Whitening<Scalar>> whiten(const MatrixX<Scalar>& x) {
  const Index d = x.cols();
  require(x.rows() >= 2 && d >= 1, "whiten: need n >= 2, d >= 1");
  auto [centered, mu] = center(x);
  MatrixX<Scalar> cov = (centered.transpose() * centered) / static_cast<Scalar>(x.rows() - 1);

  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(cov);
  require(es.info() == Eigen::Success, "whiten: eigendecomposition failed");
  // Eigen returns ascending order; flip to descending.
  VectorX<Scalar> lambda = es.eigenvalues().reverse();
  MatrixX<Scalar> ups = es.eigenvectors().rowwise().reverse();
  for (Index j = 0; j < d; ++j) {
    Index imax = 0;
    ups.col(j).cwiseAbs().maxCoeff(&imax);
    if (ups(imax, j) < Scalar(0)) ups.col(j) = -ups.col(j);
  }
  const Scalar lmax = lambda[0];
  for (Index j = 0; j < d; ++j) {
    if (!(lambda[j] > Scalar(1e-12) * lmax))
      throw singular_covariance_error(
          "whiten: sample covariance is numerically singular (eigenvalue " +
              std::to_string(j) + " = " + std::to_string(static_cast<double>(lambda[j])) + ")",
          j);
  }

  Whitening<Scalar> w;
  w.mean = std::move(mu);
  w.eigenvalues = lambda;
  w.eigenvectors = ups;
  w.uncorrelating = lambda.array().rsqrt().matrix().asDiagonal() * ups.transpose();
  MatrixX<Scalar> z = centered * w.uncorrelating.transpose();
  return {std::move(z), std::move(w)};
}

// Residuals of a VAR(p) fitted by per-equation OLS with intercept.
// The result has n - p rows; each column is the residual of that variable
// regressed on p lags of all variables.
template <typename Scalar>
MatrixX<Scalar> var_ols_residuals(const MatrixX<Scalar>& y, Index p) {
  const Index n = y.rows(), d = y.cols();
  require(p >= 1, "var_ols_residuals: lag order must be >= 1");
  const Index rows = n - p;
  const Index k = d * p + 1;  // per-equation regressors incl. intercept
  if (rows < k)
    throw invalid_argument_error("var_ols_residuals: insufficient rows (" + std::to_string(n) +
                                 ") for VAR(" + std::to_string(p) + ") in " + std::to_string(d) +
                                 " variables");
  MatrixX<Scalar> design(rows, k);
  design.col(0).setOnes();
  for (Index lag = 1; lag <= p; ++lag)
    design.middleCols(1 + (lag - 1) * d, d) = y.middleRows(p - lag, rows);
  MatrixX<Scalar> response = y.bottomRows(rows);

  Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(design);
  if (qr.rank() < k)
    throw degenerate_data_error("var_ols_residuals: collinear regressors (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(k) + ")");
  MatrixX<Scalar> beta = qr.solve(response);
  return response - design * beta;
}

}  // namespace dcovica
