#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

// SO(d) is parameterized by p = d(d-1)/2 Givens angles theta_{i,j},
// 1 <= i < j <= d, stored row-major: (1,2),(1,3),...,(1,d),(2,3),...
// The rotation is W = Q^{(d-1)} ... Q^{(1)} with
// Q^{(k)} = Q_{k,d}(theta_{k,d}) ... Q_{k,k+1}(theta_{k,k+1}), so row k of W
// depends only on the angles of rows 1..k. The canonical domain is
// theta_{1,j} in [0, 2pi) and theta_{i,j} in [0, pi) for i > 1.

inline Index angle_count(Index d) { return d * (d - 1) / 2; }

// Dimension from the angle count; errors when p is not triangular.
inline Index dimension_from_angles(Index p) {
  const Index d = static_cast<Index>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(p))) / 2.0);
  require(angle_count(d) == p, "angle vector length " + std::to_string(p) +
                                   " is not d(d-1)/2 for any d");
  return d;
}

// Upper bound of each angle's canonical range, in storage order.
template <typename Scalar>
VectorX<Scalar> angle_upper_bounds(Index d) {
  VectorX<Scalar> ub(angle_count(d));
  Index t = 0;
  for (Index i = 0; i + 1 < d; ++i)
    for (Index j = i + 1; j < d; ++j)
      ub[t++] = (i == 0) ? Scalar(2) * std::numbers::pi_v<Scalar> : std::numbers::pi_v<Scalar>;
  return ub;
}

template <typename Scalar>
MatrixX<Scalar> givens(Index d, Index i, Index j, Scalar psi) {
  require(0 <= i && i < j && j < d, "givens: need 0 <= i < j < d (zero-based)");
  MatrixX<Scalar> q = MatrixX<Scalar>::Identity(d, d);
  const Scalar c = std::cos(psi), s = std::sin(psi);
  q(i, i) = c;
  q(j, j) = c;
  q(i, j) = -s;
  q(j, i) = s;
  return q;
}

namespace detail {

// Apply Q_{i,j}(psi) on the left of m, touching only rows i and j.
template <typename Scalar>
void apply_givens_left(MatrixX<Scalar>& m, Index i, Index j, Scalar psi) {
  const Scalar c = std::cos(psi), s = std::sin(psi);
  for (Index col = 0; col < m.cols(); ++col) {
    const Scalar vi = m(i, col), vj = m(j, col);
    m(i, col) = c * vi - s * vj;
    m(j, col) = s * vi + c * vj;
  }
}

// Apply Q_{i,j}(psi)' on the right of m, touching only columns i and j.
template <typename Scalar>
void apply_givens_transpose_right(MatrixX<Scalar>& m, Index i, Index j, Scalar psi) {
  const Scalar c = std::cos(psi), s = std::sin(psi);
  for (Index row = 0; row < m.rows(); ++row) {
    const Scalar vi = m(row, i), vj = m(row, j);
    m(row, i) = c * vi - s * vj;
    m(row, j) = s * vi + c * vj;
  }
}

template <typename Scalar>
Scalar theta_at(const VectorX<Scalar>& theta, Index d, Index i, Index j) {
  // row-major triangular offset of pair (i,j), zero-based
  const Index off = i * d - i * (i + 1) / 2;
  return theta[off + (j - i - 1)];
}

}  // namespace detail

// Product Q^{(k)} ... Q^{(1)} (k rotations rows, zero-based: rows 0..k-1).
// Its leading k rows equal those of the full rotation.
template <typename Scalar>
MatrixX<Scalar> partial_product_rows(const VectorX<Scalar>& theta, Index k) {
  const Index d = dimension_from_angles(theta.size());
  require(1 <= k && k <= d - 1, "partial_product_rows: need 1 <= k <= d-1");
  MatrixX<Scalar> w = MatrixX<Scalar>::Identity(d, d);
  for (Index row = 0; row < k; ++row)
    for (Index j = row + 1; j < d; ++j)
      detail::apply_givens_left(w, row, j, detail::theta_at(theta, d, row, j));
  return w;
}

// Full rotation from angles. Trigonometric periodicity makes the product
// well defined for any real angles, so out-of-range values need no
// wrapping here; canonical reporting goes through theta_from_w.
template <typename Scalar>
MatrixX<Scalar> w_from_theta(const VectorX<Scalar>& theta) {
  const Index d = dimension_from_angles(theta.size());
  return partial_product_rows(theta, d - 1);
}

// Reduce angles modulo the full period, which leaves the rotation matrix
// untouched. Shifting a single non-first-row angle by pi alone does change
// W (the sign flip propagates through the rest of the product), so the
// exact canonical representative in the domain above comes from
// theta_from_w, not from per-angle reduction.
template <typename Scalar>
VectorX<Scalar> wrap_angles(const VectorX<Scalar>& theta) {
  constexpr Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  VectorX<Scalar> out(theta.size());
  for (Index t = 0; t < theta.size(); ++t) {
    Scalar v = std::fmod(theta[t], two_pi);
    if (v < Scalar(0)) v += two_pi;
    out[t] = v;
  }
  return out;
}

namespace detail {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Peel the Givens factors of row k off `a` by right-multiplying
// transposed rotations that zero a(k, j) for j > k. `shift_bits` adds pi
// to the stage angle where the corresponding bit is set (row-1 branch
// freedom). Returns false when the row cannot end at a(k,k) = +1.
template <typename Scalar>
bool peel_row(MatrixX<Scalar>& a, Index k, unsigned shift_bits, bool force_range,
              std::vector<Scalar>& angles_out) {
  const Index d = a.rows();
  for (Index j = k + 1; j < d; ++j) {
    Scalar psi = std::atan2(-a(k, j), a(k, k));
    if (force_range) {
      // rows below the first: representative in [0, pi)
      if (psi < Scalar(0)) psi += std::numbers::pi_v<Scalar>;
      if (psi >= std::numbers::pi_v<Scalar>) psi -= std::numbers::pi_v<Scalar>;
    } else if (shift_bits & (1u << (j - k - 1))) {
      psi += std::numbers::pi_v<Scalar>;
    }
    apply_givens_transpose_right(a, k, j, psi);
    Scalar wrapped = std::fmod(psi, static_cast<Scalar>(kTwoPi));
    if (wrapped < Scalar(0)) wrapped += static_cast<Scalar>(kTwoPi);
    angles_out.push_back(wrapped);
  }
  return a(k, k) > Scalar(0.5);  // must be ~ +1 for a valid peel
}

}  // namespace detail

// Inverse of w_from_theta: canonical angles with w_from_theta(theta) = W.
// Row 1 is peeled under each of its 2^(d-1) branch patterns (adding pi at
// a stage flips signs downstream); rows 2..d-1 then have forced [0, pi)
// representatives, and exactly one row-1 branch leaves every later row
// consistent. Throws on non-orthogonal input and on reflections (det -1).
template <typename Scalar>
VectorX<Scalar> theta_from_w(const MatrixX<Scalar>& w, Scalar tol = Scalar(1e-8)) {
  const Index d = w.rows();
  require(d >= 2 && w.cols() == d, "theta_from_w: need a square matrix, d >= 2");
  if ((w * w.transpose() - MatrixX<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff() > tol)
    throw invalid_argument_error("theta_from_w: input is not orthogonal");
  const Scalar det = w.determinant();
  if (det < Scalar(0))
    throw invalid_argument_error(
        "theta_from_w: input is a reflection (det = -1); flip the sign of one row first");

  const Index p = angle_count(d);
  std::vector<Scalar> best;
  for (unsigned bits = 0; bits < (1u << (d - 1)); ++bits) {
    MatrixX<Scalar> a = w;
    std::vector<Scalar> angles;
    angles.reserve(static_cast<std::size_t>(p));
    if (!detail::peel_row(a, 0, bits, /*force_range=*/false, angles)) continue;
    bool ok = true;
    for (Index k = 1; k + 1 < d && ok; ++k)
      ok = detail::peel_row(a, k, 0, /*force_range=*/true, angles);
    if (ok) {
      best = std::move(angles);
      break;
    }
  }
  require(!best.empty(), "theta_from_w: no canonical decomposition found");
  VectorX<Scalar> theta(p);
  for (Index t = 0; t < p; ++t) theta[t] = best[static_cast<std::size_t>(t)];
  return theta;
}

// Flip row signs so each row's maximum-modulus entry is positive. Display
// canonicalization only: the result may be a reflection, so it never feeds
// back into estimation.
template <typename Scalar>
MatrixX<Scalar> canonicalize_row_signs(const MatrixX<Scalar>& w) {
  MatrixX<Scalar> out = w;
  for (Index i = 0; i < out.rows(); ++i) {
    Index jmax = 0;
    out.row(i).cwiseAbs().maxCoeff(&jmax);
    if (out(i, jmax) < Scalar(0)) out.row(i) = -out.row(i);
  }
  return out;
}

}  // namespace dcovica
