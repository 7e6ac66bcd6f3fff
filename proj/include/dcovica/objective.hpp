#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcovica/core.hpp"
#include "dcovica/dcov.hpp"
#include "dcovica/normal.hpp"
#include "dcovica/pit.hpp"
#include "dcovica/rotations.hpp"

namespace dcovica {

// Objective evaluator for one whitened dataset Z. Holds the packed matrix
// of full-space squared row distances, which rotations leave invariant:
// the distance between rows of the trailing source block k+1..d is then
// sqrt(fullsq - sum of leading column contributions), so one O(n^2 d) pass
// yields every summand of the objective without materializing distance
// matrices. Const methods only touch local scratch and are safe to call
// concurrently on one instance.
template <typename Scalar>
class IcaObjective {
 public:
  explicit IcaObjective(MatrixX<Scalar> z) : z_(std::move(z)), n_(z_.rows()), d_(z_.cols()) {
    require(n_ >= 3, "objective: need n >= 3");
    require(d_ >= 2, "objective: need d >= 2");
    off_.resize(static_cast<std::size_t>(n_));
    std::size_t o = 0;
    for (Index i = 0; i < n_; ++i) {
      off_[static_cast<std::size_t>(i)] = o;
      o += static_cast<std::size_t>(n_ - 1 - i);
    }
    fullsq_.resize(o);
    for (Index i = 0; i + 1 < n_; ++i) {
      Scalar* row = fullsq_.data() + off_[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < n_; ++j)
        row[j - i - 1] = (z_.row(i) - z_.row(j)).squaredNorm();
    }
  }

  Index n() const { return n_; }
  Index d() const { return d_; }
  Index p() const { return angle_count(d_); }
  const MatrixX<Scalar>& data() const { return z_; }

  // J_n(theta) = sum_k I_n(S_k, S_{k+}) with S = Z W_theta'.
  Scalar dcov(const VectorX<Scalar>& theta) const {
    const MatrixX<Scalar> s = z_ * w_from_theta(theta).transpose();
    const auto stats = pair_stats(s, 0, d_ - 1);
    Scalar total = 0;
    for (Scalar v : stats) total += v;
    return total;
  }

  // J~_n(theta): every column of S is passed through its smoothed CDF
  // (bandwidth refit from the current column) before the distances.
  Scalar pitdcov(const VectorX<Scalar>& theta, Scalar bandwidth_scale) const {
    MatrixX<Scalar> s = z_ * w_from_theta(theta).transpose();
    MatrixX<Scalar> u(n_, d_);
    for (Index k = 0; k < d_; ++k)
      pit_column(s.col(k).data(), u.col(k).data(), bandwidth_scale);
    const auto stats = dcov_block_summands(u, d_ - 1);
    Scalar total = 0;
    for (Scalar v : stats) total += v;
    return total;
  }

  // Stage summand I_n(S_k, S_{k+}) (zero-based k). Only rows 1..k+1 of
  // W_theta enter, so the value is bit-identical under any change to the
  // angles of later rows.
  Scalar dcov_stage(const VectorX<Scalar>& theta, Index k) const {
    require(0 <= k && k < d_ - 1, "dcov_stage: stage index out of range");
    const MatrixX<Scalar> rows = partial_product_rows(theta, k + 1).topRows(k + 1);
    const MatrixX<Scalar> s = z_ * rows.transpose();  // n x (k+1)
    return pair_stats(s, k, 1)[0];
  }

  // PIT stage summand. The trailing block is taken in the canonical frame
  // with all later-row angles at zero, which makes the stage value
  // independent of the caller's (arbitrary) later angles by construction.
  Scalar pitdcov_stage(const VectorX<Scalar>& theta, Index k, Scalar bandwidth_scale) const {
    require(0 <= k && k < d_ - 1, "pitdcov_stage: stage index out of range");
    VectorX<Scalar> canon = theta;
    Index t = 0;
    for (Index i = 0; i + 1 < d_; ++i)
      for (Index j = i + 1; j < d_; ++j, ++t)
        if (i > k) canon[t] = Scalar(0);
    MatrixX<Scalar> s = z_ * w_from_theta(canon).transpose();
    MatrixX<Scalar> u(n_, d_ - k);
    for (Index c = k; c < d_; ++c)
      pit_column(s.col(c).data(), u.col(c - k).data(), bandwidth_scale);
    return dcov_block_summands(u, 1)[0];
  }

 private:
  // I_n(S_k, S_{k+}) for k = kfirst .. kfirst+npairs-1 in one pass over
  // row pairs. s holds the leading source columns; trailing-block
  // distances come from the invariant full-space squared distances minus
  // the leading-column terms, except the final single-column block, which
  // is taken directly. Fixed summation order.
  std::vector<Scalar> pair_stats(const MatrixX<Scalar>& s, Index kfirst, Index npairs) const {
    const Index n = n_;
    const Index cols = s.cols();

    std::vector<Scalar> sumab(static_cast<std::size_t>(npairs), Scalar(0));
    MatrixX<Scalar> arow = MatrixX<Scalar>::Zero(n, npairs);
    MatrixX<Scalar> brow = MatrixX<Scalar>::Zero(n, npairs);
    std::vector<Scalar> dif(static_cast<std::size_t>(n) * static_cast<std::size_t>(cols));
    std::vector<Scalar> acc(static_cast<std::size_t>(n));

    for (Index i = 0; i + 1 < n; ++i) {
      const Index m = n - 1 - i;
      for (Index l = 0; l < cols; ++l) {
        const Scalar* col = s.col(l).data();
        const Scalar si = col[i];
        Scalar* dl = dif.data() + static_cast<std::size_t>(l) * static_cast<std::size_t>(n);
        for (Index t = 0; t < m; ++t) dl[t] = si - col[i + 1 + t];
      }
      const Scalar* fsq = fullsq_.data() + off_[static_cast<std::size_t>(i)];
      std::copy(fsq, fsq + m, acc.begin());
      for (Index k = 0; k < cols; ++k) {
        const Scalar* dk = dif.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(n);
        for (Index t = 0; t < m; ++t) acc[static_cast<std::size_t>(t)] -= dk[t] * dk[t];
        if (k < kfirst || k - kfirst >= npairs) continue;
        const Index out = k - kfirst;
        const bool direct = (k == d_ - 2 && cols == d_);
        const Scalar* dn =
            direct ? dif.data() + static_cast<std::size_t>(d_ - 1) * static_cast<std::size_t>(n)
                   : nullptr;
        Scalar sab = 0, sa = 0, sb = 0;
        Scalar* ar = arow.col(out).data();
        Scalar* br = brow.col(out).data();
        for (Index t = 0; t < m; ++t) {
          const Scalar a = std::abs(dk[t]);
          Scalar b;
          if (direct) {
            b = std::abs(dn[t]);
          } else {
            const Scalar r = acc[static_cast<std::size_t>(t)];
            b = std::sqrt(r > Scalar(0) ? r : Scalar(0));
          }
          sab += a * b;
          sa += a;
          sb += b;
          ar[i + 1 + t] += a;
          br[i + 1 + t] += b;
        }
        sumab[static_cast<std::size_t>(out)] += sab;
        ar[i] += sa;
        br[i] += sb;
      }
    }

    const Scalar npr = static_cast<Scalar>(n) * static_cast<Scalar>(n - 1);
    std::vector<Scalar> stats(static_cast<std::size_t>(npairs));
    for (Index out = 0; out < npairs; ++out) {
      const Scalar ab2 = Scalar(2) * sumab[static_cast<std::size_t>(out)];
      const Scalar atot = arow.col(out).sum();
      const Scalar btot = brow.col(out).sum();
      const Scalar t1 = ab2 / npr;
      const Scalar t2 = (atot / npr) * (btot / npr);
      const Scalar t3 =
          Scalar(2) * (arow.col(out).dot(brow.col(out)) - ab2) / (npr * static_cast<Scalar>(n - 2));
      stats[static_cast<std::size_t>(out)] = t1 + t2 - t3;
    }
    return stats;
  }

  // Smoothed PIT of one column, matching smoothed_pit to ~1e-9: kernels
  // further than kPitCut bandwidths are saturated to 0/1, each in-window
  // pair is evaluated once through the tabulated Gaussian CDF using
  // G(x) + G(-x) = 1, and the Silverman bandwidth is refit from the
  // column. Fixed accumulation order.
  static constexpr double kPitCut = 6.0;  // G(-6) ~ 1e-9

  void pit_column(const Scalar* src, Scalar* dst, Scalar bandwidth_scale) const {
    const Index n = n_;
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index(0));
    std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return src[a] < src[b]; });
    std::vector<Scalar> sorted(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t)
      sorted[static_cast<std::size_t>(t)] = src[idx[static_cast<std::size_t>(t)]];

    Scalar mean = 0;
    for (Scalar v : sorted) mean += v;
    mean /= static_cast<Scalar>(n);
    Scalar ss = 0;
    for (Scalar v : sorted) ss += (v - mean) * (v - mean);
    const Scalar sd = std::sqrt(ss / static_cast<Scalar>(n - 1));
    const Scalar h = bandwidth_scale * detail::silverman_from_sorted(sorted, sd);
    if (!(h > Scalar(0)))
      throw degenerate_data_error("objective: degenerate source column in smoothed PIT");

    const Scalar cut = static_cast<Scalar>(kPitCut) * h;
    const Scalar invh = Scalar(1) / h;
    const auto& table = detail::norm_cdf_table();
    std::vector<double> acc(static_cast<std::size_t>(n), 0.5);  // self kernel G(0)
    // saturated pairs: every knot below t's window adds a full kernel
    std::size_t lo = 0;
    for (Index t = 0; t < n; ++t) {
      const Scalar x = sorted[static_cast<std::size_t>(t)];
      while (sorted[lo] < x - cut) ++lo;
      acc[static_cast<std::size_t>(t)] += static_cast<double>(lo);
    }
    // in-window pairs, each evaluated once
    for (Index t = 0; t + 1 < n; ++t) {
      const Scalar x = sorted[static_cast<std::size_t>(t)];
      for (Index w = t + 1; w < n; ++w) {
        const Scalar delta = sorted[static_cast<std::size_t>(w)] - x;
        if (delta > cut) break;
        const double g = table(static_cast<double>(-delta * invh));  // G((x_t - x_w)/h)
        acc[static_cast<std::size_t>(t)] += g;
        acc[static_cast<std::size_t>(w)] += 1.0 - g;
      }
    }
    const double eps_lo = std::numeric_limits<double>::min();
    const double eps_hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    for (Index t = 0; t < n; ++t) {
      double u = acc[static_cast<std::size_t>(t)] / static_cast<double>(n);
      u = std::min(std::max(u, eps_lo), eps_hi);
      dst[idx[static_cast<std::size_t>(t)]] = static_cast<Scalar>(u);
    }
  }

  MatrixX<Scalar> z_;
  Index n_;
  Index d_;
  std::vector<Scalar> fullsq_;
  std::vector<std::size_t> off_;
};

// One-shot evaluations of the two objectives (fit loops construct the
// evaluator once instead).
template <typename Scalar>
Scalar objective_dcov(const VectorX<Scalar>& theta, const MatrixX<Scalar>& z) {
  return IcaObjective<Scalar>(z).dcov(theta);
}

template <typename Scalar>
Scalar objective_pitdcov(const VectorX<Scalar>& theta, const MatrixX<Scalar>& z,
                         Scalar bandwidth_scale = Scalar(1)) {
  return IcaObjective<Scalar>(z).pitdcov(theta, bandwidth_scale);
}

}  // namespace dcovica
