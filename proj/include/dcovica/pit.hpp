#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcovica/core.hpp"
#include "dcovica/normal.hpp"

namespace dcovica {

// Normalized marginal ranks: entry (i,k) is rank of s(i,k) within column k
// divided by n, ties resolved by average rank. Values lie in (0, 1].
template <typename Scalar>
MatrixX<Scalar> rank_transform(const MatrixX<Scalar>& s) {
  const Index n = s.rows(), d = s.cols();
  require(n >= 1, "rank_transform: empty input");
  MatrixX<Scalar> out(n, d);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index k = 0; k < d; ++k) {
    std::iota(order.begin(), order.end(), Index(0));
    const auto col = s.col(k);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return col[a] < col[b]; });
    Index i = 0;
    while (i < n) {
      Index j = i;
      while (j + 1 < n && col[order[static_cast<std::size_t>(j + 1)]] ==
                              col[order[static_cast<std::size_t>(i)]])
        ++j;
      // ranks i+1 .. j+1 share the average rank
      const Scalar avg = static_cast<Scalar>(i + j + 2) / Scalar(2);
      for (Index t = i; t <= j; ++t)
        out(order[static_cast<std::size_t>(t)], k) = avg / static_cast<Scalar>(n);
      i = j + 1;
    }
  }
  return out;
}

namespace detail {

// Quantile with linear interpolation between order statistics (R type 7).
template <typename Scalar>
Scalar sorted_quantile(const std::vector<Scalar>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return static_cast<Scalar>((1.0 - frac) * static_cast<double>(sorted[lo]) +
                             frac * static_cast<double>(sorted[lo + 1]));
}

template <typename Scalar>
Scalar silverman_from_sorted(const std::vector<Scalar>& sorted, Scalar sd) {
  const std::size_t n = sorted.size();
  const Scalar iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  const Scalar spread = std::min(sd, iqr / Scalar(1.34));
  return Scalar(0.9) * spread * std::pow(static_cast<Scalar>(n), Scalar(-0.2));
}

}  // namespace detail

// Silverman's rule: 0.9 min(sd, IQR/1.34) n^{-1/5}.
template <typename Scalar>
Scalar silverman_bandwidth(const VectorX<Scalar>& col) {
  const Index n = col.size();
  require(n >= 2, "silverman_bandwidth: need n >= 2");
  const Scalar mu = col.mean();
  const Scalar sd = std::sqrt((col.array() - mu).square().sum() / static_cast<Scalar>(n - 1));
  std::vector<Scalar> sorted(col.data(), col.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const Scalar h = detail::silverman_from_sorted(sorted, sd);
  if (!(h > Scalar(0)))
    throw degenerate_data_error("silverman_bandwidth: degenerate column (zero spread)");
  return h;
}

// Kernel-smoothed empirical CDF: F(s) = (1/n) sum_i G((s - knot_i)/h) with
// G the standard Gaussian CDF. Strictly increasing for h > 0, maps into (0,1).
template <typename Scalar>
class SmoothedCdf {
 public:
  SmoothedCdf(const VectorX<Scalar>& column, Scalar bandwidth)
      : knots_(column.data(), column.data() + column.size()), bandwidth_(bandwidth) {
    require(bandwidth > Scalar(0), "SmoothedCdf: bandwidth must be positive");
    require(!knots_.empty(), "SmoothedCdf: empty column");
    std::sort(knots_.begin(), knots_.end());
  }

  Scalar operator()(Scalar s) const {
    double acc = 0.0;
    for (const Scalar k : knots_)
      acc += norm_cdf(static_cast<double>((s - k) / bandwidth_));
    double u = acc / static_cast<double>(knots_.size());
    // keep the image strictly inside (0,1) even when every kernel underflows
    const double lo = std::numeric_limits<double>::min();
    u = std::min(std::max(u, lo), 1.0 - std::numeric_limits<double>::epsilon() / 2);
    return static_cast<Scalar>(u);
  }

  const std::vector<Scalar>& knots() const { return knots_; }
  Scalar bandwidth() const { return bandwidth_; }

 private:
  std::vector<Scalar> knots_;
  Scalar bandwidth_;
};

// Column-wise smoothed probability integral transform. Column k is mapped
// through its own smoothed CDF with bandwidth
// bandwidth_scale * silverman_bandwidth(column k).
template <typename Scalar>
MatrixX<Scalar> smoothed_pit(const MatrixX<Scalar>& s, Scalar bandwidth_scale = Scalar(1)) {
  const Index n = s.rows(), d = s.cols();
  require(n >= 2, "smoothed_pit: need n >= 2");
  require(bandwidth_scale > Scalar(0), "smoothed_pit: bandwidth scale must be positive");
  MatrixX<Scalar> out(n, d);
  for (Index k = 0; k < d; ++k) {
    const VectorX<Scalar> col = s.col(k);
    const Scalar h = bandwidth_scale * silverman_bandwidth(col);
    SmoothedCdf<Scalar> cdf(col, h);
    for (Index i = 0; i < n; ++i) out(i, k) = cdf(col[i]);
  }
  return out;
}

}  // namespace dcovica
