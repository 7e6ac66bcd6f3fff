#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "dcovica/core.hpp"

namespace dcovica {

template <typename Scalar>
struct NelderMeadResult {
  VectorX<Scalar> x;
  Scalar value = 0;
  Index iterations = 0;
  Index evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex search with the standard reflection/expansion/
// contraction/shrink coefficients. Stops when the simplex value spread
// falls below f_tol or after max_iters iterations.
template <typename Scalar>
NelderMeadResult<Scalar> nelder_mead(const std::function<Scalar(const VectorX<Scalar>&)>& f,
                                     const VectorX<Scalar>& x0, Scalar step, Scalar f_tol,
                                     Index max_iters) {
  const Index p = x0.size();
  const Scalar alpha = 1, gamma = 2, rho = Scalar(0.5), sigma = Scalar(0.5);

  std::vector<VectorX<Scalar>> x(static_cast<std::size_t>(p + 1));
  std::vector<Scalar> fx(static_cast<std::size_t>(p + 1));
  Index evals = 0;
  x[0] = x0;
  fx[0] = f(x0);
  ++evals;
  for (Index i = 0; i < p; ++i) {
    VectorX<Scalar> xi = x0;
    xi[i] += step;
    x[static_cast<std::size_t>(i + 1)] = xi;
    fx[static_cast<std::size_t>(i + 1)] = f(xi);
    ++evals;
  }

  std::vector<std::size_t> ord(static_cast<std::size_t>(p + 1));
  NelderMeadResult<Scalar> res;
  for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
      return fx[a] < fx[b] || (fx[a] == fx[b] && a < b);
    });
    const std::size_t ibest = ord.front(), iworst = ord.back(), isecond = ord[ord.size() - 2];
    if (std::abs(fx[iworst] - fx[ibest]) <= f_tol) {
      res.converged = true;
      break;
    }

    VectorX<Scalar> centroid = VectorX<Scalar>::Zero(p);
    for (std::size_t t = 0; t + 1 < ord.size(); ++t) centroid += x[ord[t]];
    centroid /= static_cast<Scalar>(p);

    const VectorX<Scalar> xr = centroid + alpha * (centroid - x[iworst]);
    const Scalar fr = f(xr);
    ++evals;
    if (fr < fx[ibest]) {
      const VectorX<Scalar> xe = centroid + gamma * (xr - centroid);
      const Scalar fe = f(xe);
      ++evals;
      if (fe < fr) {
        x[iworst] = xe;
        fx[iworst] = fe;
      } else {
        x[iworst] = xr;
        fx[iworst] = fr;
      }
    } else if (fr < fx[isecond]) {
      x[iworst] = xr;
      fx[iworst] = fr;
    } else {
      const bool outside = fr < fx[iworst];
      const VectorX<Scalar> xc =
          outside ? (centroid + rho * (xr - centroid)).eval()
                  : (centroid + rho * (x[iworst] - centroid)).eval();
      const Scalar fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : fx[iworst])) {
        x[iworst] = xc;
        fx[iworst] = fc;
      } else {
        for (std::size_t t = 1; t < ord.size(); ++t) {
          x[ord[t]] = x[ord[0]] + sigma * (x[ord[t]] - x[ord[0]]);
          fx[ord[t]] = f(x[ord[t]]);
          ++evals;
        }
      }
    }
  }

  std::size_t ibest = 0;
  for (std::size_t t = 1; t < fx.size(); ++t)
    if (fx[t] < fx[ibest]) ibest = t;
  res.x = x[ibest];
  res.value = fx[ibest];
  res.evaluations = evals;
  return res;
}

}  // namespace dcovica
