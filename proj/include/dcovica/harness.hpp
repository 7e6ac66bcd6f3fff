#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "dcovica/core.hpp"
#include "dcovica/estimator.hpp"
#include "dcovica/metrics.hpp"
#include "dcovica/parallel.hpp"
#include "dcovica/rng.hpp"
#include "dcovica/rotations.hpp"

namespace dcovica {

enum class SourceFamily {
  student_t,
  uniform,
  exponential,
  exp_mixture,
  gauss_mixture_sym,
  gauss_mixture_asym,
};

inline const char* family_name(SourceFamily f) {
  switch (f) {
    case SourceFamily::student_t: return "student_t";
    case SourceFamily::uniform: return "uniform";
    case SourceFamily::exponential: return "exponential";
    case SourceFamily::exp_mixture: return "exp_mixture";
    case SourceFamily::gauss_mixture_sym: return "gauss_mixture_sym";
    case SourceFamily::gauss_mixture_asym: return "gauss_mixture_asym";
  }
  return "?";
}

// One benchmark source distribution. Samples are standardized to mean 0,
// variance 1 using the closed-form moments of the family.
struct SourceDistribution {
  std::string label;
  SourceFamily family = SourceFamily::uniform;
  std::function<double(Rng&)> raw_sampler;
  double mean = 0;  // population mean of the raw sampler
  double sd = 1;    // population sd of the raw sampler

  template <typename Scalar>
  VectorX<Scalar> sample(Rng& rng, Index n) const {
    VectorX<Scalar> v(n);
    for (Index i = 0; i < n; ++i)
      v[i] = static_cast<Scalar>((raw_sampler(rng) - mean) / sd);
    return v;
  }
};

inline constexpr const char* kSourceCatalogVersion = "catalog-v1";

namespace detail {

struct MixtureComponent {
  double weight, mu, sigma;
};

inline SourceDistribution gaussian_mixture(std::string label, SourceFamily family,
                                           std::vector<MixtureComponent> comps) {
  double mean = 0, second = 0;
  for (const auto& c : comps) {
    mean += c.weight * c.mu;
    second += c.weight * (c.sigma * c.sigma + c.mu * c.mu);
  }
  SourceDistribution d;
  d.label = std::move(label);
  d.family = family;
  d.mean = mean;
  d.sd = std::sqrt(second - mean * mean);
  d.raw_sampler = [comps](Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0;
    for (const auto& c : comps) {
      acc += c.weight;
      if (u < acc || &c == &comps.back()) return c.mu + c.sigma * rng.normal();
    }
    return comps.back().mu + comps.back().sigma * rng.normal();
  };
  return d;
}

inline double student_t_draw(Rng& rng, int dof) {
  double chi2 = 0;
  for (int i = 0; i < dof; ++i) {
    const double z = rng.normal();
    chi2 += z * z;
  }
  return rng.normal() / std::sqrt(chi2 / dof);
}

}  // namespace detail

// The 18 benchmark source distributions: Student-t, uniform, exponential,
// exponential mixtures (including the symmetric double exponential), and
// symmetric/asymmetric Gaussian mixtures of 2-4 components with varying
// separations. Parameters are documented in share/source_catalog.conf and
// pinned by tests; bump kSourceCatalogVersion on any change.
inline const std::vector<SourceDistribution>& source_catalog() {
  static const std::vector<SourceDistribution> catalog = [] {
    using detail::gaussian_mixture;
    using detail::MixtureComponent;
    std::vector<SourceDistribution> c;

    SourceDistribution t3{"t3", SourceFamily::student_t,
                          [](Rng& r) { return detail::student_t_draw(r, 3); }, 0.0,
                          std::sqrt(3.0)};
    c.push_back(t3);
    SourceDistribution t5{"t5", SourceFamily::student_t,
                          [](Rng& r) { return detail::student_t_draw(r, 5); }, 0.0,
                          std::sqrt(5.0 / 3.0)};
    c.push_back(t5);
    SourceDistribution unif{"uniform", SourceFamily::uniform,
                            [](Rng& r) { return r.uniform(-1.0, 1.0); }, 0.0,
                            std::sqrt(1.0 / 3.0)};
    c.push_back(unif);
    SourceDistribution expo{"exponential", SourceFamily::exponential,
                            [](Rng& r) { return r.exponential(); }, 1.0, 1.0};
    c.push_back(expo);
    // symmetric exponential mixture = double exponential (Laplace)
    SourceDistribution dexp{"double_exponential", SourceFamily::exp_mixture,
                            [](Rng& r) { return r.coin() ? r.exponential() : -r.exponential(); },
                            0.0, std::sqrt(2.0)};
    c.push_back(dexp);
    // asymmetric exponential mixtures: rate-1 right tail vs heavier left tail
    {
      SourceDistribution m{"exp_mix_a", SourceFamily::exp_mixture,
                           [](Rng& r) {
                             return r.uniform01() < 0.5 ? r.exponential() : -2.0 * r.exponential();
                           },
                           -0.5, std::sqrt(4.75)};
      c.push_back(m);
    }
    {
      SourceDistribution m{"exp_mix_b", SourceFamily::exp_mixture,
                           [](Rng& r) {
                             return r.uniform01() < 0.75 ? r.exponential() : -r.exponential();
                           },
                           0.5, std::sqrt(1.75)};
      c.push_back(m);
    }

    c.push_back(gaussian_mixture("gmix_sym_wide", SourceFamily::gauss_mixture_sym,
                                 {{0.5, -3.0, 1.0}, {0.5, 3.0, 1.0}}));
    c.push_back(gaussian_mixture("gmix_sym_mid", SourceFamily::gauss_mixture_sym,
                                 {{0.5, -1.7, 1.0}, {0.5, 1.7, 1.0}}));
    c.push_back(gaussian_mixture("gmix_sym_close", SourceFamily::gauss_mixture_sym,
                                 {{0.5, -1.0, 1.0}, {0.5, 1.0, 1.0}}));
    c.push_back(gaussian_mixture("gmix_sym_quad", SourceFamily::gauss_mixture_sym,
                                 {{0.25, -3.0, 0.5}, {0.25, -1.0, 0.5}, {0.25, 1.0, 0.5},
                                  {0.25, 3.0, 0.5}}));
    c.push_back(gaussian_mixture("gmix_sym_quad_close", SourceFamily::gauss_mixture_sym,
                                 {{0.25, -2.0, 0.7}, {0.25, -0.7, 0.7}, {0.25, 0.7, 0.7},
                                  {0.25, 2.0, 0.7}}));
    c.push_back(gaussian_mixture("gmix_asym_a", SourceFamily::gauss_mixture_asym,
                                 {{0.75, -1.0, 1.0}, {0.25, 3.0, 0.5}}));
    c.push_back(gaussian_mixture("gmix_asym_b", SourceFamily::gauss_mixture_asym,
                                 {{0.6, -2.0, 1.0}, {0.4, 3.0, 1.0}}));
    c.push_back(gaussian_mixture("gmix_asym_c", SourceFamily::gauss_mixture_asym,
                                 {{0.85, 0.0, 1.0}, {0.15, 4.0, 0.8}}));
    c.push_back(gaussian_mixture("gmix_asym_tri", SourceFamily::gauss_mixture_asym,
                                 {{0.5, -2.0, 1.0}, {0.3, 1.0, 0.6}, {0.2, 4.0, 0.4}}));
    c.push_back(gaussian_mixture("gmix_asym_quad", SourceFamily::gauss_mixture_asym,
                                 {{0.4, -3.0, 0.8}, {0.3, -1.0, 0.8}, {0.2, 1.0, 0.6},
                                  {0.1, 4.0, 0.5}}));
    c.push_back(gaussian_mixture("bimodal_sharp", SourceFamily::gauss_mixture_sym,
                                 {{0.5, -2.0, 0.25}, {0.5, 2.0, 0.25}}));
    return c;
  }();
  return catalog;
}

inline const SourceDistribution& source_by_label(const std::string& label) {
  for (const auto& d : source_catalog())
    if (d.label == label) return d;
  throw invalid_argument_error("unknown source distribution: " + label);
}

// Random mixing matrix M = U diag(sigma) V' with Haar-random U, V and the
// condition number sigma_max/sigma_min uniform on [cond_lo, cond_hi].
template <typename Scalar>
MatrixX<Scalar> random_mixing(Index d, Scalar cond_lo, Scalar cond_hi, Rng& rng) {
  require(d >= 1, "random_mixing: need d >= 1");
  require(Scalar(1) <= cond_lo && cond_lo <= cond_hi, "random_mixing: need 1 <= cond_lo <= cond_hi");

  auto haar = [&](Index dim) {
    MatrixX<Scalar> g = rng.normal_matrix<Scalar>(dim, dim);
    Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
    MatrixX<Scalar> q = qr.householderQ();
    const MatrixX<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (Index j = 0; j < dim; ++j)
      if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
    return q;
  };
  const MatrixX<Scalar> u = haar(d);
  const MatrixX<Scalar> v = haar(d);
  const Scalar kappa = static_cast<Scalar>(rng.uniform(static_cast<double>(cond_lo),
                                                       static_cast<double>(cond_hi)));
  VectorX<Scalar> sigma(d);
  sigma[0] = Scalar(1);
  if (d > 1) sigma[d - 1] = Scalar(1) / kappa;
  for (Index i = 1; i + 1 < d; ++i)
    sigma[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(Scalar(1) / kappa), 1.0));
  return u * sigma.asDiagonal() * v.transpose();
}

template <typename Scalar>
MatrixX<Scalar> random_mixing(Index d, Scalar cond_lo, Scalar cond_hi, std::uint64_t seed) {
  Rng rng(seed, 0x6d697831u);
  return random_mixing(d, cond_lo, cond_hi, rng);
}

// Simplified FastICA baseline: symmetric fixed-point iteration with the
// log-cosh contrast (g = tanh) and symmetric decorrelation, from a random
// orthogonal start. Returns an orthogonal separating matrix flipped to
// determinant +1.
template <typename Scalar>
IcaFit<Scalar> fastica_baseline(const MatrixX<Scalar>& z, std::uint64_t seed,
                                const MatrixX<Scalar>* uncorrelating = nullptr,
                                Scalar tol = Scalar(1e-8), Index max_iter = 500) {
  const Index n = z.rows(), d = z.cols();
  require(n >= 2 && d >= 2, "fastica_baseline: need n >= 2, d >= 2");

  Rng rng(seed, 0x66696361u);
  MatrixX<Scalar> g = rng.normal_matrix<Scalar>(d, d);
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
  MatrixX<Scalar> w = qr.householderQ();

  auto sym_decorrelate = [&](const MatrixX<Scalar>& m) {
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(m * m.transpose());
    const MatrixX<Scalar> inv_sqrt = es.eigenvectors() *
                                     es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
                                     es.eigenvectors().transpose();
    return (inv_sqrt * m).eval();
  };
  w = sym_decorrelate(w);

  bool converged = false;
  for (Index it = 0; it < max_iter; ++it) {
    const MatrixX<Scalar> y = z * w.transpose();          // n x d projections
    const MatrixX<Scalar> gy = y.array().tanh().matrix(); // g(y)
    const VectorX<Scalar> gprime =
        (1 - gy.array().square()).colwise().mean();        // E[g'(y_k)]
    MatrixX<Scalar> w_new = (gy.transpose() * z) / static_cast<Scalar>(n) -
                            gprime.asDiagonal() * w;
    w_new = sym_decorrelate(w_new);
    const Scalar delta =
        ((w_new * w.transpose()).diagonal().cwiseAbs() - VectorX<Scalar>::Ones(d))
            .cwiseAbs()
            .maxCoeff();
    w = w_new;
    if (delta < tol) {
      converged = true;
      break;
    }
  }
  if (w.determinant() < Scalar(0)) w.row(0) = -w.row(0);  // sign ambiguity

  IcaFit<Scalar> fit;
  fit.w = w;
  fit.theta = theta_from_w(w);
  fit.sources = z * w.transpose();
  fit.objective = std::numeric_limits<Scalar>::quiet_NaN();  // different criterion
  fit.starts_evaluated = 1;
  fit.converged = converged;
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(d, d);
  if (uncorrelating) {
    fit.uncorrelating = *uncorrelating;
    fit.mixing = uncorrelating->partialPivLu().solve(w.transpose());
  } else {
    fit.uncorrelating = eye;
    fit.mixing = w.transpose();
  }
  return fit;
}

struct BenchmarkRecord {
  std::string method;
  Index d = 0;
  Index n = 0;
  Index sim = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> distributions;
  double error = 0;      // metric D against the true mixing matrix
  double wall_time_s = 0;
  bool ok = true;
};

struct BenchmarkSummary {
  std::string method;
  Index d = 0;
  Index n = 0;
  Index n_sims = 0;      // successful runs entering the means
  Index n_failed = 0;
  double mean_error = 0;
  double std_error = 0;  // sd / sqrt(n_sims)
  double mean_time_s = 0;
};

struct BenchmarkConfig {
  std::vector<std::string> methods;  // dcov_joint, dcov_seq, pitdcov_joint, pitdcov_seq, fastica
  Index d = 4;
  Index n = 1000;
  Index n_sims = 50;
  std::uint64_t seed = 1;
  Index n_starts = 1000;
  double bandwidth_scale = 1.0;
  double cond_lo = 1.0;
  double cond_hi = 2.0;
  int threads = 0;
};

namespace detail {

inline FitOptions options_for_method(const std::string& method, const BenchmarkConfig& cfg,
                                     std::uint64_t seed) {
  FitOptions o;
  o.n_starts = cfg.n_starts;
  o.bandwidth_scale = cfg.bandwidth_scale;
  o.seed = seed;
  o.threads = 1;
  if (method == "dcov_joint") {
    o.estimator = EstimatorKind::dcov;
    o.mode = FitMode::joint;
  } else if (method == "dcov_seq") {
    o.estimator = EstimatorKind::dcov;
    o.mode = FitMode::sequential;
  } else if (method == "pitdcov_joint") {
    o.estimator = EstimatorKind::pitdcov;
    o.mode = FitMode::joint;
  } else if (method == "pitdcov_seq") {
    o.estimator = EstimatorKind::pitdcov;
    o.mode = FitMode::sequential;
  } else if (method != "fastica") {
    throw invalid_argument_error("unknown benchmark method: " + method);
  }
  return o;
}

}  // namespace detail

// Per simulation: draw d catalog labels (without replacement), generate
// sources, mix through a random matrix with condition number in
// [cond_lo, cond_hi], then run every configured method on the same data.
// Simulations run in parallel; each derives its RNG from (seed, sim), so
// records do not depend on the thread count. Wall time covers the fit call
// only.
inline std::pair<std::vector<BenchmarkRecord>, std::vector<BenchmarkSummary>> run_benchmark(
    const BenchmarkConfig& cfg) {
  require(!cfg.methods.empty(), "run_benchmark: empty methods list");
  require(cfg.d >= 2 && cfg.d <= static_cast<Index>(source_catalog().size()),
          "run_benchmark: d out of range");
  require(cfg.n >= 10 && cfg.n_sims >= 1, "run_benchmark: bad n or n_sims");
  for (const auto& m : cfg.methods) detail::options_for_method(m, cfg, 0);  // validate names

  const auto& catalog = source_catalog();
  const std::size_t n_methods = cfg.methods.size();
  std::vector<BenchmarkRecord> records(static_cast<std::size_t>(cfg.n_sims) * n_methods);

  parallel_for(cfg.n_sims, cfg.threads, [&](std::int64_t sim) {
    Rng rng(cfg.seed, 0x62656e63u, static_cast<std::uint64_t>(sim));
    // d distinct catalog entries for this simulation
    std::vector<Index> labels;
    {
      auto perm = rng.permutation(static_cast<Index>(catalog.size()));
      labels.assign(perm.begin(), perm.begin() + cfg.d);
    }
    MatrixX<double> s0(cfg.n, cfg.d);
    for (Index k = 0; k < cfg.d; ++k)
      s0.col(k) = catalog[static_cast<std::size_t>(labels[static_cast<std::size_t>(k)])]
                      .sample<double>(rng, cfg.n);
    const MatrixX<double> m0 = random_mixing<double>(cfg.d, cfg.cond_lo, cfg.cond_hi, rng);
    const MatrixX<double> y0 = s0 * m0.transpose();

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      const std::string& method = cfg.methods[mi];
      BenchmarkRecord rec;
      rec.method = method;
      rec.d = cfg.d;
      rec.n = cfg.n;
      rec.sim = static_cast<Index>(sim);
      rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(sim));
      for (Index k = 0; k < cfg.d; ++k)
        rec.distributions.push_back(
            catalog[static_cast<std::size_t>(labels[static_cast<std::size_t>(k)])].label);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        IcaFit<double> fit;
        if (method == "fastica") {
          auto [z, wh] = whiten(y0);
          fit = fastica_baseline<double>(z, rec.seed, &wh.uncorrelating);
        } else {
          fit = fit_pipeline(y0, detail::options_for_method(method, cfg, rec.seed));
        }
        rec.error = mixing_error<double>(m0, fit.mixing).distance;
      } catch (const std::exception&) {
        rec.ok = false;
      }
      const auto t1 = std::chrono::steady_clock::now();
      rec.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
      records[static_cast<std::size_t>(sim) * n_methods + mi] = std::move(rec);
    }
  });

  std::vector<BenchmarkSummary> summaries;
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    BenchmarkSummary s;
    s.method = cfg.methods[mi];
    s.d = cfg.d;
    s.n = cfg.n;
    double sum = 0, sumsq = 0, time = 0;
    Index ok = 0, failed = 0;
    for (Index sim = 0; sim < cfg.n_sims; ++sim) {
      const auto& rec = records[static_cast<std::size_t>(sim) * n_methods + mi];
      if (!rec.ok) {
        ++failed;
        continue;
      }
      sum += rec.error;
      sumsq += rec.error * rec.error;
      time += rec.wall_time_s;
      ++ok;
    }
    s.n_sims = ok;
    s.n_failed = failed;
    if (ok > 0) {
      s.mean_error = sum / static_cast<double>(ok);
      s.mean_time_s = time / static_cast<double>(ok);
      if (ok > 1) {
        const double var = (sumsq - sum * sum / static_cast<double>(ok)) /
                           static_cast<double>(ok - 1);
        s.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(ok));
      }
    }
    summaries.push_back(s);
  }
  return {std::move(records), std::move(summaries)};
}

}  // namespace dcovica
