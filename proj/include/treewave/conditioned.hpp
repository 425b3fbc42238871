#pragma once

// Gibbs sampling of a path conditioned to stay above a level alpha, and the
// tail statistics used to probe entropic repulsion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treewave/error.hpp"
#include "treewave/gaussian.hpp"
#include "treewave/parallel.hpp"
#include "treewave/rng.hpp"
#include "treewave/spectral.hpp"

namespace treewave {

/// Full conditional of one path coordinate given the others: a Gaussian
/// with mean sum_j coeffs[j] * psi(neighbours[j]) and the given variance.
/// Only path neighbours within distance two enter (Markov property).
struct PositionConditional {
  std::vector<int> neighbours;  // 0-based path positions
  std::vector<double> coeffs;
  double variance = 1.0;

  double mean(std::span<const double> values) const {
    double m = 0.0;
    for (std::size_t j = 0; j < neighbours.size(); ++j) m += coeffs[j] * values[neighbours[j]];
    return m;
  }
};

struct GibbsPlan {
  int d = 3;
  double lambda = 0.0;
  std::vector<PositionConditional> positions;

  int n() const { return static_cast<int>(positions.size()); }
};

inline constexpr double kPlanAgreement = 1e-10;

namespace detail {

// Closed-form conditional-mean coefficients, keyed by 0-based position, where
// they apply: the two ends need the path to reach two (resp. three) vertices
// past them, the bulk needs two on each side.
inline std::optional<std::vector<std::pair<int, double>>> closed_form_coefficients(const SpectralPoint& point, int n,
                                                                                   int k) {
  const double d = point.d();
  const double lam = point.lambda();
  auto mirror = [n](std::vector<std::pair<int, double>> c) {
    for (auto& [pos, w] : c) pos = n - 1 - pos;
    return c;
  };
  auto end_one = [&]() -> std::vector<std::pair<int, double>> { return {{1, lam / (d - 1.0)}, {2, -1.0 / (d - 1.0)}}; };
  auto end_two = [&]() -> std::vector<std::pair<int, double>> {
    const double den = lam * lam + (d - 1.0) * (d - 1.0);
    return {{0, (d - 1.0) * lam / den}, {2, d * lam / den}, {3, -(d - 1.0) / den}};
  };
  if (k >= 2 && k <= n - 3) {
    const auto a = repulsion_coefficients(point);
    return std::vector<std::pair<int, double>>{
        {k - 2, -a.a2 / 2.0}, {k - 1, a.a1 / 2.0}, {k + 1, a.a1 / 2.0}, {k + 2, -a.a2 / 2.0}};
  }
  if (k == 0 && n >= 3) return end_one();
  if (k == n - 1 && n >= 3) return mirror(end_one());
  if (k == 1 && n >= 4) return end_two();
  if (k == n - 2 && n >= 4) return mirror(end_two());
  return std::nullopt;
}

}  // namespace detail

/// Per-position full conditionals of the path law, from the Schur complement
/// of the covariance restricted to path neighbours within distance two, and
/// cross-checked against the closed forms wherever those apply.
inline GibbsPlan build_gibbs_plan(const CovarianceProfile& profile, int n) {
  detail::require(n >= 1, "build_gibbs_plan: need at least one vertex");
  GibbsPlan plan;
  plan.d = profile.d();
  plan.lambda = profile.lambda();
  plan.positions.resize(n);
  for (int k = 0; k < n; ++k) {
    std::vector<int> window;
    for (int j = std::max(0, k - 2); j <= std::min(n - 1, k + 2); ++j)
      if (j != k) window.push_back(j);
    // Local covariance: index 0 is k itself, then the window.
    const auto size = static_cast<Eigen::Index>(window.size() + 1);
    std::vector<int> members{k};
    members.insert(members.end(), window.begin(), window.end());
    Eigen::MatrixXd cov(size, size);
    for (Eigen::Index i = 0; i < size; ++i)
      for (Eigen::Index j = 0; j < size; ++j) cov(i, j) = profile.phi(std::abs(members[i] - members[j]));
    std::vector<int> given(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) given[i] = static_cast<int>(i + 1);
    const std::vector<int> target{0};
    const auto cond = conditional(cov, given, target);

    auto& pos = plan.positions[k];
    pos.neighbours = window;
    pos.coeffs.resize(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) pos.coeffs[i] = cond.coeff(0, static_cast<Eigen::Index>(i));
    pos.variance = cond.residual(0, 0);
    if (!(pos.variance > 0.0)) throw NumericalError("build_gibbs_plan: degenerate full conditional at k=" + std::to_string(k + 1));

    if (const auto closed = detail::closed_form_coefficients(profile.point(), n, k)) {
      for (std::size_t i = 0; i < window.size(); ++i) {
        double expected = 0.0;
        for (const auto& [j, w] : *closed)
          if (j == window[i]) expected = w;
        if (std::abs(expected - pos.coeffs[i]) > kPlanAgreement) {
          throw NumericalError("build_gibbs_plan: closed-form and Schur coefficients disagree at k=" +
                               std::to_string(k + 1));
        }
      }
    }
  }
  return plan;
}

/// One retained state of a chain; every coordinate exceeds alpha.
struct ConditionedPathState {
  int sweep = 0;
  double alpha = 0.0;
  std::vector<double> values;

  int n() const { return static_cast<int>(values.size()); }
};

struct GibbsOptions {
  int sweeps = 11000;  // total, including burn-in
  int burnin = 1000;
  int thin = 10;
  /// Coordinates held fixed at the given value (0-based position, value).
  std::vector<std::pair<int, double>> pinned;
};

/// Systematic-scan Gibbs sampler of the path law conditioned on every
/// coordinate exceeding alpha. Full conditionals are lower-truncated
/// Gaussians. Starts from max(alpha, 0) + 1 everywhere.
inline std::vector<ConditionedPathState> gibbs_run(const GibbsPlan& plan, double alpha, const GibbsOptions& options,
                                                   RandomStream& rng) {
  detail::require(std::isfinite(alpha), "gibbs_run: alpha must be finite");
  detail::require(options.burnin >= 0, "gibbs_run: burn-in must be non-negative");
  detail::require(options.sweeps > options.burnin, "gibbs_run: sweeps must exceed burn-in");
  detail::require(options.thin >= 1, "gibbs_run: thin must be at least 1");
  const int n = plan.n();
  std::vector<double> values(n, std::max(alpha, 0.0) + 1.0);
  std::vector<char> frozen(n, 0);
  for (const auto& [k, v] : options.pinned) {
    detail::require(k >= 0 && k < n, "gibbs_run: pinned position out of range");
    detail::require(v > alpha, "gibbs_run: pinned value must exceed alpha");
    values[k] = v;
    frozen[k] = 1;
  }
  std::vector<ConditionedPathState> out;
  out.reserve(static_cast<std::size_t>((options.sweeps - options.burnin) / options.thin + 1));
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    for (int k = 0; k < n; ++k) {
      if (frozen[k]) continue;
      const auto& pos = plan.positions[k];
      const double x = sample_truncated({pos.mean(values), pos.variance, alpha}, rng);
      if (!std::isfinite(x)) throw NumericalError("gibbs_run: non-finite state at k=" + std::to_string(k + 1));
      values[k] = x;
    }
    if (sweep >= options.burnin && (sweep - options.burnin) % options.thin == 0)
      out.push_back(ConditionedPathState{sweep, alpha, values});
  }
  return out;
}

/// Independent chains with streams derived from (seed, chain index);
/// the result does not depend on the thread count.
inline std::vector<std::vector<ConditionedPathState>> gibbs_chains(const GibbsPlan& plan, double alpha,
                                                                   const GibbsOptions& options, std::uint64_t seed,
                                                                   int chains, unsigned threads = 1) {
  detail::require(chains >= 1, "gibbs_chains: need at least one chain");
  std::vector<std::vector<ConditionedPathState>> out(chains);
  parallel_for(static_cast<std::size_t>(chains), threads, [&](std::size_t c) {
    RandomStream rng(seed, c);
    out[c] = gibbs_run(plan, alpha, options, rng);
  });
  return out;
}

inline std::vector<ConditionedPathState> pool_chains(const std::vector<std::vector<ConditionedPathState>>& chains) {
  std::vector<ConditionedPathState> all;
  for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
  return all;
}

/// Mean of a correlated series with a batch-means standard error and the
/// implied effective sample size.
struct BatchMeans {
  double mean = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
};

inline BatchMeans batch_means(std::span<const double> series) {
  BatchMeans out;
  const auto n = series.size();
  if (n == 0) return out;
  double total = 0.0;
  for (double x : series) total += x;
  out.mean = total / static_cast<double>(n);
  double var = 0.0;
  for (double x : series) var += (x - out.mean) * (x - out.mean);
  var /= std::max<double>(1.0, static_cast<double>(n) - 1.0);
  const auto size = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  const auto batches = n / size;
  if (batches < 2 || var == 0.0) {
    out.std_error = std::sqrt(var / static_cast<double>(n));
    out.ess = static_cast<double>(n);
    return out;
  }
  double batch_var = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double m = 0.0;
    for (std::size_t i = b * size; i < (b + 1) * size; ++i) m += series[i];
    m /= static_cast<double>(size);
    batch_var += (m - out.mean) * (m - out.mean);
  }
  batch_var /= static_cast<double>(batches - 1);
  out.std_error = std::sqrt(batch_var / static_cast<double>(batches));
  // Never report more effective samples than draws.
  out.ess = std::min(static_cast<double>(n), var / (out.std_error * out.std_error));
  return out;
}

/// Series of coordinate k (1-based) across states.
inline std::vector<double> coordinate_series(std::span<const ConditionedPathState> states, int k) {
  std::vector<double> series;
  series.reserve(states.size());
  for (const auto& s : states) series.push_back(s.values.at(static_cast<std::size_t>(k - 1)));
  return series;
}

struct TailRow {
  double x = 0.0;
  double probability = 0.0;
  double std_error = 0.0;
};

struct TailTable {
  int k = 1;
  double ess = 0.0;
  std::vector<TailRow> rows;
};

/// Empirical P(psi(v_k) >= x) under the conditioned law, with binomial
/// standard errors at the batch-means effective sample size of psi(v_k).
inline TailTable repulsion_tail(std::span<const ConditionedPathState> states, int k, std::span<const double> x_grid) {
  detail::require(!states.empty(), "repulsion_tail: no states");
  detail::require(k >= 1 && k <= states.front().n(), "repulsion_tail: coordinate out of range");
  const auto series = coordinate_series(states, k);
  TailTable table;
  table.k = k;
  table.ess = batch_means(series).ess;
  for (double x : x_grid) {
    std::size_t hits = 0;
    for (double v : series) hits += v >= x ? 1 : 0;
    const double p = static_cast<double>(hits) / static_cast<double>(series.size());
    table.rows.push_back({x, p, std::sqrt(p * (1.0 - p) / table.ess)});
  }
  return table;
}

struct TailSlope {
  double slope = 0.0;  // d log P / d x^2
  double std_error = 0.0;
  int points = 0;
};

/// Weighted least-squares slope of log P(psi >= x) against x^2 over
/// rows with x in [lo, hi] and a positive estimate.
inline TailSlope fit_tail_slope(const TailTable& table, double lo, double hi) {
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  TailSlope out;
  for (const auto& row : table.rows) {
    if (row.x < lo || row.x > hi || row.probability <= 0.0 || row.std_error <= 0.0) continue;
    const double u = row.x * row.x;
    const double y = std::log(row.probability);
    const double se = row.std_error / row.probability;
    const double w = 1.0 / (se * se);
    sw += w;
    swx += w * u;
    swy += w * y;
    swxx += w * u * u;
    swxy += w * u * y;
    ++out.points;
  }
  detail::require(out.points >= 2, "fit_tail_slope: need at least two usable rows");
  const double det = sw * swxx - swx * swx;
  out.slope = (sw * swxy - swx * swy) / det;
  out.std_error = std::sqrt(sw / det);
  return out;
}

}  // namespace treewave
