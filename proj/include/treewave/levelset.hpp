#pragma once

// Level-set components and the percolation transition: survival
// probabilities of a path, their exponential rate from the transfer
// operator, the critical level and its analytic bracket.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "treewave/error.hpp"
#include "treewave/gaussian.hpp"
#include "treewave/parallel.hpp"
#include "treewave/quadrature.hpp"
#include "treewave/rng.hpp"
#include "treewave/sampler.hpp"
#include "treewave/spectral.hpp"

namespace treewave {

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace detail

struct Component {
  int size = 0;
  int min_depth = 0;
  int max_depth = 0;
  bool touches_boundary = false;  // reaches the outer sphere; may continue outside the ball
  bool contains_root = false;
};

/// Connected components of {v in ball : value(v) > alpha}, largest first.
struct ComponentSummary {
  std::vector<Component> components;
  int root_component_size = 0;
  int root_depth_reach = -1;  // deepest level of the root's component; -1 if the root is below alpha

  std::vector<int> sizes() const {
    std::vector<int> out;
    for (const auto& c : components) out.push_back(c.size);
    return out;
  }
  int above_level() const {
    int total = 0;
    for (const auto& c : components) total += c.size;
    return total;
  }
};

inline ComponentSummary extract_components(const BallSample& sample, double alpha) {
  const Ball& ball = *sample.ball;
  const std::size_t n = ball.size();
  detail::UnionFind uf(n);
  std::vector<char> open(n);
  for (std::size_t i = 0; i < n; ++i) open[i] = sample.values[i] > alpha;
  for (std::size_t i = 1; i < n; ++i)
    if (open[i] && open[ball.parent[i]]) uf.unite(i, static_cast<std::size_t>(ball.parent[i]));

  std::vector<int> slot(n, -1);
  ComponentSummary out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!open[i]) continue;
    const auto rep = uf.find(i);
    if (slot[rep] < 0) {
      slot[rep] = static_cast<int>(out.components.size());
      out.components.push_back(Component{0, ball.depth(static_cast<int>(i)), ball.depth(static_cast<int>(i)), false, false});
    }
    auto& c = out.components[slot[rep]];
    const int depth = ball.depth(static_cast<int>(i));
    ++c.size;
    c.min_depth = std::min(c.min_depth, depth);
    c.max_depth = std::max(c.max_depth, depth);
    c.touches_boundary = c.touches_boundary || depth == ball.radius;
    c.contains_root = c.contains_root || i == 0;
  }
  std::stable_sort(out.components.begin(), out.components.end(),
                   [](const Component& a, const Component& b) { return a.size > b.size; });
  for (const auto& c : out.components) {
    if (c.contains_root) {
      out.root_component_size = c.size;
      out.root_depth_reach = c.max_depth;
    }
  }
  return out;
}

enum class SurvivalMethod { direct, smc };

inline const char* to_string(SurvivalMethod m) { return m == SurvivalMethod::direct ? "direct" : "smc"; }

/// Estimate of the probability that a fixed simple path of n vertices lies
/// entirely above alpha.
struct SurvivalEstimate {
  int n = 1;
  double alpha = 0.0;
  double p_hat = 0.0;
  double std_error = 0.0;
  SurvivalMethod method = SurvivalMethod::direct;
  bool collapsed = false;  // some SMC batch lost every particle

  double relative_error() const { return p_hat > 0.0 ? std_error / p_hat : 0.0; }
};

/// Replicates per random stream in the direct estimator.
inline constexpr std::int64_t kDirectChunk = 1 << 14;

/// Plain Monte Carlo: the fraction of exact path draws staying above alpha.
inline SurvivalEstimate survival_direct(const CovarianceProfile& profile, int n, double alpha, std::int64_t reps,
                                        std::uint64_t seed, unsigned threads = 1) {
  detail::require(n >= 1, "survival_direct: n must be at least 1");
  detail::require(reps >= 1, "survival_direct: reps must be at least 1");
  const PathSampler sampler(profile);
  const auto chunks = static_cast<std::size_t>((reps + kDirectChunk - 1) / kDirectChunk);
  std::vector<std::int64_t> hits(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c) {
    RandomStream rng(seed, c);
    const std::int64_t begin = static_cast<std::int64_t>(c) * kDirectChunk;
    const std::int64_t end = std::min(reps, begin + kDirectChunk);
    std::int64_t count = 0;
    for (std::int64_t r = begin; r < end; ++r) {
      double older = sampler.first(rng);
      if (!(older > alpha)) continue;
      if (n == 1) {
        ++count;
        continue;
      }
      double newer = sampler.second(older, rng);
      bool alive = newer > alpha;
      for (int k = 2; k < n && alive; ++k) {
        const double next = sampler.next(older, newer, rng);
        older = newer;
        newer = next;
        alive = next > alpha;
      }
      count += alive ? 1 : 0;
    }
    hits[c] = count;
  });
  const double total = static_cast<double>(std::accumulate(hits.begin(), hits.end(), std::int64_t{0}));
  SurvivalEstimate out;
  out.n = n;
  out.alpha = alpha;
  out.p_hat = total / static_cast<double>(reps);
  out.std_error = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(reps));
  out.method = SurvivalMethod::direct;
  return out;
}

struct SmcOptions {
  int particles = 10000;  // per batch
  int batches = 10;       // independent sub-runs; their spread gives the standard error
  unsigned threads = 1;
};

/// SMC estimates for every path length 1..n from one set of runs.
struct SurvivalCurve {
  double alpha = 0.0;
  std::vector<SurvivalEstimate> points;  // points[k-1] is the estimate for length k

  const SurvivalEstimate& at(int n) const { return points.at(static_cast<std::size_t>(n - 1)); }
};

namespace detail {

// One SMC run along the order-2 chain. Returns the running product of the
// per-step surviving fractions, one entry per path length from `first_len`
// to n. With a start pair, the chain begins at (x1, x2) and lengths 1, 2
// have probability one.
inline std::vector<double> smc_run(const PathSampler& sampler, int n, double alpha, int particles,
                                   std::optional<std::pair<double, double>> start, RandomStream& rng, bool& collapsed) {
  std::vector<double> estimate(n, 0.0);
  std::vector<double> older(particles), newer(particles), next_older(particles), next_newer(particles);
  std::vector<int> survivors;
  survivors.reserve(particles);
  double product = 1.0;
  int length = 0;

  auto resample = [&](std::vector<double>& a, std::vector<double>& b) {
    for (int i = 0; i < particles; ++i) {
      const int pick = survivors[rng.index_below(survivors.size())];
      next_older[i] = a[pick];
      next_newer[i] = b[pick];
    }
    a.swap(next_older);
    b.swap(next_newer);
  };
  auto record = [&](std::size_t alive) {
    product *= static_cast<double>(alive) / particles;
    estimate[length - 1] = product;
    if (alive == 0) {
      collapsed = true;
      return false;
    }
    return true;
  };

  if (start) {
    std::fill(older.begin(), older.end(), start->first);
    std::fill(newer.begin(), newer.end(), start->second);
    estimate[0] = 1.0;
    if (n >= 2) estimate[1] = 1.0;
    length = 2;
  } else {
    length = 1;
    survivors.clear();
    for (int i = 0; i < particles; ++i) {
      newer[i] = sampler.first(rng);
      if (newer[i] > alpha) survivors.push_back(i);
    }
    if (!record(survivors.size())) return estimate;
    if (n == 1) return estimate;
    resample(older, newer);  // only newer matters here
    length = 2;
    survivors.clear();
    for (int i = 0; i < particles; ++i) {
      older[i] = newer[i];
      newer[i] = sampler.second(older[i], rng);
      if (newer[i] > alpha) survivors.push_back(i);
    }
    if (!record(survivors.size())) return estimate;
    resample(older, newer);
  }
  while (length < n) {
    ++length;
    survivors.clear();
    for (int i = 0; i < particles; ++i) {
      const double z = sampler.next(older[i], newer[i], rng);
      older[i] = newer[i];
      newer[i] = z;
      if (z > alpha) survivors.push_back(i);
    }
    if (!record(survivors.size())) return estimate;
    resample(older, newer);
  }
  return estimate;
}

inline SurvivalCurve combine_batches(const std::vector<std::vector<double>>& runs, double alpha, bool collapsed) {
  const auto batches = runs.size();
  const auto n = runs.front().size();
  SurvivalCurve curve;
  curve.alpha = alpha;
  for (std::size_t k = 0; k < n; ++k) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r[k];
    mean /= static_cast<double>(batches);
    double var = 0.0;
    for (const auto& r : runs) var += (r[k] - mean) * (r[k] - mean);
    var /= static_cast<double>(batches - 1);
    SurvivalEstimate e;
    e.n = static_cast<int>(k + 1);
    e.alpha = alpha;
    e.p_hat = mean;
    e.std_error = std::sqrt(var / static_cast<double>(batches));
    e.method = SurvivalMethod::smc;
    e.collapsed = collapsed;
    curve.points.push_back(e);
  }
  return curve;
}

inline SurvivalCurve smc_batches(const CovarianceProfile& profile, int n, double alpha, const SmcOptions& options,
                                 std::uint64_t seed, std::optional<std::pair<double, double>> start) {
  detail::require(n >= 1, "survival_smc: n must be at least 1");
  detail::require(options.particles >= 100, "survival_smc: need at least 100 particles");
  detail::require(options.batches >= 2, "survival_smc: need at least two batches for an error estimate");
  const PathSampler sampler(profile);
  std::vector<std::vector<double>> runs(options.batches);
  std::vector<char> collapsed(options.batches, 0);
  parallel_for(static_cast<std::size_t>(options.batches), options.threads, [&](std::size_t b) {
    RandomStream rng(seed, b);
    bool lost = false;
    runs[b] = smc_run(sampler, n, alpha, options.particles, start, rng, lost);
    collapsed[b] = lost;
  });
  return combine_batches(runs, alpha, std::any_of(collapsed.begin(), collapsed.end(), [](char c) { return c != 0; }));
}

}  // namespace detail

/// Sequential Monte Carlo over the order-2 path chain: propagate one step,
/// keep the particles above alpha, record the surviving fraction, resample
/// multinomially back to full size. The product of fractions estimates the
/// survival probability without bias; independent batches give its
/// standard error.
inline SurvivalCurve survival_smc_curve(const CovarianceProfile& profile, int n, double alpha, const SmcOptions& options,
                                        std::uint64_t seed) {
  return detail::smc_batches(profile, n, alpha, options, seed, std::nullopt);
}

inline SurvivalEstimate survival_smc(const CovarianceProfile& profile, int n, double alpha, const SmcOptions& options,
                                     std::uint64_t seed) {
  return survival_smc_curve(profile, n, alpha, options, seed).points.back();
}

/// Survival of a path of n vertices given its first two values (x1, x2).
inline SurvivalEstimate conditioned_survival(const CovarianceProfile& profile, int n, double alpha, double x1, double x2,
                                             const SmcOptions& options, std::uint64_t seed) {
  detail::require(n >= 2, "conditioned_survival: n must be at least 2");
  detail::require(x1 > alpha && x2 > alpha, "conditioned_survival: x1 and x2 must exceed alpha");
  return detail::smc_batches(profile, n, alpha, options, seed, std::make_pair(x1, x2)).points.back();
}

/// P(Z_1 + ... + Z_n > n alpha)-type upper bound exp(-beta alpha^2 n).
inline double survival_upper_bound(const CovarianceProfile& profile, double alpha, int n) {
  return std::exp(-profile.beta() * alpha * alpha * n);
}

struct TransferOptions {
  int m = 64;                  // Gauss-Legendre nodes per coordinate
  double u_max_offset = 8.0;   // domain (alpha, max(alpha, 0) + offset)
  double tolerance = 1e-10;    // relative, on the eigenvalue and the normalised eigenvector
  int max_iterations = 10000;
};

struct TransferResult {
  double rate = 0.0;
  int iterations = 0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Leading eigenvalue of the survival transfer operator
///   (T g)(x, y) = int_alpha^inf p(z | x, y) g(y, z) dz
/// discretised by Nystrom on a tensor Gauss-Legendre grid, by power
/// iteration. It equals lim (P_n)^{1/n}.
inline TransferResult transfer_operator_rate(const CovarianceProfile& profile, double alpha, const TransferOptions& options = {}) {
  detail::require(options.m >= 16, "transfer_rate: need at least 16 quadrature nodes");
  detail::require(options.u_max_offset > 0.0, "transfer_rate: domain offset must be positive");
  detail::require(std::isfinite(alpha), "transfer_rate: alpha must be finite");
  const auto kernel = path_step_kernel(profile);
  const int m = options.m;
  TransferResult out;
  out.lower = alpha;
  out.upper = std::max(alpha, 0.0) + options.u_max_offset;
  const auto rule = gauss_legendre(m, out.lower, out.upper);
  const auto& x = rule.nodes;

  // weighted[(i * m + j) * m + l] = w_l p(x_l | x_i, x_j)
  std::vector<double> weighted(static_cast<std::size_t>(m) * m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int l = 0; l < m; ++l)
        weighted[(static_cast<std::size_t>(i) * m + j) * m + l] = rule.weights[l] * kernel.density(x[l], x[i], x[j]);

  std::vector<double> g(static_cast<std::size_t>(m) * m, 1.0), next(g.size());
  double rate = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    double top = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double* row = &weighted[(static_cast<std::size_t>(i) * m + j) * m];
        const double* gj = &g[static_cast<std::size_t>(j) * m];
        double acc = 0.0;
        for (int l = 0; l < m; ++l) acc += row[l] * gj[l];
        next[static_cast<std::size_t>(i) * m + j] = acc;
        top = std::max(top, std::abs(acc));
      }
    }
    if (!(top > 0.0)) throw NumericalError("transfer_rate: operator annihilated the iterate");
    double change = 0.0;
    for (std::size_t s = 0; s < g.size(); ++s) {
      next[s] /= top;
      change = std::max(change, std::abs(next[s] - g[s]));
    }
    g.swap(next);
    const bool settled = std::abs(top - rate) <= options.tolerance * top && change <= options.tolerance;
    rate = top;
    if (settled) {
      out.rate = rate;
      out.iterations = it;
      return out;
    }
  }
  throw NumericalError("transfer_rate: power iteration did not converge in " + std::to_string(options.max_iterations) +
                       " iterations");
}

inline double transfer_rate(const CovarianceProfile& profile, double alpha, int m = 64, double u_max_offset = 8.0) {
  return transfer_operator_rate(profile, alpha, TransferOptions{m, u_max_offset}).rate;
}

struct RateCurve {
  std::vector<double> alphas;
  std::vector<double> rates;
  TransferOptions quadrature;

  bool strictly_decreasing() const {
    for (std::size_t i = 1; i < rates.size(); ++i)
      if (!(rates[i] < rates[i - 1])) return false;
    return true;
  }
};

inline RateCurve rate_curve(const CovarianceProfile& profile, std::vector<double> alphas, const TransferOptions& options = {},
                            unsigned threads = 1) {
  RateCurve curve;
  curve.alphas = std::move(alphas);
  curve.quadrature = options;
  curve.rates.resize(curve.alphas.size());
  parallel_for(curve.alphas.size(), threads,
               [&](std::size_t i) { curve.rates[i] = transfer_operator_rate(profile, curve.alphas[i], options).rate; });
  return curve;
}

/// Level at which the edge survival probability equals 2/d. Below it an
/// infinite cluster exists, so it bounds the critical level from below.
inline double haggstrom_alpha(const CovarianceProfile& profile) {
  const double rho = profile.phi(1);
  const double target = 2.0 / profile.d();
  auto f = [&](double a) { return orthant_edge_probability(rho, a) - target; };
  std::uintmax_t iterations = 200;
  const auto [lo, hi] =
      boost::math::tools::toms748_solve(f, -20.0, 20.0, boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (lo + hi);
}

/// sqrt((d-1)/beta) = sqrt(2 (d-1) Phi). Above it |sphere_n| P_n decays
/// exponentially, so it bounds the critical level from above.
inline double expdec_alpha(const CovarianceProfile& profile) {
  return std::sqrt(static_cast<double>(profile.d() - 1) / profile.beta());
}

struct ThresholdResult {
  double alpha_c = 0.0;
  double lower_bound = 0.0;  // haggstrom_alpha
  double upper_bound = 0.0;  // expdec_alpha
  double rate_at_alpha_c = 0.0;
  double target_rate = 0.0;  // 1 / (d - 1)
  int bisections = 0;
  TransferOptions quadrature;
};

/// Bisection for the level where the survival rate crosses 1/(d-1),
/// starting from [haggstrom_alpha - 1, expdec_alpha + 1].
inline ThresholdResult critical_threshold(const CovarianceProfile& profile, double tol, const TransferOptions& options = {}) {
  detail::require(tol > 0.0, "critical_threshold: tolerance must be positive");
  ThresholdResult out;
  out.quadrature = options;
  out.lower_bound = haggstrom_alpha(profile);
  out.upper_bound = expdec_alpha(profile);
  out.target_rate = 1.0 / (profile.d() - 1.0);
  auto excess = [&](double a) { return transfer_operator_rate(profile, a, options).rate - out.target_rate; };
  double lo = out.lower_bound - 1.0;
  double hi = out.upper_bound + 1.0;
  if (!(excess(lo) > 0.0) || !(excess(hi) < 0.0)) {
    throw NumericalError("critical_threshold: the rate does not cross 1/(d-1) on [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) > 0.0 ? lo : hi) = mid;
    ++out.bisections;
  }
  out.alpha_c = 0.5 * (lo + hi);
  out.rate_at_alpha_c = transfer_operator_rate(profile, out.alpha_c, options).rate;
  return out;
}

struct RatioRow {
  int n = 0;
  int m = 0;
  double ratio = 0.0;  // P_{n+m} / (P_n P_m)
  double std_error = 0.0;
};

struct QuasiBernoulliReport {
  double alpha = 0.0;
  std::vector<RatioRow> rows;
  double bound = 0.0;  // M: every ratio lies in [1/M, M]
  bool finite = true;
};

/// Ratios P_{n+m} / (P_n P_m) from one SMC curve, with relative errors
/// added in quadrature, and the smallest M bracketing all of them.
inline QuasiBernoulliReport survival_ratio_bounds(const CovarianceProfile& profile, double alpha, std::span<const int> n_list,
                                                  std::span<const int> m_list, const SmcOptions& options,
                                                  std::uint64_t seed) {
  detail::require(!n_list.empty() && !m_list.empty(), "survival_ratio_bounds: empty length list");
  int longest = 0;
  for (int n : n_list)
    for (int m : m_list) {
      detail::require(n >= 1 && m >= 1, "survival_ratio_bounds: lengths must be positive");
      longest = std::max(longest, n + m);
    }
  const auto curve = survival_smc_curve(profile, longest, alpha, options, seed);
  QuasiBernoulliReport report;
  report.alpha = alpha;
  report.bound = 1.0;
  for (int n : n_list) {
    for (int m : m_list) {
      const auto& pnm = curve.at(n + m);
      const auto& pn = curve.at(n);
      const auto& pm = curve.at(m);
      RatioRow row{n, m, 0.0, 0.0};
      if (pn.p_hat > 0.0 && pm.p_hat > 0.0 && pnm.p_hat > 0.0) {
        row.ratio = pnm.p_hat / (pn.p_hat * pm.p_hat);
        const double rel = std::sqrt(std::pow(pnm.relative_error(), 2) + std::pow(pn.relative_error(), 2) +
                                     std::pow(pm.relative_error(), 2));
        row.std_error = row.ratio * rel;
        report.bound = std::max({report.bound, row.ratio, 1.0 / row.ratio});
      } else {
        report.finite = false;
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace treewave
