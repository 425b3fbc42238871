#pragma once

// Exact samplers of the wave process on balls and simple paths, and the
// deterministic identities every realisation has to satisfy.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "treewave/error.hpp"
#include "treewave/gaussian.hpp"
#include "treewave/rng.hpp"
#include "treewave/spectral.hpp"
#include "treewave/tree.hpp"

namespace treewave {

/// Relative tolerance of the per-realisation wave identities.
inline constexpr double kWaveTolerance = 1e-8;

struct BallSample {
  std::shared_ptr<const Ball> ball;
  std::shared_ptr<const CovarianceProfile> profile;
  std::vector<double> values;  // one per ball position

  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  /// Bound for the eigen-residual of a valid realisation.
  double wave_tolerance() const { return kWaveTolerance * (1.0 + max_abs()); }
  /// Bound for the sphere-sum residual, which accumulates over a whole sphere.
  double sphere_tolerance() const {
    return wave_tolerance() * static_cast<double>(ball->sphere_count(ball->radius));
  }
};

struct PathSample {
  std::vector<double> values;

  int n() const { return static_cast<int>(values.size()); }
};

/// Ground-truth ball sampler: values = F z with F F^T the full ball covariance.
class DenseBallSampler {
 public:
  DenseBallSampler(const CovarianceProfile& profile, int radius, std::int64_t vertex_budget = kDefaultVertexBudget)
      : profile_(std::make_shared<const CovarianceProfile>(profile)),
        ball_(std::make_shared<const Ball>(enumerate_ball(profile.d(), radius, vertex_budget))),
        factor_(factor_psd(assemble_covariance(*profile_, ball_->vertices))) {}

  const Ball& ball() const { return *ball_; }
  const PsdFactor& factor() const { return factor_; }

  BallSample draw(RandomStream& rng) const {
    Eigen::VectorXd z(factor_.rank);
    for (int i = 0; i < factor_.rank; ++i) z(i) = rng.normal();
    const Eigen::VectorXd x = factor_.factor * z;
    return BallSample{ball_, profile_, std::vector<double>(x.data(), x.data() + x.size())};
  }

 private:
  std::shared_ptr<const CovarianceProfile> profile_;
  std::shared_ptr<const Ball> ball_;
  PsdFactor factor_;
};

inline BallSample sample_ball_dense(const CovarianceProfile& profile, int radius, RandomStream& rng) {
  return DenseBallSampler(profile, radius).draw(rng);
}

/// Performance-path ball sampler. The root is N(0, 1); the first shell is
/// drawn jointly given the root; every further vertex's d-1 outward
/// children are drawn as one block given (vertex, parent) only, which is
/// exact by the Markov property of the process on trees. Both conditional
/// blocks are depth-independent and are precomputed once.
class RecursiveBallSampler {
 public:
  RecursiveBallSampler(const CovarianceProfile& profile, int radius, std::int64_t vertex_budget = kDefaultVertexBudget)
      : profile_(std::make_shared<const CovarianceProfile>(profile)),
        ball_(std::make_shared<const Ball>(enumerate_ball(profile.d(), radius, vertex_budget))) {
    const int d = profile.d();
    // Root with its d neighbours.
    std::vector<VertexId> star{VertexId::root()};
    for (int c = 0; c < d; ++c) star.push_back(VertexId::root().child(c));
    std::vector<int> star_target(d);
    for (int c = 0; c < d; ++c) star_target[c] = c + 1;
    const std::vector<int> star_given{0};
    first_shell_ = conditional(assemble_covariance(*profile_, star), star_given, star_target);
    first_shell_factor_ = factor_psd(first_shell_.residual);

    // Parent p, vertex v and the d-1 children of v; given (v, p).
    const VertexId p = VertexId::root();
    const VertexId v = p.child(0);
    std::vector<VertexId> family{v, p};
    for (int c = 0; c < d - 1; ++c) family.push_back(v.child(c));
    std::vector<int> family_target(d - 1);
    for (int c = 0; c < d - 1; ++c) family_target[c] = c + 2;
    const std::vector<int> family_given{0, 1};
    child_block_ = conditional(assemble_covariance(*profile_, family), family_given, family_target);
    child_block_factor_ = factor_psd(child_block_.residual);
  }

  const Ball& ball() const { return *ball_; }
  const ConditionalGaussian& first_shell() const { return first_shell_; }
  const ConditionalGaussian& child_block() const { return child_block_; }
  int child_block_rank() const { return child_block_factor_.rank; }

  BallSample draw(RandomStream& rng) const {
    const Ball& ball = *ball_;
    std::vector<double> values(ball.size());
    values[0] = rng.normal();
    if (ball.radius == 0) return BallSample{ball_, profile_, std::move(values)};

    Eigen::VectorXd observed1(1);
    observed1(0) = values[0];
    fill_block(first_shell_, first_shell_factor_, observed1, ball.children[0], values, rng);

    Eigen::VectorXd observed2(2);
    for (std::size_t pos = 1; pos < ball.size(); ++pos) {
      if (!ball.interior(static_cast<int>(pos))) break;  // BFS order: leaves come last
      observed2(0) = values[pos];
      observed2(1) = values[ball.parent[pos]];
      fill_block(child_block_, child_block_factor_, observed2, ball.children[pos], values, rng);
    }
    return BallSample{ball_, profile_, std::move(values)};
  }

 private:
  static void fill_block(const ConditionalGaussian& block, const PsdFactor& factor, const Eigen::VectorXd& observed,
                        const std::vector<int>& positions, std::vector<double>& values, RandomStream& rng) {
    Eigen::VectorXd z(factor.rank);
    for (int i = 0; i < factor.rank; ++i) z(i) = rng.normal();
    const Eigen::VectorXd draw = block.coeff * observed + factor.factor * z;
    for (std::size_t i = 0; i < positions.size(); ++i) values[positions[i]] = draw(static_cast<Eigen::Index>(i));
  }

  std::shared_ptr<const CovarianceProfile> profile_;
  std::shared_ptr<const Ball> ball_;
  ConditionalGaussian first_shell_;
  PsdFactor first_shell_factor_;
  ConditionalGaussian child_block_;
  PsdFactor child_block_factor_;
};

inline BallSample sample_ball_recursive(const CovarianceProfile& profile, int radius, RandomStream& rng) {
  return RecursiveBallSampler(profile, radius).draw(rng);
}

/// One step of the order-2 Markov chain along a path:
/// psi(v_{k+1}) | psi(v_{k-1}), psi(v_k) ~ N(b1 psi(v_{k-1}) + b2 psi(v_k), sigma2).
struct StepKernel {
  double b1 = 0.0;
  double b2 = 0.0;
  double sigma2 = 1.0;

  double mean(double older, double newer) const { return b1 * older + b2 * newer; }
  double density(double next, double older, double newer) const {
    const double gap = next - mean(older, newer);
    return std::exp(-0.5 * gap * gap / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
  }
};

inline StepKernel path_step_kernel(const CovarianceProfile& profile) {
  const double f1 = profile.phi(1);
  const double f2 = profile.phi(2);
  const double det = 1.0 - f1 * f1;
  if (!(det > 0.0)) throw NumericalError("path_step_kernel: |phi(1)| = 1, the path law is degenerate");
  StepKernel k;
  k.b1 = (f2 - f1 * f1) / det;
  k.b2 = f1 * (1.0 - f2) / det;
  k.sigma2 = 1.0 - k.b1 * f2 - k.b2 * f1;
  if (!(k.sigma2 > 0.0)) throw NumericalError("path_step_kernel: non-positive residual variance");
  return k;
}

/// Exact draw on the canonical path of n vertices.
class PathSampler {
 public:
  explicit PathSampler(const CovarianceProfile& profile)
      : phi1_(profile.phi(1)), pair_sd_(std::sqrt(1.0 - phi1_ * phi1_)), kernel_(path_step_kernel(profile)),
        step_sd_(std::sqrt(kernel_.sigma2)) {}

  const StepKernel& kernel() const { return kernel_; }
  double phi1() const { return phi1_; }

  double first(RandomStream& rng) const { return rng.normal(); }
  double second(double first, RandomStream& rng) const { return phi1_ * first + pair_sd_ * rng.normal(); }
  double next(double older, double newer, RandomStream& rng) const {
    return kernel_.mean(older, newer) + step_sd_ * rng.normal();
  }

  PathSample draw(int n, RandomStream& rng) const {
    detail::require(n >= 1, "sample_path: need at least one vertex");
    PathSample out;
    out.values.resize(n);
    out.values[0] = first(rng);
    if (n >= 2) out.values[1] = second(out.values[0], rng);
    for (int k = 2; k < n; ++k) out.values[k] = next(out.values[k - 2], out.values[k - 1], rng);
    return out;
  }

 private:
  double phi1_;
  double pair_sd_;
  StepKernel kernel_;
  double step_sd_;
};

inline PathSample sample_path(const CovarianceProfile& profile, int n, RandomStream& rng) {
  return PathSampler(profile).draw(n, rng);
}

/// max_k |S_k - |sphere_k| phi(k) psi(root)|, S_k the sum over the k-sphere.
inline double verify_sphere_sums(const BallSample& sample) {
  const Ball& ball = *sample.ball;
  const double root = sample.values[0];
  double worst = 0.0;
  for (int k = 0; k <= ball.radius; ++k) {
    double sum = 0.0;
    for (int pos = ball.sphere_begin[k]; pos < ball.sphere_begin[k + 1]; ++pos) sum += sample.values[pos];
    const double expected = static_cast<double>(ball.sphere_count(k)) * sample.profile->phi(k) * root;
    worst = std::max(worst, std::abs(sum - expected));
  }
  return worst;
}

/// max over interior vertices of |lambda psi(v) - sum of neighbours|.
inline double verify_eigen_residual(const BallSample& sample) {
  const Ball& ball = *sample.ball;
  const double lambda = sample.profile->lambda();
  double worst = 0.0;
  for (std::size_t pos = 0; pos < ball.size(); ++pos) {
    if (!ball.interior(static_cast<int>(pos))) continue;
    double neighbours = ball.parent[pos] >= 0 ? sample.values[ball.parent[pos]] : 0.0;
    for (int c : ball.children[pos]) neighbours += sample.values[c];
    worst = std::max(worst, std::abs(lambda * sample.values[pos] - neighbours));
  }
  return worst;
}

}  // namespace treewave
