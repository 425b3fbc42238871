#pragma once

// Dense Gaussian machinery: covariance assembly from the kernel, rank-aware
// factorisation of positive semidefinite matrices, conditioning by Schur
// complement, truncated-normal draws and bivariate orthant probabilities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "treewave/error.hpp"
#include "treewave/rng.hpp"
#include "treewave/spectral.hpp"
#include "treewave/tree.hpp"

namespace treewave {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
/// Upper tail P(Z > x).
inline double normal_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// x with P(Z > x) = p, accurate deep in either tail.
inline double normal_q_inverse(double p) {
  detail::require(p > 0.0 && p < 1.0, "normal_q_inverse: probability must lie in (0, 1)");
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Relative eigenvalue cut below which a direction counts as degenerate.
/// Shared by factor_psd and the pseudo-inverse used for conditioning.
inline constexpr double kRankTolerance = 1e-9;
/// Most negative eigenvalue (relative to max(1, largest)) tolerated before a
/// matrix is rejected as not a covariance.
inline constexpr double kNegativeTolerance = 1e-6;

/// Symmetric matrix with entry (m, l) = phi(|v_m - v_l|).
struct CovarianceMatrix {
  Eigen::MatrixXd values;

  Eigen::Index size() const { return values.rows(); }
};

inline CovarianceMatrix assemble_covariance(const CovarianceProfile& profile, std::span<const VertexId> vertices) {
  const auto n = static_cast<Eigen::Index>(vertices.size());
  CovarianceMatrix cov{Eigen::MatrixXd(n, n)};
  for (Eigen::Index m = 0; m < n; ++m) {
    cov.values(m, m) = profile.phi(0);
    for (Eigen::Index l = m + 1; l < n; ++l) {
      const double c = profile.phi(distance(vertices[m], vertices[l], profile.d()));
      cov.values(m, l) = c;
      cov.values(l, m) = c;
    }
  }
  return cov;
}

/// Covariance of n consecutive vertices of a simple path (Toeplitz in phi).
inline CovarianceMatrix path_covariance(const CovarianceProfile& profile, int n) {
  detail::require(n >= 1, "path_covariance: need at least one vertex");
  CovarianceMatrix cov{Eigen::MatrixXd(n, n)};
  for (int m = 0; m < n; ++m)
    for (int l = 0; l < n; ++l) cov.values(m, l) = profile.phi(std::abs(m - l));
  return cov;
}

/// F with F F^T = C, F of shape size x rank.
struct PsdFactor {
  int rank = 0;
  Eigen::MatrixXd factor;
  Eigen::VectorXd eigenvalues;  // ascending, before clamping
};

inline PsdFactor factor_psd(const Eigen::MatrixXd& matrix) {
  detail::require(matrix.rows() == matrix.cols(), "factor_psd: matrix must be square");
  PsdFactor out;
  if (matrix.rows() == 0) return out;
  const Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("factor_psd: eigendecomposition failed");
  out.eigenvalues = eig.eigenvalues();
  const double largest = out.eigenvalues.maxCoeff();
  const double smallest = out.eigenvalues.minCoeff();
  if (smallest < -kNegativeTolerance * std::max(1.0, largest)) {
    throw NumericalError("factor_psd: eigenvalue " + std::to_string(smallest) +
                         " is negative beyond tolerance; not a covariance matrix");
  }
  const double cut = kRankTolerance * std::max(largest, 0.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < out.eigenvalues.size(); ++i)
    if (out.eigenvalues(i) > cut && out.eigenvalues(i) > 0.0) kept.push_back(i);
  out.rank = static_cast<int>(kept.size());
  out.factor.resize(sym.rows(), out.rank);
  for (int j = 0; j < out.rank; ++j)
    out.factor.col(j) = eig.eigenvectors().col(kept[j]) * std::sqrt(out.eigenvalues(kept[j]));
  return out;
}

inline PsdFactor factor_psd(const CovarianceMatrix& cov) { return factor_psd(cov.values); }

/// Moore-Penrose inverse of a symmetric PSD matrix, dropping eigen-directions
/// below kRankTolerance relative to the largest eigenvalue.
inline Eigen::MatrixXd pseudo_inverse_psd(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() == 0) return matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (matrix + matrix.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("pseudo_inverse_psd: eigendecomposition failed");
  const auto& values = eig.eigenvalues();
  const double cut = kRankTolerance * std::max(values.maxCoeff(), 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) > cut && values(i) > 0.0) inv(i) = 1.0 / values(i);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

/// Law of a target block given a block of observed coordinates:
/// mean = coeff * observed, covariance = residual.
struct ConditionalGaussian {
  Eigen::MatrixXd coeff;     // target x given
  Eigen::MatrixXd residual;  // target x target

  Eigen::VectorXd mean(const Eigen::VectorXd& observed) const { return coeff * observed; }
};

inline ConditionalGaussian conditional(const Eigen::MatrixXd& cov, std::span<const int> given, std::span<const int> target) {
  detail::require(!target.empty(), "conditional: target set is empty");
  const auto n = cov.rows();
  auto in_range = [n](int i) { return i >= 0 && i < n; };
  detail::require(std::all_of(given.begin(), given.end(), in_range) && std::all_of(target.begin(), target.end(), in_range),
                  "conditional: index out of range");
  for (int g : given)
    detail::require(std::find(target.begin(), target.end(), g) == target.end(), "conditional: given and target overlap");

  const auto ng = static_cast<Eigen::Index>(given.size());
  const auto nt = static_cast<Eigen::Index>(target.size());
  Eigen::MatrixXd c11(ng, ng), c21(nt, ng), c22(nt, nt);
  for (Eigen::Index i = 0; i < ng; ++i)
    for (Eigen::Index j = 0; j < ng; ++j) c11(i, j) = cov(given[i], given[j]);
  for (Eigen::Index i = 0; i < nt; ++i) {
    for (Eigen::Index j = 0; j < ng; ++j) c21(i, j) = cov(target[i], given[j]);
    for (Eigen::Index j = 0; j < nt; ++j) c22(i, j) = cov(target[i], target[j]);
  }
  ConditionalGaussian out;
  out.coeff = c21 * pseudo_inverse_psd(c11);
  const Eigen::MatrixXd residual = c22 - out.coeff * c21.transpose();
  out.residual = 0.5 * (residual + residual.transpose());
  return out;
}

inline ConditionalGaussian conditional(const CovarianceMatrix& cov, std::span<const int> given, std::span<const int> target) {
  return conditional(cov.values, given, target);
}

/// Normal(mean, variance) restricted to (lower, inf).
struct TruncatedGaussian {
  double mean = 0.0;
  double variance = 1.0;
  double lower = 0.0;
};

/// Standardised truncation point beyond which the exponential-proposal
/// tail sampler replaces the inverse CDF.
inline constexpr double kTailSwitch = 4.0;

/// Exact draw from a lower-truncated normal.
inline double sample_truncated(const TruncatedGaussian& t, RandomStream& rng) {
  detail::require(t.variance > 0.0 && std::isfinite(t.variance), "sample_truncated: variance must be positive");
  const double sd = std::sqrt(t.variance);
  const double a = (t.lower - t.mean) / sd;
  double z;
  if (a <= kTailSwitch) {
    // Invert the upper tail: P(Z > z) = u P(Z > a).
    const double qa = normal_q(a);
    z = normal_q_inverse(std::min(rng.uniform_open() * qa, std::nextafter(1.0, 0.0)));
  } else {
    // Exponential proposal on (a, inf) with the optimal rate; acceptance
    // exceeds 0.9 for a >= 4.
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    while (true) {
      z = a - std::log(rng.uniform_open()) / rate;
      const double gap = z - rate;
      if (rng.uniform_open() <= std::exp(-0.5 * gap * gap)) break;
    }
  }
  double x = t.mean + sd * z;
  if (!(x > t.lower)) x = std::nextafter(t.lower, std::numeric_limits<double>::infinity());
  return x;
}

/// P(X > alpha, Y > alpha) for a standard bivariate normal with correlation
/// rho, as the integral of Q((alpha - rho x)/sqrt(1 - rho^2)) phi(x) over
/// (alpha, inf) by adaptive Gauss-Kronrod.
inline double orthant_edge_probability(double rho, double alpha) {
  detail::require(std::abs(rho) <= 1.0, "orthant_edge_probability: |rho| must not exceed 1");
  detail::require(!std::isnan(alpha), "orthant_edge_probability: alpha is NaN");
  if (rho == 1.0) return normal_q(alpha);
  if (rho == -1.0) return alpha < 0.0 ? normal_cdf(-alpha) - normal_cdf(alpha) : 0.0;
  if (std::isinf(alpha)) return alpha < 0.0 ? 1.0 : 0.0;
  const double s = std::sqrt(1.0 - rho * rho);
  auto integrand = [&](double x) { return normal_pdf(x) * normal_q((alpha - rho * x) / s); };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  // The standard normal weight is negligible beyond 40 in either direction.
  const double lo = std::max(alpha, -40.0);
  const double hi = std::max(lo, 0.0) + 40.0;
  // Break points: the step of the inner tail at x = alpha / rho, and zero.
  std::vector<double> cuts{lo, hi};
  if (rho != 0.0) cuts.push_back(alpha / rho);
  cuts.push_back(0.0);
  std::erase_if(cuts, [&](double c) { return !(c >= lo && c <= hi); });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += Rule::integrate(integrand, cuts[i], cuts[i + 1], 20, 1e-14);
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace treewave
