#pragma once

// Closed-form spectral quantities of the adjacency operator on the
// d-regular tree: Chebyshev polynomials of the second kind, the spectral
// density, and the covariance kernel of the invariant Gaussian wave.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/interpolators/pchip.hpp>

#include "treewave/error.hpp"
#include "treewave/quadrature.hpp"
#include "treewave/rng.hpp"

namespace treewave {

/// Upper edge of the spectrum, 2*sqrt(d-1).
inline double spectral_radius(int d) { return 2.0 * std::sqrt(static_cast<double>(d - 1)); }

struct TreeParams {
  int d = 3;

  static TreeParams make(int d) {
    detail::require(d >= 3, "degree d must be at least 3, got " + std::to_string(d));
    return TreeParams{d};
  }
};

/// A degree together with a point of the (closed) spectrum.
class SpectralPoint {
 public:
  static SpectralPoint make(int d, double lambda) {
    TreeParams::make(d);
    const double edge = spectral_radius(d);
    detail::require(std::isfinite(lambda), "lambda must be finite");
    // Accept values a few ulps outside the edge so that 2*sqrt(d-1) computed
    // any reasonable way is admitted; snap them onto the edge.
    const double slack = 1e-12 * edge;
    detail::require(std::abs(lambda) <= edge + slack,
                    "lambda=" + std::to_string(lambda) + " lies outside the spectrum [-" +
                        std::to_string(edge) + ", " + std::to_string(edge) + "] for d=" + std::to_string(d));
    return SpectralPoint(d, std::clamp(lambda, -edge, edge));
  }

  int d() const { return d_; }
  double lambda() const { return lambda_; }
  /// Argument of the Chebyshev polynomials, lambda / (2 sqrt(d-1)), in [-1, 1].
  double chebyshev_arg() const { return std::clamp(lambda_ / spectral_radius(d_), -1.0, 1.0); }
  bool at_edge() const { return std::abs(lambda_) == spectral_radius(d_); }

 private:
  SpectralPoint(int d, double lambda) : d_(d), lambda_(lambda) {}
  int d_;
  double lambda_;
};

/// U_n(x) by the three-term recurrence, with U_{-1} = 0 and U_0 = 1.
inline double chebyshev_u(int n, double x) {
  detail::require(n >= -1, "chebyshev_u: index must be >= -1, got " + std::to_string(n));
  if (n == -1) return 0.0;
  double prev = 0.0;  // U_{-1}
  double cur = 1.0;   // U_0
  for (int k = 0; k < n; ++k) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Density of the spectral measure; zero at the two edges.
inline double spectral_density(const SpectralPoint& point) {
  const double d = point.d();
  const double lam = point.lambda();
  if (point.at_edge()) return 0.0;
  const double edge = spectral_radius(point.d());
  const double inside = std::max(0.0, (edge - lam) * (edge + lam));
  return d / (2.0 * std::numbers::pi) * std::sqrt(inside) / (d * d - lam * lam);
}

/// Draws lambda from the spectral density by a tabulated inverse CDF.
///
/// The CDF is tabulated on a uniform grid in theta, where
/// lambda = -2 sqrt(d-1) cos(theta); in that variable the density is smooth
/// up to the edges, so each cell integrates to machine precision with a
/// fixed Gauss-Legendre rule. theta(u) is then a monotone cubic (PCHIP)
/// interpolant through the tabulated points.
class SpectralSampler {
 public:
  explicit SpectralSampler(int d, int nodes = 4097) : d_(TreeParams::make(d).d) {
    detail::require(nodes >= 4096, "SpectralSampler: need at least 4096 nodes");
    const double radius = spectral_radius(d_);
    const double dd = d_;
    auto integrand = [&](double theta) {
      const double s = std::sin(theta);
      const double c = std::cos(theta);
      return dd / (2.0 * std::numbers::pi) * radius * radius * s * s / (dd * dd - radius * radius * c * c);
    };
    std::vector<double> theta(nodes);
    std::vector<double> cdf(nodes);
    const double h = std::numbers::pi / (nodes - 1);
    const auto cell = gauss_legendre(8, 0.0, h);
    theta[0] = 0.0;
    cdf[0] = 0.0;
    for (int i = 1; i < nodes; ++i) {
      theta[i] = i * h;
      double mass = 0.0;
      for (std::size_t q = 0; q < cell.nodes.size(); ++q) mass += cell.weights[q] * integrand(theta[i - 1] + cell.nodes[q]);
      cdf[i] = cdf[i - 1] + mass;
    }
    total_mass_ = cdf.back();
    for (auto& c : cdf) c /= total_mass_;
    cdf.back() = 1.0;
    inverse_ = std::make_shared<Interp>(std::move(cdf), std::move(theta));
  }

  int d() const { return d_; }

  /// Mass of the tabulated density before normalisation; 1 up to quadrature error.
  double tabulated_mass() const { return total_mass_; }

  double quantile(double u) const {
    const double theta = std::clamp((*inverse_)(std::clamp(u, 0.0, 1.0)), 0.0, std::numbers::pi);
    return -spectral_radius(d_) * std::cos(theta);
  }

  double operator()(RandomStream& rng) const { return quantile(rng.uniform_open()); }

 private:
  using Interp = boost::math::interpolators::pchip<std::vector<double>>;
  int d_;
  double total_mass_ = 0.0;
  std::shared_ptr<Interp> inverse_;
};

/// One draw of lambda from the spectral density. Builds the table on every
/// call; hold a SpectralSampler for repeated draws.
inline double sample_lambda(int d, RandomStream& rng) { return SpectralSampler(d)(rng); }

/// Covariance kernel phi(n) of the wave process at one spectral point,
/// tabulated for distances 0..n_max, plus the absolute sum
/// Phi = phi(0) + 2 sum_{j>=1} |phi(j)|.
///
/// phi(n) = (d-1)^{-n/2} ((d-1)/d U_n(x) - U_{n-2}(x)/d), x = lambda/(2 sqrt(d-1)),
/// with U_{-1} = 0 and U_{-2} = -U_0 = -1. The table is cross-checked against
/// the wave recursion d phi(1) = lambda, lambda phi(k) = phi(k-1) + (d-1) phi(k+1).
/// Immutable after construction.
class CovarianceProfile {
 public:
  static constexpr double kRouteAgreement = 1e-10;
  static constexpr double kTailTolerance = 1e-12;

  static CovarianceProfile build(const SpectralPoint& point, int n_max = 64) {
    detail::require(n_max >= 2, "build_profile: n_max must be at least 2");
    CovarianceProfile profile(point);
    profile.phi_ = closed_form(point, n_max);
    const auto check = by_recursion(point, n_max);
    for (int n = 0; n <= n_max; ++n) {
      if (std::abs(profile.phi_[n] - check[n]) > kRouteAgreement) {
        throw NumericalError("build_profile: closed form and wave recursion disagree at n=" + std::to_string(n));
      }
    }
    profile.big_phi_ = absolute_sum(point);
    return profile;
  }

  static CovarianceProfile build(int d, double lambda, int n_max = 64) {
    return build(SpectralPoint::make(d, lambda), n_max);
  }

  const SpectralPoint& point() const { return point_; }
  int d() const { return point_.d(); }
  double lambda() const { return point_.lambda(); }
  int max_distance() const { return static_cast<int>(phi_.size()) - 1; }

  double phi(int n) const {
    detail::require(n >= 0 && n <= max_distance(),
                    "profile covers distances 0.." + std::to_string(max_distance()) + ", requested " + std::to_string(n));
    return phi_[n];
  }
  const std::vector<double>& table() const { return phi_; }

  double big_phi() const { return big_phi_; }
  /// Exponent of the Gaussian upper bound on the survival probability, 1/(2 Phi).
  double beta() const { return 1.0 / (2.0 * big_phi_); }

  /// C(n) with |phi(n)| <= C(n) (d-1)^{-n/2}. Inside the spectrum this is the
  /// constant 1/sqrt(1-x^2) from |U_n(cos t)| <= 1/|sin t|; at the edges
  /// |U_n(+-1)| = n+1 and the bound grows linearly.
  double decay_constant(int n) const {
    const double x = point_.chebyshev_arg();
    const double linear = n + 1.0;
    if (std::abs(x) >= 1.0) return linear;
    return std::min(linear, 1.0 / std::sqrt(1.0 - x * x));
  }

  static std::vector<double> closed_form(const SpectralPoint& point, int n_max) {
    const double d = point.d();
    const double x = point.chebyshev_arg();
    const double scale = 1.0 / std::sqrt(d - 1.0);
    // u[k + 2] holds U_k for k = -2..n_max.
    std::vector<double> u(n_max + 3);
    u[0] = -1.0;
    u[1] = 0.0;
    u[2] = 1.0;
    for (int k = 1; k <= n_max; ++k) u[k + 2] = 2.0 * x * u[k + 1] - u[k];
    std::vector<double> phi(n_max + 1);
    double power = 1.0;
    for (int n = 0; n <= n_max; ++n) {
      phi[n] = power * ((d - 1.0) / d * u[n + 2] - u[n] / d);
      power *= scale;
    }
    return phi;
  }

  static std::vector<double> by_recursion(const SpectralPoint& point, int n_max) {
    const double d = point.d();
    const double lam = point.lambda();
    std::vector<double> phi(n_max + 1);
    phi[0] = 1.0;
    phi[1] = lam / d;
    for (int k = 1; k < n_max; ++k) phi[k + 1] = (lam * phi[k] - phi[k - 1]) / (d - 1.0);
    return phi;
  }

 private:
  explicit CovarianceProfile(const SpectralPoint& point) : point_(point) {}

  // Sum until the certified tail, sum_{j>J} (j+1) q^j with q = (d-1)^{-1/2},
  // falls below kTailTolerance.
  static double absolute_sum(const SpectralPoint& point) {
    const double q = 1.0 / std::sqrt(point.d() - 1.0);
    auto tail_bound = [q](int last) {
      const double j = last;
      return 2.0 * std::pow(q, j + 1.0) * ((j + 2.0) - (j + 1.0) * q) / ((1.0 - q) * (1.0 - q));
    };
    int last = 16;
    while (tail_bound(last) >= kTailTolerance) last *= 2;
    const auto phi = closed_form(point, last);
    double sum = phi[0];
    for (int j = 1; j <= last; ++j) sum += 2.0 * std::abs(phi[j]);
    return sum;
  }

  SpectralPoint point_;
  std::vector<double> phi_;
  double big_phi_ = 0.0;
};

inline CovarianceProfile build_profile(const SpectralPoint& point, int n_max) {
  return CovarianceProfile::build(point, n_max);
}

/// Coefficients of the bulk conditional mean of a path coordinate given its
/// four nearest path neighbours: a1/2 on distance one, -a2/2 on distance two.
struct RepulsionCoefficients {
  double a1 = 0.0;
  double a2 = 0.0;
};

inline RepulsionCoefficients repulsion_coefficients(const SpectralPoint& point) {
  const double d = point.d();
  const double lam = point.lambda();
  const double denom = lam * lam + (d - 1.0) * (d - 1.0) + 1.0;
  return {2.0 * d * lam / denom, 2.0 * (d - 1.0) / denom};
}

}  // namespace treewave
