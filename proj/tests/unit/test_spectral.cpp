#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "treewave/spectral.hpp"

using namespace treewave;
using Catch::Approx;

namespace {

// U_n(cos t) = sin((n+1) t) / sin t.
double chebyshev_by_sine(int n, double x) {
  const double t = std::acos(x);
  return std::sin((n + 1) * t) / std::sin(t);
}

// Plain three-term wave recursion, started from phi(0)=1 and d phi(1)=lambda.
std::vector<double> wave_oracle(int d, double lambda, int n_max) {
  std::vector<double> phi(n_max + 1);
  phi[0] = 1.0;
  phi[1] = lambda / d;
  for (int k = 1; k < n_max; ++k) phi[k + 1] = (lambda * phi[k] - phi[k - 1]) / (d - 1);
  return phi;
}

double kesten_mckay(int d, double lambda) {
  const double r = 2.0 * std::sqrt(d - 1.0);
  const double inside = (r - std::abs(lambda)) * (r + std::abs(lambda));
  if (inside <= 0.0) return 0.0;
  return d * std::sqrt(inside) / (2.0 * std::numbers::pi * (d * d - lambda * lambda));
}

std::vector<double> lambda_grid(int d, int count) {
  const double edge = spectral_radius(d);
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(-edge + 2.0 * edge * i / (count - 1));
  return out;
}

}  // namespace

TEST_CASE("chebyshev_u matches the trigonometric form", "[spectral]") {
  for (double x : {-0.99, -0.5, -0.1, 0.0, 0.3, 0.77, 0.999}) {
    for (int n = 0; n <= 40; ++n) {
      REQUIRE(chebyshev_u(n, x) == Approx(chebyshev_by_sine(n, x)).margin(1e-9));
    }
  }
  CHECK(chebyshev_u(-1, 0.3) == 0.0);
  CHECK(chebyshev_u(5, 1.0) == Approx(6.0));
  CHECK(chebyshev_u(5, -1.0) == Approx(-6.0));
  CHECK_THROWS_AS(chebyshev_u(-2, 0.0), ValidationError);
}

TEST_CASE("spectral points are validated", "[spectral]") {
  CHECK_THROWS_AS(SpectralPoint::make(2, 0.0), ValidationError);
  CHECK_THROWS_AS(SpectralPoint::make(3, 2.9), ValidationError);
  CHECK_THROWS_AS(SpectralPoint::make(3, std::nan("")), ValidationError);
  const auto edge = SpectralPoint::make(3, 2.0 * std::sqrt(2.0));
  CHECK(edge.at_edge());
  CHECK(edge.chebyshev_arg() == 1.0);
  // Rounding just outside the edge is clamped, not rejected.
  CHECK(SpectralPoint::make(3, 2.0 * std::sqrt(2.0) * (1 + 1e-14)).at_edge());
}

TEST_CASE("kernel at d=3, lambda=0", "[spectral]") {
  const auto p = CovarianceProfile::build(3, 0.0, 8);
  const std::vector<double> expected{1, 0, -0.5, 0, 0.25, 0, -0.125, 0, 0.0625};
  for (int n = 0; n <= 8; ++n) CHECK(p.phi(n) == Approx(expected[n]).margin(1e-14));
  CHECK(p.big_phi() == Approx(3.0).epsilon(1e-10));
  CHECK(p.beta() == Approx(1.0 / 6.0).epsilon(1e-10));
  CHECK_THROWS_AS(p.phi(9), ValidationError);
}

TEST_CASE("closed form agrees with the wave recursion", "[spectral]") {
  for (int d : {3, 4, 5, 10}) {
    for (double lambda : lambda_grid(d, 21)) {
      const auto point = SpectralPoint::make(d, lambda);
      const auto closed = CovarianceProfile::closed_form(point, 30);
      const auto oracle = wave_oracle(d, point.lambda(), 30);
      for (int n = 0; n <= 30; ++n) REQUIRE(closed[n] == Approx(oracle[n]).margin(1e-10));
      CHECK(d * closed[1] == Approx(point.lambda()).margin(1e-12));
    }
  }
}

TEST_CASE("kernel decay bounds", "[spectral]") {
  for (int d : {3, 4, 5, 10}) {
    const auto grid = lambda_grid(d, 21);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto p = CovarianceProfile::build(d, grid[i], 40);
      const bool edge = i == 0 || i + 1 == grid.size();
      for (int n = 0; n <= 40; ++n) {
        const double scaled = std::abs(p.phi(n)) * std::pow(d - 1.0, n / 2.0);
        REQUIRE(scaled <= 2.0 * p.decay_constant(n) + 1e-9);
        if (!edge) REQUIRE(scaled <= 2.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("absolute kernel sum", "[spectral]") {
  // At lambda=0 only even distances contribute: 1 + 2 sum 2^-j = 3 for d=3,
  // and 1 + 2 sum (d-1)^-j = 1 + 2/(d-2) in general.
  for (int d : {3, 4, 5, 10}) {
    const auto p = CovarianceProfile::build(d, 0.0, 4);
    CHECK(p.big_phi() == Approx(1.0 + 2.0 / (d - 2.0)).epsilon(1e-10));
  }
  for (int d : {3, 4}) {
    for (double lambda : lambda_grid(d, 9)) {
      const auto p = CovarianceProfile::build(d, lambda, 4000);
      double direct = 1.0;
      for (int n = 1; n <= 4000; ++n) direct += 2.0 * std::abs(p.phi(n));
      CHECK(p.big_phi() == Approx(direct).epsilon(1e-8));
      CHECK(p.big_phi() >= 1.0);
    }
  }
}

TEST_CASE("spectral density integrates to one", "[spectral]") {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (int d : {3, 4, 5, 10}) {
    const double edge = spectral_radius(d);
    const double mass = integrator.integrate([&](double x) { return spectral_density(SpectralPoint::make(d, x)); },
                                             -edge, edge);
    CHECK(mass == Approx(1.0).epsilon(1e-9));
    for (double x : lambda_grid(d, 11)) CHECK(spectral_density(SpectralPoint::make(d, x)) == Approx(kesten_mckay(d, x)).margin(1e-14));
    CHECK(spectral_density(SpectralPoint::make(d, edge)) == 0.0);
  }
}

TEST_CASE("spectral sampler reproduces the first two moments", "[spectral]") {
  // The second moment of the spectral measure is the number of closed
  // walks of length two at a vertex, which is d.
  for (int d : {3, 5}) {
    SpectralSampler sampler(d);
    CHECK(sampler.tabulated_mass() == Approx(1.0).epsilon(1e-8));
    CHECK(sampler.quantile(0.5) == Approx(0.0).margin(1e-9));
    RandomStream rng(11, d);
    const int draws = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = sampler(rng);
      REQUIRE(std::abs(x) <= spectral_radius(d));
      s1 += x;
      s2 += x * x;
    }
    const double mean = s1 / draws;
    const double second = s2 / draws;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(d / static_cast<double>(draws)));
    CHECK(second == Approx(d).epsilon(0.02));
  }
}

TEST_CASE("repulsion coefficients at lambda=0", "[spectral]") {
  const auto c = repulsion_coefficients(SpectralPoint::make(3, 0.0));
  CHECK(c.a1 == 0.0);
  CHECK(c.a2 == Approx(4.0 / 5.0));
}

TEST_CASE("hand-checked kernel values", "[spectral]") {
  CHECK(chebyshev_u(2, 1.0) == Approx(3.0));
  CHECK(chebyshev_u(-1, 0.7) == 0.0);
  CHECK(chebyshev_u(3, 0.5) == Approx(-1.0).margin(1e-15));
  CHECK(spectral_density(SpectralPoint::make(3, 0.0)) == Approx(std::sqrt(2.0) / (3.0 * std::numbers::pi)));

  // At the upper edge U_n(1) = n + 1 gives phi(n) = 2^(-n/2) (n + 3) / 3.
  const auto edge = CovarianceProfile::build(3, 2.0 * std::sqrt(2.0), 20);
  for (int n = 0; n <= 20; ++n) CHECK(edge.phi(n) == Approx(std::pow(2.0, -n / 2.0) * (n + 3) / 3.0).margin(1e-13));
  CHECK(edge.phi(1) == Approx(2.0 * std::sqrt(2.0) / 3.0));

  const auto c = repulsion_coefficients(SpectralPoint::make(3, 2.0 * std::sqrt(2.0)));
  CHECK(c.a1 == Approx(12.0 * std::sqrt(2.0) / 13.0));
  CHECK(c.a2 == Approx(4.0 / 13.0));
  for (int d : {3, 4, 10})
    for (double lambda : lambda_grid(d, 7)) CHECK(repulsion_coefficients(SpectralPoint::make(d, lambda)).a2 > 0.0);
}

TEST_CASE("spectral sampler symmetry over a million draws", "[spectral]") {
  SpectralSampler sampler(3);
  RandomStream rng(2);
  const int draws = 1000000;
  double sum = 0.0, sq = 0.0;
  int below = 0;
  for (int i = 0; i < draws; ++i) {
    const double x = sampler(rng);
    sum += x;
    sq += x * x;
    below += x <= 0.0 ? 1 : 0;
  }
  const double mean = sum / draws;
  CHECK(std::abs(mean) <= 4.0 * std::sqrt((sq / draws - mean * mean) / draws));
  CHECK(std::abs(below / static_cast<double>(draws) - 0.5) <= 3.0 * std::sqrt(0.25 / draws));
}
