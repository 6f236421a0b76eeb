#include <doctest.h>

#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "dhinf/error.hpp"
#include "dhinf/roots.hpp"
#include "test_support.hpp"

using namespace dhinf;
using dhinf::testing::scalar_system;

namespace {

const cd kLambertRoot = dhinf::testing::lambert_w0(-1.0, cd(-0.3, 1.3));

}

TEST_CASE("Lambert-W oracle value") {
  // Frozen from the Halley iteration in test_support.
  CHECK(kLambertRoot.real() == doctest::Approx(-0.3181315052047641).epsilon(1e-12));
  CHECK(kLambertRoot.imag() == doctest::Approx(1.337235701430689).epsilon(1e-12));
}

TEST_CASE("rightmost root of x' = -x(t-1)") {
  const auto sys = scalar_system({0.0, 1.0}, {0.0, -1.0});
  const auto roots = rightmost_roots(sys, 0.0, std::nullopt);
  REQUIRE(!roots.empty());
  CHECK(std::abs(roots.front() - kLambertRoot) < 1e-10);
  CHECK(spectral_abscissa(sys, 0.0, std::nullopt) == doctest::Approx(-0.3181315).epsilon(1e-7));
}

TEST_CASE("undelayed scalar roots") {
  CHECK(spectral_abscissa(scalar_system({0.0}, {-1.0}), 0.0, std::nullopt) == -1.0);
  CHECK(spectral_abscissa(scalar_system({0.0}, {2.0}), 0.0, std::nullopt) == 2.0);
}

TEST_CASE("critical delay: roots on the imaginary axis") {
  const double k = std::numbers::pi / 2.0;
  const auto sys = scalar_system({0.0, 1.0}, {0.0, -k});
  const auto roots = rightmost_roots(sys, 0.0, std::nullopt);
  CHECK(std::abs(roots.front().real()) < 1e-8);
  CHECK(std::abs(roots.front().imag() - k) < 1e-8);
}

TEST_CASE("roots are sorted and satisfy the residual criterion") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const auto sys = dhinf::testing::random_system(rng, 1 + trial % 3, 1 + trial % 2, 1, 1);
    RootRequest req;
    req.count = 6;
    const auto roots = rightmost_roots(sys, 0.25, std::nullopt, req);
    REQUIRE(!roots.empty());
    for (size_t i = 0; i < roots.size(); ++i) {
      CHECK(roots[i].imag() >= 0.0);
      CHECK(root_residual(sys, 0.25, std::nullopt, roots[i]) <= 1e-9);
      // conjugate is a root as well
      CHECK(root_residual(sys, 0.25, std::nullopt, std::conj(roots[i])) <= 1e-9);
      if (i > 0) CHECK(roots[i].real() <= roots[i - 1].real() + 1e-9);
    }
  }
}

TEST_CASE("doubling the degree does not move converged roots") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = dhinf::testing::random_system(rng, 2, 2, 1, 1);
    RootRequest req;
    req.count = 4;
    const auto a = rightmost_roots(sys, 0.0, std::nullopt, req);
    req.disc_degree = 80;
    const auto b = rightmost_roots(sys, 0.0, std::nullopt, req);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-8);
  }
}

TEST_CASE("undelayed system roots coincide with dense eigenvalues") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto sys = dhinf::testing::random_system(rng, 4, 0, 2, 3);
    ComplexPerturbation p;
    p.u = VectorXcd::Random(2).normalized();
    p.v = VectorXcd::Random(3).normalized();
    p.eps = 0.3;
    RootRequest req;
    req.count = 4;
    const auto roots = rightmost_roots(sys, 0.4, p, req);
    const MatrixXcd a =
        (sys.h[0] + 0.4 * sys.g[0]).cast<cd>() + sys.b_w.cast<cd>() * p.matrix() * sys.c_z.cast<cd>();
    Eigen::ComplexEigenSolver<MatrixXcd> es(a);
    REQUIRE(roots.size() == 4);
    for (cd r : roots) {
      double best = 1e300;
      for (Eigen::Index i = 0; i < 4; ++i) best = std::min(best, std::abs(r - es.eigenvalues()(i)));
      CHECK(best < 1e-10);
    }
  }
}

TEST_CASE("eig_triple for x' = -x") {
  const auto sys = scalar_system({0.0}, {-1.0});
  const SpectralPoint pt = eig_triple(sys, 0.0, std::nullopt, -1.0);
  CHECK(std::abs(pt.s - cd(-1.0)) < 1e-14);
  CHECK(std::abs(pt.psi(0) - cd(1.0)) < 1e-14);
  CHECK(std::abs(pt.phi(0) - cd(1.0)) < 1e-14);
  CHECK(pt.xi == doctest::Approx(1.0));
}

TEST_CASE("eig_triple for x' = -x(t-1): xi = |1 - e^{-s}| and real positive") {
  const auto sys = scalar_system({0.0, 1.0}, {0.0, -1.0});
  const SpectralPoint pt = eig_triple(sys, 0.0, std::nullopt, cd(-0.3, 1.3));
  CHECK(std::abs(pt.s - kLambertRoot) < 1e-12);
  // M'(s) = 1 + tau * a * e^{-s tau} with a = -1, tau = 1.
  const cd raw = 1.0 - std::exp(-pt.s);
  CHECK(pt.xi == doctest::Approx(std::abs(raw)).epsilon(1e-12));
  const cd xi = std::conj(pt.phi(0)) * raw * pt.psi(0);
  CHECK(std::abs(xi.imag()) < 1e-13);
  CHECK(xi.real() > 0.0);
}

TEST_CASE("eig_triple on benchmark seeded from the discretization") {
  const auto sys = dhinf::testing::benchmark();
  const auto roots = rightmost_roots(sys, 0.0, std::nullopt);
  const SpectralPoint pt = eig_triple(sys, 0.0, std::nullopt, roots.front());
  const MatrixXcd m = characteristic_matrix(sys, pt.s, 0.0);
  CHECK((m * pt.psi).norm() < 1e-9 * (1.0 + std::abs(pt.s)));
  CHECK((pt.phi.adjoint() * m).norm() < 1e-9 * (1.0 + std::abs(pt.s)));
  CHECK(std::abs(pt.psi.norm() - 1.0) < 1e-12);
  CHECK(pt.xi > 0.0);
  const cd xi = pt.phi.dot(characteristic_derivative(sys, pt.s, 0.0) * pt.psi);
  CHECK(std::abs(xi.imag()) < 1e-12);
}

TEST_CASE("perturbed spectrum is not conjugate-folded") {
  const auto sys = scalar_system({0.0, 1.0}, {0.0, -1.0});
  ComplexPerturbation p{VectorXcd::Constant(1, cd(0.0, 1.0)), VectorXcd::Constant(1, 1.0), 0.2};
  RootRequest req;
  req.count = 4;
  const auto roots = rightmost_roots(sys, 0.0, p, req);
  bool has_negative_imag = false;
  for (cd r : roots) {
    CHECK(root_residual(sys, 0.0, p, r) <= 1e-9);
    has_negative_imag |= r.imag() < 0.0;
  }
  CHECK(has_negative_imag);
}

TEST_CASE("bad requests are rejected") {
  const auto sys = scalar_system({0.0, 1.0}, {0.0, -1.0});
  RootRequest req;
  req.disc_degree = 3;
  CHECK_THROWS_AS(rightmost_roots(sys, 0.0, std::nullopt, req), ArgumentError);
  req = {};
  req.count = 0;
  CHECK_THROWS_AS(rightmost_roots(sys, 0.0, std::nullopt, req), ArgumentError);
}
