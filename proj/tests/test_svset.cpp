#include <doctest.h>

#include <map>
#include <random>

#include <boost/math/tools/minima.hpp>

#include "dhinf/error.hpp"
#include "dhinf/svset.hpp"
#include "test_support.hpp"

using namespace dhinf;
using dhinf::testing::benchmark;
using dhinf::testing::scalar_system;

namespace {

// On the real axis the benchmark transfer function is
// (-114 + 12 lambda) / (9 lambda^2 - 12 lambda + 28) at s = 0.
double benchmark_radius_oracle() {
  auto neg_gain = [](double l) { return -std::abs((-114.0 + 12.0 * l) / (9.0 * l * l - 12.0 * l + 28.0)); };
  const auto best = boost::math::tools::brent_find_minima(neg_gain, -1.0, 1.0, 50);
  return 1.0 / -best.second;
}

UncertainDelaySystem scalar_shift() { return scalar_system({0.0}, {-2.0}); }

void check_trace_invariants(const UncertainDelaySystem& sys, const AbscissaResult& r) {
  std::map<int, double> last;
  for (const auto& it : r.iterates) {
    CHECK(it.lambda >= sys.interval.lo);
    CHECK(it.lambda <= sys.interval.hi);
    CHECK(std::abs(it.u_norm - 1.0) <= 1e-12);
    CHECK(std::abs(it.v_norm - 1.0) <= 1e-12);
    if (auto p = last.find(it.start); p != last.end()) CHECK(it.s.real() >= p->second);
    last[it.start] = it.s.real();
  }
}

}  // namespace

TEST_CASE("eps = 0 without lambda terms gives the nominal abscissa") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto sys = dhinf::testing::random_system(rng, 2 + trial % 2, 1, 1, 1);
    for (auto& g : sys.g) g.setZero();
    const auto r = pseudo_spectral_abscissa(sys, 0.0);
    CHECK(r.alpha == doctest::Approx(spectral_abscissa(sys, 0.0, std::nullopt)).epsilon(1e-12));
  }
}

TEST_CASE("scalar shift: alpha = -2 + eps and unit derivative") {
  const auto sys = scalar_shift();
  for (double eps : {0.0, 0.5, 1.0, 3.0}) {
    const auto r = pseudo_spectral_abscissa(sys, eps);
    CHECK(std::abs(r.alpha - (-2.0 + eps)) < 1e-10);
    if (eps > 0.0) CHECK(alpha_eps_derivative(sys, eps, r) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("scalar shift from a rotated start climbs to the same value") {
  const auto sys = scalar_shift();
  FlowConfig cfg;
  cfg.starts.push_back({0.0, VectorXcd::Constant(1, std::polar(1.0, 2.5)), VectorXcd::Constant(1, 1.0)});
  const auto r = pseudo_spectral_abscissa(sys, 1.0, cfg);
  CHECK(std::abs(r.alpha + 1.0) < 1e-8);
  CHECK(r.converged.front());
  check_trace_invariants(sys, r);
}

TEST_CASE("benchmark pseudo-spectral abscissa crosses zero at the closed-form radius") {
  const auto sys = benchmark();
  const double r_star = benchmark_radius_oracle();
  CHECK(r_star == doctest::Approx(0.2245130).epsilon(1e-6));
  const auto at0 = pseudo_spectral_abscissa(sys, 0.0);
  CHECK(at0.alpha < 0.0);
  const auto at_r = pseudo_spectral_abscissa(sys, r_star);
  CHECK(std::abs(at_r.alpha) < 1e-6);
  CHECK(std::abs(at_r.optimizer.s.imag()) < 1e-6);
  check_trace_invariants(sys, at_r);
}

TEST_CASE("benchmark derivative in eps matches central differences") {
  const auto sys = benchmark();
  for (double eps : {0.05, 0.1, 0.2}) {
    const auto r = pseudo_spectral_abscissa(sys, eps);
    const double d = alpha_eps_derivative(sys, eps, r);
    const double delta = 1e-5;
    const double fd = (pseudo_spectral_abscissa(sys, eps + delta).alpha -
                       pseudo_spectral_abscissa(sys, eps - delta).alpha) /
                      (2.0 * delta);
    CHECK(std::abs(d - fd) <= 1e-4 * std::abs(fd));
  }
}

TEST_CASE("zero input map gives a zero derivative") {
  auto sys = benchmark();
  sys.b_w.setZero();
  const auto r = pseudo_spectral_abscissa(sys, 0.0);
  CHECK(alpha_eps_derivative(sys, 0.0, r) == 0.0);
}

TEST_CASE("flow derivatives") {
  SUBCASE("stationary u gives a vanishing projection") {
    const auto sys = scalar_shift();
    ComplexPerturbation p{VectorXcd::Constant(1, 1.0), VectorXcd::Constant(1, 1.0), 0.5};
    const SpectralPoint pt = eig_triple(sys, 0.0, p, -1.5);
    const auto d = flow_derivatives(pt, sys);
    CHECK(d.du.norm() <= 1e-10);
    CHECK(d.dv.norm() <= 1e-10);
  }
  SUBCASE("lambda held at b when the gradient points outward") {
    auto sys = scalar_system({0.0}, {-2.0});
    sys.g[0](0, 0) = 1.0;
    sys.interval = {-1.0, 1.0};
    const SpectralPoint at_b = eig_triple(sys, 1.0, std::nullopt, -1.0);
    CHECK(flow_derivatives(at_b, sys).dlambda == 0.0);
    const SpectralPoint inside = eig_triple(sys, 0.0, std::nullopt, -2.0);
    CHECK(flow_derivatives(inside, sys).dlambda == doctest::Approx(1.0));
    sys.g[0](0, 0) = -1.0;
    const SpectralPoint at_a = eig_triple(sys, -1.0, std::nullopt, -1.0);
    CHECK(flow_derivatives(at_a, sys).dlambda == 0.0);
  }
  SUBCASE("no lambda terms means no lambda motion") {
    std::mt19937_64 rng(4);
    auto sys = dhinf::testing::random_system(rng, 3, 1, 2, 2);
    for (auto& g : sys.g) g.setZero();
    const auto roots = rightmost_roots(sys, 0.3, std::nullopt);
    const SpectralPoint pt = eig_triple(sys, 0.3, std::nullopt, roots.front());
    CHECK(flow_derivatives(pt, sys).dlambda == 0.0);
  }
  SUBCASE("tangency on random points") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const auto sys = dhinf::testing::random_system(rng, 2 + trial % 3, 1 + trial % 2, 2, 3);
      ComplexPerturbation p{VectorXcd::Random(2).normalized(), VectorXcd::Random(3).normalized(), 0.3};
      const auto roots = rightmost_roots(sys, 0.1, p);
      const SpectralPoint pt = eig_triple(sys, 0.1, p, roots.front());
      const auto d = flow_derivatives(pt, sys);
      CHECK(std::abs(p.u.dot(d.du).real()) <= 1e-10);
      CHECK(std::abs(p.v.dot(d.dv).real()) <= 1e-10);
    }
  }
  SUBCASE("non-positive xi is rejected") {
    const auto sys = scalar_shift();
    SpectralPoint pt = eig_triple(sys, 0.0, std::nullopt, -2.0);
    pt.xi = -1.0;
    CHECK_THROWS_AS(flow_derivatives(pt, sys), NormalizationError);
  }
}

TEST_CASE("flow invariants and monotonicity in eps on random systems") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    const auto sys = dhinf::testing::random_system(rng, 2 + trial % 2, 1 + trial % 2, 1 + trial % 2, 2);
    double prev = -1e300;
    for (double eps : {0.0, 0.1, 0.3, 0.6}) {
      const auto r = pseudo_spectral_abscissa(sys, eps);
      check_trace_invariants(sys, r);
      CHECK(r.alpha >= prev - 1e-8);
      prev = r.alpha;
      // rank one with norm eps
      const MatrixXcd delta = r.optimizer.pert.matrix();
      Eigen::JacobiSVD<MatrixXcd> svd(delta);
      CHECK(svd.singularValues()(0) == doctest::Approx(eps).epsilon(1e-12));
      if (svd.singularValues().size() > 1) CHECK(svd.singularValues()(1) <= 1e-12 * (1.0 + eps));
    }
  }
}

TEST_CASE("degenerate interval keeps lambda fixed") {
  auto sys = benchmark();
  sys.interval = {0.25, 0.25};
  const auto r = pseudo_spectral_abscissa(sys, 0.1);
  for (const auto& it : r.iterates) CHECK(it.lambda == 0.25);
}

TEST_CASE("threaded starts give the same result") {
  const auto sys = benchmark();
  FlowConfig one, two;
  two.threads = 2;
  const auto a = pseudo_spectral_abscissa(sys, 0.15, one);
  const auto b = pseudo_spectral_abscissa(sys, 0.15, two);
  CHECK(a.alpha == b.alpha);
  CHECK(a.best_start == b.best_start);
  CHECK(a.iterates.size() == b.iterates.size());
}

TEST_CASE("bad arguments") {
  const auto sys = scalar_shift();
  CHECK_THROWS_AS(pseudo_spectral_abscissa(sys, -1.0), ArgumentError);
  FlowConfig cfg;
  cfg.h_min = 1.0;
  CHECK_THROWS_AS(pseudo_spectral_abscissa(sys, 0.1, cfg), ArgumentError);
  cfg = {};
  cfg.starts.push_back({0.0, VectorXcd::Ones(2), VectorXcd::Ones(1)});
  CHECK_THROWS_AS(pseudo_spectral_abscissa(sys, 0.1, cfg), StructuralError);
}
