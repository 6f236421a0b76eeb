#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/FFT>

#include "dhinf/error.hpp"
#include "dhinf/sim.hpp"
#include "dhinf/svset.hpp"
#include "test_support.hpp"

using namespace dhinf;
using dhinf::testing::scalar_system;

namespace {

// One-sided periodogram |X(omega_k)|^2 at omega_k = 2 pi k / (K dt).
VectorXd periodogram(const VectorXd& x) {
  Eigen::FFT<double> fft;
  std::vector<double> in(x.data(), x.data() + x.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  VectorXd p(static_cast<Eigen::Index>(out.size() / 2));
  for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = std::norm(out[static_cast<size_t>(k)]);
  return p;
}

MatrixXd constant_input(Eigen::Index rows, Eigen::Index cols, double v) {
  return MatrixXd::Constant(rows, cols, v);
}

}  // namespace

TEST_CASE("grid size") {
  CHECK(grid_size(10.0, 1e-3) == 10001);
  CHECK(grid_size(1.0, 0.25) == 5);
  CHECK_THROWS_AS(grid_size(1e-4, 1e-3), ArgumentError);
  CHECK_THROWS_AS(grid_size(1.0, 0.0), ArgumentError);
}

TEST_CASE("rms") {
  CHECK(rms(VectorXd::Ones(37)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rms(VectorXd::Zero(10)) == 0.0);
  CHECK(rms(VectorXd()) == 0.0);
  const double dt = 1e-3;
  const Eigen::Index k = grid_size(2.0, dt);
  VectorXd s(k);
  for (Eigen::Index i = 0; i < k; ++i) s(i) = std::sin(2.0 * std::numbers::pi * i * dt);
  CHECK(std::abs(rms(s, dt, 2.0) - std::sqrt(0.5)) <= 1e-3);
  CHECK(rms(s, dt, 1.0) == doctest::Approx(rms(VectorXd(s.head(1001)))).epsilon(1e-15));
}

TEST_CASE("filtered noise") {
  NoiseSpec spec;
  spec.channels = 3;
  spec.seed = 9;
  const MatrixXd w = make_noise(spec, 10.0, 1e-3);
  CHECK(w.rows() == 3);
  CHECK(w.cols() == 10001);
  for (Eigen::Index c = 0; c < w.rows(); ++c) CHECK(std::abs(rms(VectorXd(w.row(c).transpose())) - 0.1) <= 1e-12);
  CHECK(make_noise(spec, 10.0, 1e-3) == w);
  spec.seed = 10;
  CHECK(make_noise(spec, 10.0, 1e-3) != w);

  spec.rms = 0.0;
  CHECK(make_noise(spec, 1.0, 1e-3).isZero(0.0));
  spec.rms = -1.0;
  CHECK_THROWS_AS(make_noise(spec, 1.0, 1e-3), ArgumentError);
  spec.rms = 0.1;
  spec.cutoff = 4000.0;
  CHECK_THROWS_AS(make_noise(spec, 1.0, 1e-3), ArgumentError);
}

TEST_CASE("noise spectrum falls off above twice the cutoff") {
  const double dt = 1e-3, t_end = 10.0;
  NoiseSpec spec;
  double pass = 0.0, stop = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const VectorXd x = make_noise(spec, t_end, dt).row(0).transpose();
    const VectorXd p = periodogram(x);
    const double d_omega = 2.0 * std::numbers::pi / (static_cast<double>(x.size()) * dt);
    double ps = 0.0, ss = 0.0;
    int pn = 0, sn = 0;
    for (Eigen::Index k = 1; k < p.size(); ++k) {
      const double omega = k * d_omega;
      if (omega <= spec.cutoff) ps += p(k), ++pn;
      if (omega >= 2.0 * spec.cutoff) ss += p(k), ++sn;
    }
    pass += ps / pn;
    stop += ss / sn;
  }
  CHECK(10.0 * std::log10(pass / stop) >= 20.0);
}

TEST_CASE("simulation of undelayed and delayed scalar systems") {
  const double dt = 1e-3;
  SUBCASE("first-order lag step response") {
    const auto sys = scalar_system({0.0}, {-1.0});
    const Eigen::Index k = grid_size(5.0, dt);
    const auto tr = simulate(sys, constant_input(1, k, 1.0), dt);
    const VectorXd x = tr.signal("x1");
    double err = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) err = std::max(err, std::abs(x(i) - (1.0 - std::exp(-tr.times(i)))));
    CHECK(err <= 1e-6);
    CHECK(tr.signal("z1") == x);
    CHECK(tr.signal("w1").isOnes(0.0));
    CHECK(tr.times(k - 1) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("method of steps for x' = -x(t-1) + 1") {
    const auto sys = scalar_system({0.0, 1.0}, {0.0, -1.0});
    const Eigen::Index k = grid_size(2.0, dt);
    const auto tr = simulate(sys, constant_input(1, k, 1.0), dt);
    const VectorXd x = tr.signal("x1");
    double err = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double t = tr.times(i);
      const double exact = t <= 1.0 ? t : t - 0.5 * (t - 1.0) * (t - 1.0);
      err = std::max(err, std::abs(x(i) - exact));
    }
    CHECK(err <= 1e-9);
  }
  SUBCASE("zero input gives a zero trace") {
    std::mt19937_64 rng(3);
    auto sys = dhinf::testing::random_system(rng, 3, 2, 2, 2, 0.0, 0.0);
    const auto tr = simulate(sys, MatrixXd::Zero(2, 2001), dt);
    CHECK(tr.values.isZero(0.0));
  }
}

TEST_CASE("simulation argument checks") {
  const auto sys = scalar_system({0.0, 0.5e-3}, {-1.0, 0.1});
  CHECK_THROWS_AS(simulate(sys, MatrixXd::Ones(1, 10), 1e-3), ArgumentError);
  CHECK_NOTHROW(simulate(sys, MatrixXd::Ones(1, 10), 0.5e-3));
  CHECK_THROWS_AS(simulate(sys, MatrixXd::Ones(2, 10), 0.5e-3), StructuralError);
  auto uncertain = sys;
  uncertain.interval = {-1.0, 1.0};
  CHECK_THROWS_AS(simulate(uncertain, MatrixXd::Ones(1, 10), 0.5e-3), ArgumentError);
}

TEST_CASE("simulation is linear and self-convergent") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    const auto sys = dhinf::testing::random_system(rng, 2 + trial, 1 + trial % 2, 2, 1, 0.0, 0.0);
    const double dt = 1e-3;
    const double t_end = 5.0;
    auto input = [&](double h) {
      const Eigen::Index k = grid_size(t_end, h);
      MatrixXd w(2, k);
      for (Eigen::Index i = 0; i < k; ++i) {
        w(0, i) = std::sin(1.3 * i * h);
        w(1, i) = std::cos(0.7 * i * h) - 0.5;
      }
      return w;
    };
    const MatrixXd w = input(dt);
    const auto base = simulate(sys, w, dt);
    const auto scaled = simulate(sys, -2.5 * w, dt);
    CHECK((scaled.values + 2.5 * base.values).cwiseAbs().maxCoeff() <= 1e-9 * 2.5 * base.values.cwiseAbs().maxCoeff());

    const auto fine = simulate(sys, input(0.5 * dt), 0.5 * dt);
    double diff = 0.0;
    for (Eigen::Index i = 0; i < base.values.rows(); ++i)
      diff = std::max(diff, (base.values.row(i) - fine.values.row(2 * i)).cwiseAbs().maxCoeff());
    CHECK(diff <= 1e-5);
  }
}

TEST_CASE("stable systems give bounded traces under noise") {
  std::mt19937_64 rng(23);
  int tested = 0;
  while (tested < 2) {
    const auto sys = dhinf::testing::random_system(rng, 3, 1, 2, 2, 0.0, 0.0);
    if (pseudo_spectral_abscissa(sys, 0.0).alpha > -0.1) continue;
    ++tested;
    NoiseSpec spec;
    spec.channels = 2;
    spec.seed = static_cast<std::uint64_t>(tested);
    const double dt = 1e-2;
    const auto tr = simulate(sys, make_noise(spec, 100.0, dt), dt);
    CHECK(tr.values.allFinite());
    CHECK(tr.values.leftCols(3).cwiseAbs().maxCoeff() < 1e3 * spec.rms);
  }
}
