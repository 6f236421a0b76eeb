#pragma once

#include <complex>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "dhinf/network.hpp"
#include "dhinf/sysmodel.hpp"

namespace dhinf::testing {

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(std::string(DHINF_FIXTURE_DIR) + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline UncertainDelaySystem benchmark() { return load_system(read_fixture("benchmark.json")); }

/// x' = sum_r a_r x(t - tau_r) + b w, z = c x for scalar state.
inline UncertainDelaySystem scalar_system(std::vector<double> delays, std::vector<double> coeffs,
                                          double b = 1.0, double c = 1.0) {
  UncertainDelaySystem sys;
  sys.delays = std::move(delays);
  for (double a : coeffs) {
    sys.h.push_back(MatrixXd::Constant(1, 1, a));
    sys.g.push_back(MatrixXd::Zero(1, 1));
  }
  sys.b_w = MatrixXd::Constant(1, 1, b);
  sys.c_z = MatrixXd::Constant(1, 1, c);
  sys.interval = {0.0, 0.0};
  return sys;
}

/// Principal branch of Lambert W by Halley iteration; independent of the
/// library's root finder.
inline std::complex<double> lambert_w0(std::complex<double> z, std::complex<double> w0) {
  std::complex<double> w = w0;
  for (int i = 0; i < 100; ++i) {
    const std::complex<double> ew = std::exp(w);
    const std::complex<double> f = w * ew - z;
    const std::complex<double> fp = ew * (w + 1.0);
    const std::complex<double> fpp = ew * (w + 2.0);
    const std::complex<double> step = f / (fp - f * fpp / (2.0 * fp));
    w -= step;
    if (std::abs(step) < 1e-16) break;
  }
  return w;
}

/// Random stable-looking delay system: diagonally dominant H_0, small delayed
/// and lambda terms.
inline UncertainDelaySystem random_system(std::mt19937_64& rng, int n, int delayed_terms, int m,
                                          int p, double a = -1.0, double b = 1.0) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto rand_mat = [&](Eigen::Index r, Eigen::Index c, double scale) {
    MatrixXd x(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) x(i, j) = scale * unif(rng);
    return x;
  };
  UncertainDelaySystem sys;
  sys.delays.push_back(0.0);
  MatrixXd h0 = rand_mat(n, n, 1.0);
  h0.diagonal().array() -= 2.5 + 0.5 * n;
  sys.h.push_back(h0);
  sys.g.push_back(rand_mat(n, n, 0.3));
  double tau = 0.0;
  for (int r = 0; r < delayed_terms; ++r) {
    tau += 0.2 + 0.8 * std::abs(unif(rng));
    sys.delays.push_back(tau);
    sys.h.push_back(rand_mat(n, n, 0.4));
    sys.g.push_back(rand_mat(n, n, 0.2));
  }
  sys.b_w = rand_mat(n, m, 1.0);
  sys.c_z = rand_mat(p, n, 1.0);
  sys.interval = {a, b};
  return sys;
}


/// Random networked plant and controller whose decoupled subsystem is
/// strongly damped: dominant A_0 diagonal, small inputs and couplings.
struct RandomNetwork {
  NetworkedPlant plant;
  ControllerParams ctrl;
};

inline RandomNetwork random_network(std::mt19937_64& rng, int n, int n_c) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto rand_mat = [&](Eigen::Index r, Eigen::Index c, double scale) {
    MatrixXd x(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) x(i, j) = scale * unif(rng);
    return x;
  };
  RandomNetwork out;
  NetworkedPlant& p = out.plant;
  p.delays = {0.0, 0.3 + 0.5 * std::abs(unif(rng))};
  MatrixXd a0 = rand_mat(n, n, 0.8);
  a0.diagonal().array() -= 3.0;
  p.a = {a0, rand_mat(n, n, 0.3)};
  p.b_u = rand_mat(n, 1, 1.0);
  p.b_un = rand_mat(n, 1, 0.5);
  p.b_w = rand_mat(n, 1 + n % 2, 1.0);
  p.c_y = rand_mat(1, n, 1.0);
  p.c_yn = rand_mat(1, n, 0.5);
  p.c_z = rand_mat(1 + (n + 1) % 2, n, 1.0);
  p.tau_u = 0.1 * std::abs(unif(rng));
  p.tau_n = 0.2 * std::abs(unif(rng));
  p.tau_nc = 0.2 * std::abs(unif(rng));
  ControllerParams& c = out.ctrl;
  c = ControllerParams::zeros(p, n_c);
  c.j = rand_mat(n_c, n_c, 0.5);
  c.j.diagonal().array() -= 2.0;
  c.f = rand_mat(n_c, 1, 0.5);
  c.fn = rand_mat(n_c, 1, 0.3);
  c.l = rand_mat(1, n_c, 0.3);
  c.k = rand_mat(1, 1, 0.3);
  c.kn = rand_mat(1, 1, 0.2);
  return out;
}

}  // namespace dhinf::testing
