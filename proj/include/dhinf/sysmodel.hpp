#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dhinf {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Closed interval [lo, hi] for the real uncertain parameter.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x, double tol = 1e-12) const { return x >= lo - tol && x <= hi + tol; }
  double mid() const { return 0.5 * (lo + hi); }
  bool degenerate() const { return lo == hi; }
};

/// x'(t) = sum_r (H_r + lambda G_r) x(t - tau_r) + Bw w(t),  z(t) = Cz x(t),
/// with lambda an uncertain real parameter in `interval`.
struct UncertainDelaySystem {
  std::vector<double> delays;  // tau_0 = 0 < tau_1 < ... < tau_R
  std::vector<MatrixXd> h;
  std::vector<MatrixXd> g;
  MatrixXd b_w;
  MatrixXd c_z;
  Interval interval;

  Eigen::Index states() const { return h.empty() ? 0 : h.front().rows(); }
  Eigen::Index inputs() const { return b_w.cols(); }
  Eigen::Index outputs() const { return c_z.rows(); }
  double max_delay() const { return delays.empty() ? 0.0 : delays.back(); }
  bool has_delays() const { return max_delay() > 0.0; }

  /// Throws StructuralError on dimension mismatches and ValidationError on
  /// delay or interval violations.
  void validate() const;
};

/// Rank-one complex perturbation Delta = eps * u * v^H.
struct ComplexPerturbation {
  VectorXcd u;
  VectorXcd v;
  double eps = 0.0;

  MatrixXcd matrix() const { return eps * u * v.adjoint(); }
};

/// A characteristic root together with its uncertainty instance and the
/// normalized left/right null vectors of the characteristic matrix.
struct SpectralPoint {
  cd s;
  double lambda = 0.0;
  ComplexPerturbation pert;
  VectorXcd phi;
  VectorXcd psi;
  double xi = 0.0;
};

/// sum_r (H_r + lambda G_r) e^{-s tau_r}
MatrixXcd delay_sum(const UncertainDelaySystem& sys, cd s, double lambda);

/// I s - sum_r (H_r + lambda G_r) e^{-s tau_r} - Bw Delta Cz.
MatrixXcd characteristic_matrix(const UncertainDelaySystem& sys, cd s, double lambda,
                                const std::optional<ComplexPerturbation>& pert = std::nullopt);

/// d/ds of the characteristic matrix: I + sum_r (H_r + lambda G_r) tau_r e^{-s tau_r}.
/// The perturbation term is constant in s.
MatrixXcd characteristic_derivative(const UncertainDelaySystem& sys, cd s, double lambda);

/// |s| + sum_r ||H_r + lambda G_r|| |e^{-s tau_r}|: magnitude of the terms of M(s).
double term_scale(const UncertainDelaySystem& sys, cd s, double lambda);

/// True when the LU factor of M(s) is singular relative to term_scale.
bool numerically_singular(const Eigen::PartialPivLU<MatrixXcd>& lu, double scale);

/// Cz (I s - sum_r (H_r + lambda G_r) e^{-s tau_r})^{-1} Bw.
/// Throws SingularityError when s is (numerically) a characteristic root.
MatrixXcd transfer_eval(const UncertainDelaySystem& sys, cd s, double lambda);

double sigma_max(const MatrixXcd& m);

UncertainDelaySystem load_system(const std::string& json_text);
std::string save_system(const UncertainDelaySystem& sys);

/// Structural equality (exact, entry by entry).
bool same_system(const UncertainDelaySystem& a, const UncertainDelaySystem& b);

/// Copy of `sys` with the uncertainty interval collapsed to [lambda, lambda].
UncertainDelaySystem with_fixed_lambda(UncertainDelaySystem sys, double lambda);

}  // namespace dhinf
