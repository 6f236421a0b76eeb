#pragma once

#include <utility>
#include <vector>

#include "dhinf/svset.hpp"
#include "dhinf/sysmodel.hpp"

namespace dhinf {

struct RadiusConfig {
  FlowConfig flow;
  double alpha_tol = 1e-8;
  double width_tol = 1e-10;  // relative to 1 + eps
  int max_evaluations = 200;
  /// Expected radius (0: none). Replaces the doubling from eps = 1 by a
  /// bracket search around the guess.
  double eps_guess = 0.0;

  void validate() const;
};

struct BracketStep {
  double eps = 0.0;
  double alpha = 0.0;
  bool newton = false;  // false: doubling or bisection
};

struct RadiusResult {
  double radius = 0.0;
  double alpha = 0.0;  // alpha at `radius`
  SpectralPoint critical_point;
  std::vector<BracketStep> bracket_history;
  int evaluations = 0;
};

struct NormResult {
  double norm = 0.0;
  double peak_omega = 0.0;
  double peak_lambda = 0.0;
  RadiusResult radius;
};

/// Smallest eps with alpha_eps = 0 by safeguarded Newton on eps -> alpha_eps.
/// Throws UnstableError when alpha_0 >= 0 and UnboundedRadiusError when alpha
/// stays negative up to eps = 2^64.
RadiusResult robust_stability_radius(const UncertainDelaySystem& sys, const RadiusConfig& cfg = {});

/// max over lambda in [a, b] and omega >= 0 of sigma_1(T(j omega; lambda)),
/// as the reciprocal of the radius. Zero when the radius is unbounded.
NormResult robust_hinf_norm(const UncertainDelaySystem& sys, const RadiusConfig& cfg = {});

/// robust_hinf_norm on the degenerate interval [lambda, lambda].
NormResult hinf_norm_fixed(const UncertainDelaySystem& sys, double lambda, const RadiusConfig& cfg = {});

struct GridResult {
  double value = 0.0;
  double omega = 0.0;
  double lambda = 0.0;
  long skipped = 0;  // singular evaluation points
};

/// Largest gain on the uniform grid [0, omega_max] x [a, b]. A lower bound on
/// the robust norm.
GridResult grid_oracle(const UncertainDelaySystem& sys, double omega_max, int n_omega, int n_lambda,
                       int threads = 1);

/// Local maximization of sigma_1(T(j omega; lambda)) from (omega, lambda) by
/// alternating Brent searches, lambda kept in [a, b] and omega >= 0.
GridResult refine_peak(const UncertainDelaySystem& sys, double omega, double lambda);

/// For each omega, the largest gain over lambda: best point of an n_lambda
/// Chebyshev grid on [a, b], refined by Brent's method.
std::vector<std::pair<double, double>> worst_case_gain_curve(const UncertainDelaySystem& sys,
                                                             const std::vector<double>& omegas,
                                                             int n_lambda, int threads = 1);

}  // namespace dhinf
