#pragma once

#include <cstdint>
#include <vector>

#include "dhinf/roots.hpp"
#include "dhinf/sysmodel.hpp"

namespace dhinf {

/// Initial uncertainty instance for one run of the flow.
struct FlowStart {
  double lambda = 0.0;
  VectorXcd u;
  VectorXcd v;
};

struct FlowConfig {
  double h0 = 0.1;
  double h_min = 1e-8;
  double grow = 1.5;
  /// Accepted steps grow up to h_cap * h0.
  double h_cap = 10.0;
  double rel_tol = 1e-8;
  /// Added to the relative stopping test; optimizers at s = 0 never satisfy
  /// a purely relative one.
  double abs_tol = 1e-12;
  int max_iters = 2000;
  /// Empty means the automatic starts (see auto_starts).
  std::vector<FlowStart> starts;
  /// Extra starts tried in addition to the automatic ones.
  std::vector<FlowStart> warm_starts;
  RootRequest roots;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct FlowIterate {
  int start = 0;
  int k = 0;
  cd s;
  double lambda = 0.0;
  double h = 0.0;  // 0 for a start or a switch to a righter root
  double u_norm = 1.0;
  double v_norm = 1.0;
};

struct AbscissaResult {
  double alpha = 0.0;
  SpectralPoint optimizer;
  int best_start = 0;
  std::vector<FlowIterate> iterates;
  std::vector<bool> converged;
  std::vector<SpectralPoint> finals;  // one per start that ran
  /// Two starts reached the same alpha at different (|omega|, lambda).
  bool nonsmooth = false;
  /// No start could take a first step.
  bool degenerate = false;
};

struct FlowDerivatives {
  VectorXcd du;
  VectorXcd dv;
  double dlambda = 0.0;
};

/// Right-hand side of the projected gradient flow at pt, with lambda held
/// at an active bound when the gradient points outward.
FlowDerivatives flow_derivatives(const SpectralPoint& pt, const UncertainDelaySystem& sys);

/// Starts at lambda in {a, (a+b)/2, b}. Each of the `roots.count` rightmost
/// unperturbed roots there gives one start with u0 ~ Bw^H phi, v0 ~ Cz psi,
/// replaced by a seeded random unit vector when it vanishes.
std::vector<FlowStart> auto_starts(const UncertainDelaySystem& sys, const RootRequest& roots,
                                   std::uint64_t seed);

/// Largest real part of the characteristic roots over lambda in [a, b] and
/// rank-one Delta with ||Delta|| = eps.
AbscissaResult pseudo_spectral_abscissa(const UncertainDelaySystem& sys, double eps,
                                        const FlowConfig& cfg = {});

/// d alpha / d eps at the optimizer. Throws DerivativeUndefinedError when the
/// result is flagged nonsmooth.
double alpha_eps_derivative(const UncertainDelaySystem& sys, double eps,
                            const AbscissaResult& result);

}  // namespace dhinf
