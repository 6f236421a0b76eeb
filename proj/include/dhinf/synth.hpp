#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dhinf/hinf.hpp"
#include "dhinf/network.hpp"

namespace dhinf {

struct SynthConfig {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iters = 1000;  // BFGS iterations per restart
  double grad_tol = 1e-6;
  double c1 = 1e-4;  // weak Wolfe sufficient decrease
  double c2 = 0.9;   // weak Wolfe curvature
  int max_line_search = 50;
  /// BFGS stops once the objective decreased by less than this (relative)
  /// over `stall_iters` consecutive iterations.
  double stall_tol = 1e-8;
  int stall_iters = 10;
  /// Gradient-sampling radii, relative to max(1, ||p||).
  std::vector<double> sampling_radii{1e-2, 1e-4, 1e-6};
  int max_sampling_iters = 20;  // per radius
  double stab_margin = 1e-3;
  int max_stabilize_iters = 200;
  /// Used for every objective evaluation inside the optimizer.
  RadiusConfig radius;
  int threads = 1;
  /// Called after every accepted step: restart, phase ("stabilize", "bfgs",
  /// "sampling"), step count, value. May run on worker threads.
  std::function<void(int, const char*, int, double)> progress;

  void validate() const;
};

struct ObjectiveValue {
  /// Robust norm of the decoupled subsystem; +inf when unstable.
  double value = 0.0;
  VectorXd grad;
  /// sigma_1 simple at the peak.
  bool smooth = false;
  double omega = 0.0;
  double lambda = 0.0;
};

/// Inner solver settings derived from cfg.radius: two rightmost roots per
/// automatic start.
RadiusConfig synth_radius_config(const RadiusConfig& base);

/// Robust norm of build_decoupled_subsystem(plant, ctrl.with_params(p)),
/// polished around its peak; +inf when that system is not stable on [-1, 1].
double objective(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p,
                 const RadiusConfig& cfg = synth_radius_config({}));

/// Value and gradient Re(u1^H dT/dp_i v1) at the peak. The gradient is empty
/// for the sentinel.
ObjectiveValue objective_with_gradient(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                       const VectorXd& p,
                                       const RadiusConfig& cfg = synth_radius_config({}));

/// d/dp_i of sum_r (H_r + lambda G_r) e^{-s tau_r} contracted as
/// Re(a^H dA_i(s) b), for every tunable slot.
VectorXd parameter_gradient(const NetworkedPlant& plant, const ControllerParams& ctrl, cd s,
                            double lambda, const VectorXcd& a, const VectorXcd& b);

struct StabilizeResult {
  VectorXd p;
  double abscissa = 0.0;
  std::vector<double> trace;  // accepted abscissa values
  bool unchanged = false;     // p0 was already stable
};

/// Minimizes the eps = 0 abscissa over [-1, 1] until it is <= -stab_margin.
/// Throws NoStabilizerError with the best abscissa reached.
StabilizeResult stabilize(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p0,
                          const SynthConfig& cfg = {});

struct RestartResult {
  VectorXd p;
  double objective = 0.0;
  std::vector<double> trace;  // accepted objective values
  std::vector<double> stabilize_trace;
  int bfgs_iters = 0;
  int sampling_iters = 0;
  double stationarity = 0.0;  // min-norm element of the last sampled hull
  bool failed = false;        // stabilization failed
};

struct SynthesisResult {
  VectorXd p_star;
  ControllerParams controller;
  double objective = 0.0;
  double stationarity = 0.0;
  int best_restart = 0;
  std::vector<RestartResult> restarts;
};

/// Best of cfg.restarts runs of stabilize -> BFGS -> gradient sampling.
/// Restart 0 starts from the template values unless they are all zero; the
/// others start from seeded random points.
SynthesisResult synthesize(const NetworkedPlant& plant, const ControllerParams& ctrl,
                           const SynthConfig& cfg = {});

/// Smallest-norm point of the convex hull of the columns of g.
VectorXd min_norm_hull(const MatrixXd& g);

}  // namespace dhinf
