#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "dhinf/sysmodel.hpp"

namespace dhinf {

struct NoiseSpec {
  double cutoff = 6.0 * std::numbers::pi;  // rad/s
  double rms = 0.1;
  std::uint64_t seed = 0;
  int channels = 1;

  void validate() const;
};

/// Sampled signals on the grid t_k = k dt, k = 0..K. Column j of `values`
/// is the signal `names[j]`.
struct SimTrace {
  VectorXd times;
  std::vector<std::string> names;
  MatrixXd values;

  /// Column of the named signal; throws ArgumentError when absent.
  VectorXd signal(const std::string& name) const;
};

/// Number of grid points on [0, T] with step dt.
Eigen::Index grid_size(double t_end, double dt);

/// Gaussian white noise through a second-order Butterworth low-pass
/// (bilinear transform, prewarped at the cutoff), each channel scaled to the
/// requested discrete RMS. Rows are channels, columns grid points.
MatrixXd make_noise(const NoiseSpec& spec, double t_end, double dt);

/// Fixed-step RK4 on a lambda-free system (lambda = interval.lo) with zero
/// pre-history. Delayed states come from cubic Hermite interpolation of the
/// stored solution. `w` has one row per input and one column per grid point;
/// the input is linear between samples. Signals: x1.., z1.., w1...
SimTrace simulate(const UncertainDelaySystem& sys, const MatrixXd& w, double dt);

/// sqrt(mean(v^2)); 0 for an empty signal.
double rms(const VectorXd& v);

/// RMS of the samples on [0, T].
double rms(const VectorXd& v, double dt, double t_end);

}  // namespace dhinf
