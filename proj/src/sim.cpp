#include "dhinf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Sparse>

#include "dhinf/error.hpp"

namespace dhinf {

void NoiseSpec::validate() const {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ArgumentError("cutoff must be positive");
  if (!(rms >= 0.0) || !std::isfinite(rms)) throw ArgumentError("rms must be nonnegative");
  if (channels < 0) throw ArgumentError("channels must be nonnegative");
}

VectorXd SimTrace::signal(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ArgumentError("no signal named '" + name + "'");
  return values.col(it - names.begin());
}

Eigen::Index grid_size(double t_end, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("dt must be positive");
  if (!(t_end >= dt) || !std::isfinite(t_end)) throw ArgumentError("T must be at least dt");
  return static_cast<Eigen::Index>(std::floor(t_end / dt * (1.0 + 1e-12))) + 1;
}

MatrixXd make_noise(const NoiseSpec& spec, double t_end, double dt) {
  spec.validate();
  const Eigen::Index k = grid_size(t_end, dt);
  const double half = 0.5 * spec.cutoff * dt;
  if (half >= 0.5 * std::numbers::pi) throw ArgumentError("cutoff must lie below the Nyquist frequency");
  const double c = std::tan(half);
  const double sq2 = std::numbers::sqrt2;
  const double norm = 1.0 / (1.0 + sq2 * c + c * c);
  const double b0 = c * c * norm, b1 = 2.0 * b0, b2 = b0;
  const double a1 = 2.0 * (c * c - 1.0) * norm, a2 = (1.0 - sq2 * c + c * c) * norm;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;
  MatrixXd out(spec.channels, k);
  for (int ch = 0; ch < spec.channels; ++ch) {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double x0 = normal(rng);
      const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      out(ch, i) = y0;
      x2 = x1, x1 = x0, y2 = y1, y1 = y0;
    }
    const double r = rms(out.row(ch).transpose());
    if (spec.rms == 0.0 || r == 0.0)
      out.row(ch).setZero();
    else
      out.row(ch) *= spec.rms / r;
  }
  return out;
}

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Stored solution with derivatives on the grid; zero before t = 0.
class History {
 public:
  History(Eigen::Index n, Eigen::Index k, double dt) : x_(MatrixXd::Zero(n, k)), d_(MatrixXd::Zero(n, k)), dt_(dt) {}

  MatrixXd& x() { return x_; }
  MatrixXd& d() { return d_; }

  // value at time t using points 0..last
  VectorXd at(double t, Eigen::Index last) const {
    if (t < 0.0) return VectorXd::Zero(x_.rows());
    if (last == 0) return x_.col(0);
    const double q = t / dt_;
    Eigen::Index i = std::min(static_cast<Eigen::Index>(std::floor(q)), last - 1);
    const double th = std::clamp(q - static_cast<double>(i), 0.0, 1.0);
    const double th2 = th * th, th3 = th2 * th;
    const double h00 = 2.0 * th3 - 3.0 * th2 + 1.0, h10 = th3 - 2.0 * th2 + th;
    const double h01 = -2.0 * th3 + 3.0 * th2, h11 = th3 - th2;
    return h00 * x_.col(i) + (h10 * dt_) * d_.col(i) + h01 * x_.col(i + 1) + (h11 * dt_) * d_.col(i + 1);
  }

 private:
  MatrixXd x_;
  MatrixXd d_;
  double dt_;
};

}  // namespace

SimTrace simulate(const UncertainDelaySystem& sys, const MatrixXd& w, double dt) {
  sys.validate();
  if (!sys.interval.degenerate()) throw ArgumentError("simulation needs a lambda-free system");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("dt must be positive");
  if (w.rows() != sys.inputs()) throw StructuralError("input signal rows do not match Bw columns");
  if (w.cols() < 1) throw ArgumentError("input signal is empty");
  if (!w.allFinite()) throw ArgumentError("input signal is not finite");
  for (double tau : sys.delays)
    if (tau > 0.0 && tau < dt) throw ArgumentError("dt is larger than the smallest positive delay");

  const double lambda = sys.interval.lo;
  const Eigen::Index n = sys.states(), k = w.cols();
  SparseMatrix a0(n, n);
  std::vector<SparseMatrix> delayed;
  std::vector<double> taus;
  for (size_t r = 0; r < sys.delays.size(); ++r) {
    const MatrixXd m = sys.h[r] + lambda * sys.g[r];
    const SparseMatrix sm = m.sparseView();
    if (sys.delays[r] == 0.0) {
      a0 += sm;
    } else if (sm.nonZeros() > 0) {
      delayed.push_back(sm);
      taus.push_back(sys.delays[r]);
    }
  }
  const SparseMatrix bw = MatrixXd(sys.b_w).sparseView();

  History hist(n, k, dt);
  auto rhs = [&](double t, const VectorXd& x, const VectorXd& wt, Eigen::Index last) {
    VectorXd f = a0 * x + bw * wt;
    for (size_t r = 0; r < delayed.size(); ++r) f += delayed[r] * hist.at(t - taus[r], last);
    return f;
  };

  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    const double t = static_cast<double>(i) * dt;
    const VectorXd x = hist.x().col(i);
    const VectorXd w0 = w.col(i), w1 = w.col(i + 1), wm = 0.5 * (w0 + w1);
    const VectorXd k1 = rhs(t, x, w0, i);
    hist.d().col(i) = k1;
    const VectorXd k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1, wm, i);
    const VectorXd k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2, wm, i);
    const VectorXd k4 = rhs(t + dt, x + dt * k3, w1, i);
    hist.x().col(i + 1) = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  SimTrace out;
  out.times = VectorXd::LinSpaced(k, 0.0, static_cast<double>(k - 1) * dt);
  const Eigen::Index p = sys.outputs(), m = sys.inputs();
  out.values.resize(k, n + p + m);
  out.values.leftCols(n) = hist.x().transpose();
  out.values.middleCols(n, p) = (sys.c_z * hist.x()).transpose();
  out.values.rightCols(m) = w.transpose();
  for (Eigen::Index j = 0; j < n; ++j) out.names.push_back("x" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < p; ++j) out.names.push_back("z" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < m; ++j) out.names.push_back("w" + std::to_string(j + 1));
  if (!out.values.allFinite()) throw ArgumentError("simulation diverged to non-finite values");
  return out;
}

double rms(const VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
}

double rms(const VectorXd& v, double dt, double t_end) {
  const Eigen::Index k = std::min(grid_size(t_end, dt), v.size());
  return rms(VectorXd(v.head(k)));
}

}  // namespace dhinf
