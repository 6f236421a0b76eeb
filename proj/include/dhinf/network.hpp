#pragma once

#include <string>
#include <vector>

#include "dhinf/hinf.hpp"
#include "dhinf/sysmodel.hpp"

namespace dhinf {

/// One subsystem of the network:
///   x' = sum_k A_k x(t - tau_k) + Bu u(t - tau_u) + Bun u^n(t) + Bw w
///   y = Cy x, y^n = Cyn x, z = Cz x
/// with u^n_j = sum_i P_ji y^n_i(t - tau_n).
struct NetworkedPlant {
  std::vector<double> delays;  // tau_0 = 0 < tau_1 < ...
  std::vector<MatrixXd> a;
  MatrixXd b_u;
  MatrixXd b_un;
  MatrixXd b_w;
  MatrixXd c_y;
  MatrixXd c_yn;
  MatrixXd c_z;
  double tau_u = 0.0;
  double tau_n = 0.0;
  double tau_nc = 0.0;

  Eigen::Index states() const { return a.empty() ? 0 : a.front().rows(); }
  Eigen::Index controls() const { return b_u.cols(); }
  Eigen::Index measurements() const { return c_y.rows(); }

  /// Throws StructuralError or ValidationError.
  void validate() const;
};

/// Identical local controllers
///   xi' = J xi + F y + Fn u^nc,  u = L xi + K y + Kn u^nc
/// with u^nc_j = sum_i P_ji y_i(t - tau_nc).
struct ControllerParams {
  enum Block { kJ, kF, kFn, kL, kK, kKn };
  static constexpr int kBlocks = 6;

  int n_c = 0;
  MatrixXd j, f, fn, l, k, kn;
  /// Tunable entries, one boolean matrix per block (nonzero = tunable).
  MatrixXd mask_j, mask_f, mask_fn, mask_l, mask_k, mask_kn;

  /// Zero controller of order n_c for the given plant, every entry tunable.
  static ControllerParams zeros(const NetworkedPlant& plant, int n_c);

  MatrixXd& block(Block b);
  const MatrixXd& block(Block b) const;
  MatrixXd& mask(Block b);
  const MatrixXd& mask(Block b) const;

  /// Location of one tunable parameter.
  struct Slot {
    Block block;
    Eigen::Index row;
    Eigen::Index col;
  };
  /// Tunable entries, row-major over J, F, Fn, L, K, Kn.
  std::vector<Slot> slots() const;
  int n_params() const { return static_cast<int>(slots().size()); }
  VectorXd params() const;
  /// Copy with the tunable entries replaced by p.
  ControllerParams with_params(const VectorXd& p) const;

  void set_all_tunable();
  void validate(const NetworkedPlant& plant) const;
};

/// Symmetric adjacency matrix with its spectrum.
struct Topology {
  MatrixXd p;
  std::vector<double> eigenvalues;  // ascending
  Interval interval;                // encloses the eigenvalues

  int size() const { return static_cast<int>(p.rows()); }
};

/// Checks symmetry (within 1e-10) and computes the spectrum; the interval is
/// [min, max] eigenvalue. Throws AssumptionError when P is not symmetric.
Topology check_assumption(const MatrixXd& p);

/// 0.5-weighted bidirectional ring and line graphs, interval [-1, 1].
Topology adjacency_ring(int n);
Topology adjacency_line(int n);

/// Closed-form spectra: cos(2 pi (j-1) / N), j = 1..N, and cos(j pi / (N+1)), j = 1..N.
std::vector<double> ring_eigenvalues(int n);
std::vector<double> line_eigenvalues(int n);

/// Decoupled closed-loop subsystem in [x; xi], with lambda standing for an
/// eigenvalue of P. The interval is [-1, 1].
UncertainDelaySystem build_decoupled_subsystem(const NetworkedPlant& plant, const ControllerParams& ctrl);

/// Full closed loop of N subsystems, state [x_1..x_N; xi_1..xi_N]. Lambda-free.
/// Throws ArgumentError above 2000 states.
UncertainDelaySystem build_closed_loop_full(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                            const Topology& topo);

struct DecoupledNorms {
  std::vector<double> eigenvalues;  // distinct, ascending
  std::vector<double> norms;
  double max = 0.0;
};

/// Exact network norm: max over the eigenvalues of P of the fixed-lambda
/// norm of the decoupled subsystem. Throws UnstableError naming the
/// offending eigenvalue.
DecoupledNorms decoupled_norm_exact(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                    const Topology& topo, const RadiusConfig& cfg = {},
                                    int threads = 1);

/// Linearized cart with inverted pendulum, coupled to its neighbours by
/// springs. tau_n = 0.
NetworkedPlant build_cart_pendulum(double M, double m, double k, double l, double g, double tau_u,
                                   double tau_nc);

NetworkedPlant load_plant(const std::string& json_text);
std::string save_plant(const NetworkedPlant& plant);
ControllerParams load_controller(const std::string& json_text);
std::string save_controller(const ControllerParams& ctrl);
/// {"matrix": [[...]]} or {"type": "ring"|"line", "N": n}.
Topology load_topology(const std::string& json_text);

}  // namespace dhinf
