#include "dhinf/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <unsupported/Eigen/KroneckerProduct>

#include "dhinf/error.hpp"
#include "dhinf/json_io.hpp"
#include "dhinf/parallel.hpp"

namespace dhinf {

namespace {

constexpr Eigen::Index kMaxFullStates = 2000;

void expect_shape(const MatrixXd& m, Eigen::Index r, Eigen::Index c, const std::string& name) {
  if (m.rows() != r || m.cols() != c)
    throw StructuralError(name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                          ", expected " + std::to_string(r) + "x" + std::to_string(c));
}

const char* block_name(ControllerParams::Block b) {
  static const char* names[] = {"J", "F", "Fn", "L", "K", "Kn"};
  return names[b];
}

// Delay-indexed accumulation of (H, G) pairs with exact-equality merging.
class TermSet {
 public:
  explicit TermSet(Eigen::Index n) : n_(n) {}

  MatrixXd& h(double tau) { return slot(tau).first; }
  MatrixXd& g(double tau) { return slot(tau).second; }

  void fill(UncertainDelaySystem& sys) const {
    for (const auto& [tau, hg] : terms_) {
      sys.delays.push_back(tau);
      sys.h.push_back(hg.first);
      sys.g.push_back(hg.second);
    }
  }

 private:
  std::pair<MatrixXd, MatrixXd>& slot(double tau) {
    auto it = terms_.find(tau);
    if (it == terms_.end())
      it = terms_.emplace(tau, std::make_pair(MatrixXd::Zero(n_, n_), MatrixXd::Zero(n_, n_))).first;
    return it->second;
  }

  Eigen::Index n_;
  std::map<double, std::pair<MatrixXd, MatrixXd>> terms_;
};

// The closed-loop blocks of one subsystem, before the network coupling.
struct LoopBlocks {
  Eigen::Index n, nc;
  // lambda-free: [A_k 0; 0 0] at tau_k, [0 0; F Cy J] at 0, [Bu K Cy, Bu L; 0 0] at tau_u
  // coupled:     Bun Cyn at tau_n, Bu Kn Cy at tau_u + tau_nc, Fn Cy at tau_nc
  MatrixXd fcy, bukcy, bul, buncyn, bukncy, fncy;

  LoopBlocks(const NetworkedPlant& plant, const ControllerParams& ctrl)
      : n(plant.states()), nc(ctrl.n_c) {
    fcy = ctrl.f * plant.c_y;
    bukcy = plant.b_u * ctrl.k * plant.c_y;
    bul = plant.b_u * ctrl.l;
    buncyn = plant.b_un * plant.c_yn;
    bukncy = plant.b_u * ctrl.kn * plant.c_y;
    fncy = ctrl.fn * plant.c_y;
  }
};

void check_pair(const NetworkedPlant& plant, const ControllerParams& ctrl) {
  plant.validate();
  ctrl.validate(plant);
}

MatrixXd parse_mask(const json_io::json& j, const std::string& field, Eigen::Index rows,
                    Eigen::Index cols) {
  if (!j.is_array()) throw ParseError(field, "expected an array of rows");
  if (j.empty()) {
    if (rows * cols != 0) throw ParseError(field, "empty mask for a nonempty block");
    return MatrixXd::Zero(rows, cols);
  }
  if (static_cast<Eigen::Index>(j.size()) != rows) throw ParseError(field, "wrong number of rows");
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(field, "row " + std::to_string(r) + " has the wrong length");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<size_t>(c)];
      if (v.is_boolean())
        m(r, c) = v.get<bool>() ? 1.0 : 0.0;
      else if (v.is_number())
        m(r, c) = v.get<double>() != 0.0 ? 1.0 : 0.0;
      else
        throw ParseError(field, "mask entries must be booleans or numbers");
    }
  }
  return m;
}

}  // namespace

void NetworkedPlant::validate() const {
  if (a.empty()) throw StructuralError("plant needs at least one A matrix");
  if (a.size() != delays.size()) throw StructuralError("plant A and delays differ in length");
  const Eigen::Index n = states();
  if (n == 0) throw StructuralError("plant has no states");
  for (size_t k = 0; k < a.size(); ++k) expect_shape(a[k], n, n, "A[" + std::to_string(k) + "]");
  if (delays.front() != 0.0) throw ValidationError("plant delays must start at 0");
  for (size_t k = 1; k < delays.size(); ++k)
    if (!(delays[k] > delays[k - 1])) throw ValidationError("plant delays must be strictly increasing");
  for (double t : {tau_u, tau_n, tau_nc})
    if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("tau_u, tau_n, tau_nc must be finite and >= 0");
  if (b_u.rows() != n) throw StructuralError("Bu row count differs from the state size");
  if (b_un.rows() != n) throw StructuralError("Bun row count differs from the state size");
  if (b_w.rows() != n) throw StructuralError("Bw row count differs from the state size");
  if (c_y.cols() != n) throw StructuralError("Cy column count differs from the state size");
  if (c_yn.cols() != n) throw StructuralError("Cyn column count differs from the state size");
  if (c_z.cols() != n) throw StructuralError("Cz column count differs from the state size");
  if (b_un.cols() != c_yn.rows()) throw StructuralError("Bun columns must match Cyn rows");
}

ControllerParams ControllerParams::zeros(const NetworkedPlant& plant, int n_c) {
  if (n_c < 0) throw ArgumentError("controller order must be nonnegative");
  const Eigen::Index m = plant.controls(), p = plant.measurements();
  ControllerParams c;
  c.n_c = n_c;
  c.j = MatrixXd::Zero(n_c, n_c);
  c.f = MatrixXd::Zero(n_c, p);
  c.fn = MatrixXd::Zero(n_c, p);
  c.l = MatrixXd::Zero(m, n_c);
  c.k = MatrixXd::Zero(m, p);
  c.kn = MatrixXd::Zero(m, p);
  c.set_all_tunable();
  return c;
}

MatrixXd& ControllerParams::block(Block b) {
  return const_cast<MatrixXd&>(static_cast<const ControllerParams*>(this)->block(b));
}

const MatrixXd& ControllerParams::block(Block b) const {
  switch (b) {
    case kJ: return j;
    case kF: return f;
    case kFn: return fn;
    case kL: return l;
    case kK: return k;
    case kKn: return kn;
  }
  throw ArgumentError("unknown controller block");
}

MatrixXd& ControllerParams::mask(Block b) {
  return const_cast<MatrixXd&>(static_cast<const ControllerParams*>(this)->mask(b));
}

const MatrixXd& ControllerParams::mask(Block b) const {
  switch (b) {
    case kJ: return mask_j;
    case kF: return mask_f;
    case kFn: return mask_fn;
    case kL: return mask_l;
    case kK: return mask_k;
    case kKn: return mask_kn;
  }
  throw ArgumentError("unknown controller block");
}

std::vector<ControllerParams::Slot> ControllerParams::slots() const {
  std::vector<Slot> out;
  for (int bi = 0; bi < kBlocks; ++bi) {
    const auto b = static_cast<Block>(bi);
    const MatrixXd& mk = mask(b);
    for (Eigen::Index r = 0; r < mk.rows(); ++r)
      for (Eigen::Index c = 0; c < mk.cols(); ++c)
        if (mk(r, c) != 0.0) out.push_back({b, r, c});
  }
  return out;
}

VectorXd ControllerParams::params() const {
  const auto s = slots();
  VectorXd p(static_cast<Eigen::Index>(s.size()));
  for (size_t i = 0; i < s.size(); ++i) p(static_cast<Eigen::Index>(i)) = block(s[i].block)(s[i].row, s[i].col);
  return p;
}

ControllerParams ControllerParams::with_params(const VectorXd& p) const {
  const auto s = slots();
  if (p.size() != static_cast<Eigen::Index>(s.size()))
    throw ArgumentError("parameter vector has length " + std::to_string(p.size()) + ", expected " +
                        std::to_string(s.size()));
  ControllerParams out = *this;
  for (size_t i = 0; i < s.size(); ++i) out.block(s[i].block)(s[i].row, s[i].col) = p(static_cast<Eigen::Index>(i));
  return out;
}

void ControllerParams::set_all_tunable() {
  for (int bi = 0; bi < kBlocks; ++bi) {
    const auto b = static_cast<Block>(bi);
    mask(b) = MatrixXd::Ones(block(b).rows(), block(b).cols());
  }
}

void ControllerParams::validate(const NetworkedPlant& plant) const {
  if (n_c < 0) throw StructuralError("controller order must be nonnegative");
  const Eigen::Index m = plant.controls(), p = plant.measurements();
  expect_shape(j, n_c, n_c, "J");
  expect_shape(f, n_c, p, "F");
  expect_shape(fn, n_c, p, "Fn");
  expect_shape(l, m, n_c, "L");
  expect_shape(k, m, p, "K");
  expect_shape(kn, m, p, "Kn");
  for (int bi = 0; bi < kBlocks; ++bi) {
    const auto b = static_cast<Block>(bi);
    expect_shape(mask(b), block(b).rows(), block(b).cols(), std::string("mask ") + block_name(b));
    if (!block(b).allFinite()) throw ValidationError(std::string(block_name(b)) + " has non-finite entries");
  }
}

Topology check_assumption(const MatrixXd& p) {
  if (p.rows() != p.cols() || p.rows() == 0) throw ArgumentError("adjacency matrix must be square and nonempty");
  if (!p.allFinite()) throw ArgumentError("adjacency matrix has non-finite entries");
  const double asym = (p - p.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10)
    throw AssumptionError("adjacency matrix is not symmetric (max |P - P^T| = " + std::to_string(asym) +
                          "); real eigenvalues and unitary diagonalizability are not guaranteed");
  Topology t;
  t.p = p;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (p + p.transpose()), Eigen::EigenvaluesOnly);
  const VectorXd ev = es.eigenvalues();
  t.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  t.interval = {t.eigenvalues.front(), t.eigenvalues.back()};
  return t;
}

std::vector<double> ring_eigenvalues(int n) {
  std::vector<double> ev;
  for (int j = 1; j <= n; ++j) ev.push_back(std::cos(2.0 * std::numbers::pi * (j - 1) / n));
  std::sort(ev.begin(), ev.end());
  return ev;
}

std::vector<double> line_eigenvalues(int n) {
  std::vector<double> ev;
  for (int j = 1; j <= n; ++j) ev.push_back(std::cos(j * std::numbers::pi / (n + 1)));
  std::sort(ev.begin(), ev.end());
  return ev;
}

Topology adjacency_ring(int n) {
  if (n < 2) throw ArgumentError("ring topology needs N >= 2");
  MatrixXd p = MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    p(j, (j + 1) % n) += 0.5;
    p(j, (j + n - 1) % n) += 0.5;
  }
  Topology t = check_assumption(p);
  t.interval = {-1.0, 1.0};
  return t;
}

Topology adjacency_line(int n) {
  if (n < 2) throw ArgumentError("line topology needs N >= 2");
  MatrixXd p = MatrixXd::Zero(n, n);
  for (int j = 0; j + 1 < n; ++j) p(j, j + 1) = p(j + 1, j) = 0.5;
  Topology t = check_assumption(p);
  t.interval = {-1.0, 1.0};
  return t;
}

UncertainDelaySystem build_decoupled_subsystem(const NetworkedPlant& plant, const ControllerParams& ctrl) {
  check_pair(plant, ctrl);
  const LoopBlocks lb(plant, ctrl);
  const Eigen::Index n = lb.n, nc = lb.nc, dim = n + nc;
  TermSet terms(dim);
  for (size_t k = 0; k < plant.delays.size(); ++k) terms.h(plant.delays[k]).topLeftCorner(n, n) += plant.a[k];
  terms.h(0.0).bottomLeftCorner(nc, n) += lb.fcy;
  terms.h(0.0).bottomRightCorner(nc, nc) += ctrl.j;
  terms.h(plant.tau_u).topLeftCorner(n, n) += lb.bukcy;
  terms.h(plant.tau_u).topRightCorner(n, nc) += lb.bul;
  terms.g(plant.tau_n).topLeftCorner(n, n) += lb.buncyn;
  terms.g(plant.tau_u + plant.tau_nc).topLeftCorner(n, n) += lb.bukncy;
  terms.g(plant.tau_nc).bottomLeftCorner(nc, n) += lb.fncy;

  UncertainDelaySystem sys;
  terms.fill(sys);
  sys.b_w = MatrixXd::Zero(dim, plant.b_w.cols());
  sys.b_w.topRows(n) = plant.b_w;
  sys.c_z = MatrixXd::Zero(plant.c_z.rows(), dim);
  sys.c_z.leftCols(n) = plant.c_z;
  sys.interval = {-1.0, 1.0};
  return sys;
}

UncertainDelaySystem build_closed_loop_full(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                            const Topology& topo) {
  check_pair(plant, ctrl);
  const LoopBlocks lb(plant, ctrl);
  const Eigen::Index big_n = topo.size(), n = lb.n, nc = lb.nc;
  const Eigen::Index nx = big_n * n, nxi = big_n * nc, dim = nx + nxi;
  if (dim > kMaxFullStates)
    throw ArgumentError("full closed loop has " + std::to_string(dim) + " states, above the limit of " +
                        std::to_string(kMaxFullStates));
  const MatrixXd eye = MatrixXd::Identity(big_n, big_n);
  const MatrixXd& p = topo.p;
  using Eigen::kroneckerProduct;

  TermSet terms(dim);
  for (size_t k = 0; k < plant.delays.size(); ++k)
    terms.h(plant.delays[k]).topLeftCorner(nx, nx) += kroneckerProduct(eye, plant.a[k]);
  terms.h(0.0).bottomLeftCorner(nxi, nx) += kroneckerProduct(eye, lb.fcy);
  terms.h(0.0).bottomRightCorner(nxi, nxi) += kroneckerProduct(eye, ctrl.j);
  terms.h(plant.tau_u).topLeftCorner(nx, nx) += kroneckerProduct(eye, lb.bukcy);
  terms.h(plant.tau_u).topRightCorner(nx, nxi) += kroneckerProduct(eye, lb.bul);
  terms.h(plant.tau_n).topLeftCorner(nx, nx) += kroneckerProduct(p, lb.buncyn);
  terms.h(plant.tau_u + plant.tau_nc).topLeftCorner(nx, nx) += kroneckerProduct(p, lb.bukncy);
  terms.h(plant.tau_nc).bottomLeftCorner(nxi, nx) += kroneckerProduct(p, lb.fncy);

  UncertainDelaySystem sys;
  terms.fill(sys);
  sys.b_w = MatrixXd::Zero(dim, big_n * plant.b_w.cols());
  sys.b_w.topRows(nx) = kroneckerProduct(eye, plant.b_w);
  sys.c_z = MatrixXd::Zero(big_n * plant.c_z.rows(), dim);
  sys.c_z.leftCols(nx) = kroneckerProduct(eye, plant.c_z);
  sys.interval = {0.0, 0.0};
  return sys;
}

DecoupledNorms decoupled_norm_exact(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                    const Topology& topo, const RadiusConfig& cfg, int threads) {
  const UncertainDelaySystem sys = build_decoupled_subsystem(plant, ctrl);
  DecoupledNorms out;
  for (double ev : topo.eigenvalues)
    if (out.eigenvalues.empty() || ev - out.eigenvalues.back() > 1e-12 * (1.0 + std::abs(ev)))
      out.eigenvalues.push_back(ev);
  out.norms.assign(out.eigenvalues.size(), 0.0);
  const auto errors = parallel_for(out.eigenvalues.size(), threads, [&](size_t i) {
    try {
      out.norms[i] = hinf_norm_fixed(sys, out.eigenvalues[i], cfg).norm;
    } catch (const UnstableError& e) {
      throw UnstableError("closed loop unstable at eigenvalue lambda = " + std::to_string(out.eigenvalues[i]) +
                              " of P: " + e.what(),
                          e.abscissa());
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  out.max = *std::max_element(out.norms.begin(), out.norms.end());
  return out;
}

NetworkedPlant build_cart_pendulum(double M, double m, double k, double l, double g, double tau_u,
                                   double tau_nc) {
  for (double v : {M, m, k, l, g})
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("physical parameters must be positive and finite");
  if (!(tau_u >= 0.0) || !(tau_nc >= 0.0)) throw ArgumentError("delays must be nonnegative");
  NetworkedPlant p;
  p.delays = {0.0};
  MatrixXd a(4, 4);
  a << 0, 1, 0, 0,
       -2 * k / M, 0, -m * g / M, 0,
       0, 0, 0, 1,
       2 * k / (M * l), 0, g / l + m * g / (M * l), 0;
  p.a = {a};
  p.b_u = MatrixXd(4, 1);
  p.b_u << 0, 1 / M, 0, -1 / (M * l);
  p.b_un = MatrixXd(4, 1);
  p.b_un << 0, k / M, 0, -k / (M * l);
  p.b_w = MatrixXd(4, 2);
  p.b_w << 0, 0,
           1 / M, -m / M,
           0, 0,
           -1 / (M * l), 1 / l + m / (M * l);
  p.c_y = MatrixXd(2, 4);
  p.c_y << 1, 0, 0, 0,
           0, 0, 1, 0;
  p.c_yn = MatrixXd(1, 4);
  p.c_yn << 2, 0, 0, 0;
  p.c_z = p.c_y;
  p.tau_u = tau_u;
  p.tau_n = 0.0;
  p.tau_nc = tau_nc;
  return p;
}

NetworkedPlant load_plant(const std::string& json_text) {
  using namespace json_io;
  const json doc = parse(json_text);
  NetworkedPlant p;
  const json& aj = require(doc, "A");
  if (!aj.is_array() || aj.empty()) throw ParseError("A", "expected a nonempty array of matrices");
  for (size_t k = 0; k < aj.size(); ++k) p.a.push_back(matrix_from_json(aj[k], "A[" + std::to_string(k) + "]"));
  if (auto it = doc.find("delays"); it != doc.end())
    p.delays = vector_from_json(*it, "delays");
  else if (p.a.size() == 1)
    p.delays = {0.0};
  else
    throw ParseError("delays", "required with more than one A matrix");
  p.b_u = matrix_from_json(require(doc, "Bu"), "Bu");
  p.b_un = matrix_from_json(require(doc, "Bun"), "Bun");
  p.b_w = matrix_from_json(require(doc, "Bw"), "Bw");
  p.c_y = matrix_from_json(require(doc, "Cy"), "Cy");
  p.c_yn = matrix_from_json(require(doc, "Cyn"), "Cyn");
  p.c_z = matrix_from_json(require(doc, "Cz"), "Cz");
  p.tau_u = number_from_json(require(doc, "tau_u"), "tau_u");
  p.tau_n = doc.contains("tau_n") ? number_from_json(doc["tau_n"], "tau_n") : 0.0;
  p.tau_nc = number_from_json(require(doc, "tau_nc"), "tau_nc");
  p.validate();
  return p;
}

std::string save_plant(const NetworkedPlant& p) {
  using json_io::json;
  json doc;
  doc["delays"] = p.delays;
  json aj = json::array();
  for (const auto& m : p.a) aj.push_back(json_io::matrix_to_json(m));
  doc["A"] = std::move(aj);
  doc["Bu"] = json_io::matrix_to_json(p.b_u);
  doc["Bun"] = json_io::matrix_to_json(p.b_un);
  doc["Bw"] = json_io::matrix_to_json(p.b_w);
  doc["Cy"] = json_io::matrix_to_json(p.c_y);
  doc["Cyn"] = json_io::matrix_to_json(p.c_yn);
  doc["Cz"] = json_io::matrix_to_json(p.c_z);
  doc["tau_u"] = p.tau_u;
  doc["tau_n"] = p.tau_n;
  doc["tau_nc"] = p.tau_nc;
  return doc.dump(2);
}

ControllerParams load_controller(const std::string& json_text) {
  using namespace json_io;
  const json doc = parse(json_text);
  ControllerParams c;
  const double nc = number_from_json(require(doc, "nc"), "nc");
  if (nc < 0 || nc != std::floor(nc)) throw ParseError("nc", "expected a nonnegative integer");
  c.n_c = static_cast<int>(nc);
  c.k = matrix_from_json(require(doc, "K"), "K");
  const Eigen::Index m = c.k.rows(), p = c.k.cols();
  c.kn = matrix_from_json_or_zero(require(doc, "Kn"), "Kn", m, p);
  c.j = matrix_from_json_or_zero(require(doc, "J"), "J", c.n_c, c.n_c);
  c.f = matrix_from_json_or_zero(require(doc, "F"), "F", c.n_c, p);
  c.fn = matrix_from_json_or_zero(require(doc, "Fn"), "Fn", c.n_c, p);
  c.l = matrix_from_json_or_zero(require(doc, "L"), "L", m, c.n_c);
  c.set_all_tunable();
  if (auto it = doc.find("mask"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("mask", "expected an object of per-block masks");
    for (int bi = 0; bi < ControllerParams::kBlocks; ++bi) {
      const auto b = static_cast<ControllerParams::Block>(bi);
      if (auto mb = it->find(block_name(b)); mb != it->end())
        c.mask(b) = parse_mask(*mb, std::string("mask.") + block_name(b), c.block(b).rows(), c.block(b).cols());
    }
  }
  return c;
}

std::string save_controller(const ControllerParams& c) {
  using json_io::json;
  json doc;
  doc["nc"] = c.n_c;
  json mask;
  bool all = true;
  for (int bi = 0; bi < ControllerParams::kBlocks; ++bi) {
    const auto b = static_cast<ControllerParams::Block>(bi);
    doc[block_name(b)] = json_io::matrix_to_json(c.block(b));
    mask[block_name(b)] = json_io::matrix_to_json(c.mask(b));
    all = all && (c.mask(b).array() != 0.0).all();
  }
  if (!all) doc["mask"] = std::move(mask);
  return doc.dump(2);
}

Topology load_topology(const std::string& json_text) {
  using namespace json_io;
  const json doc = parse(json_text);
  if (auto it = doc.find("matrix"); it != doc.end()) return check_assumption(matrix_from_json(*it, "matrix"));
  const json& type = require(doc, "type");
  if (!type.is_string()) throw ParseError("type", "expected \"ring\" or \"line\"");
  const double n = number_from_json(require(doc, "N"), "N");
  if (n != std::floor(n)) throw ParseError("N", "expected an integer");
  const std::string t = type.get<std::string>();
  if (t == "ring") return adjacency_ring(static_cast<int>(n));
  if (t == "line") return adjacency_line(static_cast<int>(n));
  throw ParseError("type", "expected \"ring\" or \"line\", got \"" + t + "\"");
}

}  // namespace dhinf
