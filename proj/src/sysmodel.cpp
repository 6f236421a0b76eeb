#include "dhinf/sysmodel.hpp"

#include <cmath>
#include <limits>

#include "dhinf/error.hpp"
#include "dhinf/json_io.hpp"

namespace dhinf {

void UncertainDelaySystem::validate() const {
  if (delays.empty()) throw ValidationError("system needs at least the undelayed term (tau_0 = 0)");
  if (delays.front() != 0.0) throw ValidationError("first delay must be exactly 0");
  for (size_t r = 1; r < delays.size(); ++r) {
    if (!(delays[r] > delays[r - 1]))
      throw ValidationError("delays must be strictly increasing (index " + std::to_string(r) + ")");
  }
  if (h.size() != delays.size() || g.size() != delays.size())
    throw StructuralError("H and G must have one matrix per delay");
  const Eigen::Index n = h.front().rows();
  if (n == 0) throw StructuralError("state dimension must be positive");
  for (size_t r = 0; r < delays.size(); ++r) {
    if (h[r].rows() != n || h[r].cols() != n)
      throw StructuralError("H[" + std::to_string(r) + "] is not " + std::to_string(n) + "x" +
                            std::to_string(n));
    if (g[r].rows() != n || g[r].cols() != n)
      throw StructuralError("G[" + std::to_string(r) + "] is not " + std::to_string(n) + "x" +
                            std::to_string(n));
  }
  if (b_w.rows() != n) throw StructuralError("Bw must have n rows");
  if (c_z.cols() != n) throw StructuralError("Cz must have n columns");
  if (!(interval.lo <= interval.hi)) throw ValidationError("interval must satisfy a <= b");
}

MatrixXcd delay_sum(const UncertainDelaySystem& sys, cd s, double lambda) {
  const Eigen::Index n = sys.states();
  MatrixXcd acc = MatrixXcd::Zero(n, n);
  for (size_t r = 0; r < sys.delays.size(); ++r) {
    const cd e = sys.delays[r] == 0.0 ? cd(1.0) : std::exp(-s * sys.delays[r]);
    if (lambda == 0.0)
      acc += e * sys.h[r].cast<cd>();
    else
      acc += e * (sys.h[r] + lambda * sys.g[r]).cast<cd>();
  }
  return acc;
}

namespace {

void check_lambda(const UncertainDelaySystem& sys, double lambda) {
  if (!sys.interval.contains(lambda))
    throw ArgumentError("lambda = " + std::to_string(lambda) + " outside the uncertainty interval");
}

}  // namespace

MatrixXcd characteristic_matrix(const UncertainDelaySystem& sys, cd s, double lambda,
                                const std::optional<ComplexPerturbation>& pert) {
  check_lambda(sys, lambda);
  MatrixXcd m = -delay_sum(sys, s, lambda);
  m.diagonal().array() += s;
  if (pert) {
    if (pert->u.size() != sys.inputs() || pert->v.size() != sys.outputs())
      throw StructuralError("perturbation vectors do not match Bw/Cz dimensions");
    if (pert->eps != 0.0) {
      const VectorXcd bu = sys.b_w.cast<cd>() * pert->u;
      const Eigen::RowVectorXcd vc = pert->v.adjoint() * sys.c_z.cast<cd>();
      m.noalias() -= pert->eps * bu * vc;
    }
  }
  return m;
}

MatrixXcd characteristic_derivative(const UncertainDelaySystem& sys, cd s, double lambda) {
  const Eigen::Index n = sys.states();
  MatrixXcd d = MatrixXcd::Identity(n, n);
  for (size_t r = 1; r < sys.delays.size(); ++r) {
    const double tau = sys.delays[r];
    d += (tau * std::exp(-s * tau)) * (sys.h[r] + lambda * sys.g[r]).cast<cd>();
  }
  return d;
}

double term_scale(const UncertainDelaySystem& sys, cd s, double lambda) {
  double scale = std::abs(s);
  for (size_t r = 0; r < sys.delays.size(); ++r)
    scale += (sys.h[r] + lambda * sys.g[r]).norm() * std::exp(-s.real() * sys.delays[r]);
  return scale;
}

bool numerically_singular(const Eigen::PartialPivLU<MatrixXcd>& lu, double scale) {
  const MatrixXcd& f = lu.matrixLU();
  double umin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < f.rows(); ++i) umin = std::min(umin, std::abs(f(i, i)));
  // smallest pivot bounds sigma_min from above; rcond catches ill-conditioning
  return !(umin > 1e-14 * scale) || !(lu.rcond() > 1e-14);
}

MatrixXcd transfer_eval(const UncertainDelaySystem& sys, cd s, double lambda) {
  const MatrixXcd m = characteristic_matrix(sys, s, lambda);
  Eigen::PartialPivLU<MatrixXcd> lu(m);
  if (numerically_singular(lu, term_scale(sys, s, lambda))) throw SingularityError(s);
  return sys.c_z.cast<cd>() * lu.solve(sys.b_w.cast<cd>());
}

double sigma_max(const MatrixXcd& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() == 1 || m.cols() == 1) return m.norm();
  Eigen::JacobiSVD<MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

UncertainDelaySystem with_fixed_lambda(UncertainDelaySystem sys, double lambda) {
  sys.interval = Interval{lambda, lambda};
  return sys;
}

bool same_system(const UncertainDelaySystem& a, const UncertainDelaySystem& b) {
  auto eq = [](const MatrixXd& x, const MatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
  };
  if (a.delays != b.delays || a.h.size() != b.h.size() || a.g.size() != b.g.size()) return false;
  for (size_t r = 0; r < a.h.size(); ++r)
    if (!eq(a.h[r], b.h[r]) || !eq(a.g[r], b.g[r])) return false;
  return eq(a.b_w, b.b_w) && eq(a.c_z, b.c_z) && a.interval.lo == b.interval.lo &&
         a.interval.hi == b.interval.hi;
}

UncertainDelaySystem load_system(const std::string& json_text) {
  using namespace json_io;
  const json doc = parse(json_text);
  UncertainDelaySystem sys;
  sys.delays = vector_from_json(require(doc, "delays"), "delays");

  const json& hj = require(doc, "H");
  if (!hj.is_array()) throw ParseError("H", "expected an array of matrices");
  for (size_t r = 0; r < hj.size(); ++r)
    sys.h.push_back(matrix_from_json(hj[r], "H[" + std::to_string(r) + "]"));
  if (sys.h.empty()) throw ParseError("H", "at least one matrix required");
  const Eigen::Index n = sys.h.front().rows();

  if (auto it = doc.find("G"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("G", "expected an array of matrices");
    for (size_t r = 0; r < it->size(); ++r)
      sys.g.push_back(matrix_from_json_or_zero((*it)[r], "G[" + std::to_string(r) + "]", n, n));
  } else {
    sys.g.assign(sys.h.size(), MatrixXd::Zero(n, n));
  }

  sys.b_w = matrix_from_json(require(doc, "Bw"), "Bw");
  sys.c_z = matrix_from_json(require(doc, "Cz"), "Cz");

  if (auto it = doc.find("interval"); it != doc.end()) {
    const auto iv = vector_from_json(*it, "interval");
    if (iv.size() != 2) throw ParseError("interval", "expected [a, b]");
    sys.interval = Interval{iv[0], iv[1]};
  }
  sys.validate();
  return sys;
}

std::string save_system(const UncertainDelaySystem& sys) {
  using json_io::json;
  json doc;
  doc["delays"] = sys.delays;
  json hj = json::array(), gj = json::array();
  for (const auto& m : sys.h) hj.push_back(json_io::matrix_to_json(m));
  for (const auto& m : sys.g) gj.push_back(json_io::matrix_to_json(m));
  doc["H"] = std::move(hj);
  doc["G"] = std::move(gj);
  doc["Bw"] = json_io::matrix_to_json(sys.b_w);
  doc["Cz"] = json_io::matrix_to_json(sys.c_z);
  doc["interval"] = {sys.interval.lo, sys.interval.hi};
  return doc.dump(2);
}

}  // namespace dhinf
