#include "dhinf/roots.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "dhinf/error.hpp"

namespace dhinf {

void RootRequest::validate() const {
  if (count < 1) throw ArgumentError("root count must be positive");
  if (disc_degree < 4) throw ArgumentError("discretization degree must be >= 4");
  if (!(newton_tol > 0.0)) throw ArgumentError("newton_tol must be positive");
  if (max_newton < 1) throw ArgumentError("max_newton must be positive");
}

namespace {

constexpr int kMaxDegree = 320;

bool is_real_problem(const std::optional<ComplexPerturbation>& pert) {
  return !pert || pert->eps == 0.0;
}

// Chebyshev points x_j = cos(j pi / N) and the collocation differentiation
// matrix on them.
void chebyshev(int degree, VectorXd& x, MatrixXd& d) {
  const int np = degree + 1;
  x.resize(np);
  for (int j = 0; j < np; ++j) x(j) = std::cos(std::numbers::pi * j / degree);
  VectorXd c(np);
  for (int j = 0; j < np; ++j) c(j) = ((j == 0 || j == degree) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0);
  d = MatrixXd::Zero(np, np);
  for (int i = 0; i < np; ++i) {
    double row = 0.0;
    for (int j = 0; j < np; ++j) {
      if (i == j) continue;
      d(i, j) = (c(i) / c(j)) / (x(i) - x(j));
      row += d(i, j);
    }
    d(i, i) = -row;
  }
}

// Barycentric Lagrange basis on Chebyshev points evaluated at t.
VectorXd lagrange_row(const VectorXd& x, double t) {
  const Eigen::Index np = x.size();
  VectorXd row = VectorXd::Zero(np);
  for (Eigen::Index j = 0; j < np; ++j) {
    if (std::abs(t - x(j)) < 1e-15) {
      row(j) = 1.0;
      return row;
    }
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < np; ++j) {
    double w = (j % 2) ? -1.0 : 1.0;
    if (j == 0 || j == np - 1) w *= 0.5;
    row(j) = w / (t - x(j));
    total += row(j);
  }
  return row / total;
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> generator_matrix(
    const UncertainDelaySystem& sys, double lambda, const MatrixXcd& pert_term, int degree) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = sys.states();
  const double tau_max = sys.max_delay();
  VectorXd x;
  MatrixXd d;
  chebyshev(degree, x, d);
  d *= 2.0 / tau_max;
  const Eigen::Index np = degree + 1;
  Mat a = Mat::Zero(n * np, n * np);
  // Rows 1..N: derivative of the collocation polynomial at theta_j.
  for (Eigen::Index i = 1; i < np; ++i)
    for (Eigen::Index j = 0; j < np; ++j)
      if (d(i, j) != 0.0)
        a.block(i * n, j * n, n, n).diagonal().setConstant(Scalar(d(i, j)));
  // Row 0: the delay equation itself, evaluated at theta = 0.
  for (size_t r = 0; r < sys.delays.size(); ++r) {
    Mat coeff = (sys.h[r] + lambda * sys.g[r]).template cast<Scalar>();
    if (r == 0 && pert_term.size() > 0) {
      if constexpr (std::is_same_v<Scalar, cd>) coeff += pert_term;
    }
    const VectorXd ell = lagrange_row(x, 1.0 - 2.0 * sys.delays[r] / tau_max);
    for (Eigen::Index j = 0; j < np; ++j)
      if (ell(j) != 0.0) a.block(0, j * n, n, n) += Scalar(ell(j)) * coeff;
  }
  return a;
}

MatrixXcd perturbation_term(const UncertainDelaySystem& sys,
                            const std::optional<ComplexPerturbation>& pert) {
  if (is_real_problem(pert)) return MatrixXcd();
  return sys.b_w.cast<cd>() * pert->matrix() * sys.c_z.cast<cd>();
}

bool close(cd a, cd b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(a)); }

void sort_rightmost(std::vector<cd>& roots) {
  std::sort(roots.begin(), roots.end(), [](cd a, cd b) { return a.real() > b.real(); });
  // Group near-equal real parts and order each group by |Im|.
  size_t start = 0;
  while (start < roots.size()) {
    size_t end = start + 1;
    while (end < roots.size() && roots[start].real() - roots[end].real() <= 1e-9) ++end;
    std::stable_sort(roots.begin() + static_cast<long>(start), roots.begin() + static_cast<long>(end),
                     [](cd a, cd b) { return std::abs(a.imag()) < std::abs(b.imag()); });
    start = end;
  }
}

std::vector<cd> dedupe(const std::vector<cd>& in) {
  std::vector<cd> out;
  for (cd s : in) {
    bool dup = false;
    for (cd t : out)
      if (close(s, t, 1e-8)) {
        dup = true;
        break;
      }
    if (!dup) out.push_back(s);
  }
  return out;
}

std::vector<cd> refined_candidates(const UncertainDelaySystem& sys, double lambda,
                                   const std::optional<ComplexPerturbation>& pert,
                                   const RootRequest& req, int degree) {
  const bool real = is_real_problem(pert);
  std::vector<cd> ev = discretized_eigenvalues(sys, lambda, pert, degree);
  if (real) {
    std::erase_if(ev, [](cd s) { return s.imag() < -1e-8 * std::max(1.0, std::abs(s)); });
  }
  std::sort(ev.begin(), ev.end(), [](cd a, cd b) { return a.real() > b.real(); });
  const size_t want = std::min(ev.size(), static_cast<size_t>(std::max(3 * req.count, req.count + 10)));
  std::vector<cd> roots;
  for (size_t i = 0; i < want; ++i) {
    auto s = refine_root(sys, lambda, pert, ev[i], req.newton_tol, req.max_newton);
    if (!s) continue;
    cd r = *s;
    if (real && r.imag() < 0.0) r = std::conj(r);
    if (real && std::abs(r.imag()) <= 1e-14 * std::max(1.0, std::abs(r))) r = cd(r.real(), 0.0);
    roots.push_back(r);
  }
  roots = dedupe(roots);
  sort_rightmost(roots);
  if (roots.size() > static_cast<size_t>(req.count)) roots.resize(static_cast<size_t>(req.count));
  return roots;
}

bool same_root_set(const std::vector<cd>& a, const std::vector<cd>& b) {
  if (a.size() != b.size()) return false;
  for (cd s : a) {
    bool found = false;
    for (cd t : b)
      if (std::abs(s - t) < 1e-8 * std::max(1.0, std::abs(s))) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::vector<cd> discretized_eigenvalues(const UncertainDelaySystem& sys, double lambda,
                                        const std::optional<ComplexPerturbation>& pert,
                                        int degree) {
  const MatrixXcd pt = perturbation_term(sys, pert);
  std::vector<cd> out;
  if (!sys.has_delays()) {
    MatrixXcd a0 = (sys.h[0] + lambda * sys.g[0]).cast<cd>();
    if (pt.size() > 0) a0 += pt;
    if (pt.size() == 0) {
      Eigen::EigenSolver<MatrixXd> es(a0.real(), false);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    } else {
      Eigen::ComplexEigenSolver<MatrixXcd> es(a0, false);
      for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    }
    return out;
  }
  if (pt.size() == 0) {
    const MatrixXd a = generator_matrix<double>(sys, lambda, pt, degree);
    Eigen::EigenSolver<MatrixXd> es(a, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("eigensolver failed", cd(NAN, NAN));
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  } else {
    const MatrixXcd a = generator_matrix<cd>(sys, lambda, pt, degree);
    Eigen::ComplexEigenSolver<MatrixXcd> es(a, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("eigensolver failed", cd(NAN, NAN));
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  }
  return out;
}

double root_residual(const UncertainDelaySystem& sys, double lambda,
                     const std::optional<ComplexPerturbation>& pert, cd s) {
  const MatrixXcd m = characteristic_matrix(sys, s, lambda, pert);
  Eigen::JacobiSVD<MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  // Scale by the size of the individual terms of M(s) rather than by ||M||,
  // which coincides with sigma_min for scalar systems.
  double scale = std::abs(s);
  for (size_t r = 0; r < sys.delays.size(); ++r)
    scale += (sys.h[r] + lambda * sys.g[r]).norm() * std::exp(-s.real() * sys.delays[r]);
  if (pert && pert->eps != 0.0) scale += pert->eps * sys.b_w.norm() * sys.c_z.norm();
  return sv(sv.size() - 1) / std::max(scale, 1e-300);
}

std::optional<cd> refine_root(const UncertainDelaySystem& sys, double lambda,
                              const std::optional<ComplexPerturbation>& pert, cd s0, double tol,
                              int max_iter, const VectorXcd& w_in) {
  const Eigen::Index n = sys.states();
  cd s = s0;
  VectorXcd w = w_in;
  if (w.size() != n) {
    Eigen::JacobiSVD<MatrixXcd> svd(characteristic_matrix(sys, s, lambda, pert), Eigen::ComputeFullV);
    w = svd.matrixV().col(n - 1);
  }
  w /= w.norm();
  VectorXcd psi = w;
  MatrixXcd jac(n + 1, n + 1);
  VectorXcd rhs(n + 1);
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXcd m = characteristic_matrix(sys, s, lambda, pert);
    const MatrixXcd md = characteristic_derivative(sys, s, lambda);
    jac.topLeftCorner(n, n) = m;
    jac.topRightCorner(n, 1) = md * psi;
    jac.bottomLeftCorner(1, n) = w.adjoint();
    jac(n, n) = 0.0;
    rhs.head(n) = -(m * psi);
    rhs(n) = 1.0 - w.dot(psi);
    const VectorXcd delta = jac.fullPivLu().solve(rhs);
    if (!delta.allFinite()) return std::nullopt;
    psi += delta.head(n);
    s += delta(n);
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return std::nullopt;
    if (std::abs(delta(n)) <= tol * (1.0 + std::abs(s))) {
      converged = true;
      break;
    }
  }
  if (!converged) return std::nullopt;
  if (root_residual(sys, lambda, pert, s) > 1e-9) return std::nullopt;
  return s;
}

std::vector<cd> rightmost_roots(const UncertainDelaySystem& sys, double lambda,
                                const std::optional<ComplexPerturbation>& pert,
                                const RootRequest& req, int* settled_degree) {
  req.validate();
  if (settled_degree) *settled_degree = req.disc_degree;
  if (!sys.has_delays()) {
    std::vector<cd> ev = discretized_eigenvalues(sys, lambda, pert, req.disc_degree);
    if (is_real_problem(pert)) {
      std::erase_if(ev, [](cd s) { return s.imag() < 0.0; });
    }
    sort_rightmost(ev);
    if (ev.size() > static_cast<size_t>(req.count)) ev.resize(static_cast<size_t>(req.count));
    return ev;
  }
  int degree = req.disc_degree;
  std::vector<cd> current = refined_candidates(sys, lambda, pert, req, degree);
  if (!req.adaptive) {
    if (current.empty())
      throw ConvergenceError("no characteristic root converged at degree " + std::to_string(degree),
                             cd(NAN, NAN));
    return current;
  }
  while (true) {
    if (2 * degree > kMaxDegree) {
      const cd best = current.empty() ? cd(NAN, NAN) : current.front();
      throw ConvergenceError("rightmost roots did not settle before degree " +
                                 std::to_string(kMaxDegree),
                             best);
    }
    degree *= 2;
    std::vector<cd> next = refined_candidates(sys, lambda, pert, req, degree);
    if (!next.empty() && same_root_set(current, next)) {
      // the coarser degree already located the same refined roots
      if (settled_degree) *settled_degree = degree / 2;
      return next;
    }
    current = std::move(next);
  }
}

SpectralPoint eig_triple(const UncertainDelaySystem& sys, double lambda,
                         const std::optional<ComplexPerturbation>& pert, cd s0, double newton_tol,
                         int max_newton, const VectorXcd& w) {
  const Eigen::Index n = sys.states();
  cd s = s0;
  {
    auto refined = refine_root(sys, lambda, pert, s0, newton_tol, max_newton, w);
    if (!refined) {
      // A defective root makes the bordered Jacobian singular: Newton either
      // stalls or converges linearly. Distinguish from a plain bad seed.
      if (root_residual(sys, lambda, pert, s0) < 1e-6)
        throw DegenerateRootError("Newton refinement failed near a root (defective or multiple)");
      throw ConvergenceError("Newton refinement did not converge", s0);
    }
    s = *refined;
  }
  const MatrixXcd m = characteristic_matrix(sys, s, lambda, pert);
  Eigen::JacobiSVD<MatrixXcd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (n > 1 && sv(n - 2) <= 1e-8 * std::max(1.0, sv(0)))
    throw DegenerateRootError("root has geometric multiplicity > 1");
  VectorXcd psi = svd.matrixV().col(n - 1);
  VectorXcd phi = svd.matrixU().col(n - 1);
  Eigen::Index k;
  psi.cwiseAbs().maxCoeff(&k);
  psi *= std::conj(psi(k)) / std::abs(psi(k));
  psi /= psi.norm();
  const MatrixXcd md = characteristic_derivative(sys, s, lambda);
  const cd xi0 = phi.dot(md * psi);
  if (std::abs(xi0) <= 1e-12 * std::max(1.0, md.norm()))
    throw DegenerateRootError("phi^H M'(s) psi vanishes: root is not simple");
  phi *= xi0 / std::abs(xi0);

  SpectralPoint pt;
  pt.s = s;
  pt.lambda = lambda;
  if (pert) {
    pt.pert = *pert;
  } else {
    pt.pert.u = VectorXcd::Zero(sys.inputs());
    pt.pert.v = VectorXcd::Zero(sys.outputs());
    if (sys.inputs() > 0) pt.pert.u(0) = 1.0;
    if (sys.outputs() > 0) pt.pert.v(0) = 1.0;
    pt.pert.eps = 0.0;
  }
  pt.phi = phi;
  pt.psi = psi;
  pt.xi = phi.dot(md * psi).real();
  return pt;
}

double spectral_abscissa(const UncertainDelaySystem& sys, double lambda,
                         const std::optional<ComplexPerturbation>& pert, const RootRequest& req) {
  return rightmost_roots(sys, lambda, pert, req).front().real();
}

}  // namespace dhinf
