#pragma once

#include <optional>
#include <vector>

#include "dhinf/sysmodel.hpp"

namespace dhinf {

struct RootRequest {
  int count = 5;          // rightmost roots wanted
  int disc_degree = 20;   // Chebyshev collocation degree (>= 4)
  double newton_tol = 1e-12;
  int max_newton = 30;
  /// Double the degree until the refined rightmost `count` roots agree to
  /// 1e-8 between successive degrees. Inner loops that already validated the
  /// degree switch this off.
  bool adaptive = true;

  void validate() const;
};

/// Eigenvalues of the collocation discretization of the solution operator's
/// infinitesimal generator on [-tau_max, 0]. Unrefined approximations of the
/// characteristic roots, unsorted. For an undelayed system these are the
/// eigenvalues of H_0 + lambda G_0 + Bw Delta Cz.
std::vector<cd> discretized_eigenvalues(const UncertainDelaySystem& sys, double lambda,
                                        const std::optional<ComplexPerturbation>& pert,
                                        int degree);

/// Newton refinement of a root on the bordered system (M(s) psi = 0, w^H psi = 1).
/// `w` seeds psi; when empty the smallest right singular vector of M(s0) is used.
/// Returns nullopt when the iteration does not converge.
std::optional<cd> refine_root(const UncertainDelaySystem& sys, double lambda,
                              const std::optional<ComplexPerturbation>& pert, cd s0,
                              double tol = 1e-12, int max_iter = 30,
                              const VectorXcd& w = VectorXcd());

/// Smallest singular value of M(s) relative to the magnitude of its terms
/// (|s| + sum_r ||H_r + lambda G_r|| |e^{-s tau_r}| + eps ||Bw|| ||Cz||).
double root_residual(const UncertainDelaySystem& sys, double lambda,
                     const std::optional<ComplexPerturbation>& pert, cd s);

/// Rightmost characteristic roots sorted by decreasing real part (ties within
/// 1e-9 by increasing |Im|). For real data (no perturbation or eps = 0) only
/// the Im >= 0 member of each conjugate pair is reported. `settled_degree`
/// receives the collocation degree of the returned set.
std::vector<cd> rightmost_roots(const UncertainDelaySystem& sys, double lambda,
                                const std::optional<ComplexPerturbation>& pert,
                                const RootRequest& req = {}, int* settled_degree = nullptr);

/// Refines s0 and returns the root with its null vectors: psi unit norm with
/// its largest entry real positive, phi scaled so that
/// xi = phi^H M'(s) psi is real and positive.
SpectralPoint eig_triple(const UncertainDelaySystem& sys, double lambda,
                         const std::optional<ComplexPerturbation>& pert, cd s0,
                         double newton_tol = 1e-12, int max_newton = 30,
                         const VectorXcd& w = VectorXcd());

double spectral_abscissa(const UncertainDelaySystem& sys, double lambda,
                         const std::optional<ComplexPerturbation>& pert,
                         const RootRequest& req = {});

}  // namespace dhinf
