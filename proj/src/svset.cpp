#include "dhinf/svset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dhinf/error.hpp"
#include "dhinf/parallel.hpp"

namespace dhinf {

void FlowConfig::validate() const {
  if (!(h0 > 0.0)) throw ArgumentError("h0 must be positive");
  if (!(h_min > 0.0) || !(h_min < h0)) throw ArgumentError("h_min must satisfy 0 < h_min < h0");
  if (!(grow > 1.0)) throw ArgumentError("grow must exceed 1");
  if (!(h_cap >= 1.0)) throw ArgumentError("h_cap must be at least 1");
  if (!(rel_tol > 0.0)) throw ArgumentError("rel_tol must be positive");
  if (!(abs_tol >= 0.0)) throw ArgumentError("abs_tol must be nonnegative");
  if (max_iters < 1) throw ArgumentError("max_iters must be positive");
  roots.validate();
}

namespace {

constexpr double kSameOptimizer = 1e-4;

cd sum_g_term(const SpectralPoint& pt, const UncertainDelaySystem& sys) {
  cd acc = 0.0;
  for (size_t r = 0; r < sys.delays.size(); ++r) {
    if (sys.g[r].isZero(0.0)) continue;
    const cd e = sys.delays[r] == 0.0 ? cd(1.0) : std::exp(-pt.s * sys.delays[r]);
    acc += pt.phi.dot(sys.g[r].cast<cd>() * pt.psi) * e;
  }
  return acc;
}

VectorXcd tangent(const VectorXcd& x, const VectorXcd& g) {
  const cd xg = x.dot(g);
  return g - xg * x + cd(0.0, 0.5 * xg.imag()) * x;
}

VectorXcd unit(const VectorXcd& x) {
  const double n = x.norm();
  return n > 0.0 ? VectorXcd(x / n) : x;
}

VectorXcd random_unit(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  VectorXcd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = cd(gauss(rng), gauss(rng));
  return unit(x);
}

struct StartOutcome {
  SpectralPoint pt;
  bool converged = false;
  bool first_step_failed = false;
  std::vector<FlowIterate> trace;
};

class Flow {
 public:
  Flow(const UncertainDelaySystem& sys, double eps, const FlowConfig& cfg)
      : sys_(sys), eps_(eps), cfg_(cfg) {}

  StartOutcome run(int index, const FlowStart& start) const {
    StartOutcome out;
    const double lambda = std::clamp(start.lambda, sys_.interval.lo, sys_.interval.hi);
    const ComplexPerturbation pert{unit(start.u), unit(start.v), eps_};
    out.pt = global_point(lambda, pert);
    out.trace.push_back(record(index, 0, out.pt, 0.0));
    climb(index, 1, out);
    return out;
  }

  // Continues a start from a righter root found by a global check.
  void resume(int index, const SpectralPoint& from, StartOutcome& out) const {
    const int k = out.trace.back().k + 1;
    out.pt = from;
    out.trace.push_back(record(index, k, out.pt, 0.0));
    climb(index, k + 1, out);
  }

  // Rightmost root from the discretization; the tracked root is replaced by
  // it when the flow has drifted onto a root that is no longer rightmost.
  SpectralPoint global_point(double lambda, const ComplexPerturbation& pert) const {
    const auto roots = rightmost_roots(sys_, lambda, pert, cfg_.roots);
    std::exception_ptr first;
    for (cd s0 : roots) {
      try {
        return eig_triple(sys_, lambda, pert, s0, cfg_.roots.newton_tol, cfg_.roots.max_newton);
      } catch (const Error&) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
    throw ConvergenceError("no characteristic root found", cd(NAN, NAN));
  }

  static bool righter(const SpectralPoint& a, const SpectralPoint& b) {
    return a.s.real() > b.s.real() + 1e-10 * std::max(1.0, std::abs(b.s));
  }

 private:
  // Tracks the root by Newton continuation until the stopping test holds or
  // no step increases Re(s). The global check is left to the caller.
  void climb(int index, int k_first, StartOutcome& out) const {
    SpectralPoint& pt = out.pt;
    double h = cfg_.h0;
    out.converged = false;
    for (int k = k_first; k < k_first + cfg_.max_iters; ++k) {
      const FlowDerivatives d = flow_derivatives(pt, sys_);
      SpectralPoint trial;
      bool accepted = false;
      while (h >= cfg_.h_min) {
        const double lt = std::clamp(pt.lambda + h * d.dlambda, sys_.interval.lo, sys_.interval.hi);
        const ComplexPerturbation pt_pert{unit(pt.pert.u + h * d.du), unit(pt.pert.v + h * d.dv), eps_};
        try {
          trial = eig_triple(sys_, lt, pt_pert, pt.s, cfg_.roots.newton_tol, cfg_.roots.max_newton,
                             pt.psi);
          if (trial.s.real() >= pt.s.real()) {
            accepted = true;
            break;
          }
        } catch (const Error&) {
        }
        h *= 0.5;
      }
      if (!accepted) {
        if (k == 1) out.first_step_failed = true;
        out.converged = true;
        return;
      }
      const cd s_prev = pt.s;
      pt = trial;
      out.trace.push_back(record(index, k, pt, h));
      h = std::min(h * cfg_.grow, cfg_.h_cap * cfg_.h0);
      if (std::abs(pt.s - s_prev) <= cfg_.rel_tol * std::abs(pt.s + s_prev) / 2.0 + cfg_.abs_tol) {
        out.converged = true;
        return;
      }
    }
  }

  static FlowIterate record(int index, int k, const SpectralPoint& pt, double h) {
    return {index, k, pt.s, pt.lambda, h, pt.pert.u.norm(), pt.pert.v.norm()};
  }

  const UncertainDelaySystem& sys_;
  double eps_;
  const FlowConfig& cfg_;
};

// Same root, lambda and Delta: the global check of one settles the other.
bool same_final(const SpectralPoint& a, const SpectralPoint& b) {
  const double tol = 1e-6;
  if (std::abs(a.s - b.s) > tol * std::max(1.0, std::abs(a.s))) return false;
  if (std::abs(a.lambda - b.lambda) > tol * std::max(1.0, std::abs(a.lambda))) return false;
  return (a.pert.u * a.pert.v.adjoint() - b.pert.u * b.pert.v.adjoint()).norm() <= tol;
}

// Global rightmost-root check of every converged start, once per distinct
// final point. A start whose root is not rightmost resumes from the
// rightmost one and is checked again.
void verify_rightmost(const Flow& flow, std::vector<StartOutcome>& outcomes,
                      std::vector<std::exception_ptr>& errors, int threads) {
  const size_t n = outcomes.size();
  std::vector<bool> verified(n, false);
  for (size_t i = 0; i < n; ++i) verified[i] = static_cast<bool>(errors[i]);
  for (int round = 0; round < 50; ++round) {
    std::vector<size_t> reps;
    std::vector<long> rep_of(n, -1);
    for (size_t i = 0; i < n; ++i) {
      if (verified[i]) continue;
      for (size_t r : reps)
        if (same_final(outcomes[r].pt, outcomes[i].pt)) {
          rep_of[i] = static_cast<long>(r);
          break;
        }
      if (rep_of[i] < 0) reps.push_back(i);
    }
    if (reps.empty()) return;
    std::vector<char> moved(n, 0);
    const auto errs = parallel_for(reps.size(), threads, [&](std::size_t k) {
      StartOutcome& o = outcomes[reps[k]];
      const SpectralPoint g = flow.global_point(o.pt.lambda, o.pt.pert);
      if (Flow::righter(g, o.pt)) {
        flow.resume(o.trace.back().start, g, o);
        moved[reps[k]] = 1;
      }
    });
    for (size_t k = 0; k < reps.size(); ++k) {
      const size_t r = reps[k];
      if (errs[k]) {
        errors[r] = errs[k];
        verified[r] = true;
      } else if (!moved[r]) {
        verified[r] = true;
      }
    }
    // Duplicates inherit a passed check; those of a moved start get their own.
    for (size_t i = 0; i < n; ++i)
      if (rep_of[i] >= 0 && verified[static_cast<size_t>(rep_of[i])] && !errors[static_cast<size_t>(rep_of[i])])
        verified[i] = true;
  }
}

}  // namespace

FlowDerivatives flow_derivatives(const SpectralPoint& pt, const UncertainDelaySystem& sys) {
  if (!(pt.xi > 0.0)) throw NormalizationError("xi must be real positive; renormalize the triple");
  if (!sys.interval.contains(pt.lambda)) throw ArgumentError("lambda outside the uncertainty interval");
  const ComplexPerturbation& p = pt.pert;
  FlowDerivatives d;
  if (p.eps == 0.0) {
    d.du = VectorXcd::Zero(p.u.size());
    d.dv = VectorXcd::Zero(p.v.size());
  } else {
    const VectorXcd bphi = sys.b_w.cast<cd>().adjoint() * pt.phi;  // Bw^T phi
    const VectorXcd cpsi = sys.c_z.cast<cd>() * pt.psi;
    const double scale = p.eps / pt.xi;
    d.du = scale * tangent(p.u, bphi * cpsi.dot(p.v));
    d.dv = scale * tangent(p.v, cpsi * bphi.dot(p.u));
  }
  const double grad = sum_g_term(pt, sys).real() / pt.xi;
  const bool at_hi = pt.lambda >= sys.interval.hi;
  const bool at_lo = pt.lambda <= sys.interval.lo;
  if ((at_hi && grad > 0.0) || (at_lo && grad < 0.0))
    d.dlambda = 0.0;
  else
    d.dlambda = grad;
  return d;
}

std::vector<FlowStart> auto_starts(const UncertainDelaySystem& sys, const RootRequest& roots,
                                   std::uint64_t seed) {
  std::vector<double> lambdas{sys.interval.lo, sys.interval.mid(), sys.interval.hi};
  if (sys.interval.degenerate()) lambdas.resize(1);
  std::mt19937_64 rng(seed);
  std::vector<FlowStart> starts;
  for (double lambda : lambdas) {
    const auto candidates = rightmost_roots(sys, lambda, std::nullopt, roots);
    bool seeded = false;
    for (cd s0 : candidates) {
      FlowStart st;
      st.lambda = lambda;
      try {
        const SpectralPoint pt =
            eig_triple(sys, lambda, std::nullopt, s0, roots.newton_tol, roots.max_newton);
        st.u = sys.b_w.cast<cd>().adjoint() * pt.phi;
        st.v = sys.c_z.cast<cd>() * pt.psi;
      } catch (const Error&) {
        continue;
      }
      if (st.u.norm() < 1e-12) st.u = random_unit(sys.inputs(), rng);
      if (st.v.norm() < 1e-12) st.v = random_unit(sys.outputs(), rng);
      st.u = unit(st.u);
      st.v = unit(st.v);
      starts.push_back(std::move(st));
      seeded = true;
    }
    if (!seeded) starts.push_back({lambda, random_unit(sys.inputs(), rng), random_unit(sys.outputs(), rng)});
  }
  return starts;
}

AbscissaResult pseudo_spectral_abscissa(const UncertainDelaySystem& sys, double eps,
                                        const FlowConfig& cfg) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ArgumentError("eps must be finite and nonnegative");
  cfg.validate();
  sys.validate();
  std::vector<FlowStart> starts = cfg.starts.empty() ? auto_starts(sys, cfg.roots, cfg.seed) : cfg.starts;
  // The flow only needs the rightmost root; settle the degree for that once.
  FlowConfig local = cfg;
  local.roots.count = std::min(2, cfg.roots.count);
  if (local.roots.adaptive) {
    int degree = local.roots.disc_degree;
    rightmost_roots(sys, sys.interval.mid(), std::nullopt, local.roots, &degree);
    local.roots.disc_degree = degree;
    local.roots.adaptive = false;
  }
  starts.insert(starts.end(), cfg.warm_starts.begin(), cfg.warm_starts.end());
  for (const auto& st : starts)
    if (st.u.size() != sys.inputs() || st.v.size() != sys.outputs())
      throw StructuralError("flow start vectors do not match Bw/Cz dimensions");

  const Flow flow(sys, eps, local);
  std::vector<StartOutcome> outcomes(starts.size());
  auto errors = parallel_for(starts.size(), cfg.threads, [&](std::size_t i) {
    outcomes[i] = flow.run(static_cast<int>(i), starts[i]);
  });
  verify_rightmost(flow, outcomes, errors, cfg.threads);

  AbscissaResult res;
  res.alpha = -std::numeric_limits<double>::infinity();
  std::exception_ptr first_error;
  bool any = false;
  bool all_failed_first = true;
  for (size_t i = 0; i < starts.size(); ++i) {
    if (errors[i]) {
      if (!first_error) first_error = errors[i];
      res.converged.push_back(false);
      continue;
    }
    const StartOutcome& o = outcomes[i];
    any = true;
    all_failed_first = all_failed_first && o.first_step_failed;
    res.converged.push_back(o.converged);
    res.finals.push_back(o.pt);
    res.iterates.insert(res.iterates.end(), o.trace.begin(), o.trace.end());
    if (o.pt.s.real() > res.alpha) {
      res.alpha = o.pt.s.real();
      res.optimizer = o.pt;
      res.best_start = static_cast<int>(i);
    }
  }
  if (!any) std::rethrow_exception(first_error);
  res.degenerate = all_failed_first;

  // A smooth maximum is flat, so starts reaching the same optimizer agree on
  // its location only to about the square root of the alpha tolerance.
  const double w_star = std::abs(res.optimizer.s.imag());
  const double width = std::max(1.0, sys.interval.hi - sys.interval.lo);
  for (const auto& f : res.finals) {
    if (std::abs(f.s.real() - res.alpha) > 1e-8) continue;
    if (std::abs(std::abs(f.s.imag()) - w_star) > kSameOptimizer * std::max(1.0, w_star) ||
        std::abs(f.lambda - res.optimizer.lambda) > kSameOptimizer * width)
      res.nonsmooth = true;
  }
  return res;
}

double alpha_eps_derivative(const UncertainDelaySystem& sys, double eps, const AbscissaResult& result) {
  (void)eps;
  if (result.nonsmooth)
    throw DerivativeUndefinedError("optimizer is not unique; d alpha / d eps undefined");
  const SpectralPoint& pt = result.optimizer;
  if (!(pt.xi > 0.0)) throw NormalizationError("xi must be real positive");
  const cd phib = pt.phi.dot(sys.b_w.cast<cd>() * pt.pert.u);
  const cd cpsi = pt.pert.v.dot(sys.c_z.cast<cd>() * pt.psi);
  return (phib * cpsi).real() / pt.xi;
}

}  // namespace dhinf
