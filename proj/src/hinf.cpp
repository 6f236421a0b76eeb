#include "dhinf/hinf.hpp"

#include <algorithm>
#include <limits>
#include <functional>
#include <cmath>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "dhinf/error.hpp"
#include "dhinf/parallel.hpp"

namespace dhinf {

void RadiusConfig::validate() const {
  if (!(alpha_tol > 0.0)) throw ArgumentError("alpha_tol must be positive");
  if (!(width_tol > 0.0)) throw ArgumentError("width_tol must be positive");
  if (max_evaluations < 2) throw ArgumentError("max_evaluations must be at least 2");
  if (!(eps_guess >= 0.0) || !std::isfinite(eps_guess)) throw ArgumentError("eps_guess must be finite and >= 0");
  flow.validate();
}

namespace {

constexpr double kEpsCap = 18446744073709551616.0;  // 2^64

struct Evaluation {
  double eps = 0.0;
  AbscissaResult res;
  double slope = 0.0;
  bool has_slope = false;
};

class AlphaFunction {
 public:
  AlphaFunction(const UncertainDelaySystem& sys, const RadiusConfig& cfg) : sys_(sys), cfg_(cfg.flow) {
    if (cfg_.starts.empty()) cfg_.starts = auto_starts(sys, cfg_.roots, cfg_.seed);
    if (cfg_.roots.adaptive) {
      // same settling as one abscissa call, done once for all eps
      RootRequest req = cfg_.roots;
      req.count = std::min(2, req.count);
      int degree = req.disc_degree;
      rightmost_roots(sys, sys.interval.mid(), std::nullopt, req, &degree);
      cfg_.roots.disc_degree = degree;
      cfg_.roots.adaptive = false;
    }
  }

  Evaluation operator()(double eps) {
    Evaluation ev;
    ev.eps = eps;
    ev.res = pseudo_spectral_abscissa(sys_, eps, cfg_);
    if (eps > 0.0 && !ev.res.nonsmooth) {
      ev.slope = alpha_eps_derivative(sys_, eps, ev.res);
      ev.has_slope = std::isfinite(ev.slope) && ev.slope > 0.0;
    }
    const SpectralPoint& opt = ev.res.optimizer;
    cfg_.warm_starts.assign(1, FlowStart{opt.lambda, opt.pert.u, opt.pert.v});
    ++count_;
    return ev;
  }

  int count() const { return count_; }

 private:
  const UncertainDelaySystem& sys_;
  FlowConfig cfg_;
  int count_ = 0;
};

RadiusResult finish(const Evaluation& ev, std::vector<BracketStep> history, int evaluations) {
  RadiusResult out;
  out.radius = ev.eps;
  out.alpha = ev.res.alpha;
  out.critical_point = ev.res.optimizer;
  if (out.critical_point.s.imag() < 0.0) {
    // report the omega >= 0 member; the conjugate perturbation attains it
    SpectralPoint& p = out.critical_point;
    p.s = std::conj(p.s);
    p.phi = p.phi.conjugate();
    p.psi = p.psi.conjugate();
    p.pert.u = p.pert.u.conjugate();
    p.pert.v = p.pert.v.conjugate();
  }
  out.bracket_history = std::move(history);
  out.evaluations = evaluations;
  return out;
}

// sum_r H_r e^{-s tau_r} and sum_r G_r e^{-s tau_r}; M = s I - A - lambda B.
struct FrequencyTerms {
  MatrixXcd a;
  MatrixXcd b;
  FrequencyTerms(const UncertainDelaySystem& sys, cd s) {
    const Eigen::Index n = sys.states();
    a = MatrixXcd::Zero(n, n);
    b = MatrixXcd::Zero(n, n);
    for (size_t r = 0; r < sys.delays.size(); ++r) {
      const cd e = sys.delays[r] == 0.0 ? cd(1.0) : std::exp(-s * sys.delays[r]);
      a += e * sys.h[r].cast<cd>();
      b += e * sys.g[r].cast<cd>();
    }
  }
};

double gain_at(const UncertainDelaySystem& sys, const FrequencyTerms& ft, cd s, double lambda) {
  MatrixXcd m = -ft.a - lambda * ft.b;
  m.diagonal().array() += s;
  Eigen::PartialPivLU<MatrixXcd> lu(m);
  if (numerically_singular(lu, term_scale(sys, s, lambda))) throw SingularityError(s);
  return sigma_max(sys.c_z.cast<cd>() * lu.solve(sys.b_w.cast<cd>()));
}

}  // namespace

RadiusResult robust_stability_radius(const UncertainDelaySystem& sys, const RadiusConfig& cfg) {
  cfg.validate();
  sys.validate();
  AlphaFunction alpha(sys, cfg);
  std::vector<BracketStep> history;

  Evaluation lo = alpha(0.0);
  history.push_back({0.0, lo.res.alpha, false});
  if (!(lo.res.alpha < 0.0))
    throw UnstableError("nominal system is not exponentially stable on the uncertainty interval",
                        lo.res.alpha);

  const double first = cfg.eps_guess > 0.0 ? cfg.eps_guess : 1.0;
  Evaluation hi = alpha(first);
  history.push_back({first, hi.res.alpha, false});
  while (hi.res.alpha < 0.0) {
    if (std::abs(hi.res.alpha) <= cfg.alpha_tol) return finish(hi, std::move(history), alpha.count());
    if (hi.eps >= kEpsCap)
      throw UnboundedRadiusError("alpha_eps stays negative up to eps = 2^64; the norm is numerically zero");
    double next = 2.0 * hi.eps;
    if (cfg.eps_guess > 0.0) {
      // overshoot the Newton estimate slightly; fall back to doubling the step
      const double step = hi.eps - lo.eps;
      next = hi.eps + 2.0 * step;
      if (hi.has_slope) next = std::min(next, hi.eps - 1.1 * hi.res.alpha / hi.slope + 1e-6 * hi.eps);
      next = std::min(std::max(next, hi.eps * (1.0 + 1e-6)), kEpsCap);
    }
    lo = std::move(hi);
    hi = alpha(next);
    history.push_back({hi.eps, hi.res.alpha, false});
  }

  Evaluation cur = (std::abs(lo.res.alpha) < std::abs(hi.res.alpha) && lo.eps > 0.0) ? lo : hi;
  while (true) {
    if (std::abs(cur.res.alpha) <= cfg.alpha_tol) return finish(cur, std::move(history), alpha.count());
    if (hi.eps - lo.eps <= cfg.width_tol * (1.0 + cur.eps)) {
      const Evaluation& best =
          (lo.eps > 0.0 && std::abs(lo.res.alpha) < std::abs(hi.res.alpha)) ? lo : hi;
      return finish(best, std::move(history), alpha.count());
    }
    if (alpha.count() >= cfg.max_evaluations)
      throw ConvergenceError("Newton-bisection on eps did not converge", cd(cur.eps, cur.res.alpha));

    double next = 0.5 * (lo.eps + hi.eps);
    bool newton = false;
    if (cur.has_slope) {
      const double trial = cur.eps - cur.res.alpha / cur.slope;
      if (trial > lo.eps && trial < hi.eps) {
        next = trial;
        newton = true;
      }
    }
    Evaluation ev = alpha(next);
    history.push_back({next, ev.res.alpha, newton});
    if (ev.res.alpha < 0.0)
      lo = ev;
    else
      hi = ev;
    cur = std::move(ev);
  }
}

NormResult robust_hinf_norm(const UncertainDelaySystem& sys, const RadiusConfig& cfg) {
  NormResult out;
  try {
    out.radius = robust_stability_radius(sys, cfg);
  } catch (const UnboundedRadiusError&) {
    out.norm = 0.0;
    out.peak_lambda = sys.interval.mid();
    return out;
  }
  out.norm = 1.0 / out.radius.radius;
  out.peak_omega = std::abs(out.radius.critical_point.s.imag());
  out.peak_lambda = out.radius.critical_point.lambda;
  return out;
}

NormResult hinf_norm_fixed(const UncertainDelaySystem& sys, double lambda, const RadiusConfig& cfg) {
  return robust_hinf_norm(with_fixed_lambda(sys, lambda), cfg);
}

GridResult grid_oracle(const UncertainDelaySystem& sys, double omega_max, int n_omega, int n_lambda,
                       int threads) {
  if (n_omega < 2 || n_lambda < 2) throw ArgumentError("grid needs at least 2 points per axis");
  if (!(omega_max > 0.0)) throw ArgumentError("omega_max must be positive");
  sys.validate();
  const double a = sys.interval.lo, b = sys.interval.hi;
  const int nl = sys.interval.degenerate() ? 1 : n_lambda;
  std::vector<GridResult> rows(static_cast<size_t>(n_omega));
  parallel_for(rows.size(), threads, [&](size_t k) {
    const double w = omega_max * static_cast<double>(k) / (n_omega - 1);
    const cd s(0.0, w);
    const FrequencyTerms ft(sys, s);
    GridResult& row = rows[k];
    row.value = -1.0;
    for (int j = 0; j < nl; ++j) {
      const double lam = nl == 1 ? a : a + (b - a) * j / (nl - 1);
      try {
        const double g = gain_at(sys, ft, s, lam);
        if (g > row.value) {
          row.value = g;
          row.omega = w;
          row.lambda = lam;
        }
      } catch (const SingularityError&) {
        ++row.skipped;
      }
    }
  });
  GridResult out;
  out.value = -1.0;
  for (const auto& row : rows) {
    out.skipped += row.skipped;
    if (row.value > out.value) {
      out.value = row.value;
      out.omega = row.omega;
      out.lambda = row.lambda;
    }
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

GridResult refine_peak(const UncertainDelaySystem& sys, double omega, double lambda) {
  sys.validate();
  const double a = sys.interval.lo, b = sys.interval.hi;
  lambda = std::clamp(lambda, a, b);
  omega = std::abs(omega);
  auto gain = [&](double w, double lam) { return gain_at(sys, FrequencyTerms(sys, cd(0.0, w)), cd(0.0, w), lam); };
  GridResult out{gain(omega, lambda), omega, lambda, 0};
  double w_half = 0.05 * (1.0 + omega);
  double l_half = 0.05 * (b - a);
  // maximize along one coordinate; true when the maximizer sits on an open bracket end
  auto search = [&](double& x, double half, double floor, double ceil, auto&& f) {
    const double lo = std::max(floor, x - half), hi = std::min(ceil, x + half);
    const auto r = boost::math::tools::brent_find_minima([&](double t) { return -f(t); }, lo, hi, 52);
    double best_x = r.first, best = -r.second;
    for (double edge : {lo, hi}) {
      const double g = f(edge);
      if (g > best) best = g, best_x = edge;
    }
    if (best > out.value) {
      out.value = best;
      x = best_x;
    }
    const double margin = 0.01 * (hi - lo);
    return (x - lo < margin && lo > floor) || (hi - x < margin && hi < ceil);
  };
  const double inf = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 200; ++round) {
    const double before = out.value;
    const bool w_edge = search(out.omega, w_half, 0.0, inf, [&](double w) { return gain(w, out.lambda); });
    bool l_edge = false;
    if (b > a) l_edge = search(out.lambda, l_half, a, b, [&](double l) { return gain(out.omega, l); });
    w_half = w_edge ? 2.0 * w_half : std::max(0.5 * w_half, 1e-7 * (1.0 + out.omega));
    l_half = l_edge ? 2.0 * l_half : std::max(0.5 * l_half, 1e-7 * (b - a));
    if (!w_edge && !l_edge && out.value - before <= 1e-15 * out.value) break;
  }
  return out;
}

std::vector<std::pair<double, double>> worst_case_gain_curve(const UncertainDelaySystem& sys,
                                                             const std::vector<double>& omegas,
                                                             int n_lambda, int threads) {
  if (n_lambda < 2) throw ArgumentError("n_lambda must be at least 2");
  sys.validate();
  const double a = sys.interval.lo, b = sys.interval.hi;
  std::vector<double> grid;
  if (sys.interval.degenerate()) {
    grid.push_back(a);
  } else {
    for (int j = n_lambda - 1; j >= 0; --j)
      grid.push_back(0.5 * (a + b) + 0.5 * (b - a) * std::cos(std::numbers::pi * j / (n_lambda - 1)));
  }
  std::vector<std::pair<double, double>> out(omegas.size());
  const auto errors = parallel_for(omegas.size(), threads, [&](size_t k) {
    const double w = omegas[k];
    const cd s(0.0, w);
    const FrequencyTerms ft(sys, s);
    size_t best = 0;
    double best_gain = -1.0;
    for (size_t j = 0; j < grid.size(); ++j) {
      const double g = gain_at(sys, ft, s, grid[j]);
      if (g > best_gain) {
        best_gain = g;
        best = j;
      }
    }
    if (grid.size() > 1) {
      const double lo = grid[best == 0 ? 0 : best - 1];
      const double hi = grid[std::min(best + 1, grid.size() - 1)];
      auto neg = [&](double lam) { return -gain_at(sys, ft, s, lam); };
      const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, 30);
      best_gain = std::max(best_gain, -r.second);
    }
    out[k] = {w, best_gain};
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace dhinf
