#include "dhinf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>

#include "dhinf/error.hpp"
#include "dhinf/parallel.hpp"

namespace dhinf {

void SynthConfig::validate() const {
  if (restarts < 1) throw ArgumentError("restarts must be >= 1");
  if (max_iters < 0) throw ArgumentError("max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw ArgumentError("grad_tol must be positive");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ArgumentError("line search constants need 0 < c1 < c2 < 1");
  if (max_line_search < 1) throw ArgumentError("max_line_search must be >= 1");
  if (!(stall_tol > 0.0) || stall_iters < 1) throw ArgumentError("stall criterion must be positive");
  for (double r : sampling_radii)
    if (!(r > 0.0)) throw ArgumentError("sampling radii must be positive");
  if (max_sampling_iters < 0) throw ArgumentError("max_sampling_iters must be >= 0");
  if (!(stab_margin > 0.0)) throw ArgumentError("stab_margin must be positive");
  if (max_stabilize_iters < 0) throw ArgumentError("max_stabilize_iters must be >= 0");
  radius.validate();
}

RadiusConfig synth_radius_config(const RadiusConfig& base) {
  RadiusConfig cfg = base;
  cfg.flow.roots.count = std::min(cfg.flow.roots.count, 2);
  return cfg;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Eval {
  double value = kInf;
  VectorXd grad;  // empty for the sentinel
  bool smooth = true;
};

using EvalFn = std::function<Eval(const VectorXd&)>;

bool finite(const Eval& e) { return std::isfinite(e.value) && e.grad.size() > 0; }

struct Peak {
  double omega = 0.0;
  double lambda = 0.0;
  double value = 0.0;
};

constexpr size_t kTrackedPeaks = 6;

// Local maxima over omega of max_lambda sigma_1 on a coarse log grid.
std::vector<Peak> scan_peaks(const UncertainDelaySystem& sys) {
  std::vector<double> omegas{0.0};
  for (int i = 0; i <= 250; ++i) omegas.push_back(std::pow(10.0, -2.0 + 5.0 * i / 250.0));
  const int nl = sys.interval.degenerate() ? 1 : 11;
  std::vector<Peak> best(omegas.size());
  for (size_t k = 0; k < omegas.size(); ++k) {
    best[k].omega = omegas[k];
    best[k].value = -1.0;
    for (int j = 0; j < nl; ++j) {
      const double lam = nl == 1 ? sys.interval.lo : sys.interval.lo + (sys.interval.hi - sys.interval.lo) * j / (nl - 1);
      try {
        const double g = sigma_max(transfer_eval(sys, cd(0.0, omegas[k]), lam));
        if (g > best[k].value) {
          best[k].value = g;
          best[k].lambda = lam;
        }
      } catch (const SingularityError&) {
      }
    }
  }
  std::vector<Peak> peaks;
  for (size_t k = 0; k < best.size(); ++k) {
    const bool left = k == 0 || best[k].value >= best[k - 1].value;
    const bool right = k + 1 == best.size() || best[k].value >= best[k + 1].value;
    if (left && right && best[k].value > 0.0) peaks.push_back(best[k]);
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& x, const Peak& y) { return x.value > y.value; });
  if (peaks.size() > kTrackedPeaks) peaks.resize(kTrackedPeaks);
  return peaks;
}

// Worst rank-one perturbation at a gain peak: Delta = v1 u1^H / sigma_1.
FlowStart start_at_peak(const UncertainDelaySystem& sys, const Peak& pk) {
  const MatrixXcd t = transfer_eval(sys, cd(0.0, pk.omega), pk.lambda);
  const Eigen::JacobiSVD<MatrixXcd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return FlowStart{pk.lambda, svd.matrixV().col(0), svd.matrixU().col(0)};
}

/// Robust norm of the decoupled subsystem with a set of tracked gain peaks.
/// The peaks seed the flow and the radius guess; every reported value is the
/// largest refined peak, so no solver tolerance leaks into it.
class NormObjective {
 public:
  NormObjective(const NetworkedPlant& plant, const ControllerParams& ctrl, const RadiusConfig& cfg)
      : plant_(plant), ctrl_(ctrl), cfg_(cfg) {}

  ObjectiveValue operator()(const VectorXd& p) {
    ObjectiveValue out;
    out.value = kInf;
    const ControllerParams c = ctrl_.with_params(p);
    const UncertainDelaySystem sys = build_decoupled_subsystem(plant_, c);
    std::vector<Peak> refined;
    auto add = [&](double omega, double lambda) {
      try {
        const GridResult r = refine_peak(sys, omega, lambda);
        refined.push_back({r.omega, r.lambda, r.value});
      } catch (const SingularityError&) {
      }
    };
    // a fresh scan catches peaks that rose since the last call
    for (const Peak& pk : peaks_) add(pk.omega, pk.lambda);
    for (const Peak& pk : scan_peaks(sys)) add(pk.omega, pk.lambda);
    tidy(refined);

    RadiusConfig cfg = cfg_;
    if (!refined.empty() && refined.front().value > 0.0) cfg.eps_guess = 1.0 / refined.front().value;
    for (size_t i = 0; i < std::min<size_t>(3, refined.size()); ++i) {
      try {
        cfg.flow.warm_starts.push_back(start_at_peak(sys, refined[i]));
      } catch (const SingularityError&) {
      }
    }
    NormResult nr;
    try {
      nr = robust_hinf_norm(sys, cfg);
    } catch (const UnstableError&) {
      return out;
    } catch (const ConvergenceError&) {
      return out;
    }
    if (nr.norm == 0.0) {
      out.value = 0.0;
      out.grad = VectorXd::Zero(p.size());
      return out;
    }
    add(nr.peak_omega, nr.peak_lambda);
    tidy(refined);
    if (refined.empty()) return out;
    peaks_ = refined;
    at_peak(sys, c, refined.front(), out);
    return out;
  }

  /// Largest peak refined from the tracked set and a fresh scan, with its
  /// gradient. Skips the stability check and the radius computation.
  ObjectiveValue tracked(const VectorXd& p) const {
    ObjectiveValue out;
    out.value = kInf;
    const ControllerParams c = ctrl_.with_params(p);
    const UncertainDelaySystem sys = build_decoupled_subsystem(plant_, c);
    std::vector<Peak> refined;
    std::vector<Peak> starts = peaks_;
    const auto scanned = scan_peaks(sys);
    starts.insert(starts.end(), scanned.begin(), scanned.end());
    for (const Peak& pk : starts) {
      try {
        const GridResult r = refine_peak(sys, pk.omega, pk.lambda);
        refined.push_back({r.omega, r.lambda, r.value});
      } catch (const SingularityError&) {
      }
    }
    tidy(refined);
    if (refined.empty()) return out;
    try {
      at_peak(sys, c, refined.front(), out);
    } catch (const SingularityError&) {
      out = ObjectiveValue{};
      out.value = kInf;
    }
    return out;
  }

 private:
  void at_peak(const UncertainDelaySystem& sys, const ControllerParams& c, const Peak& peak,
               ObjectiveValue& out) const {
    out.value = peak.value;
    out.omega = peak.omega;
    out.lambda = peak.lambda;
    const cd s(0.0, peak.omega);
    MatrixXcd m = -delay_sum(sys, s, peak.lambda);
    m.diagonal().array() += s;
    const Eigen::PartialPivLU<MatrixXcd> lu(m);
    const MatrixXcd t = sys.c_z.cast<cd>() * lu.solve(sys.b_w.cast<cd>());
    const Eigen::JacobiSVD<MatrixXcd> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd sv = svd.singularValues();
    out.smooth = sv.size() < 2 || sv(0) - sv(1) > 1e-8 * sv(0);
    const VectorXcd a = lu.adjoint().solve(sys.c_z.cast<cd>().adjoint() * svd.matrixU().col(0));
    const VectorXcd b = lu.solve(sys.b_w.cast<cd>() * svd.matrixV().col(0));
    out.grad = parameter_gradient(plant_, c, s, peak.lambda, a, b);
  }

  // sort by value, merge refinements that landed on the same peak
  static void tidy(std::vector<Peak>& peaks) {
    std::sort(peaks.begin(), peaks.end(), [](const Peak& x, const Peak& y) { return x.value > y.value; });
    std::vector<Peak> kept;
    for (const Peak& pk : peaks) {
      bool dup = false;
      for (const Peak& k : kept)
        dup = dup || (std::abs(k.omega - pk.omega) <= 1e-4 * (1.0 + k.omega) && std::abs(k.lambda - pk.lambda) <= 1e-4);
      if (!dup) kept.push_back(pk);
      if (kept.size() == kTrackedPeaks) break;
    }
    peaks = std::move(kept);
  }

  const NetworkedPlant& plant_;
  const ControllerParams& ctrl_;
  RadiusConfig cfg_;
  std::vector<Peak> peaks_;
};

Eval to_eval(const ObjectiveValue& v) { return {v.value, v.grad, v.smooth}; }

/// eps = 0 abscissa over [-1, 1] and its gradient at the active root.
Eval abscissa_eval(const NetworkedPlant& plant, const ControllerParams& ctrl, const FlowConfig& flow,
                   const VectorXd& p) {
  Eval e;
  const ControllerParams c = ctrl.with_params(p);
  const UncertainDelaySystem sys = build_decoupled_subsystem(plant, c);
  AbscissaResult r;
  try {
    r = pseudo_spectral_abscissa(sys, 0.0, flow);
  } catch (const Error&) {
    return e;
  }
  const SpectralPoint& pt = r.optimizer;
  e.value = r.alpha;
  e.smooth = !r.nonsmooth;
  e.grad = parameter_gradient(plant, c, pt.s, pt.lambda, pt.phi, pt.psi) / pt.xi;
  return e;
}

struct Trace {
  std::vector<double> values;
  int iters = 0;
  int restart = 0;
  const char* phase = "";
  const std::function<void(int, const char*, int, double)>* progress = nullptr;

  void accept(double v) {
    values.push_back(v);
    ++iters;
    if (progress && *progress) (*progress)(restart, phase, iters, v);
  }
};

/// Objective for the optimizer. Trial points are screened with `cheap`;
/// every accepted point is confirmed with `full`, whose value is what gets
/// recorded. When `exact`, the two coincide.
struct Objective {
  EvalFn cheap;
  EvalFn full;
  bool exact = false;

  // full evaluation at a point the cheap one accepted; empty when it disagrees
  std::optional<Eval> confirm(const VectorXd& x, const Eval& screened) const {
    if (exact) return screened;
    Eval e = full(x);
    if (!finite(e) || e.value > screened.value + 1e-9 * std::abs(screened.value)) return std::nullopt;
    return e;
  }
};

// Weak Wolfe bracketing line search. Returns false when no point with
// sufficient decrease was found.
bool weak_wolfe(const Objective& f, const VectorXd& x, const Eval& fx, const VectorXd& d, const SynthConfig& cfg,
                VectorXd& x_new, Eval& f_new) {
  const double slope = fx.grad.dot(d);
  auto armijo = [&](const Eval& e, double t) {
    return finite(e) && e.value <= fx.value + cfg.c1 * t * slope && e.value < fx.value;
  };
  double lo = 0.0, hi = kInf, t = 1.0;
  std::optional<VectorXd> lo_x;
  Eval lo_f;
  for (int i = 0; i < cfg.max_line_search; ++i) {
    const VectorXd xt = x + t * d;
    const Eval ft = f.cheap(xt);
    if (!armijo(ft, t)) {
      hi = t;
    } else if (ft.grad.dot(d) >= cfg.c2 * slope) {
      const auto ok = f.confirm(xt, ft);
      if (ok && armijo(*ok, t)) {
        x_new = xt;
        f_new = *ok;
        return true;
      }
      hi = t;
    } else {
      lo = t;
      lo_x = xt;
      lo_f = ft;
    }
    t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
    if (std::isfinite(hi) && hi - lo <= 1e-12 * hi) break;
  }
  if (!lo_x) return false;
  // no Wolfe point; settle for the sufficient decrease one
  const auto ok = f.confirm(*lo_x, lo_f);
  if (!ok || !armijo(*ok, lo)) return false;
  x_new = *lo_x;
  f_new = *ok;
  return true;
}

bool stalled(const std::vector<double>& values, const SynthConfig& cfg) {
  const size_t k = static_cast<size_t>(cfg.stall_iters);
  if (values.size() <= k) return false;
  const double old = values[values.size() - 1 - k], now = values.back();
  return old - now <= cfg.stall_tol * std::max(std::abs(old), 1e-300);
}

/// BFGS with the inverse Hessian kept dense. Stops on a failed line search,
/// a small gradient, a stall, max_iters, or once the value reaches `target`.
void bfgs(const Objective& f, VectorXd& x, Eval& fx, const SynthConfig& cfg, int max_iters, double target,
          Trace& trace) {
  const Eigen::Index n = x.size();
  MatrixXd h = MatrixXd::Identity(n, n);
  bool scaled = false;
  for (int k = 0; k < max_iters; ++k) {
    if (fx.value <= target || fx.grad.norm() <= cfg.grad_tol) return;
    VectorXd d = -h * fx.grad;
    if (!(fx.grad.dot(d) < 0.0)) {
      h.setIdentity();
      d = -fx.grad;
    }
    VectorXd x_new;
    Eval f_new;
    if (!weak_wolfe(f, x, fx, d, cfg, x_new, f_new)) return;
    const VectorXd s = x_new - x;
    const VectorXd y = f_new.grad - fx.grad;
    x = x_new;
    fx = f_new;
    trace.accept(fx.value);
    const double sy = s.dot(y);
    if (sy > 0.0) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const MatrixXd v = MatrixXd::Identity(n, n) - rho * y * s.transpose();
      h = v.transpose() * h * v + rho * s * s.transpose();
    }
    if (stalled(trace.values, cfg)) return;
  }
}

/// Gradient sampling at the shrinking radii, batch gradients from the cheap
/// evaluation. Returns the last min-norm element length.
double gradient_sampling(const Objective& f, VectorXd& x, Eval& fx, const SynthConfig& cfg,
                         std::mt19937_64& rng, double target, int threads, Trace& trace) {
  const Eigen::Index n = x.size();
  const int m = static_cast<int>(2 * n + 1);
  double stationarity = fx.grad.norm();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  for (double rel : cfg.sampling_radii) {
    for (int it = 0; it < cfg.max_sampling_iters; ++it) {
      if (fx.value <= target) return stationarity;
      const double r = rel * std::max(1.0, x.norm());
      std::vector<VectorXd> pts(static_cast<size_t>(m));
      for (auto& pt : pts) {
        VectorXd dir(n);
        for (Eigen::Index i = 0; i < n; ++i) dir(i) = normal(rng);
        const double len = dir.norm();
        pt = x + (r * std::pow(unif(rng), 1.0 / static_cast<double>(n)) / (len > 0.0 ? len : 1.0)) * dir;
      }
      std::vector<Eval> evals(pts.size());
      parallel_for(pts.size(), threads, [&](size_t i) { evals[i] = f.cheap(pts[i]); });
      std::vector<VectorXd> grads{fx.grad};
      for (const auto& e : evals)
        if (finite(e)) grads.push_back(e.grad);
      MatrixXd g(n, static_cast<Eigen::Index>(grads.size()));
      for (size_t i = 0; i < grads.size(); ++i) g.col(static_cast<Eigen::Index>(i)) = grads[i];
      const VectorXd d = min_norm_hull(g);
      stationarity = d.norm();
      if (stationarity <= cfg.grad_tol) break;
      bool moved = false;
      for (double t = 1.0; t >= 1e-6; t *= 0.5) {
        const VectorXd xt = x - t * d;
        const double bound = fx.value - cfg.c1 * t * d.squaredNorm();
        const Eval ft = f.cheap(xt);
        if (!finite(ft) || !(ft.value < bound)) continue;
        const auto ok = f.confirm(xt, ft);
        if (ok && ok->value < bound) {
          x = xt;
          fx = *ok;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      trace.accept(fx.value);
    }
  }
  return stationarity;
}

VectorXd random_start(const NetworkedPlant& plant, const ControllerParams& ctrl, std::mt19937_64& rng) {
  const double bu = std::max(plant.b_u.norm(), 1e-12);
  const double cy = std::max(plant.c_y.norm(), 1e-12);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const auto slots = ctrl.slots();
  VectorXd p(static_cast<Eigen::Index>(slots.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    double scale = 1.0;
    switch (slots[i].block) {
      case ControllerParams::kL: scale = 1.0 / bu; break;
      case ControllerParams::kK:
      case ControllerParams::kKn: scale = 1.0 / (bu * cy); break;
      default: break;
    }
    p(static_cast<Eigen::Index>(i)) = scale * unif(rng);
  }
  return p;
}

StabilizeResult stabilize_restart(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p0,
                                  const SynthConfig& cfg, int restart);

RestartResult run_restart(const NetworkedPlant& plant, const ControllerParams& ctrl, const SynthConfig& cfg,
                          int index, int threads) {
  RestartResult out;
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(index)};
  std::mt19937_64 rng(seq);
  const VectorXd tmpl = ctrl.params();
  // an all-zero template carries no starting point
  VectorXd p0 = index == 0 && !tmpl.isZero(0.0) ? tmpl : random_start(plant, ctrl, rng);

  StabilizeResult st;
  try {
    SynthConfig scfg = cfg;
    scfg.threads = threads;
    st = stabilize_restart(plant, ctrl, p0, scfg, index);
  } catch (const NoStabilizerError& e) {
    out.failed = true;
    out.p = p0;
    out.objective = kInf;
    out.stationarity = kInf;
    out.stabilize_trace.push_back(e.best_abscissa());
    return out;
  }
  out.stabilize_trace = st.trace;

  NormObjective obj(plant, ctrl, synth_radius_config(cfg.radius));
  Objective f;
  f.full = [&](const VectorXd& p) { return to_eval(obj(p)); };
  f.cheap = [&](const VectorXd& p) { return to_eval(obj.tracked(p)); };
  VectorXd x = st.p;
  Eval fx = f.full(x);
  if (!finite(fx)) {
    out.failed = true;
    out.p = x;
    out.objective = kInf;
    out.stationarity = kInf;
    return out;
  }
  Trace trace;
  trace.restart = index;
  trace.phase = "bfgs";
  trace.progress = &cfg.progress;
  trace.values.push_back(fx.value);
  bfgs(f, x, fx, cfg, cfg.max_iters, -kInf, trace);
  out.bfgs_iters = trace.iters;
  const int before = trace.iters;
  trace.phase = "sampling";
  out.stationarity = gradient_sampling(f, x, fx, cfg, rng, -kInf, threads, trace);
  out.sampling_iters = trace.iters - before;
  out.p = x;
  out.objective = fx.value;
  out.trace = std::move(trace.values);
  return out;
}

}  // namespace

VectorXd parameter_gradient(const NetworkedPlant& plant, const ControllerParams& ctrl, cd s, double lambda,
                            const VectorXcd& a, const VectorXcd& b) {
  const Eigen::Index n = plant.states();
  const Eigen::Index dim = n + ctrl.n_c;
  if (a.size() != dim || b.size() != dim) throw StructuralError("gradient vectors do not match the subsystem");
  auto delay = [&](double tau) { return tau == 0.0 ? cd(1.0) : std::exp(-s * tau); };
  const cd eu = delay(plant.tau_u), enc = lambda * delay(plant.tau_nc),
           eunc = lambda * delay(plant.tau_u + plant.tau_nc);
  const VectorXcd ax = a.head(n), bx = b.head(n);
  const VectorXcd cyb = plant.c_y.cast<cd>() * bx;                   // Cy b_x
  const VectorXcd abu = plant.b_u.cast<cd>().adjoint() * ax;         // (a_x^H Bu)^H, entry r
  const auto slots = ctrl.slots();
  VectorXd g(static_cast<Eigen::Index>(slots.size()));
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto [block, r, c] = slots[i];
    cd v;
    switch (block) {
      case ControllerParams::kJ: v = std::conj(a(n + r)) * b(n + c); break;
      case ControllerParams::kF: v = std::conj(a(n + r)) * cyb(c); break;
      case ControllerParams::kFn: v = enc * std::conj(a(n + r)) * cyb(c); break;
      case ControllerParams::kL: v = eu * std::conj(abu(r)) * b(n + c); break;
      case ControllerParams::kK: v = eu * std::conj(abu(r)) * cyb(c); break;
      case ControllerParams::kKn: v = eunc * std::conj(abu(r)) * cyb(c); break;
    }
    g(static_cast<Eigen::Index>(i)) = v.real();
  }
  return g;
}

double objective(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p,
                 const RadiusConfig& cfg) {
  return objective_with_gradient(plant, ctrl, p, cfg).value;
}

ObjectiveValue objective_with_gradient(const NetworkedPlant& plant, const ControllerParams& ctrl,
                                       const VectorXd& p, const RadiusConfig& cfg) {
  if (p.size() != ctrl.n_params()) throw ArgumentError("parameter vector length does not match the mask");
  if (!p.allFinite()) throw ArgumentError("parameters must be finite");
  NormObjective obj(plant, ctrl, cfg);
  return obj(p);
}

StabilizeResult stabilize(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p0,
                          const SynthConfig& cfg) {
  return stabilize_restart(plant, ctrl, p0, cfg, 0);
}

namespace {

StabilizeResult stabilize_restart(const NetworkedPlant& plant, const ControllerParams& ctrl, const VectorXd& p0,
                                  const SynthConfig& cfg, int restart) {
  cfg.validate();
  if (p0.size() != ctrl.n_params()) throw ArgumentError("parameter vector length does not match the mask");
  FlowConfig flow = synth_radius_config(cfg.radius).flow;
  Objective f;
  f.full = [&](const VectorXd& p) { return abscissa_eval(plant, ctrl, flow, p); };
  f.cheap = f.full;
  f.exact = true;
  StabilizeResult out;
  VectorXd x = p0;
  Eval fx = f.full(x);
  if (!finite(fx)) throw NoStabilizerError("abscissa could not be evaluated at the initial point", kInf);
  out.trace.push_back(fx.value);
  const double target = -cfg.stab_margin;
  if (fx.value <= target) {
    out.p = x;
    out.abscissa = fx.value;
    out.unchanged = true;
    return out;
  }
  Trace trace;
  trace.restart = restart;
  trace.phase = "stabilize";
  trace.progress = &cfg.progress;
  trace.values.push_back(fx.value);
  if (x.size() > 0) {
    bfgs(f, x, fx, cfg, cfg.max_stabilize_iters, target, trace);
    if (fx.value > target) {
      std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), std::uint64_t{0x5eed}};
      std::mt19937_64 rng(seq);
      gradient_sampling(f, x, fx, cfg, rng, target, cfg.threads, trace);
    }
  }
  out.trace = std::move(trace.values);
  out.p = x;
  out.abscissa = fx.value;
  if (fx.value > target)
    throw NoStabilizerError("no stabilizing controller found; best abscissa " + std::to_string(fx.value),
                            fx.value);
  return out;
}

}  // namespace

SynthesisResult synthesize(const NetworkedPlant& plant, const ControllerParams& ctrl, const SynthConfig& cfg) {
  cfg.validate();
  plant.validate();
  ctrl.validate(plant);
  SynthesisResult out;
  if (ctrl.n_params() == 0) {
    RestartResult r;
    r.p = VectorXd();
    r.objective = objective(plant, ctrl, r.p, cfg.radius);
    if (!std::isfinite(r.objective))
      throw NoStabilizerError("fixed controller does not stabilize the subsystem", kInf);
    r.trace.push_back(r.objective);
    out.restarts.push_back(r);
    out.p_star = r.p;
    out.controller = ctrl;
    out.objective = r.objective;
    return out;
  }

  const int workers = resolve_threads(cfg.threads);
  const int inner = cfg.restarts >= workers ? 1 : workers;
  out.restarts.resize(static_cast<size_t>(cfg.restarts));
  auto errors = parallel_for(out.restarts.size(), cfg.restarts >= workers ? workers : 1, [&](size_t i) {
    out.restarts[i] = run_restart(plant, ctrl, cfg, static_cast<int>(i), inner);
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  int best = -1;
  double best_abscissa = kInf;
  for (size_t i = 0; i < out.restarts.size(); ++i) {
    const auto& r = out.restarts[i];
    if (r.failed) {
      if (!r.stabilize_trace.empty()) best_abscissa = std::min(best_abscissa, r.stabilize_trace.back());
      continue;
    }
    if (best < 0 || r.objective < out.restarts[static_cast<size_t>(best)].objective) best = static_cast<int>(i);
  }
  if (best < 0) throw NoStabilizerError("every restart failed to stabilize", best_abscissa);
  const auto& r = out.restarts[static_cast<size_t>(best)];
  out.best_restart = best;
  out.p_star = r.p;
  out.controller = ctrl.with_params(r.p);
  out.stationarity = r.stationarity;
  out.objective = objective(plant, ctrl, r.p, cfg.radius);
  return out;
}

VectorXd min_norm_hull(const MatrixXd& g) {
  const Eigen::Index m = g.cols();
  if (m == 0) throw ArgumentError("empty point set");
  // Wolfe's algorithm on the active set S with barycentric weights w
  Eigen::Index first = 0;
  g.colwise().squaredNorm().minCoeff(&first);
  std::vector<Eigen::Index> set{first};
  VectorXd w = VectorXd::Ones(1);
  VectorXd x = g.col(first);
  const double scale = g.colwise().squaredNorm().maxCoeff();
  const double tol = 1e-12 * std::max(scale, 1e-300);

  auto affine_min = [&](const std::vector<Eigen::Index>& s) {
    const Eigen::Index k = static_cast<Eigen::Index>(s.size());
    MatrixXd kkt = MatrixXd::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) kkt(i, j) = g.col(s[i]).dot(g.col(s[j]));
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    VectorXd rhs = VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    return VectorXd(kkt.completeOrthogonalDecomposition().solve(rhs).head(k));
  };

  for (int major = 0; major < 10 * (m + 1); ++major) {
    if (x.squaredNorm() <= tol) break;
    Eigen::Index j = 0;
    const double best = (g.transpose() * x).minCoeff(&j);
    if (best >= x.squaredNorm() - tol) break;
    if (std::find(set.begin(), set.end(), j) != set.end()) break;
    set.push_back(j);
    w.conservativeResize(w.size() + 1);
    w(w.size() - 1) = 0.0;
    for (int minor = 0; minor < 10 * (m + 1); ++minor) {
      const VectorXd v = affine_min(set);
      if ((v.array() > 1e-14).all()) {
        w = v;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) <= 1e-14) theta = std::min(theta, w(i) / (w(i) - v(i)));
      w = w + theta * (v - w);
      std::vector<Eigen::Index> keep_set;
      std::vector<double> keep_w;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > 1e-14) {
          keep_set.push_back(set[static_cast<size_t>(i)]);
          keep_w.push_back(w(i));
        }
      set = keep_set;
      w = Eigen::Map<VectorXd>(keep_w.data(), static_cast<Eigen::Index>(keep_w.size()));
      w /= w.sum();
    }
    x = VectorXd::Zero(g.rows());
    for (size_t i = 0; i < set.size(); ++i) x += w(static_cast<Eigen::Index>(i)) * g.col(set[i]);
  }
  return x;
}

}  // namespace dhinf
