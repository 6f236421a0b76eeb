// Acceptance run: one PASS/FAIL line per criterion. Exit status 1 when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dhinf/error.hpp"
#include "dhinf/hinf.hpp"
#include "dhinf/network.hpp"
#include "dhinf/roots.hpp"
#include "dhinf/sim.hpp"
#include "dhinf/svset.hpp"
#include "dhinf/synth.hpp"
#include "test_support.hpp"

using namespace dhinf;
using dhinf::testing::random_network;
using dhinf::testing::random_system;
using dhinf::testing::read_fixture;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string num(double x, int digits = 7) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

bool stable(const UncertainDelaySystem& sys) { return pseudo_spectral_abscissa(sys, 0.0).alpha < -1e-3; }

NetworkedPlant cart_plant() { return load_plant(read_fixture("cart_pendulum_plant.json")); }
ControllerParams cart_controller() { return load_controller(read_fixture("cart_pendulum_controller.json")); }

constexpr double kCartNorm = 0.512249;
const std::vector<std::pair<int, double>> kTable{{3, 0.512228}, {5, 0.512239}, {10, 0.512246}, {15, 0.512247}};

Outcome benchmark_radius() {
  Outcome o;
  const auto sys = dhinf::testing::benchmark();
  const auto t0 = Clock::now();
  const auto r = robust_stability_radius(sys);
  const double secs = seconds_since(t0);
  const double omega = std::abs(r.critical_point.s.imag());
  o.note("r = " + num(r.radius) + ", |omega| = " + num(omega, 3) + ", " + num(secs, 3) + " s");
  o.require(std::abs(r.radius - 0.22491) <= 1e-4, "r off 0.22491 by " + num(r.radius - 0.22491, 3));
  o.require(omega <= 1e-3, "critical frequency away from 0");
  o.require(secs < 30.0, "slower than 30 s");
  return o;
}

Outcome abscissa_consistency() {
  Outcome o;
  const auto sys = dhinf::testing::benchmark();
  const double a = pseudo_spectral_abscissa(sys, 0.22491).alpha;
  const double a0 = pseudo_spectral_abscissa(sys, 0.0).alpha;
  o.note("alpha(0.22491) = " + num(a, 4) + ", alpha(0) = " + num(a0, 4));
  o.require(std::abs(a) <= 1e-4, "alpha at 0.22491 not within 1e-4 of 0");
  o.require(a0 < 0.0, "alpha at 0 not negative");
  return o;
}

Outcome norm_vs_oracle() {
  Outcome o;
  std::mt19937_64 rng(7001);
  int tested = 0;
  double worst_rel = 0.0, worst_excess = -1e300;
  while (tested < 25) {
    const int n = 1 + tested % 4;
    const auto sys = random_system(rng, n, tested % 3, 1 + tested % 2, 1 + (tested / 2) % 2);
    if (!stable(sys)) continue;
    ++tested;
    const double norm = robust_hinf_norm(sys).norm;
    const double grid = grid_oracle(sys, 20.0, 2001, 201).value;
    worst_rel = std::max(worst_rel, std::abs(grid - norm) / norm);
    worst_excess = std::max(worst_excess, grid - norm);
  }
  o.note("25 systems, worst rel gap " + num(worst_rel, 3) + ", worst oracle excess " + num(worst_excess, 3));
  o.require(worst_rel <= 1e-3, "relative gap above 1e-3");
  o.require(worst_excess <= 1e-9, "oracle above solver value");
  return o;
}

Outcome decoupling_equivalence() {
  Outcome o;
  std::mt19937_64 rng(7002);
  int tested = 0;
  double worst = 0.0;
  while (tested < 25) {
    const int big_n = 2 + tested % 5;
    const auto net = random_network(rng, 1 + tested % 3, tested % 2);
    const auto dec = build_decoupled_subsystem(net.plant, net.ctrl);
    if (!stable(dec)) continue;
    ++tested;
    const auto topo = tested % 2 ? adjacency_ring(big_n) : adjacency_line(big_n);
    const auto full = build_closed_loop_full(net.plant, net.ctrl, topo);
    const double full_norm = grid_oracle(full, 20.0, 2001, 2).value;
    double best = 0.0;
    for (double ev : topo.eigenvalues) best = std::max(best, grid_oracle(with_fixed_lambda(dec, ev), 20.0, 2001, 2).value);
    worst = std::max(worst, std::abs(full_norm - best) / best);
  }
  o.note("25 networks, worst rel gap " + num(worst, 3));
  o.require(worst <= 1e-6, "relative gap above 1e-6");
  return o;
}

Outcome table_reproduction(std::vector<double>& values) {
  Outcome o;
  const auto plant = cart_plant();
  const auto ctrl = cart_controller();
  std::string row;
  for (const auto& [n, target] : kTable) {
    const auto t0 = Clock::now();
    const double v = decoupled_norm_exact(plant, ctrl, adjacency_line(n)).max;
    const double secs = seconds_since(t0);
    values.push_back(v);
    row += " N=" + std::to_string(n) + ":" + num(v) + "(" + num(secs, 3) + "s)";
    o.require(std::abs(v - target) <= 5e-3, "N=" + std::to_string(n) + " off by " + num(v - target, 3));
    o.require(secs < 60.0, "N=" + std::to_string(n) + " slower than 60 s");
  }
  o.note(row.substr(1));
  return o;
}

Outcome dominance(const std::vector<double>& table) {
  Outcome o;
  const double norm = robust_hinf_norm(build_decoupled_subsystem(cart_plant(), cart_controller())).norm;
  o.note("robust norm " + num(norm));
  o.require(std::abs(norm - kCartNorm) <= 5e-3, "off 0.512249 by " + num(norm - kCartNorm, 3));
  for (double v : table) o.require(v <= norm + 1e-9, "table value " + num(v) + " above robust norm");
  return o;
}

Outcome topology_formulas() {
  Outcome o;
  double worst = 0.0;
  for (int n = 2; n <= 50; ++n) {
    for (const bool ring : {true, false}) {
      const Topology t = ring ? adjacency_ring(n) : adjacency_line(n);
      std::vector<double> closed = ring ? ring_eigenvalues(n) : line_eigenvalues(n);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(t.p);
      std::vector<double> numeric(es.eigenvalues().data(), es.eigenvalues().data() + n);
      std::sort(closed.begin(), closed.end());
      if (closed.size() != numeric.size()) {
        o.require(false, "eigenvalue count mismatch at N=" + std::to_string(n));
        continue;
      }
      for (size_t i = 0; i < closed.size(); ++i) worst = std::max(worst, std::abs(closed[i] - numeric[i]));
    }
  }
  o.note("worst gap " + num(worst, 3));
  o.require(worst <= 1e-10, "gap above 1e-10");
  return o;
}

Outcome root_oracle() {
  Outcome o;
  const auto sys = dhinf::testing::scalar_system({1.0}, {-1.0});
  // s = W0(-1) for x' = -x(t-1)
  const cd expect = dhinf::testing::lambert_w0(cd(-1.0, 0.0), cd(-0.3, 1.3));
  const auto r = rightmost_roots(sys, 0.0, {});
  const double err = std::abs(cd(r.at(0).real(), std::abs(r.at(0).imag())) - expect);
  o.require(std::abs(expect - cd(-0.3181315, 1.3372357)) <= 1e-6, "Lambert-W oracle disagrees with -0.3181315+1.3372357j");
  o.require(err <= 1e-6, "root off by " + num(err, 3));
  const auto crit = dhinf::testing::scalar_system({1.0}, {-std::numbers::pi / 2.0});
  const auto rc = rightmost_roots(crit, 0.0, {});
  const double re = std::abs(rc.at(0).real());
  const double im = std::abs(std::abs(rc.at(0).imag()) - std::numbers::pi / 2.0);
  o.require(re <= 1e-8 && im <= 1e-8, "critical root off the axis at pi/2 j");
  o.note("root " + num(r[0].real(), 8) + (r[0].imag() < 0 ? "-" : "+") + num(std::abs(r[0].imag()), 8) +
         "j, critical |Re| " + num(re, 3));
  return o;
}

Outcome gradient_suites() {
  Outcome o;
  std::mt19937_64 rng(7003);
  std::uniform_real_distribution<double> unif(0.05, 0.4);
  int eps_points = 0;
  double worst_eps = 0.0;
  for (int trial = 0; eps_points < 10 && trial < 200; ++trial) {
    const auto sys = random_system(rng, 2 + trial % 2, 1, 1 + trial % 2, 1 + (trial / 2) % 2);
    if (!stable(sys)) continue;
    const double eps = unif(rng);
    const auto r = pseudo_spectral_abscissa(sys, eps);
    if (r.nonsmooth || r.degenerate) continue;
    const double d = alpha_eps_derivative(sys, eps, r);
    const double h = 1e-5;
    const double fd =
        (pseudo_spectral_abscissa(sys, eps + h).alpha - pseudo_spectral_abscissa(sys, eps - h).alpha) / (2.0 * h);
    worst_eps = std::max(worst_eps, std::abs(d - fd) / std::max(1.0, std::abs(fd)));
    ++eps_points;
  }

  NetworkedPlant plant;
  plant.delays = {0.0, 0.5};
  plant.a = {MatrixXd::Constant(1, 1, -1.0), MatrixXd::Constant(1, 1, 0.2)};
  plant.b_u = MatrixXd::Constant(1, 1, 1.0);
  plant.b_un = MatrixXd::Constant(1, 1, 0.3);
  plant.b_w = MatrixXd::Constant(1, 1, 1.0);
  plant.c_y = MatrixXd::Constant(1, 1, 1.0);
  plant.c_yn = MatrixXd::Constant(1, 1, 1.0);
  plant.c_z = MatrixXd::Constant(1, 1, 1.0);
  plant.tau_u = 0.1;
  plant.tau_n = 0.2;
  plant.tau_nc = 0.3;
  const auto ctrl = ControllerParams::zeros(plant, 1);
  std::uniform_real_distribution<double> coef(-0.3, 0.3);
  int p_points = 0;
  double worst_p = 0.0;
  for (int trial = 0; p_points < 10 && trial < 200; ++trial) {
    VectorXd p(ctrl.n_params());
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = coef(rng);
    p(0) -= 1.0;
    const auto ov = objective_with_gradient(plant, ctrl, p);
    if (!std::isfinite(ov.value) || !ov.smooth) continue;
    ++p_points;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(p(i)));
      VectorXd hi = p, lo = p;
      hi(i) += h;
      lo(i) -= h;
      const double fd = (objective(plant, ctrl, hi) - objective(plant, ctrl, lo)) / (2.0 * h);
      worst_p = std::max(worst_p, std::abs(ov.grad(i) - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  o.note("eps-derivative: " + std::to_string(eps_points) + " points, worst " + num(worst_eps, 3) +
         "; parameter gradient: " + std::to_string(p_points) + " points, worst " + num(worst_p, 3));
  o.require(eps_points >= 10 && p_points >= 10, "fewer than 10 smooth points");
  o.require(worst_eps <= 1e-4, "eps-derivative off");
  o.require(worst_p <= 1e-4, "parameter gradient off");
  return o;
}

Outcome flow_invariants() {
  Outcome o;
  std::mt19937_64 rng(7004);
  long iterates = 0, violations = 0;
  double worst_norm = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto sys = random_system(rng, 2 + trial % 3, 1 + trial % 2, 1 + trial % 2, 2);
    for (double eps : {0.0, 0.1, 0.4}) {
      const auto r = pseudo_spectral_abscissa(sys, eps);
      std::map<int, double> last;
      for (const auto& it : r.iterates) {
        ++iterates;
        if (it.lambda < sys.interval.lo || it.lambda > sys.interval.hi) ++violations;
        worst_norm = std::max({worst_norm, std::abs(it.u_norm - 1.0), std::abs(it.v_norm - 1.0)});
        if (auto p = last.find(it.start); p != last.end() && it.s.real() < p->second) ++violations;
        last[it.start] = it.s.real();
      }
    }
  }
  o.note(std::to_string(iterates) + " iterates, " + std::to_string(violations) + " violations, worst |norm-1| " +
         num(worst_norm, 3));
  o.require(violations == 0, "monotonicity or interval violated");
  o.require(worst_norm <= 1e-12, "u or v not unit norm");
  return o;
}

// Iteration budget kept below the library defaults so the run fits the time
// limit on one core.
Outcome synthesis() {
  Outcome o;
  const auto plant = cart_plant();
  const auto templ = ControllerParams::zeros(plant, 2);
  SynthConfig cfg;
  cfg.restarts = 5;
  cfg.seed = 0;
  cfg.max_iters = 200;
  cfg.max_sampling_iters = 5;
  cfg.threads = 0;
  const auto t0 = Clock::now();
  SynthesisResult r;
  try {
    r = synthesize(plant, templ, cfg);
  } catch (const Error& e) {
    o.require(false, std::string("synthesis failed: ") + e.what());
    return o;
  }
  const double secs = seconds_since(t0);
  bool monotone = true;
  for (const auto& rs : r.restarts) {
    for (size_t i = 1; i < rs.trace.size(); ++i) monotone = monotone && rs.trace[i] <= rs.trace[i - 1];
    for (size_t i = 1; i < rs.stabilize_trace.size(); ++i)
      monotone = monotone && rs.stabilize_trace[i] <= rs.stabilize_trace[i - 1];
  }
  const auto sys = build_decoupled_subsystem(plant, r.controller);
  // only the rightmost root decides stability
  RootRequest req;
  req.count = 2;
  double worst_abscissa = -1e300;
  for (int i = 0; i < 20; ++i) {
    const double lambda = -1.0 + 2.0 * i / 19.0;
    try {
      worst_abscissa = std::max(worst_abscissa, spectral_abscissa(sys, lambda, {}, req));
    } catch (const Error& e) {
      o.require(false, "abscissa at lambda = " + num(lambda, 3) + ": " + e.what());
      worst_abscissa = std::numeric_limits<double>::infinity();
    }
  }
  std::string per;
  for (const auto& rs : r.restarts) per += " " + num(rs.objective, 5);
  o.note("objective " + num(r.objective) + " (restarts" + per + "), worst abscissa " + num(worst_abscissa, 4) + ", " +
         num(secs, 4) + " s");
  o.require(r.objective <= 0.55, "objective above 0.55");
  o.require(monotone, "trace not monotone");
  o.require(worst_abscissa < 0.0, "unstable at a sampled lambda");
  o.require(secs < 1800.0, "slower than 30 min");
  return o;
}

Outcome simulation() {
  Outcome o;
  const auto plant = cart_plant();
  const auto ctrl = cart_controller();
  const auto full = build_closed_loop_full(plant, ctrl, adjacency_line(20));
  const double t_end = 10.0, dt = 1e-3;
  const int inputs = static_cast<int>(full.b_w.cols());
  double m1 = 0.0, m2 = 0.0;
  double worst_in_rms = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    NoiseSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.channels = inputs;
    const MatrixXd w = make_noise(spec, t_end, dt);
    for (Eigen::Index c = 0; c < w.rows(); ++c)
      worst_in_rms = std::max(worst_in_rms, std::abs(rms(VectorXd(w.row(c).transpose())) - 0.1));
    const auto tr = simulate(full, w, dt);
    m1 += rms(tr.signal("z19")) / 20.0;
    m2 += rms(tr.signal("z20")) / 20.0;
  }
  NoiseSpec spec;
  spec.channels = inputs;
  const MatrixXd w = make_noise(spec, 2.0, dt);
  const auto base = simulate(full, w, dt);
  const auto scaled = simulate(full, -3.0 * w, dt);
  const auto sum = simulate(full, w + w.reverse(), dt);
  const auto rev = simulate(full, w.reverse(), dt);
  const double scale = base.values.cwiseAbs().maxCoeff();
  const double lin = std::max((scaled.values + 3.0 * base.values).cwiseAbs().maxCoeff(),
                              (sum.values - base.values - rev.values).cwiseAbs().maxCoeff()) /
                     scale;
  const auto zero = simulate(full, MatrixXd::Zero(w.rows(), w.cols()), dt);
  const double zero_out = zero.values.cwiseAbs().maxCoeff();
  o.note("mean RMS z10 = (" + num(m1, 5) + ", " + num(m2, 5) + "), input RMS gap " + num(worst_in_rms, 3) +
         ", linearity " + num(lin, 3) + ", zero response " + num(zero_out, 3));
  o.require(m1 < 0.06 && m2 < 0.06, "mean RMS not below 0.06");
  o.require(worst_in_rms <= 1e-9, "input RMS not 0.1");
  o.require(lin <= 1e-9, "response not linear");
  o.require(zero_out <= 1e-9, "zero input gives nonzero output");
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto run = [&](const char* name, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::printf("%s  %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };
  std::vector<double> table;
  run("benchmark-radius", benchmark_radius);
  run("abscissa-consistency", abscissa_consistency);
  run("norm-vs-grid-oracle", norm_vs_oracle);
  run("decoupling-equivalence", decoupling_equivalence);
  run("network-norms", [&] { return table_reproduction(table); });
  run("robust-norm-dominance", [&] { return dominance(table); });
  run("topology-formulas", topology_formulas);
  run("rightmost-roots", root_oracle);
  run("gradients", gradient_suites);
  run("flow-invariants", flow_invariants);
  run("synthesis", synthesis);
  run("simulation", simulation);
  std::printf("%d of 12 criteria failed\n", failed);
  return failed ? 1 : 0;
}
