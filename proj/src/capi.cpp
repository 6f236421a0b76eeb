#include "dhinf.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <optional>
#include <set>
#include <string>

#include "dhinf/error.hpp"
#include "dhinf/hinf.hpp"
#include "dhinf/json_io.hpp"
#include "dhinf/network.hpp"
#include "dhinf/roots.hpp"
#include "dhinf/sim.hpp"
#include "dhinf/svset.hpp"
#include "dhinf/synth.hpp"

struct dhinf_system {
  dhinf::UncertainDelaySystem v;
};
struct dhinf_plant {
  dhinf::NetworkedPlant v;
};
struct dhinf_controller {
  dhinf::ControllerParams v;
};
struct dhinf_topology {
  dhinf::Topology v;
};
struct dhinf_trace {
  dhinf::SimTrace v;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows;
};

namespace {

using dhinf::json_io::json;

thread_local std::string last_error;

class NullArgument : public std::exception {
 public:
  explicit NullArgument(const char* name) : msg_(std::string(name) + " is NULL") {}
  const char* what() const noexcept override { return msg_.c_str(); }

 private:
  std::string msg_;
};

template <typename Fn>
dhinf_status guard(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return DHINF_OK;
  } catch (const dhinf::Error& e) {
    last_error = e.what();
    return static_cast<dhinf_status>(static_cast<int>(e.kind()) + 1);
  } catch (const NullArgument& e) {
    last_error = e.what();
    return DHINF_ERR_NULL;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return DHINF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DHINF_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return DHINF_ERR_INTERNAL;
  }
}

template <typename T>
const T& need(const T* p, const char* name) {
  if (!p) throw NullArgument(name);
  return *p;
}

template <typename T>
T** out_ptr(T** p, const char* name) {
  if (!p) throw NullArgument(name);
  *p = nullptr;
  return p;
}

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const json& j, char** out) { *out = dup(j.dump(2)); }

// Non-finite values become null.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json complex_json(dhinf::cd s) { return json::array({s.real(), s.imag()}); }

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json vector_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

// Options object with strict key checking.
class Options {
 public:
  Options(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw dhinf::ParseError(prefix_.empty() ? "options" : prefix_, "expected an object");
  }

  void get(const char* key, double& v) {
    if (const json* x = find(key)) v = dhinf::json_io::number_from_json(*x, name(key));
  }
  void get(const char* key, int& v) {
    if (const json* x = find(key)) v = integer(*x, key);
  }
  void get(const char* key, std::uint64_t& v) {
    if (const json* x = find(key)) {
      if (!x->is_number_unsigned() && !(x->is_number_integer() && x->get<long long>() >= 0))
        throw dhinf::ParseError(name(key), "expected a nonnegative integer");
      v = x->get<std::uint64_t>();
    }
  }
  void get(const char* key, bool& v) {
    if (const json* x = find(key)) {
      if (!x->is_boolean()) throw dhinf::ParseError(name(key), "expected a boolean");
      v = x->get<bool>();
    }
  }
  void get(const char* key, std::vector<double>& v) {
    if (const json* x = find(key)) v = dhinf::json_io::vector_from_json(*x, name(key));
  }
  std::optional<Options> sub(const char* key) {
    if (const json* x = find(key)) return Options(*x, name(key));
    return std::nullopt;
  }
  const json* raw(const char* key) { return find(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw dhinf::ParseError(name(it.key().c_str()), "unknown option");
  }

 private:
  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  int integer(const json& x, const char* key) const {
    if (!x.is_number_integer()) throw dhinf::ParseError(name(key), "expected an integer");
    const long long v = x.get<long long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      throw dhinf::ParseError(name(key), "out of range");
    return static_cast<int>(v);
  }
  std::string name(const char* key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

json parse_options(const char* text) {
  if (!text || !*text) return json::object();
  return dhinf::json_io::parse(text);
}

void read_roots(Options& o, dhinf::RootRequest& r) {
  o.get("count", r.count);
  o.get("disc_degree", r.disc_degree);
  o.get("newton_tol", r.newton_tol);
  o.get("max_newton", r.max_newton);
  o.get("adaptive", r.adaptive);
  o.finish();
}

void read_flow(Options& o, dhinf::FlowConfig& f) {
  o.get("h0", f.h0);
  o.get("h_min", f.h_min);
  o.get("grow", f.grow);
  o.get("h_cap", f.h_cap);
  o.get("rel_tol", f.rel_tol);
  o.get("abs_tol", f.abs_tol);
  o.get("max_iters", f.max_iters);
  o.get("seed", f.seed);
  o.get("threads", f.threads);
  if (const json* s = o.raw("starts")) {
    if (!(s->is_string() && s->get<std::string>() == "auto"))
      throw dhinf::ParseError("flow.starts", "only \"auto\" is supported");
  }
  if (auto r = o.sub("roots")) read_roots(*r, f.roots);
  o.finish();
}

void read_radius(Options& o, dhinf::RadiusConfig& c) {
  o.get("alpha_tol", c.alpha_tol);
  o.get("width_tol", c.width_tol);
  o.get("max_evaluations", c.max_evaluations);
  o.get("eps_guess", c.eps_guess);
  if (auto f = o.sub("flow")) read_flow(*f, c.flow);
}

dhinf::RadiusConfig radius_options(const char* text) {
  const json j = parse_options(text);
  Options o(j, "");
  dhinf::RadiusConfig c;
  read_radius(o, c);
  o.finish();
  c.validate();
  return c;
}

dhinf::FlowConfig flow_options(const char* text) {
  const json j = parse_options(text);
  Options o(j, "");
  dhinf::FlowConfig f;
  read_flow(o, f);
  f.validate();
  return f;
}

dhinf::RootRequest root_options(const char* text) {
  const json j = parse_options(text);
  Options o(j, "");
  dhinf::RootRequest r;
  read_roots(o, r);
  r.validate();
  return r;
}

dhinf::SynthConfig synth_options(const char* text) {
  const json j = parse_options(text);
  Options o(j, "");
  dhinf::SynthConfig c;
  o.get("restarts", c.restarts);
  o.get("seed", c.seed);
  o.get("max_iters", c.max_iters);
  o.get("grad_tol", c.grad_tol);
  o.get("c1", c.c1);
  o.get("c2", c.c2);
  o.get("max_line_search", c.max_line_search);
  o.get("stall_tol", c.stall_tol);
  o.get("stall_iters", c.stall_iters);
  o.get("sampling_radii", c.sampling_radii);
  o.get("max_sampling_iters", c.max_sampling_iters);
  o.get("stab_margin", c.stab_margin);
  o.get("max_stabilize_iters", c.max_stabilize_iters);
  o.get("threads", c.threads);
  if (auto r = o.sub("radius")) {
    read_radius(*r, c.radius);
    r->finish();
  }
  o.finish();
  c.validate();
  return c;
}

json point_json(const dhinf::SpectralPoint& p) {
  return {{"s", complex_json(p.s)}, {"lambda", p.lambda}, {"eps", p.pert.eps}, {"xi", num(p.xi)}};
}

json radius_json(const dhinf::RadiusResult& r) {
  json hist = json::array();
  for (const auto& b : r.bracket_history) hist.push_back({{"eps", num(b.eps)}, {"alpha", num(b.alpha)}, {"newton", b.newton}});
  return {{"radius", num(r.radius)},
          {"alpha", num(r.alpha)},
          {"critical", point_json(r.critical_point)},
          {"evaluations", r.evaluations},
          {"bracket", hist}};
}

json norm_json(const dhinf::NormResult& r) {
  return {{"norm", num(r.norm)}, {"peak_omega", num(r.peak_omega)}, {"peak_lambda", num(r.peak_lambda)},
          {"radius", radius_json(r.radius)}};
}

Eigen::VectorXd param_vector(const double* p, size_t n) {
  if (n > 0 && !p) throw NullArgument("p");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = p[i];
  return v;
}

}  // namespace

extern "C" {

const char* dhinf_last_error(void) { return last_error.c_str(); }

const char* dhinf_status_name(dhinf_status s) {
  switch (s) {
    case DHINF_OK: return "ok";
    case DHINF_ERR_STRUCTURAL: return "structural";
    case DHINF_ERR_PARSE: return "parse";
    case DHINF_ERR_VALIDATION: return "validation";
    case DHINF_ERR_SINGULAR: return "singular";
    case DHINF_ERR_CONVERGENCE: return "convergence";
    case DHINF_ERR_DEGENERATE_ROOT: return "degenerate-root";
    case DHINF_ERR_NORMALIZATION: return "normalization";
    case DHINF_ERR_UNSTABLE: return "unstable";
    case DHINF_ERR_UNBOUNDED_RADIUS: return "unbounded-radius";
    case DHINF_ERR_DERIVATIVE_UNDEFINED: return "derivative-undefined";
    case DHINF_ERR_ARGUMENT: return "argument";
    case DHINF_ERR_ASSUMPTION: return "assumption";
    case DHINF_ERR_NO_STABILIZER: return "no-stabilizer";
    case DHINF_ERR_NULL: return "null-argument";
    case DHINF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dhinf_version(void) { return "1.0.0"; }

void dhinf_string_free(char* s) { delete[] s; }

dhinf_status dhinf_system_from_json(const char* json_text, dhinf_system** out) {
  return guard([&] {
    out_ptr(out, "out");
    need(json_text, "json");
    *out = new dhinf_system{dhinf::load_system(json_text)};
  });
}

dhinf_status dhinf_system_to_json(const dhinf_system* sys, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = dup(dhinf::save_system(need(sys, "sys").v));
  });
}

dhinf_status dhinf_system_fixed_lambda(const dhinf_system* sys, double lambda, dhinf_system** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto& s = need(sys, "sys").v;
    if (!s.interval.contains(lambda)) throw dhinf::ArgumentError("lambda lies outside the uncertainty interval");
    *out = new dhinf_system{dhinf::with_fixed_lambda(s, lambda)};
  });
}

dhinf_status dhinf_system_dims(const dhinf_system* sys, size_t* states, size_t* inputs, size_t* outputs) {
  return guard([&] {
    const auto& s = need(sys, "sys").v;
    if (states) *states = static_cast<size_t>(s.states());
    if (inputs) *inputs = static_cast<size_t>(s.inputs());
    if (outputs) *outputs = static_cast<size_t>(s.outputs());
  });
}

void dhinf_system_free(dhinf_system* sys) { delete sys; }

dhinf_status dhinf_roots(const dhinf_system* sys, double lambda, const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto& s = need(sys, "sys").v;
    s.validate();
    if (!s.interval.contains(lambda)) throw dhinf::ArgumentError("lambda lies outside the uncertainty interval");
    const auto req = root_options(options);
    int degree = req.disc_degree;
    const auto roots = dhinf::rightmost_roots(s, lambda, std::nullopt, req, &degree);
    json r = json::array();
    for (const auto& z : roots) r.push_back(complex_json(z));
    emit({{"lambda", lambda}, {"degree", degree}, {"roots", r}}, out);
  });
}

dhinf_status dhinf_pseudo_abscissa(const dhinf_system* sys, double eps, const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto& s = need(sys, "sys").v;
    const auto res = dhinf::pseudo_spectral_abscissa(s, eps, flow_options(options));
    json its = json::array();
    for (const auto& it : res.iterates)
      its.push_back({{"start", it.start}, {"k", it.k}, {"s", complex_json(it.s)}, {"lambda", it.lambda},
                     {"h", it.h}, {"u_norm", it.u_norm}, {"v_norm", it.v_norm}});
    json conv = json::array();
    for (bool c : res.converged) conv.push_back(c);
    emit({{"eps", eps},
          {"alpha", num(res.alpha)},
          {"optimizer", point_json(res.optimizer)},
          {"best_start", res.best_start},
          {"nonsmooth", res.nonsmooth},
          {"degenerate", res.degenerate},
          {"converged", conv},
          {"iterates", its}},
         out);
  });
}

dhinf_status dhinf_radius(const dhinf_system* sys, const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    emit(radius_json(dhinf::robust_stability_radius(need(sys, "sys").v, radius_options(options))), out);
  });
}

dhinf_status dhinf_hinf_norm(const dhinf_system* sys, const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    emit(norm_json(dhinf::robust_hinf_norm(need(sys, "sys").v, radius_options(options))), out);
  });
}

dhinf_status dhinf_hinf_norm_fixed(const dhinf_system* sys, double lambda, const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto& s = need(sys, "sys").v;
    if (!s.interval.contains(lambda)) throw dhinf::ArgumentError("lambda lies outside the uncertainty interval");
    emit(norm_json(dhinf::hinf_norm_fixed(s, lambda, radius_options(options))), out);
  });
}

dhinf_status dhinf_gain_curve(const dhinf_system* sys, const double* omegas, size_t n, int n_lambda, int threads,
                              char** out) {
  return guard([&] {
    out_ptr(out, "out");
    if (n > 0 && !omegas) throw NullArgument("omegas");
    std::vector<double> w(omegas, omegas + n);
    for (double x : w)
      if (!(x >= 0.0) || !std::isfinite(x)) throw dhinf::ArgumentError("frequencies must be finite and nonnegative");
    const auto curve = dhinf::worst_case_gain_curve(need(sys, "sys").v, w, n_lambda, threads);
    json pts = json::array();
    for (const auto& [om, g] : curve) pts.push_back({{"omega", om}, {"gain", num(g)}});
    emit({{"points", pts}}, out);
  });
}

dhinf_status dhinf_grid_oracle(const dhinf_system* sys, double omega_max, int n_omega, int n_lambda, int threads,
                               char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto r = dhinf::grid_oracle(need(sys, "sys").v, omega_max, n_omega, n_lambda, threads);
    emit({{"value", num(r.value)}, {"omega", r.omega}, {"lambda", r.lambda}, {"skipped", r.skipped}}, out);
  });
}

dhinf_status dhinf_plant_from_json(const char* json_text, dhinf_plant** out) {
  return guard([&] {
    out_ptr(out, "out");
    need(json_text, "json");
    auto p = dhinf::load_plant(json_text);
    p.validate();
    *out = new dhinf_plant{std::move(p)};
  });
}

dhinf_status dhinf_plant_to_json(const dhinf_plant* plant, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = dup(dhinf::save_plant(need(plant, "plant").v));
  });
}

dhinf_status dhinf_cart_pendulum(double M, double m, double k, double l, double g, double tau_u, double tau_nc,
                                 dhinf_plant** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_plant{dhinf::build_cart_pendulum(M, m, k, l, g, tau_u, tau_nc)};
  });
}

void dhinf_plant_free(dhinf_plant* plant) { delete plant; }

dhinf_status dhinf_controller_from_json(const char* json_text, dhinf_controller** out) {
  return guard([&] {
    out_ptr(out, "out");
    need(json_text, "json");
    *out = new dhinf_controller{dhinf::load_controller(json_text)};
  });
}

dhinf_status dhinf_controller_zeros(const dhinf_plant* plant, int n_c, dhinf_controller** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_controller{dhinf::ControllerParams::zeros(need(plant, "plant").v, n_c)};
  });
}

dhinf_status dhinf_controller_to_json(const dhinf_controller* ctrl, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = dup(dhinf::save_controller(need(ctrl, "ctrl").v));
  });
}

dhinf_status dhinf_controller_set_mask(dhinf_controller* ctrl, const char* mask_json) {
  return guard([&] {
    if (!ctrl) throw NullArgument("ctrl");
    need(mask_json, "mask_json");
    json doc = dhinf::json_io::parse(dhinf::save_controller(ctrl->v));
    doc["mask"] = dhinf::json_io::parse(mask_json);
    ctrl->v = dhinf::load_controller(doc.dump());
  });
}

dhinf_status dhinf_controller_params(const dhinf_controller* ctrl, double* p, size_t capacity, size_t* count) {
  return guard([&] {
    const auto v = need(ctrl, "ctrl").v.params();
    if (count) *count = static_cast<size_t>(v.size());
    if (capacity == 0) return;
    if (!p) throw NullArgument("p");
    if (capacity < static_cast<size_t>(v.size())) throw dhinf::ArgumentError("parameter buffer too small");
    for (Eigen::Index i = 0; i < v.size(); ++i) p[i] = v(i);
  });
}

void dhinf_controller_free(dhinf_controller* ctrl) { delete ctrl; }

dhinf_status dhinf_topology_from_json(const char* json_text, dhinf_topology** out) {
  return guard([&] {
    out_ptr(out, "out");
    need(json_text, "json");
    *out = new dhinf_topology{dhinf::load_topology(json_text)};
  });
}

dhinf_status dhinf_topology_ring(int n, dhinf_topology** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_topology{dhinf::adjacency_ring(n)};
  });
}

dhinf_status dhinf_topology_line(int n, dhinf_topology** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_topology{dhinf::adjacency_line(n)};
  });
}

dhinf_status dhinf_topology_to_json(const dhinf_topology* topo, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto& t = need(topo, "topo").v;
    emit({{"matrix", dhinf::json_io::matrix_to_json(t.p)},
          {"eigenvalues", vector_json(t.eigenvalues)},
          {"interval", {t.interval.lo, t.interval.hi}}},
         out);
  });
}

void dhinf_topology_free(dhinf_topology* topo) { delete topo; }

dhinf_status dhinf_decoupled_subsystem(const dhinf_plant* plant, const dhinf_controller* ctrl, dhinf_system** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_system{dhinf::build_decoupled_subsystem(need(plant, "plant").v, need(ctrl, "ctrl").v)};
  });
}

dhinf_status dhinf_closed_loop_full(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                    const dhinf_topology* topo, dhinf_system** out) {
  return guard([&] {
    out_ptr(out, "out");
    *out = new dhinf_system{
        dhinf::build_closed_loop_full(need(plant, "plant").v, need(ctrl, "ctrl").v, need(topo, "topo").v)};
  });
}

dhinf_status dhinf_decoupled_norms(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                   const dhinf_topology* topo, const char* options, int threads, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto r = dhinf::decoupled_norm_exact(need(plant, "plant").v, need(ctrl, "ctrl").v, need(topo, "topo").v,
                                               radius_options(options), threads);
    emit({{"eigenvalues", vector_json(r.eigenvalues)}, {"norms", vector_json(r.norms)}, {"max", num(r.max)}}, out);
  });
}

dhinf_status dhinf_objective(const dhinf_plant* plant, const dhinf_controller* ctrl, const double* p, size_t n,
                             double* value, double* grad, int* smooth) {
  return guard([&] {
    if (!value) throw NullArgument("value");
    const auto& c = need(ctrl, "ctrl").v;
    if (n != static_cast<size_t>(c.n_params())) throw dhinf::ArgumentError("parameter vector length does not match the mask");
    const auto ov = dhinf::objective_with_gradient(need(plant, "plant").v, c, param_vector(p, n));
    *value = ov.value;
    if (smooth) *smooth = ov.smooth ? 1 : 0;
    if (grad && std::isfinite(ov.value))
      for (size_t i = 0; i < n; ++i) grad[i] = ov.grad(static_cast<Eigen::Index>(i));
  });
}

dhinf_status dhinf_stabilize(const dhinf_plant* plant, const dhinf_controller* ctrl, const double* p0, size_t n,
                             const char* options, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    const auto r = dhinf::stabilize(need(plant, "plant").v, need(ctrl, "ctrl").v, param_vector(p0, n),
                                    synth_options(options));
    emit({{"p", vector_json(r.p)}, {"abscissa", r.abscissa}, {"trace", vector_json(r.trace)}, {"unchanged", r.unchanged}},
         out);
  });
}

dhinf_status dhinf_synthesize(const dhinf_plant* plant, const dhinf_controller* ctrl, const char* options,
                              dhinf_progress_fn progress, void* user, char** out) {
  return guard([&] {
    out_ptr(out, "out");
    auto cfg = synth_options(options);
    if (progress)
      cfg.progress = [progress, user](int r, const char* phase, int k, double v) { progress(r, phase, k, v, user); };
    const auto res = dhinf::synthesize(need(plant, "plant").v, need(ctrl, "ctrl").v, cfg);
    json restarts = json::array();
    for (const auto& r : res.restarts)
      restarts.push_back({{"p", vector_json(r.p)},
                          {"objective", num(r.objective)},
                          {"trace", vector_json(r.trace)},
                          {"stabilize_trace", vector_json(r.stabilize_trace)},
                          {"bfgs_iters", r.bfgs_iters},
                          {"sampling_iters", r.sampling_iters},
                          {"stationarity", num(r.stationarity)},
                          {"failed", r.failed}});
    emit({{"objective", num(res.objective)},
          {"stationarity", num(res.stationarity)},
          {"best_restart", res.best_restart},
          {"p_star", vector_json(res.p_star)},
          {"controller", json::parse(dhinf::save_controller(res.controller))},
          {"restarts", restarts}},
         out);
  });
}

dhinf_status dhinf_grid_size(double t_end, double dt, size_t* out) {
  return guard([&] {
    if (!out) throw NullArgument("out");
    *out = static_cast<size_t>(dhinf::grid_size(t_end, dt));
  });
}

dhinf_status dhinf_make_noise(double cutoff, double rms, uint64_t seed, int channels, double t_end, double dt,
                              double* out, size_t len) {
  return guard([&] {
    dhinf::NoiseSpec spec;
    spec.cutoff = cutoff;
    spec.rms = rms;
    spec.seed = seed;
    spec.channels = channels;
    const auto w = dhinf::make_noise(spec, t_end, dt);
    if (len < static_cast<size_t>(w.size())) throw dhinf::ArgumentError("noise buffer too small");
    if (w.size() > 0 && !out) throw NullArgument("out");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, w.rows(), w.cols()) = w;
  });
}

dhinf_status dhinf_simulate(const dhinf_system* sys, const double* w, size_t rows, size_t cols, double dt,
                            dhinf_trace** out) {
  return guard([&] {
    out_ptr(out, "out");
    if (rows * cols > 0 && !w) throw NullArgument("w");
    const Eigen::MatrixXd input = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    auto tr = new dhinf_trace{dhinf::simulate(need(sys, "sys").v, input, dt), {}};
    tr->rows = tr->v.values;
    *out = tr;
  });
}

dhinf_status dhinf_trace_shape(const dhinf_trace* tr, size_t* rows, size_t* cols) {
  return guard([&] {
    const auto& t = need(tr, "trace");
    if (rows) *rows = static_cast<size_t>(t.rows.rows());
    if (cols) *cols = static_cast<size_t>(t.rows.cols());
  });
}

const char* dhinf_trace_name(const dhinf_trace* tr, size_t col) {
  if (!tr || col >= tr->v.names.size()) return nullptr;
  return tr->v.names[col].c_str();
}

const double* dhinf_trace_times(const dhinf_trace* tr) { return tr ? tr->v.times.data() : nullptr; }

const double* dhinf_trace_data(const dhinf_trace* tr) { return tr ? tr->rows.data() : nullptr; }

void dhinf_trace_free(dhinf_trace* tr) { delete tr; }

dhinf_status dhinf_rms(const double* v, size_t n, double* out) {
  return guard([&] {
    if (!out) throw NullArgument("out");
    if (n > 0 && !v) throw NullArgument("v");
    *out = dhinf::rms(Eigen::Map<const Eigen::VectorXd>(v, static_cast<Eigen::Index>(n)));
  });
}

}  // extern "C"
