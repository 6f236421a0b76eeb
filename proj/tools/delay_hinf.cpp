#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dhinf.h"

#ifndef DHINF_DEFAULT_FIXTURES
#define DHINF_DEFAULT_FIXTURES "fixtures"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes
constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kUsage = 2;

struct CliError {
  int code;
  std::string message;
};

int exit_code(dhinf_status s) {
  switch (s) {
    case DHINF_ERR_PARSE:
    case DHINF_ERR_STRUCTURAL:
    case DHINF_ERR_VALIDATION:
    case DHINF_ERR_ARGUMENT:
    case DHINF_ERR_NULL:
      return kUsage;
    default:
      return kDomain;
  }
}

void check(dhinf_status s) {
  if (s != DHINF_OK) throw CliError{exit_code(s), std::string(dhinf_status_name(s)) + ": " + dhinf_last_error()};
}

struct Deleter {
  void operator()(dhinf_system* p) const { dhinf_system_free(p); }
  void operator()(dhinf_plant* p) const { dhinf_plant_free(p); }
  void operator()(dhinf_controller* p) const { dhinf_controller_free(p); }
  void operator()(dhinf_topology* p) const { dhinf_topology_free(p); }
  void operator()(dhinf_trace* p) const { dhinf_trace_free(p); }
};
using System = std::unique_ptr<dhinf_system, Deleter>;
using Plant = std::unique_ptr<dhinf_plant, Deleter>;
using Controller = std::unique_ptr<dhinf_controller, Deleter>;
using Topology = std::unique_ptr<dhinf_topology, Deleter>;
using Trace = std::unique_ptr<dhinf_trace, Deleter>;

// Takes ownership of a string returned by the library.
json take_json(char* s) {
  std::unique_ptr<char, void (*)(char*)> guard(s, dhinf_string_free);
  return json::parse(s);
}

std::string take_string(char* s) {
  std::unique_ptr<char, void (*)(char*)> guard(s, dhinf_string_free);
  return s;
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt6(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

double as_double(const json& j) { return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kUsage, "cannot read '" + path + "'"};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Inline JSON, or @path to read it from a file.
std::string json_arg(const std::string& v) { return !v.empty() && v[0] == '@' ? read_file(v.substr(1)) : v; }

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }

  void row(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(fmt(x));
    row_strings(s);
  }
  void row_strings(const std::vector<std::string>& v) {
    if (v.size() != cols_) throw std::logic_error("CSV row width");
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(v[i]);
    }
    out_ << "\r\n";
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  size_t cols_;
  std::ostringstream out_;
};

struct Common {
  int threads = -1;
  std::string out;
  std::string fixtures;
};

// Files of one command. Without --out everything goes to stdout.
class Run {
 public:
  Run(std::string command, const Common& common, std::vector<std::string> argv)
      : command_(std::move(command)), common_(common), argv_(std::move(argv)),
        start_(std::chrono::steady_clock::now()) {}

  int threads() const {
    if (common_.threads >= 0) return common_.threads;
    if (const char* env = std::getenv("DELAY_HINF_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end == env || *end || v < 0) throw CliError{kUsage, "DELAY_HINF_THREADS must be a nonnegative integer"};
      return static_cast<int>(v);
    }
    return 0;
  }

  std::string fixture(const std::string& name) const {
    const std::string dir = common_.fixtures.empty() ? DHINF_FIXTURE_DEFAULT() : common_.fixtures;
    return (fs::path(dir) / name).string();
  }

  std::string input(const std::string& path) {
    inputs_.push_back(path);
    return read_file(path);
  }
  void flag(const std::string& k, const json& v) { flags_[k] = v; }
  void seed(std::uint64_t s) { seed_ = s; }

  void emit(const std::string& name, const std::string& content) {
    if (common_.out.empty()) {
      std::cout << content;
      if (!content.empty() && content.back() != '\n') std::cout << '\n';
      return;
    }
    pending_.emplace_back(name, content);
  }

  // Human-readable lines; always on stdout.
  void say(const std::string& line) const { std::cout << line << '\n'; }

  void finish() {
    if (common_.out.empty()) return;
    const fs::path dir(common_.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw CliError{kUsage, "cannot create output directory '" + dir.string() + "'"};
    json outputs = json::array();
    for (const auto& [name, content] : pending_) {
      write_atomic(dir / name, content);
      outputs.push_back((dir / name).string());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json manifest = {{"command", command_},
                     {"argv", argv_},
                     {"inputs", inputs_},
                     {"flags", flags_},
                     {"seed", seed_ ? json(*seed_) : json(nullptr)},
                     {"version", dhinf_version()},
                     {"threads", threads()},
                     {"wall_time_s", wall},
                     {"outputs", outputs}};
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  static std::string DHINF_FIXTURE_DEFAULT() { return DHINF_DEFAULT_FIXTURES; }

  static void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw CliError{kDomain, "cannot write '" + tmp.string() + "'"};
      f << content;
      f.flush();
      if (!f) throw CliError{kDomain, "write failed for '" + tmp.string() + "'"};
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw CliError{kDomain, "cannot rename '" + tmp.string() + "': " + ec.message()};
  }

  std::string command_;
  const Common& common_;
  std::vector<std::string> argv_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> inputs_;
  json flags_ = json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::pair<std::string, std::string>> pending_;
};

System load_system(Run& run, const std::string& path) {
  dhinf_system* s = nullptr;
  check(dhinf_system_from_json(run.input(path).c_str(), &s));
  return System(s);
}

Plant load_plant(Run& run, const std::string& path) {
  dhinf_plant* p = nullptr;
  check(dhinf_plant_from_json(run.input(path).c_str(), &p));
  return Plant(p);
}

Controller load_controller(Run& run, const std::string& path) {
  dhinf_controller* c = nullptr;
  check(dhinf_controller_from_json(run.input(path).c_str(), &c));
  return Controller(c);
}

Topology make_topology(Run& run, const std::string& kind, int n) {
  dhinf_topology* t = nullptr;
  if (kind == "line")
    check(dhinf_topology_line(n, &t));
  else if (kind == "ring")
    check(dhinf_topology_ring(n, &t));
  else
    check(dhinf_topology_from_json(run.input(kind).c_str(), &t));
  return Topology(t);
}

json system_json(const dhinf_system* s) {
  char* out = nullptr;
  check(dhinf_system_to_json(s, &out));
  return take_json(out);
}

// Solver options: user JSON with the thread count filled in where it applies.
std::string radius_options(const std::string& user, int threads) {
  json o = user.empty() ? json::object() : json::parse(json_arg(user), nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw CliError{kUsage, "--solver-options must be a JSON object"};
  if (!o.contains("flow")) o["flow"] = json::object();
  if (o["flow"].is_object() && !o["flow"].contains("threads")) o["flow"]["threads"] = threads;
  return o.dump();
}

std::string flow_options(const std::string& user, int threads) {
  json o = user.empty() ? json::object() : json::parse(json_arg(user), nullptr, false);
  if (o.is_discarded() || !o.is_object()) throw CliError{kUsage, "--solver-options must be a JSON object"};
  if (!o.contains("threads")) o["threads"] = threads;
  return o.dump();
}

std::vector<std::string> args_of(int argc, char** argv) { return std::vector<std::string>(argv, argv + argc); }

// Comparison table for reproduce targets.
class Checks {
 public:
  void add(const std::string& quantity, double value, double target, double tol) {
    const bool pass = std::isfinite(value) && std::abs(value - target) <= tol;
    rows_.push_back({quantity, value, target, tol, pass, "abs"});
  }
  void below(const std::string& quantity, double value, double bound) {
    rows_.push_back({quantity, value, bound, 0.0, std::isfinite(value) && value < bound, "below"});
  }
  void at_most(const std::string& quantity, double value, double bound) {
    rows_.push_back({quantity, value, bound, 0.0, std::isfinite(value) && value <= bound, "at_most"});
  }
  bool passed() const {
    for (const auto& r : rows_)
      if (!r.pass) return false;
    return true;
  }
  std::string csv() const {
    Csv c({"quantity", "value", "target", "tolerance", "kind", "pass"});
    for (const auto& r : rows_) c.row_strings({r.quantity, fmt(r.value), fmt(r.target), fmt(r.tol), r.kind, r.pass ? "1" : "0"});
    return c.str();
  }
  void print(const Run& run) const {
    for (const auto& r : rows_) {
      std::string line = (r.pass ? "PASS  " : "FAIL  ") + r.quantity + "  " + fmt6(r.value);
      if (r.kind == "abs")
        line += "  target " + fmt6(r.target) + " +/- " + fmt(r.tol) + "  diff " + fmt6(r.value - r.target);
      else
        line += (r.kind == "below" ? "  < " : "  <= ") + fmt6(r.target);
      run.say(line);
    }
  }

 private:
  struct Row {
    std::string quantity;
    double value, target, tol;
    bool pass;
    std::string kind;
  };
  std::vector<Row> rows_;
};

// ---- subcommands ----

struct RootsArgs {
  std::string system;
  std::optional<double> lambda;
  int count = 5;
  int degree = 20;
};

void cmd_roots(Run& run, const RootsArgs& a) {
  const System sys = load_system(run, a.system);
  const json sj = system_json(sys.get());
  const double lambda = a.lambda ? *a.lambda : 0.5 * (sj["interval"][0].get<double>() + sj["interval"][1].get<double>());
  run.flag("lambda", lambda);
  run.flag("count", a.count);
  run.flag("degree", a.degree);
  const json opts = {{"count", a.count}, {"disc_degree", a.degree}};
  char* out = nullptr;
  check(dhinf_roots(sys.get(), lambda, opts.dump().c_str(), &out));
  const json r = take_json(out);
  Csv csv({"re", "im"});
  for (const auto& z : r["roots"]) csv.row({z[0].get<double>(), z[1].get<double>()});
  run.emit("roots.csv", csv.str());
}

struct SvsetArgs {
  std::string system;
  double eps = 0.0;
  std::string solver;
};

void cmd_svset(Run& run, const SvsetArgs& a) {
  const System sys = load_system(run, a.system);
  run.flag("eps", a.eps);
  if (!a.solver.empty()) run.flag("solver-options", a.solver);
  char* out = nullptr;
  check(dhinf_pseudo_abscissa(sys.get(), a.eps, flow_options(a.solver, run.threads()).c_str(), &out));
  const json r = take_json(out);
  Csv csv({"start", "k", "re_s", "im_s", "lambda", "h"});
  for (const auto& it : r["iterates"])
    csv.row({it["start"].get<double>(), it["k"].get<double>(), it["s"][0].get<double>(), it["s"][1].get<double>(),
             it["lambda"].get<double>(), it["h"].get<double>()});
  run.emit("iterates.csv", csv.str());
  const json fin = {{"alpha", r["alpha"]},
                    {"omega", r["optimizer"]["s"][1]},
                    {"lambda", r["optimizer"]["lambda"]},
                    {"nonsmooth", r["nonsmooth"]}};
  run.emit("svset.json", fin.dump(2) + "\n");
}

struct SystemArgs {
  std::string system;
  std::optional<double> lambda;
  std::string solver;
};

void cmd_radius(Run& run, const SystemArgs& a) {
  const System sys = load_system(run, a.system);
  if (!a.solver.empty()) run.flag("solver-options", a.solver);
  char* out = nullptr;
  check(dhinf_radius(sys.get(), radius_options(a.solver, run.threads()).c_str(), &out));
  const json r = take_json(out);
  const json res = {{"radius", r["radius"]},
                    {"omega", r["critical"]["s"][1]},
                    {"lambda", r["critical"]["lambda"]},
                    {"alpha", r["alpha"]},
                    {"evaluations", r["evaluations"]}};
  run.emit("radius.json", res.dump(2) + "\n");
}

void cmd_hinf(Run& run, const SystemArgs& a) {
  const System sys = load_system(run, a.system);
  if (!a.solver.empty()) run.flag("solver-options", a.solver);
  const std::string opts = radius_options(a.solver, run.threads());
  char* out = nullptr;
  if (a.lambda) {
    run.flag("lambda", *a.lambda);
    check(dhinf_hinf_norm_fixed(sys.get(), *a.lambda, opts.c_str(), &out));
  } else {
    check(dhinf_hinf_norm(sys.get(), opts.c_str(), &out));
  }
  const json r = take_json(out);
  const json res = {{"norm", r["norm"]}, {"omega", r["peak_omega"]}, {"lambda", r["peak_lambda"]}};
  run.emit("hinf.json", res.dump(2) + "\n");
}

struct GainArgs {
  std::string system;
  double omega_min = 0.1;
  double omega_max = 100.0;
  int points = 301;
  int n_lambda = 21;
  bool linear = false;
};

std::vector<double> frequency_grid(double lo, double hi, int n, bool linear) {
  if (n < 2) throw CliError{kUsage, "--points must be at least 2"};
  if (!(hi > lo) || lo < 0.0 || (!linear && lo <= 0.0)) throw CliError{kUsage, "invalid frequency range"};
  std::vector<double> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    w[static_cast<size_t>(i)] = linear ? lo + t * (hi - lo) : lo * std::pow(hi / lo, t);
  }
  return w;
}

json gain_curve(const dhinf_system* sys, const std::vector<double>& w, int n_lambda, int threads) {
  char* out = nullptr;
  check(dhinf_gain_curve(sys, w.data(), w.size(), n_lambda, threads, &out));
  return take_json(out);
}

void cmd_gain_curve(Run& run, const GainArgs& a) {
  const System sys = load_system(run, a.system);
  run.flag("omega-min", a.omega_min);
  run.flag("omega-max", a.omega_max);
  run.flag("points", a.points);
  run.flag("n-lambda", a.n_lambda);
  run.flag("linear", a.linear);
  const auto w = frequency_grid(a.omega_min, a.omega_max, a.points, a.linear);
  const json r = gain_curve(sys.get(), w, a.n_lambda, run.threads());
  Csv csv({"omega", "gain"});
  for (const auto& p : r["points"]) csv.row({p["omega"].get<double>(), as_double(p["gain"])});
  run.emit("gain_curve.csv", csv.str());
}

struct DecoupleArgs {
  std::string plant;
  std::string controller;
  std::string topology = "line";
  int n = 3;
  std::string solver;
};

json decoupled_norms(Run& run, const dhinf_plant* plant, const dhinf_controller* ctrl, const dhinf_topology* topo,
                     const std::string& solver) {
  char* out = nullptr;
  check(dhinf_decoupled_norms(plant, ctrl, topo, radius_options(solver, 1).c_str(), run.threads(), &out));
  return take_json(out);
}

void cmd_decouple(Run& run, const DecoupleArgs& a) {
  const Plant plant = load_plant(run, a.plant);
  const Controller ctrl = load_controller(run, a.controller);
  const Topology topo = make_topology(run, a.topology, a.n);
  run.flag("topology", a.topology);
  run.flag("N", a.n);
  if (!a.solver.empty()) run.flag("solver-options", a.solver);
  const json r = decoupled_norms(run, plant.get(), ctrl.get(), topo.get(), a.solver);
  Csv csv({"eigenvalue", "norm"});
  for (size_t i = 0; i < r["eigenvalues"].size(); ++i)
    csv.row({r["eigenvalues"][i].get<double>(), as_double(r["norms"][i])});
  run.emit("norms.csv", csv.str());
  run.emit("decouple.json", json({{"max", r["max"]}, {"eigenvalues", r["eigenvalues"]}, {"norms", r["norms"]}}).dump(2) + "\n");
}

struct SynthArgs {
  std::string plant;
  std::string templ;
  std::string mask;
  int nc = 2;
  std::uint64_t seed = 0;
  int restarts = 5;
  int max_iters = 1000;
  int max_sampling_iters = 20;
  bool verbose = false;
};

void progress_cb(int restart, const char* phase, int step, double value, void*) {
  std::fprintf(stderr, "restart %d %s %d %.12g\n", restart, phase, step, value);
}

void cmd_synth(Run& run, const SynthArgs& a) {
  const Plant plant = load_plant(run, a.plant);
  Controller ctrl;
  if (!a.templ.empty()) {
    ctrl = load_controller(run, a.templ);
  } else {
    dhinf_controller* c = nullptr;
    check(dhinf_controller_zeros(plant.get(), a.nc, &c));
    ctrl.reset(c);
  }
  if (!a.mask.empty()) check(dhinf_controller_set_mask(ctrl.get(), run.input(a.mask).c_str()));
  run.flag("nc", a.nc);
  run.flag("restarts", a.restarts);
  run.flag("max-iters", a.max_iters);
  run.flag("max-sampling-iters", a.max_sampling_iters);
  run.seed(a.seed);
  const json opts = {{"restarts", a.restarts},
                     {"seed", a.seed},
                     {"max_iters", a.max_iters},
                     {"max_sampling_iters", a.max_sampling_iters},
                     {"threads", run.threads()}};
  char* out = nullptr;
  check(dhinf_synthesize(plant.get(), ctrl.get(), opts.dump().c_str(), a.verbose ? progress_cb : nullptr, nullptr, &out));
  const json r = take_json(out);
  Csv trace({"restart", "phase", "step", "value"});
  for (size_t i = 0; i < r["restarts"].size(); ++i) {
    const auto& rs = r["restarts"][i];
    for (size_t k = 0; k < rs["stabilize_trace"].size(); ++k)
      trace.row_strings({std::to_string(i), "stabilize", std::to_string(k), fmt(as_double(rs["stabilize_trace"][k]))});
    for (size_t k = 0; k < rs["trace"].size(); ++k)
      trace.row_strings({std::to_string(i), "optimize", std::to_string(k), fmt(as_double(rs["trace"][k]))});
  }
  json summary = {{"objective", r["objective"]},
                  {"stationarity", r["stationarity"]},
                  {"best_restart", r["best_restart"]},
                  {"p_star", r["p_star"]},
                  {"restarts", json::array()}};
  for (const auto& rs : r["restarts"])
    summary["restarts"].push_back({{"objective", rs["objective"]},
                                   {"bfgs_iters", rs["bfgs_iters"]},
                                   {"sampling_iters", rs["sampling_iters"]},
                                   {"stationarity", rs["stationarity"]},
                                   {"failed", rs["failed"]}});
  run.emit("controller.json", r["controller"].dump(2) + "\n");
  run.emit("synth.json", summary.dump(2) + "\n");
  run.emit("trace.csv", trace.str());
}

struct SimArgs {
  std::string plant;
  std::string controller;
  std::string topology = "line";
  int n = 20;
  std::uint64_t seed = 0;
  double t_end = 10.0;
  double dt = 1e-3;
  double rms = 0.1;
  double cutoff = 6.0 * std::numbers::pi;
  std::string signals = "zw";
};

struct SimResult {
  Trace trace;
  size_t rows = 0, cols = 0;
};

SimResult simulate(const dhinf_plant* plant, const dhinf_controller* ctrl, const dhinf_topology* topo,
                   const SimArgs& a) {
  dhinf_system* s = nullptr;
  check(dhinf_closed_loop_full(plant, ctrl, topo, &s));
  const System sys(s);
  size_t inputs = 0;
  check(dhinf_system_dims(sys.get(), nullptr, &inputs, nullptr));
  size_t k = 0;
  check(dhinf_grid_size(a.t_end, a.dt, &k));
  std::vector<double> w(inputs * k);
  check(dhinf_make_noise(a.cutoff, a.rms, a.seed, static_cast<int>(inputs), a.t_end, a.dt, w.data(), w.size()));
  dhinf_trace* t = nullptr;
  check(dhinf_simulate(sys.get(), w.data(), inputs, k, a.dt, &t));
  SimResult r{Trace(t)};
  check(dhinf_trace_shape(r.trace.get(), &r.rows, &r.cols));
  return r;
}

double column_rms(const SimResult& r, size_t col) {
  std::vector<double> v(r.rows);
  const double* d = dhinf_trace_data(r.trace.get());
  for (size_t i = 0; i < r.rows; ++i) v[i] = d[i * r.cols + col];
  double out = 0.0;
  check(dhinf_rms(v.data(), v.size(), &out));
  return out;
}

size_t column_of(const SimResult& r, const std::string& name) {
  for (size_t c = 0; c < r.cols; ++c)
    if (name == dhinf_trace_name(r.trace.get(), c)) return c;
  throw CliError{kDomain, "no signal '" + name + "'"};
}

void cmd_simulate(Run& run, const SimArgs& a) {
  if (a.signals != "z" && a.signals != "zw" && a.signals != "all")
    throw CliError{kUsage, "--signals must be one of z, zw, all"};
  const Plant plant = load_plant(run, a.plant);
  const Controller ctrl = load_controller(run, a.controller);
  const Topology topo = make_topology(run, a.topology, a.n);
  run.flag("topology", a.topology);
  run.flag("N", a.n);
  run.flag("T", a.t_end);
  run.flag("dt", a.dt);
  run.flag("rms", a.rms);
  run.flag("cutoff", a.cutoff);
  run.flag("signals", a.signals);
  run.seed(a.seed);
  const SimResult r = simulate(plant.get(), ctrl.get(), topo.get(), a);
  std::vector<size_t> cols;
  std::vector<std::string> header{"t"};
  for (size_t c = 0; c < r.cols; ++c) {
    const std::string name = dhinf_trace_name(r.trace.get(), c);
    const char kind = name[0];
    if (a.signals == "all" || kind == 'z' || (a.signals == "zw" && kind == 'w')) {
      cols.push_back(c);
      header.push_back(name);
    }
  }
  Csv csv(header);
  const double* times = dhinf_trace_times(r.trace.get());
  const double* data = dhinf_trace_data(r.trace.get());
  std::vector<double> row(cols.size() + 1);
  for (size_t i = 0; i < r.rows; ++i) {
    row[0] = times[i];
    for (size_t j = 0; j < cols.size(); ++j) row[j + 1] = data[i * r.cols + cols[j]];
    csv.row(row);
  }
  json rms = json::object();
  for (size_t c : cols) rms[dhinf_trace_name(r.trace.get(), c)] = column_rms(r, c);
  run.emit("trace.csv", csv.str());
  run.emit("rms.json", json({{"rms", rms}}).dump(2) + "\n");
}

struct ExampleArgs {
  std::string name;
  double M = 1.0, m = 0.05, k = 1.0, l = 1.0, g = 9.8, tau_u = 0.1, tau_nc = 0.2;
};

void cmd_example(Run& run, const ExampleArgs& a) {
  if (a.name == "cart-pendulum") {
    dhinf_plant* p = nullptr;
    check(dhinf_cart_pendulum(a.M, a.m, a.k, a.l, a.g, a.tau_u, a.tau_nc, &p));
    const Plant plant(p);
    for (const auto& [k, v] : std::map<std::string, double>{
             {"M", a.M}, {"m", a.m}, {"k", a.k}, {"l", a.l}, {"g", a.g}, {"tau-u", a.tau_u}, {"tau-nc", a.tau_nc}})
      run.flag(k, v);
    char* out = nullptr;
    check(dhinf_plant_to_json(plant.get(), &out));
    run.emit("plant.json", take_string(out) + "\n");
  } else if (a.name == "controller") {
    run.emit("controller.json", run.input(run.fixture("cart_pendulum_controller.json")));
  } else if (a.name == "benchmark") {
    run.emit("benchmark.json", run.input(run.fixture("benchmark.json")));
  } else {
    throw CliError{kUsage, "unknown example '" + a.name + "'"};
  }
}

// ---- reproduce ----

constexpr double kCartNorm = 0.512249;

Plant shipped_plant(Run& run) { return load_plant(run, run.fixture("cart_pendulum_plant.json")); }
Controller shipped_controller(Run& run) { return load_controller(run, run.fixture("cart_pendulum_controller.json")); }

bool reproduce_benchmark(Run& run, Checks& checks) {
  const System sys = load_system(run, run.fixture("benchmark.json"));
  char* out = nullptr;
  check(dhinf_radius(sys.get(), radius_options("", run.threads()).c_str(), &out));
  const json r = take_json(out);
  run.emit("radius.json", r.dump(2) + "\n");
  checks.add("radius", as_double(r["radius"]), 0.22491, 1e-4);
  checks.at_most("abs_critical_omega", std::abs(r["critical"]["s"][1].get<double>()), 1e-3);
  return checks.passed();
}

bool reproduce_network_norms(Run& run, Checks& checks) {
  const Plant plant = shipped_plant(run);
  const Controller ctrl = shipped_controller(run);
  const std::vector<std::pair<int, double>> rows{{3, 0.512228}, {5, 0.512239}, {10, 0.512246}, {15, 0.512247}};
  Csv csv({"N", "norm", "seconds"});
  run.say("   N      norm   seconds");
  for (const auto& [n, target] : rows) {
    const Topology topo = make_topology(run, "line", n);
    const auto t0 = std::chrono::steady_clock::now();
    const json r = decoupled_norms(run, plant.get(), ctrl.get(), topo.get(), "");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double v = as_double(r["max"]);
    csv.row({static_cast<double>(n), v, secs});
    char line[96];
    std::snprintf(line, sizeof line, "%4d  %s  %8.2f", n, fmt6(v).c_str(), secs);
    run.say(line);
    checks.add("norm_N" + std::to_string(n), v, target, 5e-3);
    checks.below("seconds_N" + std::to_string(n), secs, 60.0);
  }
  run.emit("network_norms.csv", csv.str());
  return checks.passed();
}

bool reproduce_gaincurve(Run& run, Checks& checks) {
  const Plant plant = shipped_plant(run);
  const Controller ctrl = shipped_controller(run);
  dhinf_system* s = nullptr;
  check(dhinf_decoupled_subsystem(plant.get(), ctrl.get(), &s));
  const System sys(s);
  auto w = frequency_grid(0.1, 100.0, 301, false);
  w.insert(w.begin(), 0.0);
  const json r = gain_curve(sys.get(), w, 21, run.threads());
  Csv csv({"omega", "gain"});
  double peak = 0.0;
  for (const auto& p : r["points"]) {
    csv.row({p["omega"].get<double>(), as_double(p["gain"])});
    if (p["omega"].get<double>() >= 0.1) peak = std::max(peak, as_double(p["gain"]));
  }
  double low = std::numeric_limits<double>::infinity();
  for (const auto& p : r["points"])
    if (p["omega"].get<double>() <= 10.0) low = std::min(low, as_double(p["gain"]));
  run.emit("gain_curve.csv", csv.str());
  checks.add("curve_max", peak, kCartNorm, 5e-3);
  checks.at_most("flatness_gap_0_10", 1.0 - low / peak, 0.1);
  return checks.passed();
}

bool reproduce_sim20(Run& run, Checks& checks, int seeds) {
  const Plant plant = shipped_plant(run);
  const Controller ctrl = shipped_controller(run);
  const Topology topo = make_topology(run, "line", 20);
  SimArgs a;
  Csv csv({"seed", "z10_1", "z10_2"});
  double m1 = 0.0, m2 = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    a.seed = static_cast<std::uint64_t>(seed);
    const SimResult r = simulate(plant.get(), ctrl.get(), topo.get(), a);
    const double r1 = column_rms(r, column_of(r, "z19"));
    const double r2 = column_rms(r, column_of(r, "z20"));
    csv.row({static_cast<double>(seed), r1, r2});
    m1 += r1 / seeds;
    m2 += r2 / seeds;
  }
  run.emit("sim20_rms.csv", csv.str());
  checks.below("mean_rms_z10_1", m1, 0.06);
  checks.below("mean_rms_z10_2", m2, 0.06);
  return checks.passed();
}

struct ReproduceArgs {
  std::string target;
  int seeds = 20;
};

bool cmd_reproduce(Run& run, const ReproduceArgs& a) {
  Checks checks;
  run.flag("target", a.target);
  bool ok = false;
  if (a.target == "benchmark") {
    ok = reproduce_benchmark(run, checks);
  } else if (a.target == "network-norms") {
    ok = reproduce_network_norms(run, checks);
  } else if (a.target == "gaincurve") {
    ok = reproduce_gaincurve(run, checks);
  } else if (a.target == "sim20") {
    run.flag("seeds", a.seeds);
    ok = reproduce_sim20(run, checks, a.seeds);
  } else {
    throw CliError{kUsage, "unknown target '" + a.target + "'"};
  }
  checks.print(run);
  run.emit("comparison.csv", checks.csv());
  return ok;
}

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--threads", common.threads,
                  "Worker threads (0: all cores). Overrides DELAY_HINF_THREADS")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", common.out, "Write results and manifest.json into this directory");
  sub->add_option("--fixtures", common.fixtures, "Directory with the shipped fixture files");
}

void add_solver(CLI::App* sub, std::string& solver) {
  sub->add_option("--solver-options", solver, "Solver settings as a JSON object, or @file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust H-infinity norms of uncertain delay systems and decentralized controller synthesis",
               "delay-hinf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dhinf_version()));
  Common common;

  RootsArgs roots;
  auto* s_roots = app.add_subcommand("roots", "Rightmost characteristic roots as CSV re,im");
  s_roots->add_option("system", roots.system, "System JSON file")->required();
  s_roots->add_option("--lambda", roots.lambda, "Uncertain parameter value (default: interval midpoint)");
  s_roots->add_option("--count", roots.count, "Number of roots")->capture_default_str();
  s_roots->add_option("--degree", roots.degree, "Initial collocation degree")->capture_default_str();
  add_common(s_roots, common);

  SvsetArgs svset;
  auto* s_svset = app.add_subcommand("svset", "Pseudo-spectral abscissa with the iterate trace");
  s_svset->add_option("system", svset.system, "System JSON file")->required();
  s_svset->add_option("--eps", svset.eps, "Perturbation level")->required();
  add_solver(s_svset, svset.solver);
  add_common(s_svset, common);

  SystemArgs radius;
  auto* s_radius = app.add_subcommand("radius", "Robust stability radius");
  s_radius->add_option("system", radius.system, "System JSON file")->required();
  add_solver(s_radius, radius.solver);
  add_common(s_radius, common);

  SystemArgs hinf;
  auto* s_hinf = app.add_subcommand("hinf", "Robust H-infinity norm, or the norm at a fixed lambda");
  s_hinf->add_option("system", hinf.system, "System JSON file")->required();
  s_hinf->add_option("--lambda", hinf.lambda, "Fix the uncertain parameter");
  add_solver(s_hinf, hinf.solver);
  add_common(s_hinf, common);

  GainArgs gain;
  auto* s_gain = app.add_subcommand("gain-curve", "Worst-case gain over lambda as CSV omega,gain");
  s_gain->add_option("system", gain.system, "System JSON file")->required();
  s_gain->add_option("--omega-min", gain.omega_min, "Lowest frequency")->capture_default_str();
  s_gain->add_option("--omega-max", gain.omega_max, "Highest frequency")->capture_default_str();
  s_gain->add_option("--points", gain.points, "Number of frequencies")->capture_default_str();
  s_gain->add_option("--n-lambda", gain.n_lambda, "Lambda grid points before refinement")->capture_default_str();
  s_gain->add_flag("--linear", gain.linear, "Linear instead of logarithmic spacing");
  add_common(s_gain, common);

  DecoupleArgs dec;
  auto* s_dec = app.add_subcommand("decouple", "Network norm as the maximum over the adjacency eigenvalues");
  s_dec->add_option("plant", dec.plant, "Plant JSON file")->required();
  s_dec->add_option("controller", dec.controller, "Controller JSON file")->required();
  s_dec->add_option("--topology", dec.topology, "line, ring, or a topology JSON file")->capture_default_str();
  s_dec->add_option("--N", dec.n, "Number of subsystems for line and ring")->capture_default_str();
  add_solver(s_dec, dec.solver);
  add_common(s_dec, common);

  SynthArgs syn;
  auto* s_syn = app.add_subcommand("synth", "Controller synthesis by minimizing the robust norm");
  s_syn->add_option("plant", syn.plant, "Plant JSON file")->required();
  s_syn->add_option("--template", syn.templ, "Controller JSON giving the structure and restart-0 values");
  s_syn->add_option("--nc", syn.nc, "Controller order for a zero template")->capture_default_str();
  s_syn->add_option("--mask", syn.mask, "JSON object of per-block 0/1 masks");
  s_syn->add_option("--seed", syn.seed, "Random seed")->capture_default_str();
  s_syn->add_option("--restarts", syn.restarts, "Number of restarts")->capture_default_str();
  s_syn->add_option("--max-iters", syn.max_iters, "BFGS iterations per restart")->capture_default_str();
  s_syn->add_option("--max-sampling-iters", syn.max_sampling_iters, "Gradient-sampling iterations per radius")
      ->capture_default_str();
  s_syn->add_flag("--verbose", syn.verbose, "Print accepted steps to stderr");
  add_common(s_syn, common);

  SimArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Closed-loop network response to filtered noise");
  s_sim->add_option("plant", sim.plant, "Plant JSON file")->required();
  s_sim->add_option("controller", sim.controller, "Controller JSON file")->required();
  s_sim->add_option("--topology", sim.topology, "line, ring, or a topology JSON file")->capture_default_str();
  s_sim->add_option("--N", sim.n, "Number of subsystems for line and ring")->capture_default_str();
  s_sim->add_option("--seed", sim.seed, "Noise seed")->capture_default_str();
  s_sim->add_option("--T", sim.t_end, "Final time")->capture_default_str();
  s_sim->add_option("--dt", sim.dt, "Step size")->capture_default_str();
  s_sim->add_option("--rms", sim.rms, "Noise RMS per channel")->capture_default_str();
  s_sim->add_option("--cutoff", sim.cutoff, "Noise filter cutoff in rad/s")->capture_default_str();
  s_sim->add_option("--signals", sim.signals, "Columns to write: z, zw or all")->capture_default_str();
  add_common(s_sim, common);

  ExampleArgs ex;
  auto* s_ex = app.add_subcommand("example", "Print a shipped example: cart-pendulum, controller, benchmark");
  s_ex->add_option("name", ex.name, "Example name")->required();
  s_ex->add_option("--M", ex.M, "Cart mass")->capture_default_str();
  s_ex->add_option("--m", ex.m, "Pendulum mass")->capture_default_str();
  s_ex->add_option("--k", ex.k, "Spring constant")->capture_default_str();
  s_ex->add_option("--l", ex.l, "Pendulum length")->capture_default_str();
  s_ex->add_option("--g", ex.g, "Gravity")->capture_default_str();
  s_ex->add_option("--tau-u", ex.tau_u, "Input delay")->capture_default_str();
  s_ex->add_option("--tau-nc", ex.tau_nc, "Communication delay")->capture_default_str();
  add_common(s_ex, common);

  ReproduceArgs rep;
  auto* s_rep = app.add_subcommand("reproduce", "Recompute a reference result and compare it with its tolerance");
  s_rep->add_option("target", rep.target, "benchmark, network-norms, gaincurve or sim20")->required();
  s_rep->add_option("--seeds", rep.seeds, "Noise seeds for sim20")->capture_default_str();
  add_common(s_rep, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Run run(sub->get_name(), common, args_of(argc, argv));
  try {
    run.threads();
    bool ok = true;
    if (sub == s_roots) cmd_roots(run, roots);
    else if (sub == s_svset) cmd_svset(run, svset);
    else if (sub == s_radius) cmd_radius(run, radius);
    else if (sub == s_hinf) cmd_hinf(run, hinf);
    else if (sub == s_gain) cmd_gain_curve(run, gain);
    else if (sub == s_dec) cmd_decouple(run, dec);
    else if (sub == s_syn) cmd_synth(run, syn);
    else if (sub == s_sim) cmd_simulate(run, sim);
    else if (sub == s_ex) cmd_example(run, ex);
    else if (sub == s_rep) ok = cmd_reproduce(run, rep);
    run.finish();
    return ok ? kOk : kDomain;
  } catch (const CliError& e) {
    std::cerr << "delay-hinf " << sub->get_name() << ": " << e.message << '\n';
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "delay-hinf " << sub->get_name() << ": " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "delay-hinf " << sub->get_name() << ": " << e.what() << '\n';
    return kDomain;
  }
}
