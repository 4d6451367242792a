#include "dhn/reporting.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dhn/errors.hpp"

namespace dhn {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double gj(double v) { return v / kJoulePerGJ; }

double number(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number()) throw SchemaError("config." + key + ": expected a number");
  return v.get<double>();
}

int integer(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw SchemaError("config." + key + ": expected an integer");
  return v.get<int>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw SchemaError(path + "." + key + ": unknown key");
  }
}

SolverMethod parse_method(const std::string& s) {
  if (s == "interior-point") return SolverMethod::InteriorPoint;
  if (s == "augmented-lagrangian") return SolverMethod::AugmentedLagrangian;
  throw SchemaError("config.solver.method: expected interior-point or augmented-lagrangian");
}

const char* method_name(SolverMethod m) {
  return m == SolverMethod::InteriorPoint ? "interior-point" : "augmented-lagrangian";
}

void parse_solver(const json& j, SolverOptions& s) {
  if (!j.is_object()) throw SchemaError("config.solver: expected an object");
  reject_unknown(j,
                 {"method", "feasibility_tol", "stationarity_tol", "delta_start", "delta_end", "delta_factor",
                  "max_homotopy_steps", "max_inner_iterations", "max_outer_iterations", "regularization_floor",
                  "initial_barrier", "warm_barrier", "activity_tol"},
                 "config.solver");
  if (j.contains("method")) {
    if (!j["method"].is_string()) throw SchemaError("config.solver.method: expected a string");
    s.method = parse_method(j["method"].get<std::string>());
  }
  auto opt = [&](const char* key, double& field) {
    if (j.contains(key)) field = number(j, key);
  };
  auto opt_int = [&](const char* key, int& field) {
    if (j.contains(key)) field = integer(j, key);
  };
  opt("feasibility_tol", s.feasibility_tol);
  opt("stationarity_tol", s.stationarity_tol);
  opt("delta_start", s.delta_start);
  opt("delta_end", s.delta_end);
  opt("delta_factor", s.delta_factor);
  opt_int("max_homotopy_steps", s.max_homotopy_steps);
  opt_int("max_inner_iterations", s.max_inner_iterations);
  opt_int("max_outer_iterations", s.max_outer_iterations);
  opt("regularization_floor", s.regularization_floor);
  opt("initial_barrier", s.initial_barrier);
  opt("warm_barrier", s.warm_barrier);
  opt("activity_tol", s.activity_tol);
}

const char* csv_phase(Phase p) { return phase_name(p); }

}  // namespace

AdaptiveConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: expected an object");
  reject_unknown(j,
                 {"eps", "theta_r", "theta_u", "theta_c", "theta_d", "tau", "inner_iterations",
                  "max_outer_iterations", "error_mode", "initial_level", "initial_intervals", "solver"},
                 "config");
  AdaptiveConfig c;
  if (j.contains("eps")) c.eps = number(j, "eps") * kJoulePerGJ;
  if (j.contains("theta_r")) c.theta_r = number(j, "theta_r");
  if (j.contains("theta_u")) c.theta_u = number(j, "theta_u");
  if (j.contains("theta_c")) c.theta_c = number(j, "theta_c");
  if (j.contains("theta_d")) c.theta_d = number(j, "theta_d");
  if (j.contains("tau")) c.tau = number(j, "tau");
  if (j.contains("inner_iterations")) c.inner_iterations = integer(j, "inner_iterations");
  if (j.contains("max_outer_iterations")) c.max_outer_iterations = integer(j, "max_outer_iterations");
  if (j.contains("error_mode")) {
    if (!j["error_mode"].is_string()) throw SchemaError("config.error_mode: expected a string");
    try {
      c.error_mode = parse_error_mode(j["error_mode"].get<std::string>());
    } catch (const Error& e) {
      throw SchemaError(std::string("config.error_mode: ") + e.what());
    }
  }
  if (j.contains("initial_level")) c.initial_level = integer(j, "initial_level");
  if (j.contains("initial_intervals")) c.initial_intervals = integer(j, "initial_intervals");
  if (j.contains("solver")) parse_solver(j["solver"], c.solver);
  try {
    c.validate();
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("config: ") + e.what());
  }
  return c;
}

AdaptiveConfig load_config(const std::string& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

std::string config_to_json(const AdaptiveConfig& c) {
  ordered_json j;
  j["eps"] = gj(c.eps);
  j["theta_r"] = c.theta_r;
  j["theta_u"] = c.theta_u;
  j["theta_c"] = c.theta_c;
  j["theta_d"] = c.theta_d;
  j["tau"] = c.tau;
  j["inner_iterations"] = c.inner_iterations;
  j["max_outer_iterations"] = c.max_outer_iterations;
  j["error_mode"] = error_mode_name(c.error_mode);
  j["initial_level"] = c.initial_level;
  j["initial_intervals"] = c.initial_intervals;
  const SolverOptions& s = c.solver;
  j["solver"] = ordered_json{{"method", method_name(s.method)},
                             {"feasibility_tol", s.feasibility_tol},
                             {"stationarity_tol", s.stationarity_tol},
                             {"delta_start", s.delta_start},
                             {"delta_end", s.delta_end},
                             {"delta_factor", s.delta_factor},
                             {"max_homotopy_steps", s.max_homotopy_steps},
                             {"max_inner_iterations", s.max_inner_iterations},
                             {"max_outer_iterations", s.max_outer_iterations},
                             {"regularization_floor", s.regularization_floor},
                             {"initial_barrier", s.initial_barrier},
                             {"warm_barrier", s.warm_barrier},
                             {"activity_tol", s.activity_tol}};
  return j.dump(2) + "\n";
}

std::string iteration_log_csv(const std::vector<IterationRecord>& log, const ArtifactOptions& opts) {
  std::ostringstream os;
  os << "k,j,phase,avg_error,sum_eta_m,sum_eta_d,n_U,n_R,n_C,n_D,n_level1,n_level2,n_level3,objective,"
        "solve_status,wall_ms\n";
  for (const auto& r : log) {
    os << r.outer << ',' << r.inner << ',' << csv_phase(r.phase) << ',' << num(gj(r.avg_error)) << ','
       << num(gj(r.sum_model)) << ',' << num(gj(r.sum_disc)) << ',' << r.upswitched << ',' << r.refined << ','
       << r.coarsened << ',' << r.downswitched << ',' << r.level_counts[0] << ',' << r.level_counts[1] << ','
       << r.level_counts[2] << ',' << num(r.objective) << ',' << status_name(r.status) << ','
       << num(opts.timing ? r.wall_ms : 0.0) << '\n';
  }
  return os.str();
}

namespace {

void error_rows(std::ostream& os, const std::string& prefix, const NetworkModel& net, const Assignment& assign,
                const ErrorReport& report) {
  const bool exact = report.mode == ErrorMode::Exact;
  for (std::size_t a = 0; a < report.pipes.size(); ++a) {
    const PipeArc& pipe = net.pipes()[a];
    const PipeError& e = report.pipes[a];
    os << prefix << pipe.id << ',' << assign[a].level << ',' << num(assign[a].grid.step(pipe)) << ','
       << num(gj(e.model)) << ',' << num(gj(e.disc)) << ',' << num(gj(e.total)) << ',';
    if (exact) {
      os << num(gj(e.exact_model)) << ',' << num(gj(e.exact_disc)) << ',' << num(gj(e.exact_total));
    } else {
      os << ",,";
    }
    os << ',' << error_mode_name(report.mode) << '\n';
  }
}

}  // namespace

std::string error_report_csv(const NetworkModel& net, const Assignment& assign, const ErrorReport& report) {
  std::ostringstream os;
  os << "pipe,level,dx,eta_m,eta_d,eta,nu_m,nu_d,nu,mode\n";
  error_rows(os, "", net, assign, report);
  return os.str();
}

std::string pipe_errors_csv(const NetworkModel& net, const std::vector<IterationRecord>& log) {
  std::ostringstream os;
  os << "k,j,phase,pipe,level,dx,eta_m,eta_d,eta,nu_m,nu_d,nu,mode\n";
  for (const auto& r : log) {
    std::string prefix = std::to_string(r.outer) + ',' + std::to_string(r.inner) + ',' + csv_phase(r.phase) + ',';
    error_rows(os, prefix, net, r.assignment, r.errors);
  }
  return os.str();
}

std::string summary_json(const AdaptiveResult& result, const AdaptiveConfig& config, const ArtifactOptions& opts) {
  const NlpInstance& inst = result.instance;
  ordered_json j;
  j["status"] = adaptive_status_name(result.status);
  j["error_mode"] = error_mode_name(config.error_mode);
  j["eps"] = gj(config.eps);
  j["final_avg_error"] = gj(average_error(result.errors, config.error_mode));
  j["final_avg_estimate"] = gj(average_error(result.errors, ErrorMode::Estimate));
  if (config.error_mode == ErrorMode::Exact) j["final_avg_exact"] = gj(average_error(result.errors, ErrorMode::Exact));
  j["outer_iterations"] = result.outer_iterations;
  j["solves"] = result.log.size();
  j["objective"] = result.solve.objective;
  std::array<std::size_t, 3> levels{};
  int intervals = 0;
  for (const auto& pa : inst.assignment) {
    levels[pa.level - 1]++;
    intervals += pa.grid.intervals;
  }
  j["final_levels"] = ordered_json{{"level1", levels[0]}, {"level2", levels[1]}, {"level3", levels[2]}};
  j["final_total_intervals"] = intervals;
  ordered_json res = ordered_json::object();
  double worst = 0.0;
  for (const auto& [f, v] : residual_norms(inst, result.x)) {
    res[family_name(f)] = v;
    worst = std::max(worst, v);
  }
  j["residual_norms"] = res;
  j["max_residual"] = worst;
  j["complementarity"] = complementarity_residual(inst, result.x);
  j["stationarity"] = result.solve.kkt.stationarity;
  TerminationDiagnostics d = check_termination_conditions(config, inst.network->pipes().size());
  j["termination_conditions"] = ordered_json{{"discretization_margin", d.discretization_margin},
                                             {"discretization_ok", d.discretization_ok},
                                             {"model_margin", d.model_margin},
                                             {"model_ok", d.model_ok}};
  j["seed"] = opts.seed;
  j["wall_ms"] = opts.timing ? result.wall_ms : 0.0;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << text;
  if (!f) throw Error("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_artifacts(const std::string& dir, const AdaptiveResult& result, const AdaptiveConfig& config,
                     const ArtifactOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
  const NetworkModel& net = *result.instance.network;
  auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  write_text_file(path("solution.json"), solution_to_json(result.instance, result.x));
  write_text_file(path("iterations.csv"), iteration_log_csv(result.log, opts));
  write_text_file(path("pipe_errors.csv"), pipe_errors_csv(net, result.log));
  write_text_file(path("summary.json"), summary_json(result, config, opts));
}

PipeArc reference_pipe() {
  PipeArc p;
  p.id = "reference";
  p.tail = "in";
  p.head = "out";
  p.length = 1000.0;
  p.diameter = 0.107;
  p.friction = 0.017;
  p.heat_transfer = 0.5;
  p.wall_temperature = 278.0;
  return p;
}

PipeStudyTables run_pipe_study(const PipeStudy& s) {
  if (s.profile_points < 1) throw Error("profile needs at least one interval");
  for (int n : s.intervals) {
    if (n < 1) throw Error("grid needs at least one interval");
  }
  for (ModelLevel l : s.levels) {
    if (l < 1 || l > kMaxLevel) throw Error("model level must be 1, 2 or 3");
  }
  std::ostringstream prof, err;
  prof << "kind,level,v,n,x,e,T\n";
  err << "level,v,n,dx,eta_m,eta_d,eta,nu_m,nu_d,nu,order\n";
  PipeGrid fine;
  fine.intervals = s.profile_points;
  const std::vector<double> xs = fine.points(s.pipe);
  for (ModelLevel level : s.levels) {
    for (double v : s.velocities) {
      std::vector<double> exact = exact_energy_profile(level, s.pipe, v, s.inflow_energy, xs);
      for (std::size_t k = 0; k < xs.size(); ++k) {
        prof << "exact," << level << ',' << num(v) << ",," << num(xs[k]) << ',' << num(gj(exact[k])) << ','
             << num(temperature_of_energy(exact[k])) << '\n';
      }
      PipeFlowData data{v, s.inflow_energy};
      double prev_disc = 0.0;
      for (int n : s.intervals) {
        PipeAssignment a;
        a.level = level;
        a.grid.intervals = n;
        a.reference_intervals = 1;
        std::vector<double> disc = propagate_energy_discrete(level, s.pipe, v, s.inflow_energy, a.grid);
        std::vector<double> pts = a.grid.points(s.pipe);
        for (int k = 0; k <= n; ++k) {
          prof << "discrete," << level << ',' << num(v) << ',' << n << ',' << num(pts[k]) << ','
               << num(gj(disc[k])) << ',' << num(temperature_of_energy(disc[k])) << '\n';
        }
        double em = estimate_model_error(s.pipe, a, data, level);
        double ed = estimate_discretization_error(s.pipe, a, data);
        ExactErrors ex = exact_errors(s.pipe, a, data);
        err << level << ',' << num(v) << ',' << n << ',' << num(a.grid.step(s.pipe)) << ',' << num(gj(em)) << ','
            << num(gj(ed)) << ',' << num(gj(em + ed)) << ',' << num(gj(ex.model)) << ',' << num(gj(ex.disc)) << ','
            << num(gj(ex.total)) << ',';
        if (prev_disc > 0.0 && ex.disc > 0.0) err << num(std::log2(prev_disc / ex.disc));
        err << '\n';
        prev_disc = ex.disc;
      }
    }
  }
  return {prof.str(), err.str()};
}

}  // namespace dhn
