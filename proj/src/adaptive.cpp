#include "dhn/adaptive.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "dhn/errors.hpp"
#include "dhn/log.hpp"

namespace dhn {

void AdaptiveConfig::validate() const {
  if (!(eps > 0)) throw Error("eps must be positive");
  for (double t : {theta_r, theta_u, theta_c, theta_d}) {
    if (!(t > 0.0 && t < 1.0)) throw Error("marking thresholds must lie in (0, 1)");
  }
  if (!(tau >= 1.0)) throw Error("tau must be at least 1");
  if (inner_iterations < 0) throw Error("inner iteration count must be non-negative");
  if (max_outer_iterations < 0) throw Error("max outer iterations must be non-negative");
  if (initial_level < 1 || initial_level > kMaxLevel) throw Error("initial level must be 1, 2 or 3");
  if (initial_intervals < 1 || (initial_intervals & (initial_intervals - 1)) != 0) {
    throw Error("initial intervals must be a power of two");
  }
  solver.validate();
}

TerminationDiagnostics check_termination_conditions(const AdaptiveConfig& config, std::size_t pipe_count) {
  TerminationDiagnostics d;
  const double mu = config.inner_iterations;
  d.discretization_margin = 0.25 * config.theta_r * mu - config.theta_c;
  d.model_margin = config.theta_u * mu - config.tau * config.theta_d * static_cast<double>(pipe_count);
  d.discretization_ok = d.discretization_margin > 0;
  d.model_ok = d.model_margin > 0;
  return d;
}

bool check_feasible(const ErrorReport& report, const AdaptiveConfig& config) {
  return average_error(report, config.error_mode) <= config.eps;
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Initial: return "initial";
    case Phase::Inner: return "inner";
    case Phase::Outer: return "outer";
  }
  return "?";
}

const char* adaptive_status_name(AdaptiveStatus s) {
  return s == AdaptiveStatus::EpsFeasible ? "eps-feasible" : "iteration-cap";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

class Controller {
 public:
  Controller(std::shared_ptr<const NetworkModel> net, const AdaptiveConfig& config)
      : net_(std::move(net)), config_(config) {
    ctx_.density = net_->density();
  }

  AdaptiveResult run(const Assignment& initial, const ParameterUpdate& update) {
    auto t0 = Clock::now();
    Assignment assign = initial;
    if (assign.empty()) assign = uniform_assignment(*net_, config_.initial_level, config_.initial_intervals);
    if (assign.size() != net_->pipes().size()) throw Error("initial assignment does not match the pipe count");

    solve_on(assemble(net_, assign, config_.solver.delta_start), nullptr, 0, 0);
    record(Phase::Initial, 0, 0, {}, {}, {}, {});
    if (feasible()) return finish(AdaptiveStatus::EpsFeasible, 0, t0);

    for (int k = 1; k <= config_.max_outer_iterations; ++k) {
      if (update) update(k, config_);
      config_.validate();
      for (int j = 1; j <= config_.inner_iterations; ++j) {
        if (inner_step(k, j)) return finish(AdaptiveStatus::EpsFeasible, k, t0);
      }
      if (outer_step(k)) return finish(AdaptiveStatus::EpsFeasible, k, t0);
    }
    return finish(AdaptiveStatus::IterationCap, config_.max_outer_iterations, t0);
  }

 private:
  double model_error(std::size_t a) const { return errors_.pipes[a].model_for(config_.error_mode); }
  double disc_error(std::size_t a) const { return errors_.pipes[a].disc_for(config_.error_mode); }

  double model_error_at(std::size_t a, ModelLevel level) const {
    const PipeAssignment& pa = inst_.assignment[a];
    if (level == pa.level) return model_error(a);
    return model_error_under_level(net_->pipes()[a], pa, errors_.inflow[a], level, config_.error_mode, ctx_);
  }

  bool feasible() const { return check_feasible(errors_, config_); }

  std::vector<double> disc_errors() const {
    std::vector<double> d(errors_.pipes.size());
    for (std::size_t a = 0; a < d.size(); ++a) d[a] = disc_error(a);
    return d;
  }

  bool inner_step(int k, int j) {
    const std::size_t np = net_->pipes().size();
    const Assignment& cur = inst_.assignment;
    std::vector<double> decrease(np, 0.0);
    std::vector<ModelLevel> target(np);
    for (std::size_t a = 0; a < np; ++a) {
      ModelLevel l = cur[a].level;
      target[a] = l;
      if (l == 1) continue;
      double now = model_error(a);
      double d1 = now - model_error_at(a, up_switch_candidate(l));
      target[a] = up_switch_level(l, d1, config_.eps);
      decrease[a] = target[a] == up_switch_candidate(l) ? d1 : now - model_error_at(a, 1);
    }
    PipeSet U = mark_upswitch(decrease, config_.eps, config_.theta_u);
    PipeSet R = mark_refine(disc_errors(), config_.theta_r);

    Assignment next = cur;
    for (std::size_t a : U) next[a].level = target[a];
    for (std::size_t a : R) next[a] = refine(next[a]);
    advance(next, k, j);
    record(Phase::Inner, k, j, U, R, {}, {});
    return feasible();
  }

  bool outer_step(int k) {
    const std::size_t np = net_->pipes().size();
    const Assignment& cur = inst_.assignment;
    std::vector<double> increase(np, 0.0);
    PipeSet switchable, coarsenable;
    for (std::size_t a = 0; a < np; ++a) {
      if (cur[a].level < kMaxLevel) {
        switchable.push_back(a);
        increase[a] = model_error_at(a, down_switch_level(cur[a].level)) - model_error(a);
      }
      if (can_coarsen(cur[a])) coarsenable.push_back(a);
    }
    PipeSet D = mark_downswitch(increase, switchable, config_.tau, config_.eps, config_.theta_d);
    PipeSet C = mark_coarsen(disc_errors(), coarsenable, config_.theta_c);

    Assignment next = cur;
    for (std::size_t a : D) next[a].level = down_switch_level(next[a].level);
    for (std::size_t a : C) next[a] = coarsen(next[a]);
    advance(next, k, 0);
    record(Phase::Outer, k, 0, {}, {}, C, D);
    return feasible();
  }

  // Re-solves on a changed assignment; an unchanged one keeps the solution.
  void advance(const Assignment& next, int k, int j) {
    if (next == inst_.assignment) {
      last_ms_ = 0.0;
      return;
    }
    NlpInstance inst = assemble(net_, next, config_.solver.delta_start);
    Vector x0 = warm_start(inst_, solve_.x, inst);
    solve_on(std::move(inst), &x0, k, j);
  }

  void solve_on(NlpInstance inst, const Vector* start, int k, int j) {
    auto t0 = Clock::now();
    inst_ = std::move(inst);
    solve_ = solve(inst_, start, config_.solver);
    if (solve_.status != SolveStatus::LocalOptimum) {
      std::ostringstream os;
      os << "solve at outer iteration " << k << ", inner iteration " << j << " ended with status "
         << status_name(solve_.status) << " (stationarity " << solve_.kkt.stationarity << ", feasibility "
         << solve_.kkt.feasibility << ")";
      throw SolveFailed(os.str(), k, j);
    }
    errors_ = compute_errors(inst_, solve_.x, config_.error_mode);
    last_ms_ = ms_since(t0);
  }

  void record(Phase phase, int k, int j, const PipeSet& U, const PipeSet& R, const PipeSet& C, const PipeSet& D) {
    IterationRecord r;
    r.outer = k;
    r.inner = j;
    r.phase = phase;
    r.avg_estimate = average_error(errors_, ErrorMode::Estimate);
    r.avg_exact = config_.error_mode == ErrorMode::Exact ? average_error(errors_, ErrorMode::Exact) : 0.0;
    r.avg_error = config_.error_mode == ErrorMode::Exact ? r.avg_exact : r.avg_estimate;
    for (std::size_t a = 0; a < errors_.pipes.size(); ++a) {
      r.sum_model += model_error(a);
      r.sum_disc += disc_error(a);
      r.level_counts[inst_.assignment[a].level - 1]++;
    }
    r.upswitched = U.size();
    r.refined = R.size();
    r.coarsened = C.size();
    r.downswitched = D.size();
    r.objective = solve_.objective;
    r.status = solve_.status;
    r.wall_ms = last_ms_;
    r.dual_norms = solve_.dual_norms;
    r.assignment = inst_.assignment;
    r.errors = errors_;
    if (log::level() >= log::Level::Info) {
      std::ostringstream os;
      os << "k=" << k << " j=" << j << " " << phase_name(phase) << " avg_error=" << r.avg_error / kJoulePerGJ
         << " GJ/m3 |U|=" << r.upswitched << " |R|=" << r.refined << " |C|=" << r.coarsened
         << " |D|=" << r.downswitched << " levels=" << r.level_counts[0] << "/" << r.level_counts[1] << "/"
         << r.level_counts[2] << " objective=" << r.objective;
      log::info(os.str());
    }
    log_.push_back(std::move(r));
  }

  AdaptiveResult finish(AdaptiveStatus status, int k, Clock::time_point t0) {
    AdaptiveResult res;
    res.status = status;
    res.instance = std::move(inst_);
    res.x = solve_.x;
    res.solve = std::move(solve_);
    res.errors = std::move(errors_);
    res.log = std::move(log_);
    res.outer_iterations = k;
    res.wall_ms = ms_since(t0);
    return res;
  }

  std::shared_ptr<const NetworkModel> net_;
  AdaptiveConfig config_;
  ErrorContext ctx_;
  NlpInstance inst_;
  SolveResult solve_;
  ErrorReport errors_;
  std::vector<IterationRecord> log_;
  double last_ms_ = 0.0;
};

}  // namespace

AdaptiveResult run_adaptive(std::shared_ptr<const NetworkModel> net, const AdaptiveConfig& config,
                            const Assignment& initial, const ParameterUpdate& update) {
  config.validate();
  if (!net) throw Error("no network given");
  return Controller(std::move(net), config).run(initial, update);
}

}  // namespace dhn
