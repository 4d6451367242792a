#pragma once

// Adaptive control of model levels and grids: an inner loop of up-switches
// and refinements and an outer step of down-switches and coarsenings, each
// followed by a warm-started solve, until the average error drops below eps.

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dhn/error_measures.hpp"
#include "dhn/marking.hpp"
#include "dhn/nlp_solver.hpp"

namespace dhn {

struct AdaptiveConfig {
  double eps = 1e-6 * kJoulePerGJ;  // J/m^3
  double theta_r = 0.9;
  double theta_u = 0.4;
  double theta_c = 0.45;
  double theta_d = 0.2;
  double tau = 5.0;
  int inner_iterations = 4;
  int max_outer_iterations = 50;
  ErrorMode error_mode = ErrorMode::Estimate;
  int initial_level = 3;
  int initial_intervals = 2;
  SolverOptions solver;

  void validate() const;
};

/// Per-outer-iteration parameter update; the default leaves the config alone.
using ParameterUpdate = std::function<void(int outer, AdaptiveConfig& config)>;

struct TerminationDiagnostics {
  double discretization_margin = 0.0;  // theta_r * inner / 4 - theta_c
  double model_margin = 0.0;           // theta_u * inner - tau * theta_d * pipes
  bool discretization_ok = false;
  bool model_ok = false;
};

/// Sufficient conditions for finite termination. Informational only.
TerminationDiagnostics check_termination_conditions(const AdaptiveConfig& config, std::size_t pipe_count);

/// ε-feasibility of a report under the configured error mode.
bool check_feasible(const ErrorReport& report, const AdaptiveConfig& config);

enum class Phase { Initial, Inner, Outer };

const char* phase_name(Phase p);

struct IterationRecord {
  int outer = 0;
  int inner = 0;  // 0 for the initial and the outer solves
  Phase phase = Phase::Initial;
  double avg_error = 0.0;        // in the configured mode
  double avg_estimate = 0.0;
  double avg_exact = 0.0;        // 0 in estimate mode
  double sum_model = 0.0;
  double sum_disc = 0.0;
  std::size_t upswitched = 0;
  std::size_t refined = 0;
  std::size_t coarsened = 0;
  std::size_t downswitched = 0;
  std::array<std::size_t, 3> level_counts{};
  double objective = 0.0;
  SolveStatus status = SolveStatus::NumericFailure;
  double wall_ms = 0.0;
  std::map<Family, double> dual_norms;
  Assignment assignment;
  ErrorReport errors;
};

enum class AdaptiveStatus { EpsFeasible, IterationCap };

const char* adaptive_status_name(AdaptiveStatus s);

struct AdaptiveResult {
  AdaptiveStatus status = AdaptiveStatus::IterationCap;
  NlpInstance instance;
  Vector x;
  SolveResult solve;
  ErrorReport errors;
  std::vector<IterationRecord> log;
  int outer_iterations = 0;
  double wall_ms = 0.0;
};

/// Runs the adaptive loop from `initial` (every pipe at the configured
/// initial level and grid when empty). Throws SolveFailed when a solve does
/// not reach a local optimum.
AdaptiveResult run_adaptive(std::shared_ptr<const NetworkModel> net, const AdaptiveConfig& config,
                            const Assignment& initial = {}, const ParameterUpdate& update = {});

}  // namespace dhn
