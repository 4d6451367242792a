#pragma once

// Run configuration documents and the CSV/JSON artifacts of adaptive runs
// and single-pipe studies. Error values in artifacts are in GJ/m^3.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dhn/adaptive.hpp"

namespace dhn {

/// Parses a run configuration (JSON). Every key is optional; unknown keys
/// are rejected. `eps` is given in GJ/m^3.
AdaptiveConfig parse_config(std::string_view text);
AdaptiveConfig load_config(const std::string& path);
std::string config_to_json(const AdaptiveConfig& config);

struct ArtifactOptions {
  bool timing = true;  // false writes 0 for every wall-clock field
  std::uint64_t seed = 0;
};

/// Columns: k, j, phase, avg_error, sum_eta_m, sum_eta_d, n_U, n_R, n_C, n_D,
/// n_level1, n_level2, n_level3, objective, solve_status, wall_ms.
std::string iteration_log_csv(const std::vector<IterationRecord>& log, const ArtifactOptions& opts = {});

/// One row per pipe: pipe, level, dx, eta_m, eta_d, eta, nu_m, nu_d, nu, mode.
/// Exact columns are empty in estimate mode.
std::string error_report_csv(const NetworkModel& net, const Assignment& assign, const ErrorReport& report);

/// The same rows for every logged iteration, prefixed by k, j, phase.
std::string pipe_errors_csv(const NetworkModel& net, const std::vector<IterationRecord>& log);

std::string summary_json(const AdaptiveResult& result, const AdaptiveConfig& config, const ArtifactOptions& opts = {});

/// Writes solution.json, iterations.csv, pipe_errors.csv and summary.json.
void write_artifacts(const std::string& dir, const AdaptiveResult& result, const AdaptiveConfig& config,
                     const ArtifactOptions& opts = {});

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

struct PipeStudy {
  PipeArc pipe;
  std::vector<double> velocities{0.5, 1.0, 2.0};
  double inflow_energy = 0.35e9;  // J/m^3
  std::vector<ModelLevel> levels{1, 2, 3};
  std::vector<int> intervals{2, 4, 8, 16};
  int profile_points = 100;  // intervals of the sampled exact profiles
};

/// Pipe of the single-pipe reference study: L = 1000 m, D = 0.107 m,
/// lambda = 0.017, h_c = 0.5, T_W = 278 K.
PipeArc reference_pipe();

struct PipeStudyTables {
  std::string profiles;  // kind, level, v, n, x, e, T
  std::string errors;    // level, v, n, dx, eta_m, eta_d, eta, nu_m, nu_d, nu, order
};

/// Exact profiles (levels 1-2, and 3 as constant), discrete profiles for each
/// grid and all six error measures per grid with the reference grid {0, L}.
/// `order` is log2 of the ratio of consecutive exact discretization errors.
PipeStudyTables run_pipe_study(const PipeStudy& study);

}  // namespace dhn
