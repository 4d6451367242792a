#pragma once

// Per-pipe error measures of a solution: estimates built from algebraic
// propagation on other levels/grids, and exact measures built from the
// closed-form profiles. All max-norms are taken over the pipe's reference
// grid, which every grid of the pipe contains.

#include <string_view>
#include <vector>

#include "dhn/nlp_assembly.hpp"
#include "dhn/pipe_models.hpp"

namespace dhn {

enum class ErrorMode { Estimate, Exact };

ErrorMode parse_error_mode(std::string_view name);
const char* error_mode_name(ErrorMode mode);

/// Inflow data of one pipe read from a solution.
struct PipeFlowData {
  double velocity = 0.0;       // m/s, sign relative to the pipe orientation
  double inflow_energy = 0.0;  // J/m^3 at the inflow end
};

PipeFlowData pipe_flow_data(const NlpInstance& inst, const Vector& x, std::size_t pipe);

/// Positions of the reference grid.
std::vector<double> reference_points(const PipeArc& pipe, const PipeAssignment& assign);

/// Environment shared by all measures of one network.
struct ErrorContext {
  StateEquation state;
  double density = kDensity;
};

/// max |e^1 - e^level| over the reference grid, both propagated on the
/// current grid from the same inflow data.
double estimate_model_error(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                            ModelLevel level, const ErrorContext& ctx = {});

/// max |e(dx) - e(2 dx)| over the reference grid at the assigned level. When
/// the doubled step would miss reference points (grid equal to the reference
/// grid) the value is extrapolated as 4 max |e(dx/2) - e(dx)|.
double estimate_discretization_error(const PipeArc& pipe, const PipeAssignment& assign,
                                     const PipeFlowData& data, const ErrorContext& ctx = {});

struct ExactErrors {
  double total = 0.0;  // exact level 1 against discrete assigned level
  double model = 0.0;  // exact level 1 against exact assigned level
  double disc = 0.0;   // exact assigned level against discrete assigned level
};

ExactErrors exact_errors(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                         const ErrorContext& ctx = {});

/// Exact model error with `level` in place of the assigned one.
double exact_model_error(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                         ModelLevel level, const ErrorContext& ctx = {});

/// Model error under a candidate level, estimated or exact.
double model_error_under_level(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                               ModelLevel level, ErrorMode mode, const ErrorContext& ctx = {});

struct PipeError {
  double model = 0.0;
  double disc = 0.0;
  double total = 0.0;
  double exact_model = 0.0;
  double exact_disc = 0.0;
  double exact_total = 0.0;

  double model_for(ErrorMode m) const { return m == ErrorMode::Exact ? exact_model : model; }
  double disc_for(ErrorMode m) const { return m == ErrorMode::Exact ? exact_disc : disc; }
  double total_for(ErrorMode m) const { return m == ErrorMode::Exact ? exact_total : total; }
};

/// Estimates for every pipe; exact measures too when mode is Exact.
struct ErrorReport {
  ErrorMode mode = ErrorMode::Estimate;
  std::vector<PipeError> pipes;
  std::vector<PipeFlowData> inflow;
};

ErrorReport compute_errors(const NlpInstance& inst, const Vector& x, ErrorMode mode);

/// Arithmetic mean; throws on an empty set.
double average_error(const std::vector<double>& totals);
/// Mean of the per-pipe totals of the given kind.
double average_error(const ErrorReport& report, ErrorMode kind);

enum class GridChange { Refine, Coarsen };

/// Discretization error expected after halving or doubling the step.
double predict_error_after_grid_change(double disc_error, GridChange change);

}  // namespace dhn
