#pragma once

// Local NLP solution: a backend interface plus the built-in augmented
// Lagrangian method, and the complementarity homotopy around it.

#include <map>
#include <memory>

#include "dhn/nlp_assembly.hpp"
#include "dhn/nlp_problem.hpp"

namespace dhn {

enum class SolverMethod { InteriorPoint, AugmentedLagrangian };

struct SolverOptions {
  SolverMethod method = SolverMethod::InteriorPoint;
  double feasibility_tol = 1e-8;
  double stationarity_tol = 1e-6;
  double delta_start = 1e-2;
  double delta_end = 1e-8;
  double delta_factor = 0.1;
  int max_homotopy_steps = 7;
  int max_inner_iterations = 200;
  int max_outer_iterations = 40;
  double regularization_floor = 1e-10;
  double initial_penalty = 100.0;
  double max_penalty = 1e12;
  double initial_barrier = 0.1;
  double warm_barrier = 1e-4;  // barrier parameter when multipliers are supplied
  double activity_tol = 1e-4;  // scaled distance to a bound under which a variable counts as active

  /// Relaxation values delta_start, delta_start*factor, ... down to delta_end.
  std::vector<double> relaxation_schedule() const;
  void validate() const;
};

enum class SolveStatus { LocalOptimum, Infeasible, IterationLimit, NumericFailure };

const char* status_name(SolveStatus s);

struct KktReport {
  double stationarity = 0.0;
  double feasibility = 0.0;
  std::map<Family, double> residuals;
};

/// Result of a backend solve. Vectors are in the problem's scaled units.
struct BackendResult {
  SolveStatus status = SolveStatus::NumericFailure;
  Vector x;
  Vector duals;  // one per row, sign convention L = f + duals^T c
  double stationarity = 0.0;
  double feasibility = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
};

/// Anything that can locally solve an NlpProblem: needs the problem's
/// residuals, Jacobian and objective gradient (all provided by NlpProblem),
/// returns x, row multipliers and a status.
class NlpBackend {
 public:
  virtual ~NlpBackend() = default;
  virtual BackendResult solve(const NlpProblem& problem, const Vector& start, const Vector* duals,
                              const SolverOptions& opts) = 0;
};

/// Augmented Lagrangian with slack variables for inequality rows and a
/// projected Newton method for the bound-constrained subproblems.
class AugmentedLagrangianBackend : public NlpBackend {
 public:
  BackendResult solve(const NlpProblem& problem, const Vector& start, const Vector* duals,
                      const SolverOptions& opts) override;
};

/// Primal-dual interior point method: log barrier on the variable bounds,
/// inequality rows through bounded slacks, inertia-corrected Newton steps on
/// the full KKT system and a filter line search with feasibility restoration.
class InteriorPointBackend : public NlpBackend {
 public:
  BackendResult solve(const NlpProblem& problem, const Vector& start, const Vector* duals,
                      const SolverOptions& opts) override;
};

struct SolveResult {
  SolveStatus status = SolveStatus::NumericFailure;
  Vector x;       // SI units
  Vector duals;   // per row
  std::map<Family, double> dual_norms;
  KktReport kkt;
  double objective = 0.0;
  double final_delta = 0.0;
  int homotopy_steps = 0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double wall_ms = 0.0;
};

/// Solves the instance through the relaxation schedule. `start` is in SI
/// units; without it a cold start is used. The instance's relaxation is left
/// at the last value used.
SolveResult solve(NlpInstance& inst, const Vector* start, const SolverOptions& opts,
                  NlpBackend* backend = nullptr, const Vector* start_duals = nullptr);

/// Stationarity residual of one variable with gradient g of f + duals^T c.
/// Free variables contribute |g|; within `activity` of a bound only a
/// gradient pointing out of the box counts.
double active_set_residual(double g, double gap_lo, double gap_hi, double activity);

/// Stationarity of f + duals^T c over the free variables, and residuals.
KktReport check_kkt(const NlpInstance& inst, const Vector& x, const Vector& duals, double activity = 1e-4);

/// Maximum of q_plus * q_minus over all arcs, x in SI units.
double complementarity_residual(const NlpInstance& inst, const Vector& x);

}  // namespace dhn
