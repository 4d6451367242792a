#pragma once

// Builds the district heating NLP for a given network and per-pipe model
// levels and grids.

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dhn/network.hpp"
#include "dhn/nlp_problem.hpp"
#include "dhn/pipe_models.hpp"

namespace dhn {

/// Model level and grid of one pipe. `reference_intervals` fixes the
/// evaluation grid used for error measures; it divides grid.intervals.
struct PipeAssignment {
  ModelLevel level = 3;
  PipeGrid grid;
  int reference_intervals = 1;

  bool operator==(const PipeAssignment&) const = default;
};

using Assignment = std::vector<PipeAssignment>;

/// Every pipe at `level` with n = `intervals` and the reference grid having
/// max(1, intervals / 2) intervals.
Assignment uniform_assignment(const NetworkModel& net, ModelLevel level = 3, int intervals = 2);

/// Variable indices; -1 where a variable does not exist.
struct VariableLayout {
  std::vector<int> node_pressure;
  std::vector<int> node_energy;
  // indexed by arc position
  std::vector<int> flow;
  std::vector<int> flow_plus;
  std::vector<int> flow_minus;
  std::vector<int> tail_energy;
  std::vector<int> head_energy;
  // indexed by pipe
  std::vector<int> inlet_pressure;
  std::vector<int> outlet_pressure;
  std::vector<std::vector<int>> pipe_energy;  // n+1 entries; interior -1 at level 3
  int pump_power = -1;
  int waste_power = -1;
  int gas_power = -1;
};

/// Assembled problem. Solution vectors passed to the free functions below are
/// in SI units and ordered like problem.variables().
struct NlpInstance {
  std::shared_ptr<const NetworkModel> network;
  Assignment assignment;
  VariableLayout layout;
  NlpProblem problem;
  std::vector<std::size_t> zero_throughflow_nodes;

  Vector to_scaled(const Vector& si) const;
  Vector to_si(const Vector& scaled) const;
};

NlpInstance assemble(std::shared_ptr<const NetworkModel> net, const Assignment& assign, double delta);

/// Cost in currency per hour.
double objective_value(const NlpInstance& inst, const Vector& x);

/// Max-norm violation per constraint family in scaled units.
std::map<Family, double> residual_norms(const NlpInstance& inst, const Vector& x);

/// Transfers a solution onto another assignment of the same network.
Vector warm_start(const NlpInstance& from, const Vector& x, const NlpInstance& to);

/// Heuristic starting point built from nominal consumer flows.
Vector cold_start(const NlpInstance& inst);

double arc_mass_flow_value(const NlpInstance& inst, const Vector& x, ArcRef arc);
/// Energies on all n+1 grid points of the pipe (level-3 interior filled by
/// linear interpolation of the end values).
std::vector<double> pipe_energy_profile(const NlpInstance& inst, const Vector& x, std::size_t pipe);

/// Flat JSON object {name: SI value}.
std::string solution_to_json(const NlpInstance& inst, const Vector& x);
Vector solution_from_json(const NlpInstance& inst, const std::string& text);

}  // namespace dhn
