#pragma once

// Marking strategies selecting pipes for refinement, up-switching,
// coarsening and down-switching, plus the level and grid update rules.

#include <cstddef>
#include <vector>

#include "dhn/nlp_assembly.hpp"

namespace dhn {

using PipeSet = std::vector<std::size_t>;  // ascending pipe indices

inline constexpr ModelLevel kMaxLevel = 3;

/// Smallest subset S of `candidates` with sum_S values >= theta * sum_candidates.
/// Greedy by descending value, ties by ascending index.
PipeSet min_cover(const std::vector<double>& values, const PipeSet& candidates, double theta);

/// Largest subset S of `candidates` with sum_S values <= theta * sum_candidates.
/// Greedy by ascending value, ties by ascending index.
PipeSet max_within(const std::vector<double>& values, const PipeSet& candidates, double theta);

/// Pipes to refine, from discretization errors.
PipeSet mark_refine(const std::vector<double>& disc_errors, double theta_r);

/// Pipes to switch up, from the model-error decreases of the up rule;
/// only decreases above eps compete.
PipeSet mark_upswitch(const std::vector<double>& decreases, double eps, double theta_u);

/// Pipes to coarsen among `candidates`; the overload without candidates
/// considers every pipe.
PipeSet mark_coarsen(const std::vector<double>& disc_errors, const PipeSet& candidates, double theta_c);
PipeSet mark_coarsen(const std::vector<double>& disc_errors, double theta_c);

/// Pipes to switch down among `candidates`, from the model-error increases
/// of the down rule; only increases below tau * eps compete.
PipeSet mark_downswitch(const std::vector<double>& increases, const PipeSet& candidates, double tau, double eps,
                        double theta_d);
PipeSet mark_downswitch(const std::vector<double>& increases, double tau, double eps, double theta_d);

/// Level after an up-switch: one level up if that removes more than eps of
/// model error, otherwise straight to level 1.
ModelLevel up_switch_level(ModelLevel level, double decrease, double eps);
/// Level tried by the up rule before the decrease is known.
ModelLevel up_switch_candidate(ModelLevel level);
ModelLevel down_switch_level(ModelLevel level);

/// Halves (refine) or doubles (coarsen) the step. Coarsening below the
/// reference grid throws CoarsenBelowReference.
PipeAssignment refine(const PipeAssignment& a);
PipeAssignment coarsen(const PipeAssignment& a);
bool can_coarsen(const PipeAssignment& a);

}  // namespace dhn
