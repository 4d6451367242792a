#pragma once

// Model catalog for stationary hot-water flow in a single pipe: the three
// model levels, their closed-form energy profiles and the implicit midpoint
// discretization together with algebraic propagation along a grid.

#include <vector>

#include "dhn/network.hpp"

namespace dhn {

/// Quadratic state equation T(e) = theta2 (e/e0)^2 + theta1 (e/e0) + theta0.
struct StateEquation {
  double theta2 = 59.2453;     // K
  double theta1 = 220.536;     // K
  double theta0 = 274.93729;   // K
  double e0 = 1e9;             // J/m^3
};

/// Velocities at or below this magnitude are treated as no flow.
inline constexpr double kMinVelocity = 1e-6;

/// Energy range [J/m^3] in which the state equation is considered valid.
inline constexpr double kStateValidLower = 0.2e9;
inline constexpr double kStateValidUpper = 0.5e9;

double temperature_of_energy(double e, const StateEquation& c = {});
/// Inverse of temperature_of_energy on the increasing branch.
double energy_of_temperature(double T, const StateEquation& c = {});

/// 1 = full momentum and energy, 2 = energy without friction heating,
/// 3 = energy conserving.
using ModelLevel = int;

/// Equidistant grid with n intervals; grid `index` counts refinements
/// relative to the run's initial grid and may become negative.
struct PipeGrid {
  int intervals = 2;
  int index = 0;

  double step(const PipeArc& pipe) const { return pipe.length / intervals; }
  std::vector<double> points(const PipeArc& pipe) const;
  bool operator==(const PipeGrid&) const = default;
};

/// Coefficients of zeta e' = alpha e^2 + beta e + gamma.
struct RiccatiCoefficients {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double zeta = 0.0;

  double rhs(double e) const { return (alpha * e + beta) * e + gamma; }
};

/// Heat-loss part of gamma, independent of the flow.
double heat_loss_constant(const PipeArc& pipe, const StateEquation& c = {});
/// Friction-heating coefficient k so that the friction part of gamma is k |v| v^2.
double friction_heating_factor(const PipeArc& pipe, double density = kDensity);

RiccatiCoefficients riccati_coefficients(ModelLevel level, const PipeArc& pipe, double v,
                                         const StateEquation& c = {},
                                         double density = kDensity);

/// Exact solution for inflow energy `e_in` evaluated at positions `xs`.
/// For v < 0 the inflow end is x = L.
std::vector<double> exact_energy_profile(ModelLevel level, const PipeArc& pipe, double v,
                                         double e_in, const std::vector<double>& xs,
                                         const StateEquation& c = {},
                                         double density = kDensity);

/// p(L) - p(0) for the stationary momentum equation (same at every level).
double pressure_drop(const PipeArc& pipe, double v, double density = kDensity);

/// One implicit midpoint step of length dx in flow direction.
double midpoint_energy_step(ModelLevel level, const PipeArc& pipe, double v, double e_prev,
                            double dx, const StateEquation& c = {},
                            double density = kDensity);

/// Same step for given coefficients; only |zeta| enters.
double midpoint_energy_step(const RiccatiCoefficients& rc, double e_prev, double dx);

/// Energies at all grid points x_k = k L/n, indexed by k (not by flow
/// direction). Propagation starts at x = 0 for v > 0 and at x = L for v < 0.
/// Level 3 returns the constant profile for any velocity.
std::vector<double> propagate_energy_discrete(ModelLevel level, const PipeArc& pipe, double v,
                                              double e_in, const PipeGrid& grid,
                                              const StateEquation& c = {},
                                              double density = kDensity);

}  // namespace dhn
