#include "dhn/pipe_models.hpp"

#include <cmath>
#include <sstream>

#include "dhn/errors.hpp"
#include "dhn/log.hpp"

namespace dhn {

namespace {

void check_level(ModelLevel level) {
  if (level < 1 || level > 3) throw Error("model level must be 1, 2 or 3, got " + std::to_string(level));
}

void warn_range(double e) {
  if ((e < kStateValidLower || e > kStateValidUpper) && log::level() >= log::Level::Info) {
    std::ostringstream os;
    os << "energy density " << e << " J/m^3 outside the state equation validity range";
    log::info(os.str());
  }
}

}  // namespace

double temperature_of_energy(double e, const StateEquation& c) {
  warn_range(e);
  double r = e / c.e0;
  return (c.theta2 * r + c.theta1) * r + c.theta0;
}

double energy_of_temperature(double T, const StateEquation& c) {
  // theta2 r^2 + theta1 r + (theta0 - T) = 0, increasing branch
  double cc = c.theta0 - T;
  double disc = c.theta1 * c.theta1 - 4.0 * c.theta2 * cc;
  if (disc < 0) throw NoRealRoot("temperature below the state equation's minimum");
  double r = (-2.0 * cc) / (c.theta1 + std::sqrt(disc));
  return r * c.e0;
}

std::vector<double> PipeGrid::points(const PipeArc& pipe) const {
  std::vector<double> xs(intervals + 1);
  for (int k = 0; k <= intervals; ++k) xs[k] = k == intervals ? pipe.length : k * step(pipe);
  return xs;
}

double heat_loss_constant(const PipeArc& pipe, const StateEquation& c) {
  return -(4.0 * pipe.heat_transfer / pipe.diameter) * (c.theta0 - pipe.wall_temperature);
}

double friction_heating_factor(const PipeArc& pipe, double density) {
  return pipe.friction / (2.0 * pipe.diameter) * density;
}

namespace {

// Coefficients without the closed-form condition; the midpoint rule does not need it.
RiccatiCoefficients ode_coefficients(ModelLevel level, const PipeArc& pipe, double v, const StateEquation& c,
                                     double density) {
  check_level(level);
  if (level == 3) throw Error("model level 3 has no energy ODE");
  if (std::abs(v) <= kMinVelocity) {
    std::ostringstream os;
    os << "pipe '" << pipe.id << "': velocity " << v << " m/s below the no-flow threshold";
    throw DegenerateVelocity(os.str());
  }
  RiccatiCoefficients rc;
  double hd = 4.0 * pipe.heat_transfer / pipe.diameter;
  rc.alpha = -hd * c.theta2 / (c.e0 * c.e0);
  rc.beta = -hd * c.theta1 / c.e0;
  rc.gamma = heat_loss_constant(pipe, c);
  if (level == 1) rc.gamma += friction_heating_factor(pipe, density) * std::abs(v) * v * v;
  rc.zeta = v;
  return rc;
}

}  // namespace

RiccatiCoefficients riccati_coefficients(ModelLevel level, const PipeArc& pipe, double v,
                                         const StateEquation& c, double density) {
  RiccatiCoefficients rc = ode_coefficients(level, pipe, v, c, density);
  if (!(4.0 * rc.alpha * rc.gamma - rc.beta * rc.beta < 0.0)) {
    throw DiscriminantViolation("pipe '" + pipe.id + "': closed-form condition 4*alpha*gamma < beta^2 violated");
  }
  return rc;
}

std::vector<double> exact_energy_profile(ModelLevel level, const PipeArc& pipe, double v,
                                         double e_in, const std::vector<double>& xs,
                                         const StateEquation& c, double density) {
  check_level(level);
  if (level == 3) return std::vector<double>(xs.size(), e_in);

  RiccatiCoefficients rc = riccati_coefficients(level, pipe, v, c, density);
  double zeta = std::abs(rc.zeta);
  double s = std::sqrt(rc.beta * rc.beta - 4.0 * rc.alpha * rc.gamma);
  // Roots of alpha e^2 + beta e + gamma without cancellation; delta below is their signed gap.
  double q = -0.5 * (rc.beta + std::copysign(s, rc.beta));
  double root_a = q / rc.alpha;
  double root_b = rc.gamma / q;
  double r_minus = rc.alpha < 0 ? std::max(root_a, root_b) : std::min(root_a, root_b);
  double delta = s / rc.alpha;
  double d = e_in - r_minus;
  double ratio = d / delta;

  auto denominator = [&](double y) {
    double t = y * s / zeta;
    return std::exp(t) - ratio * std::expm1(t);
  };
  // The denominator is monotone in y; a sign change inside [0, L] is a pole.
  double g_end = denominator(pipe.length);
  if (!(g_end > 0.0) || !std::isfinite(g_end)) {
    throw PoleEncountered("pipe '" + pipe.id + "': closed-form solution has a pole inside the pipe");
  }

  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) {
    double y = v > 0 ? x : pipe.length - x;
    if (y == 0.0) {
      out.push_back(e_in);
      continue;
    }
    double g = denominator(y);
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw PoleEncountered("pipe '" + pipe.id + "': closed-form solution has a pole");
    }
    out.push_back(r_minus + d / g);
  }
  return out;
}

double pressure_drop(const PipeArc& pipe, double v, double density) {
  return -pipe.length * (pipe.friction / (2.0 * pipe.diameter) * density * std::abs(v) * v +
                         kGravity * density * pipe.slope);
}

double midpoint_energy_step(const RiccatiCoefficients& rc, double e_prev, double dx) {
  double z = std::abs(rc.zeta);
  if (z <= kMinVelocity) throw DegenerateVelocity("midpoint step with vanishing velocity");
  if (!(dx > 0)) throw Error("midpoint step needs a positive step size");
  // Unknown d = (e_next - e_prev)/2:  A d^2 + B d + C = 0 with C = f(e_prev).
  // The increment form avoids cancelling the large 2 z e_prev / dx terms.
  double A = rc.alpha;
  double B = 2.0 * rc.alpha * e_prev + rc.beta - 2.0 * z / dx;
  double C = (rc.alpha * e_prev + rc.beta) * e_prev + rc.gamma;

  double d;
  if (C == 0.0) {
    d = 0.0;
  } else if (A == 0.0) {
    if (B == 0.0) throw NoRealRoot("degenerate midpoint step");
    d = -C / B;
  } else {
    double disc = B * B - 4.0 * A * C;
    if (disc < 0) throw NoRealRoot("midpoint step has no real root");
    double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
    if (q == 0.0) throw NoRealRoot("degenerate midpoint step");
    // the root of smaller magnitude is the branch through e_prev
    d = C / q;
  }
  for (int it = 0; it < 2; ++it) {
    double g = (A * d + B) * d + C;
    double dg = 2.0 * A * d + B;
    if (dg == 0.0) break;
    double dn = d - g / dg;
    double gn = (A * dn + B) * dn + C;
    if (std::abs(gn) < std::abs(g)) d = dn;
    else break;
  }
  return e_prev + 2.0 * d;
}

double midpoint_energy_step(ModelLevel level, const PipeArc& pipe, double v, double e_prev,
                            double dx, const StateEquation& c, double density) {
  return midpoint_energy_step(ode_coefficients(level, pipe, v, c, density), e_prev, dx);
}

std::vector<double> propagate_energy_discrete(ModelLevel level, const PipeArc& pipe, double v,
                                              double e_in, const PipeGrid& grid,
                                              const StateEquation& c, double density) {
  check_level(level);
  if (grid.intervals < 1) throw Error("grid needs at least one interval");
  const int n = grid.intervals;
  std::vector<double> e(n + 1, e_in);
  if (level == 3) return e;

  RiccatiCoefficients rc = ode_coefficients(level, pipe, v, c, density);
  double dx = grid.step(pipe);
  int k = 0;
  try {
    if (v > 0) {
      for (k = 1; k <= n; ++k) e[k] = midpoint_energy_step(rc, e[k - 1], dx);
    } else {
      for (k = n - 1; k >= 0; --k) e[k] = midpoint_energy_step(rc, e[k + 1], dx);
    }
  } catch (const Error& err) {
    throw PropagationError("pipe '" + pipe.id + "': propagation failed at grid index " +
                               std::to_string(k) + ": " + err.what(),
                           k);
  }
  return e;
}

}  // namespace dhn
