#include <doctest.h>

#include <cmath>
#include <random>

#include "dhn/errors.hpp"
#include "dhn/pipe_models.hpp"
#include "oracles.hpp"

using namespace dhn;

TEST_SUITE("pipe_models") {

TEST_CASE("state equation") {
  CHECK(temperature_of_energy(0.0) == doctest::Approx(274.93729));
  // direct evaluation of the quadratic
  CHECK(temperature_of_energy(0.35e9) == doctest::Approx(59.2453 * 0.35 * 0.35 + 220.536 * 0.35 + 274.93729));
  CHECK(temperature_of_energy(0.35e9) == doctest::Approx(359.38244).epsilon(1e-8));
  CHECK(temperature_of_energy(0.5e9) == doctest::Approx(400.016615).epsilon(1e-9));
  CHECK(temperature_of_energy(0.5e9) <= 403.0);
  for (double T : {323.0, 350.0, 403.0}) CHECK(temperature_of_energy(energy_of_temperature(T)) == doctest::Approx(T));
}

TEST_CASE("riccati coefficients") {
  PipeArc p = oracle::study_pipe();
  RiccatiCoefficients rc1 = riccati_coefficients(1, p, 1.0);
  CHECK(rc1.beta * rc1.beta - 4.0 * rc1.alpha * rc1.gamma > 0.0);
  CHECK(rc1.alpha < 0.0);
  CHECK(rc1.beta < 0.0);

  RiccatiCoefficients rc2 = riccati_coefficients(2, p, 1.0);
  CHECK(rc2.gamma == doctest::Approx(-(4.0 * 0.5 / 0.107) * (274.93729 - 278.0)));
  CHECK(rc2.gamma == doctest::Approx(57.24692).epsilon(1e-7));
  CHECK(rc1.gamma - rc2.gamma == doctest::Approx(0.017 / (2 * 0.107) * 997.0));

  // right-hand side agrees with the physical slope
  for (double e : {0.2e9, 0.35e9, 0.5e9}) {
    CHECK(rc1.rhs(e) / rc1.zeta == doctest::Approx(oracle::energy_slope(1, p, 1.0, e)));
  }

  PipeArc flat = p;
  flat.heat_transfer = 0.0;
  flat.friction = 0.0;
  CHECK_THROWS_AS(riccati_coefficients(1, flat, 1.0), DiscriminantViolation);
  CHECK_THROWS_AS(riccati_coefficients(1, p, 0.0), DegenerateVelocity);
}

TEST_CASE("exact profile against RK4") {
  PipeArc p = oracle::study_pipe();
  for (int level : {1, 2}) {
    double e = exact_energy_profile(level, p, 1.0, 0.35e9, {1000.0})[0];
    double ref = oracle::rk4_energy(level, p, 1.0, 0.35e9, 1000.0, 1000000);
    CHECK(std::abs(e - ref) <= 1e-8 * std::abs(ref));
  }
  auto l3 = exact_energy_profile(3, p, 1.0, 0.33e9, {0.0, 1000.0});
  CHECK(l3[0] == 0.33e9);
  CHECK(l3[1] == 0.33e9);

  double e_eq = energy_of_temperature(p.wall_temperature);
  auto flat = exact_energy_profile(2, p, 1.0, e_eq, {0.0, 250.0, 1000.0});
  for (double e : flat) CHECK(e == doctest::Approx(e_eq).epsilon(1e-12));
}

TEST_CASE("pressure drop") {
  PipeArc p = oracle::study_pipe();
  CHECK(pressure_drop(p, 0.0) == 0.0);
  CHECK(pressure_drop(p, 1.0) == doctest::Approx(-1000.0 * 0.017 / (2 * 0.107) * 997.0));
  CHECK(pressure_drop(p, 1.0) == doctest::Approx(-79200.93).epsilon(1e-7));
  CHECK(pressure_drop(p, -1.0) == doctest::Approx(-pressure_drop(p, 1.0)));
}

TEST_CASE("midpoint step") {
  PipeArc p = oracle::study_pipe();
  const double e_prev = 0.35e9;
  double e_next = midpoint_energy_step(2, p, 1.0, e_prev, 500.0);
  auto residual = [&](double en) {
    return (en - e_prev) / 500.0 - oracle::energy_slope(2, p, 1.0, 0.5 * (e_prev + en));
  };
  double ref = oracle::bisect(residual, 0.2e9, 0.4e9);
  CHECK(std::abs(e_next - ref) <= 1e-10 * ref);

  // fixed point at the level-1 equilibrium
  double e_star = oracle::bisect([&](double e) { return oracle::energy_slope(1, p, 1.0, e); }, 0.0, 0.5e9);
  CHECK(midpoint_energy_step(1, p, 1.0, e_star, 100.0) == doctest::Approx(e_star).epsilon(1e-12));

  // consistency: first-order change for small steps
  double d1 = midpoint_energy_step(1, p, 1.0, e_prev, 1.0) - e_prev;
  double d2 = midpoint_energy_step(1, p, 1.0, e_prev, 0.5) - e_prev;
  CHECK(d1 / d2 == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(d1 == doctest::Approx(oracle::energy_slope(1, p, 1.0, e_prev)).epsilon(1e-4));
}

TEST_CASE("discrete propagation") {
  PipeArc p = oracle::study_pipe();
  PipeGrid g8;
  g8.intervals = 8;
  auto c = propagate_energy_discrete(3, p, 1.0, 0.35e9, g8);
  REQUIRE(c.size() == 9);
  for (double e : c) CHECK(e == 0.35e9);

  PipeGrid g2, g4;
  g2.intervals = 2;
  g4.intervals = 4;
  auto e2 = propagate_energy_discrete(1, p, 1.0, 0.35e9, g2);
  auto e4 = propagate_energy_discrete(1, p, 1.0, 0.35e9, g4);
  double exact = exact_energy_profile(1, p, 1.0, 0.35e9, {1000.0})[0];
  double err2 = std::abs(e2[2] - exact);
  double err4 = std::abs(e4[4] - exact);
  CHECK(err2 > 0.0);
  CHECK(err2 / err4 == doctest::Approx(4.0).epsilon(0.05));

  auto fwd = propagate_energy_discrete(1, p, 1.0, 0.35e9, g8);
  auto bwd = propagate_energy_discrete(1, p, -1.0, 0.35e9, g8);
  for (int k = 0; k <= 8; ++k) CHECK(bwd[k] == doctest::Approx(fwd[8 - k]).epsilon(1e-14));
  CHECK(fwd[8] < fwd[0]);
}

TEST_CASE("random draws against RK4") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ein(0.2e9, 0.5e9);
  for (int i = 0; i < 10; ++i) {
    PipeArc p = oracle::random_pipe(rng);
    double v = oracle::random_velocity(rng);
    double e_in = ein(rng);
    int level = 1 + i % 2;
    double x_out = v > 0 ? p.length : 0.0;
    double e = exact_energy_profile(level, p, v, e_in, {x_out})[0];
    double ref = oracle::rk4_energy(level, p, v, e_in, p.length, 100000);
    CHECK(std::abs(e - ref) <= 1e-7 * std::abs(ref));
  }
}

}
