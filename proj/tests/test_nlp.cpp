#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dhn/errors.hpp"
#include "dhn/generator.hpp"
#include "dhn/nlp_assembly.hpp"
#include "dhn/nlp_solver.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dhn;

namespace {

int count_rows(const NlpInstance& inst, const std::string& prefix) {
  int n = 0;
  for (const auto& r : inst.problem.rows()) n += r.name.rfind(prefix, 0) == 0 ? 1 : 0;
  return n;
}


// Midpoint step solved by bisection on the step residual.
double oracle_step(int level, const PipeArc& p, double v, double e_prev, double dx) {
  auto res = [&](double en) { return (en - e_prev) / dx - oracle::energy_slope(level, p, v, 0.5 * (e_prev + en)); };
  return oracle::bisect(res, 0.1e9, 0.6e9);
}

double oracle_propagate(int level, const PipeArc& p, double v, double e_in, int n) {
  double e = e_in;
  for (int k = 0; k < n; ++k) e = oracle_step(level, p, v, e, p.length / n);
  return e;
}

// Cost of operating the minimal network with consumer inflow energy e_c:
// forward pipe inverted by bisection, return pipe propagated, waste heat
// free up to 10 kW, consumer pressure drop zero.
struct ChainCost {
  double cost;
  double q;
};

ChainCost minimal_network_cost(const NetworkModel& net, int level, int n, double e_c) {
  const PipeArc& pf = net.pipes()[0];
  const PipeArc& pb = net.pipes()[1];
  const ConsumerArc& con = net.consumers()[0];
  const double rho = net.density();
  double q = con.demand * rho / (e_c - con.e_bf);
  double vf = q / (cross_section_area(pf) * rho);
  double vb = q / (cross_section_area(pb) * rho);
  double e_d = oracle::bisect([&](double e0) { return oracle_propagate(level, pf, vf, e0, n) - e_c; }, e_c, 0.6e9);
  double e_ret = oracle_propagate(level, pb, vb, con.e_bf, n);
  double heat = q / rho * (e_d - e_ret);
  double dp = pf.length * pf.friction / (2 * pf.diameter) * rho * vf * vf +
              pb.length * pb.friction / (2 * pb.diameter) * rho * vb * vb;
  double pump = q / rho * dp;
  double gas = std::max(0.0, heat - 10e3);
  return {0.0415 * gas / 1e3 + 0.165 * pump / 1e3, q};
}

}  // namespace

TEST_SUITE("assembly") {

TEST_CASE("pipe row counts") {
  auto net = fixture::minimal_network();
  Assignment a = uniform_assignment(*net, 3, 8);
  NlpInstance i3 = assemble(net, a, 0.0);
  CHECK(count_rows(i3, "momentum[pf]") == 1);
  CHECK(count_rows(i3, "energy[pf]") == 1);

  a[0].level = 1;
  a[0].grid.intervals = 4;
  a[0].reference_intervals = 2;
  NlpInstance i1 = assemble(net, a, 0.0);
  CHECK(count_rows(i1, "momentum[pf]") == 1);
  CHECK(count_rows(i1, "energy[pf]") == 4);
}

TEST_CASE("assembly is deterministic") {
  auto net = std::make_shared<const NetworkModel>(generate_network(NetworkTemplate::AromaLike, 2));
  Assignment a = uniform_assignment(*net, 2, 4);
  NlpInstance x = assemble(net, a, 1e-3);
  NlpInstance y = assemble(net, a, 1e-3);
  REQUIRE(x.problem.row_count() == y.problem.row_count());
  REQUIRE(x.problem.variable_count() == y.problem.variable_count());
  for (int r = 0; r < x.problem.row_count(); ++r) CHECK(x.problem.rows()[r].name == y.problem.rows()[r].name);
  Vector s = cold_start(x);
  CHECK((x.problem.constraints(x.to_scaled(s)) - y.problem.constraints(y.to_scaled(s))).norm() == 0.0);
}

TEST_CASE("objective") {
  auto net = fixture::minimal_network();
  NlpInstance inst = assemble(net, uniform_assignment(*net), 0.0);
  Vector x = Vector::Zero(inst.problem.variable_count());
  CHECK(objective_value(inst, x) == 0.0);
  x[inst.layout.gas_power] = 10e3;
  x[inst.layout.pump_power] = 2e3;
  x[inst.layout.waste_power] = 10e3;
  CHECK(objective_value(inst, x) == doctest::Approx(0.745));
  CHECK(objective_value(inst, 2.0 * x) == doctest::Approx(1.49));
}

TEST_CASE("residual norms") {
  auto net = fixture::minimal_network();
  NlpInstance inst = assemble(net, uniform_assignment(*net, 1, 2), 0.0);
  SolveResult r = solve(inst, nullptr, SolverOptions{});
  REQUIRE(r.status == SolveStatus::LocalOptimum);
  for (const auto& [f, v] : residual_norms(inst, r.x)) CHECK(v <= 1e-7);

  Vector bad = r.x;
  bad[inst.layout.flow[net->arc_position({ArcKind::Consumer, 0})]] += 0.5;
  CHECK(residual_norms(inst, bad).at(Family::MassNode) == doctest::Approx(0.5).epsilon(1e-9));

  NlpInstance i0 = assemble(net, uniform_assignment(*net), 0.0);
  Vector z = Vector::Zero(i0.problem.variable_count());
  z[i0.layout.flow_plus[0]] = 1.0;
  z[i0.layout.flow_minus[0]] = 1.0;
  CHECK(residual_norms(i0, z).at(Family::Complementarity) == doctest::Approx(1.0));
}

TEST_CASE("warm start transfers") {
  auto net = fixture::minimal_network();
  Assignment a2 = uniform_assignment(*net, 1, 2);
  NlpInstance from = assemble(net, a2, 0.0);
  Vector x = cold_start(from);
  const auto& ev = from.layout.pipe_energy[0];
  x[ev[0]] = 0.40e9;
  x[ev[1]] = 0.38e9;
  x[ev[2]] = 0.36e9;
  Vector same = warm_start(from, x, assemble(net, a2, 0.0));
  CHECK((same - x).norm() == 0.0);

  Assignment a4 = a2;
  a4[0].grid.intervals = 4;
  NlpInstance to = assemble(net, a4, 0.0);
  Vector y = warm_start(from, x, to);
  auto prof = pipe_energy_profile(to, y, 0);
  for (int k = 0; k <= 4; ++k) CHECK(prof[k] == doctest::Approx(0.40e9 - k * 0.01e9));

  Assignment a3 = uniform_assignment(*net, 3, 2);
  NlpInstance c3 = assemble(net, a3, 0.0);
  Vector xc = cold_start(c3);
  xc[c3.layout.pipe_energy[0][0]] = 0.37e9;
  xc[c3.layout.pipe_energy[0][2]] = 0.37e9;
  Assignment a38 = a3;
  a38[0].grid.intervals = 8;
  a38[0].level = 1;
  NlpInstance c8 = assemble(net, a38, 0.0);
  for (double e : pipe_energy_profile(c8, warm_start(c3, xc, c8), 0)) CHECK(e == 0.37e9);
}

TEST_CASE("solution json round trip") {
  auto net = fixture::minimal_network();
  NlpInstance inst = assemble(net, uniform_assignment(*net), 0.0);
  Vector x = cold_start(inst);
  Vector back = solution_from_json(inst, solution_to_json(inst, x));
  CHECK((back - x).norm() <= 1e-12 * x.norm());
}

}

TEST_SUITE("solver") {

TEST_CASE("minimal network matches the one-dimensional optimum") {
  auto net = fixture::minimal_network();
  const int n = 2;
  NlpInstance inst = assemble(net, uniform_assignment(*net, 1, n), 0.0);
  SolveResult r = solve(inst, nullptr, SolverOptions{});
  REQUIRE(r.status == SolveStatus::LocalOptimum);

  // optimum over the consumer inflow energy by scan and golden section
  const double lo = net->consumers()[0].e_ff_min, hi = energy_of_temperature(400.0);
  auto cost = [&](double e) { return minimal_network_cost(*net, 1, n, e).cost; };
  double best = lo;
  for (int i = 0; i <= 200; ++i) {
    double e = lo + (hi - lo) * i / 200.0;
    if (cost(e) < cost(best)) best = e;
  }
  double a = std::max(lo, best - (hi - lo) / 200.0), b = std::min(hi, best + (hi - lo) / 200.0);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 100; ++i) {
    double c = b - g * (b - a), d = a + g * (b - a);
    if (cost(c) < cost(d)) b = d;
    else a = c;
  }
  ChainCost ref = minimal_network_cost(*net, 1, n, 0.5 * (a + b));
  CHECK(r.objective == doctest::Approx(ref.cost).epsilon(1e-6));
  double q = arc_mass_flow_value(inst, r.x, {ArcKind::Consumer, 0});
  CHECK(q == doctest::Approx(ref.q).epsilon(1e-5));
}

TEST_CASE("excess demand is infeasible") {
  auto net = fixture::minimal_network(10000.0);
  NlpInstance inst = assemble(net, uniform_assignment(*net, 3, 2), 0.0);
  SolveResult r = solve(inst, nullptr, SolverOptions{});
  CHECK(r.status != SolveStatus::LocalOptimum);
}

TEST_CASE("restart at an optimum") {
  auto net = std::make_shared<const NetworkModel>(generate_network(NetworkTemplate::Chain, 4));
  NlpInstance inst = assemble(net, uniform_assignment(*net, 3, 2), 0.0);
  SolveResult r = solve(inst, nullptr, SolverOptions{});
  REQUIRE(r.status == SolveStatus::LocalOptimum);
  SolveResult again = solve(inst, &r.x, SolverOptions{}, nullptr, &r.duals);
  CHECK(again.status == SolveStatus::LocalOptimum);
  CHECK(again.inner_iterations <= 5);
  CHECK(again.objective == doctest::Approx(r.objective).epsilon(1e-8));
}

TEST_CASE("check_kkt on a quadratic") {
  NlpInstance inst;
  NlpProblem& p = inst.problem;
  p.add_variable({"x", -10, 10, 1.0});
  p.add_variable({"y", -10, 10, 1.0});
  // (x - 1)^2 + (y + 2)^2 without constants
  p.add_objective_term({TermKind::Square, 1.0, 0, -1});
  p.add_objective_term({TermKind::Linear, -2.0, 0, -1});
  p.add_objective_term({TermKind::Square, 1.0, 1, -1});
  p.add_objective_term({TermKind::Linear, 4.0, 1, -1});
  Vector x(2);
  x << 1.0, -2.0;
  KktReport k = check_kkt(inst, x, Vector());
  CHECK(k.stationarity <= 1e-10);
  Vector y = x;
  y[0] += 1e-3;
  CHECK(check_kkt(inst, y, Vector()).stationarity > k.stationarity);
}

TEST_CASE("active set residual") {
  CHECK(active_set_residual(2.0, 1.0, 1.0, 1e-4) == 2.0);
  CHECK(active_set_residual(2.0, 0.0, 1.0, 1e-4) == 0.0);
  CHECK(active_set_residual(-2.0, 0.0, 1.0, 1e-4) == 2.0);
  CHECK(active_set_residual(2.0, 1.0, 0.0, 1e-4) == 2.0);
  CHECK(active_set_residual(5.0, 0.0, 0.0, 1e-4) == 0.0);
}

TEST_CASE("relaxation schedule and options") {
  SolverOptions o;
  auto s = o.relaxation_schedule();
  REQUIRE(!s.empty());
  CHECK(s.front() == doctest::Approx(1e-2));
  CHECK(s.back() == doctest::Approx(1e-8));
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] < s[i - 1]);
  o.activity_tol = -1.0;
  CHECK_THROWS_AS(o.validate(), Error);
}

TEST_CASE("jacobian and hessian against finite differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    GeneratorOptions go;
    go.chain_pipes = 2 + 2 * (trial % 2);
    auto net = std::make_shared<const NetworkModel>(generate_network(NetworkTemplate::Chain, trial + 1, go));
    Assignment a = uniform_assignment(*net, 1 + trial % 3, 2);
    NlpInstance inst = assemble(net, a, 1e-4);
    const NlpProblem& p = inst.problem;
    Vector x = inst.to_scaled(cold_start(inst));
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int i = 0; i < x.size(); ++i) x[i] += noise(rng) * std::max(1.0, std::abs(x[i]));

    Eigen::MatrixXd J = Eigen::MatrixXd(p.jacobian(x));
    Eigen::MatrixXd F = finite_difference_jacobian(p, x);
    for (int r = 0; r < J.rows(); ++r) {
      for (int c = 0; c < J.cols(); ++c) {
        CHECK(std::abs(J(r, c) - F(r, c)) <= 1e-5 * std::max({1.0, std::abs(J(r, c)), std::abs(F(r, c))}));
      }
    }

    // Hessian of the Lagrangian from central differences of its gradient
    Vector w = Vector::Random(p.row_count());
    Eigen::MatrixXd H = Eigen::MatrixXd(p.lagrangian_hessian(x, 1.0, w));
    auto grad = [&](const Vector& z) -> Vector {
      return p.objective_gradient(z) + Eigen::MatrixXd(p.jacobian(z)).transpose() * w;
    };
    const double h = 1e-6;
    for (int c = 0; c < x.size(); ++c) {
      Vector xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      Vector col = (grad(xp) - grad(xm)) / (2 * h);
      for (int r = 0; r < x.size(); ++r) {
        CHECK(std::abs(H(r, c) - col[r]) <= 1e-5 * std::max({1.0, std::abs(H(r, c)), std::abs(col[r])}));
      }
    }
  }
}

}
