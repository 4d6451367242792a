#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dhn/error_measures.hpp"
#include "dhn/errors.hpp"
#include "dhn/nlp_solver.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dhn;

namespace {

PipeAssignment assignment(ModelLevel level, int n, int ref) {
  PipeAssignment a;
  a.level = level;
  a.grid.intervals = n;
  a.reference_intervals = ref;
  return a;
}

double oracle_step(int level, const PipeArc& p, double v, double e_prev, double dx) {
  auto res = [&](double en) { return (en - e_prev) / dx - oracle::energy_slope(level, p, v, 0.5 * (e_prev + en)); };
  return oracle::bisect(res, 0.1e9, 0.6e9);
}

const PipeFlowData kStudyFlow{1.0, 0.35e9};

}  // namespace

TEST_SUITE("error_measures") {

TEST_CASE("model error estimate") {
  PipeArc p = oracle::study_pipe();
  CHECK(estimate_model_error(p, assignment(1, 8, 4), kStudyFlow, 1) == 0.0);

  // level 3 on n = 2: the level-1 propagation after two midpoint steps
  double e1 = oracle_step(1, p, 1.0, 0.35e9, 500.0);
  e1 = oracle_step(1, p, 1.0, e1, 500.0);
  double eta3 = estimate_model_error(p, assignment(3, 2, 1), kStudyFlow, 3);
  CHECK(eta3 == doctest::Approx(std::abs(e1 - 0.35e9)).epsilon(1e-9));

  double eta2 = estimate_model_error(p, assignment(2, 2, 1), kStudyFlow, 2);
  CHECK(eta2 > 0.0);
  CHECK(eta2 <= eta3);
  CHECK(estimate_model_error(p, assignment(3, 2, 1), PipeFlowData{1e-7, 0.35e9}, 3) == 0.0);
}

TEST_CASE("discretization error estimate") {
  PipeArc p = oracle::study_pipe();
  CHECK(estimate_discretization_error(p, assignment(3, 8, 1), kStudyFlow) == 0.0);
  double d8 = estimate_discretization_error(p, assignment(1, 8, 1), kStudyFlow);
  double d16 = estimate_discretization_error(p, assignment(1, 16, 1), kStudyFlow);
  CHECK(d8 > 0.0);
  CHECK(d8 / d16 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(estimate_discretization_error(p, assignment(1, 8, 1), PipeFlowData{0.0, 0.35e9}) == 0.0);

  // direct comparison of n and n/2 on the reference points
  PipeGrid g8, g4;
  g8.intervals = 8;
  g4.intervals = 4;
  auto e8 = propagate_energy_discrete(1, p, 1.0, 0.35e9, g8);
  auto e4 = propagate_energy_discrete(1, p, 1.0, 0.35e9, g4);
  double expect = std::max(std::abs(e8[4] - e4[2]), std::abs(e8[8] - e4[4]));
  CHECK(estimate_discretization_error(p, assignment(1, 8, 2), kStudyFlow) == doctest::Approx(expect));

  // grid equal to the reference grid: extrapolated from the refined pair
  PipeGrid g2;
  g2.intervals = 2;
  auto e2 = propagate_energy_discrete(1, p, 1.0, 0.35e9, g2);
  double extra = 4.0 * std::max(std::abs(e4[2] - e2[1]), std::abs(e4[4] - e2[2]));
  CHECK(estimate_discretization_error(p, assignment(1, 2, 2), kStudyFlow) == doctest::Approx(extra));

  CHECK_THROWS_AS(estimate_discretization_error(p, assignment(1, 6, 4), kStudyFlow), Error);
}

TEST_CASE("exact errors") {
  PipeArc p = oracle::study_pipe();
  ExactErrors l1 = exact_errors(p, assignment(1, 8, 4), kStudyFlow);
  CHECK(l1.model == 0.0);
  CHECK(l1.total == doctest::Approx(l1.disc));
  CHECK(l1.disc > 0.0);

  ExactErrors l2 = exact_errors(p, assignment(2, 64, 4), kStudyFlow);
  CHECK(l2.total <= l2.model + l2.disc + 1e-6);

  // level 3: the exact level-1 deviation from e_in over the reference grid
  PipeAssignment a3 = assignment(3, 4, 2);
  double nu_m = 0.0;
  for (double x : reference_points(p, a3)) {
    nu_m = std::max(nu_m, std::abs(oracle::rk4_energy(1, p, 1.0, 0.35e9, x, 200000) - 0.35e9));
  }
  ExactErrors l3 = exact_errors(p, a3, kStudyFlow);
  CHECK(l3.model == doctest::Approx(nu_m).epsilon(1e-7));
  CHECK(l3.disc == 0.0);
}

TEST_CASE("model error under a candidate level") {
  PipeArc p = oracle::study_pipe();
  PipeAssignment a3 = assignment(3, 4, 2);
  for (ErrorMode m : {ErrorMode::Estimate, ErrorMode::Exact}) {
    CHECK(model_error_under_level(p, a3, kStudyFlow, 1, m) == 0.0);
    double at3 = model_error_under_level(p, a3, kStudyFlow, 3, m);
    CHECK(model_error_under_level(p, a3, kStudyFlow, 2, m) < at3);
  }
  CHECK(model_error_under_level(p, a3, kStudyFlow, 3, ErrorMode::Estimate) ==
        estimate_model_error(p, a3, kStudyFlow, 3));
}

TEST_CASE("average error and grid prediction") {
  CHECK(average_error(std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(average_error(std::vector<double>{1e-7, 3e-7}) == doctest::Approx(2e-7));
  CHECK_THROWS_AS(average_error(std::vector<double>{}), Error);
  CHECK(predict_error_after_grid_change(0.8, GridChange::Refine) == doctest::Approx(0.2));
  CHECK(predict_error_after_grid_change(0.2, GridChange::Coarsen) == doctest::Approx(0.8));
  CHECK(predict_error_after_grid_change(predict_error_after_grid_change(0.3, GridChange::Refine),
                                        GridChange::Coarsen) == doctest::Approx(0.3));
  CHECK_THROWS_AS(predict_error_after_grid_change(-1.0, GridChange::Refine), Error);
  CHECK(parse_error_mode("exact") == ErrorMode::Exact);
  CHECK_THROWS_AS(parse_error_mode("both"), Error);
}

TEST_CASE("errors of a solved instance") {
  auto net = fixture::minimal_network();
  NlpInstance inst = assemble(net, uniform_assignment(*net, 2, 4), 0.0);
  SolveResult r = solve(inst, nullptr, SolverOptions{});
  REQUIRE(r.status == SolveStatus::LocalOptimum);
  ErrorReport rep = compute_errors(inst, r.x, ErrorMode::Exact);
  REQUIRE(rep.pipes.size() == 2);
  for (std::size_t a = 0; a < 2; ++a) {
    PipeFlowData d = pipe_flow_data(inst, r.x, a);
    CHECK(d.velocity > 0.0);
    CHECK(d.inflow_energy == r.x[inst.layout.pipe_energy[a].front()]);
    const PipeArc& p = net->pipes()[a];
    CHECK(rep.pipes[a].model == doctest::Approx(estimate_model_error(p, inst.assignment[a], d, 2)));
    CHECK(rep.pipes[a].total == doctest::Approx(rep.pipes[a].model + rep.pipes[a].disc));
    CHECK(rep.pipes[a].exact_total > 0.0);
  }
  CHECK(average_error(rep, ErrorMode::Estimate) ==
        doctest::Approx((rep.pipes[0].total + rep.pipes[1].total) / 2.0));
  ErrorReport est = compute_errors(inst, r.x, ErrorMode::Estimate);
  CHECK_THROWS_AS(average_error(est, ErrorMode::Exact), Error);
}

}
