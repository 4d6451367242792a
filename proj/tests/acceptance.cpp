// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dhn/adaptive.hpp"
#include "dhn/errors.hpp"
#include "dhn/error_measures.hpp"
#include "dhn/generator.hpp"
#include "dhn/marking.hpp"
#include "dhn/nlp_solver.hpp"
#include "oracles.hpp"

using namespace dhn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PipeAssignment assignment(ModelLevel level, int n, int ref) {
  PipeAssignment a;
  a.level = level;
  a.grid.intervals = n;
  a.reference_intervals = ref;
  return a;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// 1: closed form against fixed-step RK4 with dx = L / 1e6.
Outcome closed_form_vs_rk4() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ein(0.2e9, 0.5e9);
  const long steps = 1000000;
  const int checkpoints = 10;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    PipeArc p = oracle::random_pipe(rng);
    double v = oracle::random_velocity(rng);
    double e_in = ein(rng);
    int level = 1 + draw % 2;
    // RK4 along the flow, sampled every L/10
    std::vector<double> ys, ref;
    double h = p.length / steps;
    double e = e_in;
    for (long i = 1; i <= steps; ++i) {
      double k1 = oracle::energy_slope(level, p, v, e);
      double k2 = oracle::energy_slope(level, p, v, e + 0.5 * h * k1);
      double k3 = oracle::energy_slope(level, p, v, e + 0.5 * h * k2);
      double k4 = oracle::energy_slope(level, p, v, e + h * k3);
      e += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (i % (steps / checkpoints) == 0) {
        ys.push_back(static_cast<double>(i) * h);
        ref.push_back(e);
      }
    }
    std::vector<double> xs;
    for (double y : ys) xs.push_back(v > 0 ? y : p.length - y);
    try {
      std::vector<double> got = exact_energy_profile(level, p, v, e_in, xs);
      for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - ref[k]) / std::abs(ref[k]));
    } catch (const Error& err) {
      return {false, fmt("draw %d threw: %s", draw, err.what())};
    }
  }
  double secs = seconds_since(t0);
  return {worst <= 1e-7 && secs < 30.0, fmt("max relative error %.3g over 100 draws (bound 1e-7), %.1f s (bound 30 s)",
                                            worst, secs)};
}

// 2: observed order of the midpoint propagation on the reference pipe.
Outcome convergence_order() {
  PipeArc p = oracle::study_pipe();
  double lo = 1e9, hi = -1e9;
  for (int level : {1, 2}) {
    for (double v : {0.5, 1.0, 2.0}) {
      std::vector<double> errs;
      for (int n : {8, 16, 32, 64}) {
        PipeGrid g;
        g.intervals = n;
        auto d = propagate_energy_discrete(level, p, v, 0.35e9, g);
        auto x = exact_energy_profile(level, p, v, 0.35e9, g.points(p));
        errs.push_back(max_abs_diff(d, x));
      }
      for (std::size_t i = 1; i < errs.size(); ++i) {
        double order = std::log2(errs[i - 1] / errs[i]);
        lo = std::min(lo, order);
        hi = std::max(hi, order);
      }
    }
  }
  return {lo >= 1.8 && hi <= 2.2, fmt("orders in [%.4f, %.4f] for n = 8..64, levels 1-2, v = 0.5/1/2 (bound [1.8, 2.2])",
                                       lo, hi)};
}

// 3: discretization estimate shrinks by 1/4 per refinement for n >= 16.
// Pairs whose estimates are within 1000 ulp of the inflow energy carry no
// measurable discretization error and are counted separately.
Outcome quarter_law() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ein(0.2e9, 0.5e9);
  double lo = 1e9, hi = -1e9;
  int pairs = 0, below_floor = 0;
  auto check_pipe = [&](const PipeArc& p, double v, double e_in, ModelLevel level) {
    PipeFlowData d{v, e_in};
    const double floor = 1000.0 * (std::nextafter(e_in, 2.0 * e_in) - e_in);
    double prev = -1.0;
    for (int n : {16, 32, 64, 128}) {
      double eta = estimate_discretization_error(p, assignment(level, n, 1), d);
      if (prev >= 0.0) {
        if (eta > floor && prev > floor) {
          double r = eta / prev;
          lo = std::min(lo, r);
          hi = std::max(hi, r);
          ++pairs;
        } else {
          ++below_floor;
        }
      }
      prev = eta;
    }
  };
  for (int level : {1, 2}) {
    for (double v : {0.5, 1.0, 2.0}) check_pipe(oracle::study_pipe(), v, 0.35e9, level);
  }
  for (int i = 0; i < 50; ++i) {
    PipeArc p = oracle::random_pipe(rng);
    double v = oracle::random_velocity(rng);
    check_pipe(p, v, ein(rng), 1 + i % 2);
  }
  return {pairs > 0 && lo >= 0.2 && hi <= 0.3,
          fmt("ratio eta_d(2n)/eta_d(n) in [%.4f, %.4f] over %d pairs on 56 pipes, n = 16..128 (bound 0.25 +- 20%%); "
              "%d pairs below the round-off floor",
              lo, hi, pairs, below_floor)};
}

// 4: exact total error below the estimate up to first order.
Outcome first_order_bound() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> ein(0.2e9, 0.5e9);
  std::uniform_int_distribution<int> lvl(1, 3);
  std::uniform_int_distribution<int> grid_exp(6, 8);
  std::uniform_int_distribution<int> ref_exp(0, 3);
  double worst = -1e9;
  double worst_ratio = 0.0;
  for (int i = 0; i < 50; ++i) {
    PipeArc p = oracle::random_pipe(rng);
    PipeFlowData d{oracle::random_velocity(rng), ein(rng)};
    ModelLevel level = lvl(rng);
    int n = 1 << grid_exp(rng);
    PipeAssignment a = assignment(level, n, 1 << ref_exp(rng));
    double eta = (estimate_model_error(p, a, d, level) + estimate_discretization_error(p, a, d)) / kJoulePerGJ;
    double nu = exact_errors(p, a, d).total / kJoulePerGJ;
    worst = std::max(worst, nu - (1.1 * eta + 1e-12));
    if (eta > 0) worst_ratio = std::max(worst_ratio, nu / eta);
  }
  return {worst <= 0.0, fmt("max nu - (1.1 eta + 1e-12) = %.3g GJ/m3, max nu/eta = %.4f on 50 pipes, dx <= L/64",
                            worst, worst_ratio)};
}

// 5: greedy marking against exhaustive enumeration.
Outcome marking_vs_enumeration() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> small(0, 4);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double eps = 1e-6, tau = 5.0;
  int failures = 0;
  std::string first;
  auto sum_of = [](const std::vector<double>& v, const PipeSet& s) {
    double t = 0.0;
    for (std::size_t i : s) t += v[i];
    return t;
  };
  auto verify = [&](const char* name, const std::vector<double>& v, const PipeSet& cand, const PipeSet& got,
                    double theta, bool cover) {
    double total = sum_of(v, cand);
    double slack = 1e-12 * std::abs(total);
    bool subset = std::all_of(got.begin(), got.end(),
                              [&](std::size_t i) { return std::find(cand.begin(), cand.end(), i) != cand.end(); });
    double s = sum_of(v, got);
    bool ineq = cover ? s >= theta * total - slack : s <= theta * total + slack;
    int best = oracle::enumerate_best(v, cand, theta, cover);
    if (!subset || !ineq || static_cast<int>(got.size()) != best) {
      if (failures++ == 0) first = fmt("%s: |S| = %zu, optimum %d", name, got.size(), best);
    }
  };
  for (int t = 0; t < 1000; ++t) {
    std::size_t m = size(rng);
    // uniform values, small integers with ties and zeros, or values around eps
    int k = kind(rng);
    std::vector<double> v(m);
    for (double& x : v) x = k == 0 ? uni(rng) : k == 1 ? small(rng) : 10 * eps * uni(rng);
    PipeSet all(m);
    for (std::size_t i = 0; i < m; ++i) all[i] = i;
    verify("R", v, all, mark_refine(v, 0.9), 0.9, true);
    verify("C", v, all, mark_coarsen(v, 0.45), 0.45, false);
    PipeSet above, below;
    for (std::size_t i = 0; i < m; ++i) {
      if (v[i] > eps) above.push_back(i);
      if (v[i] < tau * eps) below.push_back(i);
    }
    verify("U", v, above, mark_upswitch(v, eps, 0.4), 0.4, true);
    verify("D", v, below, mark_downswitch(v, tau, eps, 0.2), 0.2, false);
  }
  return {failures == 0, failures == 0 ? "R, U, C, D match enumeration on 1000 trials with up to 12 pipes"
                                       : fmt("%d mismatches, first %s", failures, first.c_str())};
}

// 6: level 3 is exact on every grid.
Outcome level3_exactness() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ein(0.2e9, 0.5e9);
  int checked = 0;
  for (int i = 0; i < 20; ++i) {
    PipeArc p = oracle::random_pipe(rng);
    PipeFlowData d{oracle::random_velocity(rng), ein(rng)};
    for (int n = 1; n <= 256; n *= 2) {
      PipeGrid g;
      g.intervals = n;
      auto prof = propagate_energy_discrete(3, p, d.velocity, d.inflow_energy, g);
      for (double e : prof) {
        if (e != d.inflow_energy) return {false, fmt("non-constant profile on n = %d", n)};
      }
      PipeAssignment a = assignment(3, n, n >= 2 ? n / 2 : 1);
      if (estimate_discretization_error(p, a, d) != 0.0) return {false, fmt("eta_d != 0 on n = %d", n)};
      if (exact_errors(p, a, d).disc != 0.0) return {false, fmt("nu_d != 0 on n = %d", n)};
      ++checked;
    }
  }
  return {true, fmt("eta_d = nu_d = 0 and constant profiles on %d pipe/grid pairs, n = 1..256", checked)};
}

struct RunCheck {
  Outcome outcome;
  std::array<std::size_t, 3> levels{};
};

RunCheck aroma_run(ErrorMode mode, bool full) {
  auto t0 = Clock::now();
  auto net = std::make_shared<const NetworkModel>(generate_network(NetworkTemplate::AromaLike, 1));
  AdaptiveConfig c;
  c.error_mode = mode;
  AdaptiveResult r;
  try {
    r = run_adaptive(net, c);
  } catch (const Error& e) {
    return {{false, fmt("run failed: %s", e.what())}, {}};
  }
  double secs = seconds_since(t0);
  RunCheck out;
  out.levels = r.log.back().level_counts;
  double avg = average_error(r.errors, mode) / kJoulePerGJ;
  bool ok = r.status == AdaptiveStatus::EpsFeasible && r.outer_iterations <= 30 && avg <= 1e-6;
  std::string detail = fmt("%s, %d outer iterations, final %s %.4g GJ/m3, levels %zu/%zu/%zu", adaptive_status_name(r.status),
                           r.outer_iterations, mode == ErrorMode::Exact ? "nu" : "eta", avg, out.levels[0],
                           out.levels[1], out.levels[2]);
  if (!full) {
    out.outcome = {ok, detail};
    return out;
  }
  double res = 0.0;
  for (const auto& [f, v] : residual_norms(r.instance, r.x)) res = std::max(res, v);
  double comp = complementarity_residual(r.instance, r.x);
  // error trace: decrease at every inner step, no decrease at outer steps, some jump up
  bool inner_decrease = true, outer_jump = false, outer_no_drop = true;
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    double prev = r.log[i - 1].avg_error, cur = r.log[i].avg_error;
    if (r.log[i].phase == Phase::Inner && !(cur < prev)) inner_decrease = false;
    if (r.log[i].phase == Phase::Outer) {
      if (cur > prev) outer_jump = true;
      if (cur < prev * (1.0 - 1e-9)) outer_no_drop = false;
    }
  }
  ok = ok && res <= 1e-6 && comp <= 1e-8 && secs < 300.0 && inner_decrease && outer_jump && outer_no_drop;
  detail += fmt("; max scaled residual %.3g, complementarity %.3g, %.1f s; trace: inner decrease %s, outer jumps %s",
                res, comp, secs, inner_decrease ? "yes" : "no", outer_jump && outer_no_drop ? "yes" : "no");
  out.outcome = {ok, detail};
  return out;
}

// 9: sufficient termination conditions for the default parameters.
Outcome termination_diagnostics() {
  NetworkModel net = generate_network(NetworkTemplate::AromaLike, 1);
  TerminationDiagnostics d = check_termination_conditions(AdaptiveConfig{}, net.pipes().size());
  bool ok = net.pipes().size() == 18 && std::abs(d.discretization_margin - 0.45) <= 1e-12 &&
            std::abs(d.model_margin + 16.4) <= 1e-12 && d.discretization_ok && !d.model_ok;
  return {ok, fmt("|A_p| = %zu, margins %.12g (holds: %s) and %.12g (holds: %s)", net.pipes().size(),
                  d.discretization_margin, d.discretization_ok ? "yes" : "no", d.model_margin,
                  d.model_ok ? "yes" : "no")};
}

// 10: analytic Jacobians and objective gradients against central differences.
Outcome derivative_audit() {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> pipes(2, 5);
  std::uniform_int_distribution<int> lvl(1, 3);
  std::uniform_int_distribution<int> nexp(0, 2);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    GeneratorOptions go;
    go.chain_pipes = pipes(rng);
    auto net = std::make_shared<const NetworkModel>(generate_network(NetworkTemplate::Chain, 100 + trial, go));
    Assignment a = uniform_assignment(*net, 3, 2);
    for (auto& pa : a) {
      pa.level = lvl(rng);
      pa.grid.intervals = 1 << nexp(rng);
      pa.reference_intervals = 1;
    }
    NlpInstance inst = assemble(net, a, std::pow(10.0, -2.0 - 6.0 * (uni(rng) + 1.0) / 2.0));
    const NlpProblem& p = inst.problem;
    Vector x = inst.to_scaled(cold_start(inst));
    for (int i = 0; i < x.size(); ++i) x[i] += 0.05 * uni(rng) * std::max(1.0, std::abs(x[i]));
    for (int k : inst.layout.flow) x[k] = 5.0 * uni(rng);

    Eigen::MatrixXd J = Eigen::MatrixXd(p.jacobian(x));
    Eigen::MatrixXd F = finite_difference_jacobian(p, x, 1e-6);
    for (int r = 0; r < J.rows(); ++r) {
      for (int c = 0; c < J.cols(); ++c) {
        double scale = std::max({1.0, std::abs(J(r, c)), std::abs(F(r, c))});
        worst = std::max(worst, std::abs(J(r, c) - F(r, c)) / scale);
      }
    }
    Vector g = p.objective_gradient(x);
    for (int c = 0; c < x.size(); ++c) {
      Vector xp = x, xm = x;
      xp[c] += 1e-6;
      xm[c] -= 1e-6;
      double fd = (p.objective(xp) - p.objective(xm)) / 2e-6;
      worst = std::max(worst, std::abs(g[c] - fd) / std::max({1.0, std::abs(g[c]), std::abs(fd)}));
    }
  }
  return {worst <= 1e-5, fmt("max relative deviation %.3g on 20 random instances (bound 1e-5)", worst)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };
  report(1, "closed-form profile vs RK4", closed_form_vs_rk4());
  report(2, "second-order discretization", convergence_order());
  report(3, "quarter law of the discretization estimate", quarter_law());
  report(4, "first-order bound", first_order_bound());
  report(5, "marking vs enumeration", marking_vs_enumeration());
  report(6, "level-3 exactness", level3_exactness());
  RunCheck est = aroma_run(ErrorMode::Estimate, true);
  report(7, "aroma-like end-to-end", est.outcome);
  RunCheck ex = aroma_run(ErrorMode::Exact, false);
  ex.outcome.detail += ex.levels == est.levels ? " (same level distribution as estimate mode)"
                                               : " (level distribution differs from estimate mode)";
  report(8, "exact-mode parity", ex.outcome);
  report(9, "termination condition diagnostics", termination_diagnostics());
  report(10, "derivative audit", derivative_audit());
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
