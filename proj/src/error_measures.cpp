#include "dhn/error_measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dhn/errors.hpp"

namespace dhn {

ErrorMode parse_error_mode(std::string_view name) {
  if (name == "estimate") return ErrorMode::Estimate;
  if (name == "exact") return ErrorMode::Exact;
  throw Error("unknown error mode '" + std::string(name) + "' (expected estimate or exact)");
}

const char* error_mode_name(ErrorMode mode) { return mode == ErrorMode::Exact ? "exact" : "estimate"; }

PipeFlowData pipe_flow_data(const NlpInstance& inst, const Vector& x, std::size_t pipe) {
  const NetworkModel& net = *inst.network;
  const PipeArc& p = net.pipes().at(pipe);
  double q = arc_mass_flow_value(inst, x, ArcRef{ArcKind::Pipe, pipe});
  PipeFlowData d;
  d.velocity = mass_flow_to_velocity(p, q, net.density());
  const auto& ev = inst.layout.pipe_energy.at(pipe);
  d.inflow_energy = d.velocity >= 0 ? x[ev.front()] : x[ev.back()];
  return d;
}

namespace {

void check_reference(const PipeArc& pipe, const PipeAssignment& a) {
  if (a.reference_intervals < 1 || a.grid.intervals % a.reference_intervals != 0) {
    throw Error("pipe '" + pipe.id + "': grid with " + std::to_string(a.grid.intervals) +
                " intervals does not contain the reference grid with " +
                std::to_string(a.reference_intervals));
  }
}

bool no_flow(const PipeFlowData& d) { return std::abs(d.velocity) <= kMinVelocity; }

// Values of a profile on n intervals at the reference points.
std::vector<double> on_reference(const std::vector<double>& profile, int reference_intervals) {
  const int n = static_cast<int>(profile.size()) - 1;
  const int stride = n / reference_intervals;
  std::vector<double> out;
  out.reserve(reference_intervals + 1);
  for (int k = 0; k <= n; k += stride) out.push_back(profile[k]);
  return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> discrete_on_reference(ModelLevel level, const PipeArc& pipe, const PipeAssignment& a,
                                          int intervals, const PipeFlowData& d, const ErrorContext& ctx) {
  PipeGrid g;
  g.intervals = intervals;
  return on_reference(propagate_energy_discrete(level, pipe, d.velocity, d.inflow_energy, g, ctx.state,
                                                ctx.density),
                      a.reference_intervals);
}

std::vector<double> exact_on_reference(ModelLevel level, const PipeArc& pipe, const PipeAssignment& a,
                                       const PipeFlowData& d, const ErrorContext& ctx) {
  return exact_energy_profile(level, pipe, d.velocity, d.inflow_energy, reference_points(pipe, a), ctx.state,
                              ctx.density);
}

}  // namespace

std::vector<double> reference_points(const PipeArc& pipe, const PipeAssignment& assign) {
  PipeGrid g;
  g.intervals = assign.reference_intervals;
  return g.points(pipe);
}

double estimate_model_error(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                            ModelLevel level, const ErrorContext& ctx) {
  check_reference(pipe, assign);
  if (level == 1 || no_flow(data)) return 0.0;
  const int n = assign.grid.intervals;
  return max_diff(discrete_on_reference(1, pipe, assign, n, data, ctx),
                  discrete_on_reference(level, pipe, assign, n, data, ctx));
}

double estimate_discretization_error(const PipeArc& pipe, const PipeAssignment& assign,
                                     const PipeFlowData& data, const ErrorContext& ctx) {
  check_reference(pipe, assign);
  if (assign.level == 3 || no_flow(data)) return 0.0;
  const int n = assign.grid.intervals;
  if (n % 2 == 0 && (n / 2) % assign.reference_intervals == 0) {
    return max_diff(discrete_on_reference(assign.level, pipe, assign, n, data, ctx),
                    discrete_on_reference(assign.level, pipe, assign, n / 2, data, ctx));
  }
  return 4.0 * max_diff(discrete_on_reference(assign.level, pipe, assign, 2 * n, data, ctx),
                        discrete_on_reference(assign.level, pipe, assign, n, data, ctx));
}

ExactErrors exact_errors(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                         const ErrorContext& ctx) {
  check_reference(pipe, assign);
  ExactErrors out;
  if (no_flow(data)) return out;
  std::vector<double> e1 = exact_on_reference(1, pipe, assign, data, ctx);
  std::vector<double> el = assign.level == 1 ? e1 : exact_on_reference(assign.level, pipe, assign, data, ctx);
  std::vector<double> disc = discrete_on_reference(assign.level, pipe, assign, assign.grid.intervals, data, ctx);
  out.total = max_diff(e1, disc);
  out.model = max_diff(e1, el);
  out.disc = max_diff(el, disc);
  return out;
}

double exact_model_error(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                         ModelLevel level, const ErrorContext& ctx) {
  check_reference(pipe, assign);
  if (level == 1 || no_flow(data)) return 0.0;
  return max_diff(exact_on_reference(1, pipe, assign, data, ctx),
                  exact_on_reference(level, pipe, assign, data, ctx));
}

double model_error_under_level(const PipeArc& pipe, const PipeAssignment& assign, const PipeFlowData& data,
                               ModelLevel level, ErrorMode mode, const ErrorContext& ctx) {
  if (mode == ErrorMode::Exact) return exact_model_error(pipe, assign, data, level, ctx);
  return estimate_model_error(pipe, assign, data, level, ctx);
}

ErrorReport compute_errors(const NlpInstance& inst, const Vector& x, ErrorMode mode) {
  const NetworkModel& net = *inst.network;
  ErrorContext ctx;
  ctx.density = net.density();
  ErrorReport rep;
  rep.mode = mode;
  rep.pipes.resize(net.pipes().size());
  rep.inflow.resize(net.pipes().size());
  for (std::size_t a = 0; a < net.pipes().size(); ++a) {
    const PipeArc& pipe = net.pipes()[a];
    const PipeAssignment& pa = inst.assignment.at(a);
    PipeFlowData d = pipe_flow_data(inst, x, a);
    PipeError& pe = rep.pipes[a];
    pe.model = estimate_model_error(pipe, pa, d, pa.level, ctx);
    pe.disc = estimate_discretization_error(pipe, pa, d, ctx);
    pe.total = pe.model + pe.disc;
    if (mode == ErrorMode::Exact) {
      ExactErrors ex = exact_errors(pipe, pa, d, ctx);
      pe.exact_model = ex.model;
      pe.exact_disc = ex.disc;
      pe.exact_total = ex.total;
    }
    rep.inflow[a] = d;
  }
  return rep;
}

double average_error(const std::vector<double>& totals) {
  if (totals.empty()) throw Error("average error over an empty pipe set");
  return std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(totals.size());
}

double average_error(const ErrorReport& report, ErrorMode kind) {
  if (kind == ErrorMode::Exact && report.mode != ErrorMode::Exact) {
    throw Error("report holds no exact error measures");
  }
  std::vector<double> t;
  t.reserve(report.pipes.size());
  for (const auto& p : report.pipes) t.push_back(p.total_for(kind));
  return average_error(t);
}

double predict_error_after_grid_change(double disc_error, GridChange change) {
  if (disc_error < 0) throw Error("discretization error must be non-negative");
  return change == GridChange::Refine ? disc_error / 4.0 : disc_error * 4.0;
}

}  // namespace dhn
