#include "dhn/nlp_assembly.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <json.hpp>

#include "dhn/errors.hpp"

namespace dhn {

namespace {

constexpr double kPressureScale = kPascalPerBar;
constexpr double kEnergyScale = kJoulePerGJ;
constexpr double kPowerScale = 1e3;  // kW

std::string bracket(const std::string& s) { return "[" + s + "]"; }

void check_assignment(const NetworkModel& net, const Assignment& assign) {
  if (assign.size() != net.pipes().size()) {
    throw AssemblyError("assignment covers " + std::to_string(assign.size()) + " pipes, network has " +
                        std::to_string(net.pipes().size()));
  }
  for (std::size_t a = 0; a < assign.size(); ++a) {
    const auto& pa = assign[a];
    const std::string& id = net.pipes()[a].id;
    if (pa.level < 1 || pa.level > 3) throw AssemblyError("pipe '" + id + "': invalid model level");
    if (pa.grid.intervals < 1) throw AssemblyError("pipe '" + id + "': grid needs at least one interval");
    if (pa.reference_intervals < 1 || pa.grid.intervals % pa.reference_intervals != 0)
      throw AssemblyError("pipe '" + id + "': reference grid is not contained in the grid");
  }
}

Term lin(double c, int i) { return {TermKind::Linear, c, i, -1}; }
Term bil(double c, int i, int j) { return {TermKind::Bilinear, c, i, j}; }
Term sq(double c, int i) { return {TermKind::Square, c, i, -1}; }
Term cst(double c) { return {TermKind::Constant, c, -1, -1}; }

}  // namespace

Assignment uniform_assignment(const NetworkModel& net, ModelLevel level, int intervals) {
  PipeAssignment pa;
  pa.level = level;
  pa.grid.intervals = intervals;
  pa.grid.index = 0;
  pa.reference_intervals = std::max(1, intervals / 2);
  return Assignment(net.pipes().size(), pa);
}

Vector NlpInstance::to_scaled(const Vector& si) const {
  Vector x(si.size());
  const auto& vars = problem.variables();
  for (int i = 0; i < si.size(); ++i) x[i] = si[i] / vars[i].scale;
  return x;
}

Vector NlpInstance::to_si(const Vector& scaled) const {
  Vector x(scaled.size());
  const auto& vars = problem.variables();
  for (int i = 0; i < scaled.size(); ++i) x[i] = scaled[i] * vars[i].scale;
  return x;
}

NlpInstance assemble(std::shared_ptr<const NetworkModel> netp, const Assignment& assign, double delta) {
  if (!netp) throw AssemblyError("no network");
  const NetworkModel& net = *netp;
  check_assignment(net, assign);
  if (delta < 0) throw AssemblyError("relaxation parameter must be nonnegative");

  NlpInstance inst;
  inst.network = netp;
  inst.assignment = assign;
  NlpProblem& P = inst.problem;
  VariableLayout& L = inst.layout;
  const double rho = net.density();
  const std::size_t nn = net.nodes().size();
  const std::size_t na = net.arc_count();
  const std::size_t np = net.pipes().size();

  // -- variables --------------------------------------------------------
  L.node_pressure.resize(nn);
  L.node_energy.resize(nn);
  for (std::size_t u = 0; u < nn; ++u) {
    const Node& node = net.nodes()[u];
    L.node_pressure[u] = P.add_variable({"p" + bracket(node.id), 0.0,
                                         node.pressure_upper / kPressureScale, kPressureScale});
    double elo = energy_of_temperature(node.temperature.lower) / kEnergyScale;
    double ehi = energy_of_temperature(node.temperature.upper) / kEnergyScale;
    L.node_energy[u] = P.add_variable({"e" + bracket(node.id), elo, ehi, kEnergyScale});
  }
  L.flow.resize(na);
  L.flow_plus.resize(na);
  L.flow_minus.resize(na);
  for (std::size_t k = 0; k < na; ++k) {
    ArcRef arc = net.arcs()[k];
    const std::string& id = net.arc_id(arc);
    Interval qb = net.arc_mass_flow(arc);
    L.flow[k] = P.add_variable({"q" + bracket(id), qb.lower, qb.upper, 1.0});
    L.flow_plus[k] = P.add_variable({"q_plus" + bracket(id), 0.0, std::max(0.0, qb.upper), 1.0});
    L.flow_minus[k] = P.add_variable({"q_minus" + bracket(id), 0.0, std::max(0.0, -qb.lower), 1.0});
  }
  L.inlet_pressure.resize(np);
  L.outlet_pressure.resize(np);
  L.pipe_energy.resize(np);
  L.tail_energy.assign(na, -1);
  L.head_energy.assign(na, -1);
  for (std::size_t a = 0; a < np; ++a) {
    const PipeArc& pipe = net.pipes()[a];
    L.inlet_pressure[a] = P.add_variable({"p0" + bracket(pipe.id), -kInf, kInf, kPressureScale});
    L.outlet_pressure[a] = P.add_variable({"pL" + bracket(pipe.id), -kInf, kInf, kPressureScale});
    const int n = assign[a].grid.intervals;
    auto& ev = L.pipe_energy[a];
    ev.assign(n + 1, -1);
    for (int k = 0; k <= n; ++k) {
      if (assign[a].level == 3 && k != 0 && k != n) continue;
      ev[k] = P.add_variable({"e" + bracket(pipe.id) + bracket(std::to_string(k)), -kInf, kInf, kEnergyScale});
    }
    std::size_t pos = net.arc_position({ArcKind::Pipe, a});
    L.tail_energy[pos] = ev.front();
    L.head_energy[pos] = ev.back();
  }
  for (std::size_t c = 0; c < net.consumers().size(); ++c) {
    const ConsumerArc& con = net.consumers()[c];
    std::size_t pos = net.arc_position({ArcKind::Consumer, c});
    L.tail_energy[pos] = P.add_variable(
        {"e_end" + bracket(con.id) + bracket(con.tail), con.e_ff_min / kEnergyScale, kInf, kEnergyScale});
    L.head_energy[pos] =
        P.add_variable({"e_end" + bracket(con.id) + bracket(con.head), -kInf, kInf, kEnergyScale});
  }
  const DepotArc& depot = net.depot();
  const std::size_t dpos = net.arc_position({ArcKind::Depot, 0});
  L.tail_energy[dpos] =
      P.add_variable({"e_end" + bracket(depot.id) + bracket(depot.tail), -kInf, kInf, kEnergyScale});
  L.head_energy[dpos] =
      P.add_variable({"e_end" + bracket(depot.id) + bracket(depot.head), -kInf, kInf, kEnergyScale});
  L.pump_power = P.add_variable(
      {"P_p", depot.pump_power.lower / kPowerScale, depot.pump_power.upper / kPowerScale, kPowerScale});
  L.waste_power = P.add_variable(
      {"P_w", depot.waste_power.lower / kPowerScale, depot.waste_power.upper / kPowerScale, kPowerScale});
  L.gas_power = P.add_variable(
      {"P_g", depot.gas_power.lower / kPowerScale, depot.gas_power.upper / kPowerScale, kPowerScale});

  // -- pipe rows --------------------------------------------------------
  for (std::size_t a = 0; a < np; ++a) {
    const PipeArc& pipe = net.pipes()[a];
    const std::size_t pos = net.arc_position({ArcKind::Pipe, a});
    const int q = L.flow[pos];
    const double area_rho = cross_section_area(pipe) * rho;

    Row mom;
    mom.family = Family::Momentum;
    mom.name = "momentum" + bracket(pipe.id);
    mom.terms = {lin(1.0, L.outlet_pressure[a]), lin(-1.0, L.inlet_pressure[a]),
                 {TermKind::AbsSquare,
                  pipe.length * friction_heating_factor(pipe, rho) / (area_rho * area_rho) / kPressureScale, q, -1}};
    if (pipe.slope != 0.0) mom.terms.push_back(cst(pipe.length * kGravity * rho * pipe.slope / kPressureScale));
    P.add_row(std::move(mom));

    const auto& ev = L.pipe_energy[a];
    const int n = assign[a].grid.intervals;
    if (assign[a].level == 3) {
      Row r;
      r.family = Family::EnergyDiscretized;
      r.name = "energy" + bracket(pipe.id);
      r.terms = {lin(1.0, ev[n]), lin(-1.0, ev[0])};
      P.add_row(std::move(r));
      continue;
    }
    const StateEquation se;
    const double hd = 4.0 * pipe.heat_transfer / pipe.diameter;
    const double alpha = -hd * se.theta2 / (se.e0 * se.e0);
    const double beta = -hd * se.theta1 / se.e0;
    const double gamma = heat_loss_constant(pipe, se);
    const double len = pipe.length;
    for (int k = 1; k <= n; ++k) {
      Row r;
      r.family = Family::EnergyDiscretized;
      r.name = "energy" + bracket(pipe.id) + bracket(std::to_string(k));
      const int ek = ev[k], ep = ev[k - 1];
      const double a2 = -len * alpha * kEnergyScale;
      r.terms = {bil(n / area_rho, q, ek),
                 bil(-n / area_rho, q, ep),
                 sq(a2 / 4.0, ek),
                 sq(a2 / 4.0, ep),
                 bil(a2 / 2.0, ek, ep),
                 lin(-len * beta / 2.0, ek),
                 lin(-len * beta / 2.0, ep),
                 cst(-len * gamma / kEnergyScale)};
      if (assign[a].level == 1) {
        double kf = friction_heating_factor(pipe, rho) / (area_rho * area_rho * area_rho);
        r.terms.push_back({TermKind::AbsCube, -len * kf / kEnergyScale, q, -1});
      }
      P.add_row(std::move(r));
    }
  }

  // -- node rows --------------------------------------------------------
  for (std::size_t u = 0; u < nn; ++u) {
    const Node& node = net.nodes()[u];
    const auto& in = net.incident_arcs(u, Direction::In);
    const auto& out = net.incident_arcs(u, Direction::Out);

    Row mass;
    mass.family = Family::MassNode;
    mass.name = "mass" + bracket(node.id);
    for (auto arc : in) mass.terms.push_back(lin(1.0, L.flow[net.arc_position(arc)]));
    for (auto arc : out) mass.terms.push_back(lin(-1.0, L.flow[net.arc_position(arc)]));
    P.add_row(std::move(mass));

    Row mix;
    mix.family = Family::MixingBalance;
    mix.name = "mixing" + bracket(node.id);
    for (auto arc : in) {
      std::size_t pos = net.arc_position(arc);
      mix.terms.push_back(bil(1.0, L.flow[pos], L.head_energy[pos]));
    }
    for (auto arc : out) {
      std::size_t pos = net.arc_position(arc);
      mix.terms.push_back(bil(-1.0, L.flow[pos], L.tail_energy[pos]));
    }
    P.add_row(std::move(mix));

    bool no_flow = true;
    for (auto arc : in) no_flow = no_flow && net.arc_mass_flow(arc) == Interval{0.0, 0.0};
    for (auto arc : out) no_flow = no_flow && net.arc_mass_flow(arc) == Interval{0.0, 0.0};
    if (no_flow) {
      inst.zero_throughflow_nodes.push_back(u);
      Row mean;
      mean.family = Family::MixingBalance;
      mean.name = "mixing-mean" + bracket(node.id);
      double w = 1.0 / static_cast<double>(in.size() + out.size());
      mean.terms.push_back(lin(1.0, L.node_energy[u]));
      for (auto arc : in) mean.terms.push_back(lin(-w, L.head_energy[net.arc_position(arc)]));
      for (auto arc : out) mean.terms.push_back(lin(-w, L.tail_energy[net.arc_position(arc)]));
      P.add_row(std::move(mean));
    }

    for (auto arc : out) {
      std::size_t pos = net.arc_position(arc);
      Row r;
      r.family = Family::MixingOut;
      r.name = "mixing-out" + bracket(node.id) + bracket(net.arc_id(arc));
      r.terms = {bil(1.0, L.flow_plus[pos], L.tail_energy[pos]), bil(-1.0, L.flow_plus[pos], L.node_energy[u])};
      P.add_row(std::move(r));
    }
    for (auto arc : in) {
      std::size_t pos = net.arc_position(arc);
      Row r;
      r.family = Family::MixingIn;
      r.name = "mixing-in" + bracket(node.id) + bracket(net.arc_id(arc));
      r.terms = {bil(1.0, L.flow_minus[pos], L.head_energy[pos]), bil(-1.0, L.flow_minus[pos], L.node_energy[u])};
      P.add_row(std::move(r));
    }
  }

  for (std::size_t a = 0; a < np; ++a) {
    const PipeArc& pipe = net.pipes()[a];
    Row r0;
    r0.family = Family::PressureContinuity;
    r0.name = "pressure-tail" + bracket(pipe.id);
    r0.terms = {lin(1.0, L.inlet_pressure[a]), lin(-1.0, L.node_pressure[net.node_index(pipe.tail)])};
    P.add_row(std::move(r0));
    Row r1;
    r1.family = Family::PressureContinuity;
    r1.name = "pressure-head" + bracket(pipe.id);
    r1.terms = {lin(1.0, L.outlet_pressure[a]), lin(-1.0, L.node_pressure[net.node_index(pipe.head)])};
    P.add_row(std::move(r1));
  }

  // -- flow split and complementarity -------------------------------------
  for (std::size_t k = 0; k < na; ++k) {
    const std::string& id = net.arc_id(net.arcs()[k]);
    Row split;
    split.family = Family::FlowSplit;
    split.name = "split" + bracket(id);
    split.terms = {lin(1.0, L.flow[k]), lin(-1.0, L.flow_plus[k]), lin(1.0, L.flow_minus[k])};
    P.add_row(std::move(split));
    Row comp;
    comp.family = Family::Complementarity;
    comp.name = "complementarity" + bracket(id);
    comp.lower = -kInf;
    comp.terms = {bil(1.0, L.flow_plus[k], L.flow_minus[k])};
    P.add_row(std::move(comp));
  }

  // -- depot ------------------------------------------------------------
  {
    const int q = L.flow[dpos];
    const int pt = L.node_pressure[net.node_index(depot.tail)];
    const int ph = L.node_pressure[net.node_index(depot.head)];
    Row stag;
    stag.family = Family::Depot;
    stag.name = "depot-stagnation";
    stag.terms = {lin(1.0, pt), cst(-depot.stagnation_pressure / kPressureScale)};
    P.add_row(std::move(stag));
    // P_p = q/rho (p_head - p_tail), in kW with pressures in bar
    const double kp = kPressureScale / rho / kPowerScale;
    Row pump;
    pump.family = Family::Depot;
    pump.name = "depot-pump";
    pump.terms = {lin(1.0, L.pump_power), bil(-kp, q, ph), bil(kp, q, pt)};
    P.add_row(std::move(pump));
    // (P_w + P_g) = q/rho (e_head - e_tail), in MW
    const double ke = kEnergyScale / rho / 1e6;
    Row heat;
    heat.family = Family::Depot;
    heat.name = "depot-heat";
    heat.terms = {lin(kPowerScale / 1e6, L.waste_power), lin(kPowerScale / 1e6, L.gas_power),
                  bil(-ke, q, L.head_energy[dpos]), bil(ke, q, L.tail_energy[dpos])};
    P.add_row(std::move(heat));
  }

  // -- consumers --------------------------------------------------------
  for (std::size_t c = 0; c < net.consumers().size(); ++c) {
    const ConsumerArc& con = net.consumers()[c];
    const std::size_t pos = net.arc_position({ArcKind::Consumer, c});
    const int q = L.flow[pos];
    const double ke = kEnergyScale / rho / 1e6;
    Row power;
    power.family = Family::Consumer;
    power.name = "consumer-power" + bracket(con.id);
    power.terms = {cst(con.demand / 1e6), bil(ke, q, L.head_energy[pos]), bil(-ke, q, L.tail_energy[pos])};
    P.add_row(std::move(power));
    Row back;
    back.family = Family::Consumer;
    back.name = "consumer-return" + bracket(con.id);
    back.terms = {lin(1.0, L.head_energy[pos]), cst(-con.e_bf / kEnergyScale)};
    P.add_row(std::move(back));
    Row dp;
    dp.family = Family::Consumer;
    dp.name = "consumer-pressure" + bracket(con.id);
    dp.lower = 0.0;
    dp.upper = kInf;
    dp.terms = {lin(1.0, L.node_pressure[net.node_index(con.tail)]),
                lin(-1.0, L.node_pressure[net.node_index(con.head)])};
    P.add_row(std::move(dp));
  }

  // -- objective: currency per hour with powers in kW ---------------------
  const auto& cost = net.costs();
  const double per_kwh = kPowerScale * 3600.0;
  P.add_objective_term(lin(cost.pump * per_kwh, L.pump_power));
  P.add_objective_term(lin(cost.waste * per_kwh, L.waste_power));
  P.add_objective_term(lin(cost.gas * per_kwh, L.gas_power));
  P.set_relaxation(delta);
  return inst;
}

double objective_value(const NlpInstance& inst, const Vector& x) {
  return inst.problem.objective(inst.to_scaled(x));
}

std::map<Family, double> residual_norms(const NlpInstance& inst, const Vector& x) {
  std::map<Family, double> out;
  for (int f = 0; f < kFamilyCount; ++f) out[static_cast<Family>(f)] = 0.0;
  Vector xs = inst.to_scaled(x);
  const NlpProblem& P = inst.problem;
  for (int r = 0; r < P.row_count(); ++r) {
    double v = P.row_violation(r, P.row_value(r, xs));
    double& slot = out[P.rows()[r].family];
    slot = std::max(slot, v);
  }
  double& bnd = out[Family::Bounds];
  for (int i = 0; i < P.variable_count(); ++i) {
    const auto& var = P.variables()[i];
    bnd = std::max({bnd, var.lower - xs[i], xs[i] - var.upper});
  }
  return out;
}

double arc_mass_flow_value(const NlpInstance& inst, const Vector& x, ArcRef arc) {
  return x[inst.layout.flow[inst.network->arc_position(arc)]];
}

std::vector<double> pipe_energy_profile(const NlpInstance& inst, const Vector& x, std::size_t pipe) {
  const auto& ev = inst.layout.pipe_energy.at(pipe);
  const int n = static_cast<int>(ev.size()) - 1;
  std::vector<double> e(n + 1);
  const double e0 = x[ev[0]], en = x[ev[n]];
  for (int k = 0; k <= n; ++k) {
    e[k] = ev[k] >= 0 ? x[ev[k]] : e0 + (en - e0) * static_cast<double>(k) / n;
  }
  return e;
}

namespace {

double interpolate(const std::vector<double>& values, double t) {
  // values on a uniform grid over [0, 1]
  const int n = static_cast<int>(values.size()) - 1;
  double s = t * n;
  int k = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
  double w = s - k;
  if (w == 0.0) return values[k];
  return values[k] * (1.0 - w) + values[k + 1] * w;
}

}  // namespace

Vector warm_start(const NlpInstance& from, const Vector& x, const NlpInstance& to) {
  if (from.network != to.network && !(*from.network == *to.network))
    throw AssemblyError("warm start between different networks");
  const NetworkModel& net = *to.network;
  const VariableLayout& A = from.layout;
  const VariableLayout& B = to.layout;
  Vector y = Vector::Zero(to.problem.variable_count());
  for (std::size_t u = 0; u < net.nodes().size(); ++u) {
    y[B.node_pressure[u]] = x[A.node_pressure[u]];
    y[B.node_energy[u]] = x[A.node_energy[u]];
  }
  for (std::size_t k = 0; k < net.arc_count(); ++k) {
    double q = x[A.flow[k]];
    y[B.flow[k]] = q;
    y[B.flow_plus[k]] = std::max(q, 0.0);
    y[B.flow_minus[k]] = std::max(-q, 0.0);
    if (net.arcs()[k].kind != ArcKind::Pipe) {
      y[B.tail_energy[k]] = x[A.tail_energy[k]];
      y[B.head_energy[k]] = x[A.head_energy[k]];
    }
  }
  for (std::size_t a = 0; a < net.pipes().size(); ++a) {
    y[B.inlet_pressure[a]] = x[A.inlet_pressure[a]];
    y[B.outlet_pressure[a]] = x[A.outlet_pressure[a]];
    std::vector<double> old = pipe_energy_profile(from, x, a);
    const auto& ev = B.pipe_energy[a];
    const int n = static_cast<int>(ev.size()) - 1;
    for (int k = 0; k <= n; ++k) {
      if (ev[k] >= 0) y[ev[k]] = interpolate(old, static_cast<double>(k) / n);
    }
  }
  y[B.pump_power] = x[A.pump_power];
  y[B.waste_power] = x[A.waste_power];
  y[B.gas_power] = x[A.gas_power];
  return y;
}

namespace {

// Adds `amount` of flow from `source` to `target` along a shortest path
// through pipes.
void route(const NetworkModel& net, std::size_t source, std::size_t target, double amount,
           std::vector<double>& pipe_flow) {
  const std::size_t nn = net.nodes().size();
  std::vector<int> via(nn, -1);
  std::vector<bool> seen(nn, false);
  std::queue<std::size_t> todo;
  todo.push(source);
  seen[source] = true;
  while (!todo.empty() && !seen[target]) {
    std::size_t u = todo.front();
    todo.pop();
    for (Direction dir : {Direction::Out, Direction::In}) {
      for (auto arc : net.incident_arcs(u, dir)) {
        if (arc.kind != ArcKind::Pipe) continue;
        std::size_t w = dir == Direction::Out ? net.arc_head(arc) : net.arc_tail(arc);
        if (seen[w]) continue;
        seen[w] = true;
        via[w] = static_cast<int>(arc.index);
        todo.push(w);
      }
    }
  }
  if (!seen[target]) return;
  std::size_t w = target;
  while (w != source) {
    const auto a = static_cast<std::size_t>(via[w]);
    ArcRef ref{ArcKind::Pipe, a};
    if (net.arc_head(ref) == w) {
      pipe_flow[a] += amount;
      w = net.arc_tail(ref);
    } else {
      pipe_flow[a] -= amount;
      w = net.arc_head(ref);
    }
  }
}

// Node pressures by BFS over pipes from `root` with pressure `p_root`.
void spread_pressure(const NetworkModel& net, std::size_t root, double p_root,
                     const std::vector<double>& pipe_flow, std::vector<double>& p,
                     std::vector<bool>& known) {
  std::queue<std::size_t> todo;
  p[root] = p_root;
  known[root] = true;
  todo.push(root);
  while (!todo.empty()) {
    std::size_t u = todo.front();
    todo.pop();
    for (Direction dir : {Direction::Out, Direction::In}) {
      for (auto arc : net.incident_arcs(u, dir)) {
        if (arc.kind != ArcKind::Pipe) continue;
        const PipeArc& pipe = net.pipes()[arc.index];
        double v = mass_flow_to_velocity(pipe, pipe_flow[arc.index], net.density());
        double drop = pressure_drop(pipe, v, net.density());
        std::size_t w = dir == Direction::Out ? net.arc_head(arc) : net.arc_tail(arc);
        if (known[w]) continue;
        p[w] = dir == Direction::Out ? p[u] + drop : p[u] - drop;
        known[w] = true;
        todo.push(w);
      }
    }
  }
}

}  // namespace

Vector cold_start(const NlpInstance& inst) {
  const NetworkModel& net = *inst.network;
  const VariableLayout& L = inst.layout;
  const double rho = net.density();
  const DepotArc& depot = net.depot();
  const std::size_t d_tail = net.node_index(depot.tail);
  const std::size_t d_head = net.node_index(depot.head);
  const std::size_t nn = net.nodes().size();

  double e_bf = 0.0, e_sup = 0.0;
  for (const auto& c : net.consumers()) {
    double e_hi = energy_of_temperature(net.nodes()[net.node_index(c.tail)].temperature.upper);
    e_sup = std::max(e_sup, c.e_ff_min + 0.5 * (e_hi - c.e_ff_min));
    e_bf = std::max(e_bf, c.e_bf);
  }
  if (net.consumers().empty()) {
    e_sup = energy_of_temperature(net.nodes()[d_head].temperature.upper);
    e_bf = energy_of_temperature(net.nodes()[d_tail].temperature.lower);
  }

  std::vector<double> pipe_flow(net.pipes().size(), 0.0);
  std::vector<double> consumer_flow(net.consumers().size(), 0.0);
  double depot_flow = 0.0;
  for (std::size_t c = 0; c < net.consumers().size(); ++c) {
    const ConsumerArc& con = net.consumers()[c];
    double q = rho * con.demand / (e_sup - con.e_bf);
    q = std::clamp(q, con.mass_flow.lower, con.mass_flow.upper);
    consumer_flow[c] = q;
    depot_flow += q;
    route(net, d_head, net.node_index(con.tail), q, pipe_flow);
    route(net, net.node_index(con.head), d_tail, q, pipe_flow);
  }
  depot_flow = std::clamp(depot_flow, depot.mass_flow.lower, depot.mass_flow.upper);
  for (std::size_t a = 0; a < pipe_flow.size(); ++a) {
    const Interval& b = net.pipes()[a].mass_flow;
    pipe_flow[a] = std::clamp(pipe_flow[a], b.lower, b.upper);
  }

  // Pressures: backward part anchored at the stagnation pressure, forward
  // part lifted until every consumer sees a nonnegative pressure drop.
  std::vector<double> p(nn, depot.stagnation_pressure);
  std::vector<bool> known(nn, false);
  spread_pressure(net, d_tail, depot.stagnation_pressure, pipe_flow, p, known);
  std::vector<double> pf(nn, 0.0);
  std::vector<bool> known_f(nn, false);
  spread_pressure(net, d_head, 0.0, pipe_flow, pf, known_f);
  double lift = 0.0;
  for (const auto& c : net.consumers()) {
    std::size_t u = net.node_index(c.tail), v = net.node_index(c.head);
    lift = std::max(lift, p[v] - pf[u] + 0.1 * kPascalPerBar);
  }
  lift = std::max(lift, depot.stagnation_pressure);
  for (std::size_t u = 0; u < nn; ++u) {
    if (known_f[u] && net.nodes()[u].part == FlowPart::Forward) p[u] = pf[u] + lift;
  }

  Vector x = Vector::Zero(inst.problem.variable_count());
  for (std::size_t u = 0; u < nn; ++u) {
    x[L.node_pressure[u]] = p[u];
    x[L.node_energy[u]] = net.nodes()[u].part == FlowPart::Forward ? e_sup : e_bf;
  }
  for (std::size_t k = 0; k < net.arc_count(); ++k) {
    ArcRef arc = net.arcs()[k];
    double q = 0.0;
    if (arc.kind == ArcKind::Pipe) q = pipe_flow[arc.index];
    else if (arc.kind == ArcKind::Consumer) q = consumer_flow[arc.index];
    else q = depot_flow;
    x[L.flow[k]] = q;
    x[L.flow_plus[k]] = std::max(q, 0.0);
    x[L.flow_minus[k]] = std::max(-q, 0.0);
  }
  for (std::size_t a = 0; a < net.pipes().size(); ++a) {
    const PipeArc& pipe = net.pipes()[a];
    x[L.inlet_pressure[a]] = p[net.node_index(pipe.tail)];
    x[L.outlet_pressure[a]] = p[net.node_index(pipe.head)];
    double e = net.nodes()[net.node_index(pipe.tail)].part == FlowPart::Forward ? e_sup : e_bf;
    for (int idx : L.pipe_energy[a]) {
      if (idx >= 0) x[idx] = e;
    }
  }
  for (std::size_t c = 0; c < net.consumers().size(); ++c) {
    std::size_t pos = net.arc_position({ArcKind::Consumer, c});
    x[L.tail_energy[pos]] = e_sup;
    x[L.head_energy[pos]] = net.consumers()[c].e_bf;
  }
  const std::size_t dpos = net.arc_position({ArcKind::Depot, 0});
  x[L.tail_energy[dpos]] = e_bf;
  x[L.head_energy[dpos]] = e_sup;

  double pump = depot_flow / rho * (p[d_head] - p[d_tail]);
  x[L.pump_power] = std::clamp(pump, depot.pump_power.lower, depot.pump_power.upper);
  double heat = depot_flow / rho * (e_sup - e_bf);
  double waste = std::clamp(heat, depot.waste_power.lower, depot.waste_power.upper);
  x[L.waste_power] = waste;
  x[L.gas_power] = std::clamp(heat - waste, depot.gas_power.lower, depot.gas_power.upper);
  return x;
}

std::string solution_to_json(const NlpInstance& inst, const Vector& x) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  const auto& vars = inst.problem.variables();
  for (std::size_t i = 0; i < vars.size(); ++i) j[vars[i].name] = x[static_cast<int>(i)];
  return j.dump(2) + "\n";
}

Vector solution_from_json(const NlpInstance& inst, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("malformed solution JSON: ") + e.what());
  }
  const auto& vars = inst.problem.variables();
  Vector x(static_cast<int>(vars.size()));
  for (std::size_t i = 0; i < vars.size(); ++i) {
    auto it = j.find(vars[i].name);
    if (it == j.end() || !it->is_number()) throw SchemaError("solution is missing '" + vars[i].name + "'");
    x[static_cast<int>(i)] = it->get<double>();
  }
  return x;
}

}  // namespace dhn
