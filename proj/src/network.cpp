#include "dhn/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dhn/errors.hpp"

namespace dhn {

using nlohmann::json;

std::string_view to_string(FlowPart part) {
  return part == FlowPart::Forward ? "forward" : "backward";
}

NetworkModel::NetworkModel(std::vector<Node> nodes, std::vector<PipeArc> pipes,
                           std::vector<ConsumerArc> consumers, DepotArc depot,
                           CostParameters costs, double density)
    : nodes_(std::move(nodes)),
      pipes_(std::move(pipes)),
      consumers_(std::move(consumers)),
      depot_(std::move(depot)),
      costs_(costs),
      density_(density) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_index_.emplace(nodes_[i].id, i).second)
      throw GraphError("duplicate node id '" + nodes_[i].id + "'");
  }
  validate();
  build_incidence();
}

std::size_t NetworkModel::node_index(std::string_view id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) throw UnknownNode("unknown node '" + std::string(id) + "'");
  return it->second;
}

bool NetworkModel::has_node(std::string_view id) const {
  return node_index_.find(id) != node_index_.end();
}

const std::string& NetworkModel::arc_id(ArcRef arc) const {
  switch (arc.kind) {
    case ArcKind::Pipe: return pipes_[arc.index].id;
    case ArcKind::Consumer: return consumers_[arc.index].id;
    case ArcKind::Depot: break;
  }
  return depot_.id;
}

std::size_t NetworkModel::arc_position(ArcRef arc) const {
  switch (arc.kind) {
    case ArcKind::Pipe: return arc.index;
    case ArcKind::Consumer: return pipes_.size() + arc.index;
    case ArcKind::Depot: break;
  }
  return pipes_.size() + consumers_.size();
}

std::size_t NetworkModel::arc_tail(ArcRef arc) const { return tail_index_[arc_position(arc)]; }
std::size_t NetworkModel::arc_head(ArcRef arc) const { return head_index_[arc_position(arc)]; }

Interval NetworkModel::arc_mass_flow(ArcRef arc) const {
  switch (arc.kind) {
    case ArcKind::Pipe: return pipes_[arc.index].mass_flow;
    case ArcKind::Consumer: return consumers_[arc.index].mass_flow;
    case ArcKind::Depot: break;
  }
  return depot_.mass_flow;
}

const std::vector<ArcRef>& NetworkModel::incident_arcs(std::size_t node, Direction dir) const {
  return dir == Direction::In ? in_arcs_.at(node) : out_arcs_.at(node);
}

bool NetworkModel::operator==(const NetworkModel& other) const {
  return nodes_ == other.nodes_ && pipes_ == other.pipes_ && consumers_ == other.consumers_ &&
         depot_ == other.depot_ && costs_ == other.costs_ && density_ == other.density_;
}

void NetworkModel::validate() const {
  if (nodes_.empty()) throw GraphError("network has no nodes");
  if (!(density_ > 0)) throw GraphError("density must be positive");

  std::set<std::string> arc_ids;
  auto check_arc = [&](const std::string& id, const std::string& tail, const std::string& head,
                       const Interval& flow) {
    if (!arc_ids.insert(id).second) throw GraphError("duplicate arc id '" + id + "'");
    if (!has_node(tail)) throw UnknownNode("arc '" + id + "': unknown tail node '" + tail + "'");
    if (!has_node(head)) throw UnknownNode("arc '" + id + "': unknown head node '" + head + "'");
    if (tail == head) throw GraphError("arc '" + id + "' is a self loop");
    if (flow.empty()) throw GraphError("arc '" + id + "': empty mass flow interval");
  };

  for (const auto& n : nodes_) {
    if (!(n.pressure_upper > 0)) throw GraphError("node '" + n.id + "': pressure upper bound must be positive");
    if (n.temperature.empty()) throw GraphError("node '" + n.id + "': empty temperature interval");
  }
  for (const auto& p : pipes_) {
    check_arc(p.id, p.tail, p.head, p.mass_flow);
    if (!(p.length > 0)) throw GraphError("pipe '" + p.id + "': length must be positive");
    if (!(p.diameter > 0)) throw GraphError("pipe '" + p.id + "': diameter must be positive");
    if (!(p.friction > 0)) throw GraphError("pipe '" + p.id + "': friction must be positive");
    if (!(p.heat_transfer >= 0)) throw GraphError("pipe '" + p.id + "': heat transfer must be nonnegative");
    if (nodes_[node_index(p.tail)].part != nodes_[node_index(p.head)].part)
      throw GraphError("pipe '" + p.id + "' connects different flow parts");
  }
  for (const auto& c : consumers_) {
    check_arc(c.id, c.tail, c.head, c.mass_flow);
    if (nodes_[node_index(c.tail)].part != FlowPart::Forward ||
        nodes_[node_index(c.head)].part != FlowPart::Backward)
      throw GraphError("consumer '" + c.id + "': consumer must cross flow parts");
    if (!(c.e_ff_min > c.e_bf))
      throw GraphError("consumer '" + c.id + "': e_ff_min must exceed e_bf");
  }
  if (depot_.id.empty()) throw GraphError("network has no depot");
  check_arc(depot_.id, depot_.tail, depot_.head, depot_.mass_flow);
  if (nodes_[node_index(depot_.tail)].part != FlowPart::Backward ||
      nodes_[node_index(depot_.head)].part != FlowPart::Forward)
    throw GraphError("depot '" + depot_.id + "': depot must lead from backward to forward flow");
  for (const Interval* iv : {&depot_.pump_power, &depot_.waste_power, &depot_.gas_power}) {
    if (iv->empty() || iv->lower < 0)
      throw GraphError("depot '" + depot_.id + "': power bounds must lie in [0, inf)");
  }
  if (costs_.pump < 0 || costs_.waste < 0 || costs_.gas < 0)
    throw GraphError("costs must be nonnegative");

  // undirected connectivity
  std::vector<std::vector<std::size_t>> adj(nodes_.size());
  auto link = [&](const std::string& a, const std::string& b) {
    auto i = node_index(a), j = node_index(b);
    adj[i].push_back(j);
    adj[j].push_back(i);
  };
  for (const auto& p : pipes_) link(p.tail, p.head);
  for (const auto& c : consumers_) link(c.tail, c.head);
  link(depot_.tail, depot_.head);
  std::vector<bool> seen(nodes_.size(), false);
  std::queue<std::size_t> todo;
  todo.push(0);
  seen[0] = true;
  while (!todo.empty()) {
    auto u = todo.front();
    todo.pop();
    for (auto w : adj[u]) {
      if (!seen[w]) {
        seen[w] = true;
        todo.push(w);
      }
    }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!seen[i]) throw GraphError("network is disconnected at node '" + nodes_[i].id + "'");
  }
}

void NetworkModel::build_incidence() {
  arcs_.clear();
  for (std::size_t i = 0; i < pipes_.size(); ++i) arcs_.push_back({ArcKind::Pipe, i});
  for (std::size_t i = 0; i < consumers_.size(); ++i) arcs_.push_back({ArcKind::Consumer, i});
  arcs_.push_back({ArcKind::Depot, 0});

  in_arcs_.assign(nodes_.size(), {});
  out_arcs_.assign(nodes_.size(), {});
  tail_index_.clear();
  head_index_.clear();
  for (const auto& a : arcs_) {
    std::size_t t, h;
    switch (a.kind) {
      case ArcKind::Pipe:
        t = node_index(pipes_[a.index].tail);
        h = node_index(pipes_[a.index].head);
        break;
      case ArcKind::Consumer:
        t = node_index(consumers_[a.index].tail);
        h = node_index(consumers_[a.index].head);
        break;
      default:
        t = node_index(depot_.tail);
        h = node_index(depot_.head);
    }
    tail_index_.push_back(t);
    head_index_.push_back(h);
    out_arcs_[t].push_back(a);
    in_arcs_[h].push_back(a);
  }
}

std::vector<std::string> incident_arcs(const NetworkModel& net, std::string_view node_id,
                                       Direction dir) {
  std::vector<std::string> ids;
  for (const auto& a : net.incident_arcs(net.node_index(node_id), dir)) ids.push_back(net.arc_id(a));
  return ids;
}

double cross_section_area(const PipeArc& pipe) {
  return std::numbers::pi * pipe.diameter * pipe.diameter / 4.0;
}

double mass_flow_to_velocity(const PipeArc& pipe, double mass_flow, double density) {
  return mass_flow / (cross_section_area(pipe) * density);
}

double velocity_to_mass_flow(const PipeArc& pipe, double velocity, double density) {
  return velocity * cross_section_area(pipe) * density;
}

// ---------------------------------------------------------------------------
// JSON instance format

namespace {

enum class Dim { Pressure, Power, EnergyDensity, MassFlow, Temperature, Length,
                 Dimensionless, HeatTransfer, Cost, Density };

struct UnitInfo {
  const char* tag;
  Dim dim;
  double factor;  // SI value = file value * factor
};

constexpr UnitInfo kUnits[] = {
    {"Pa", Dim::Pressure, 1.0},
    {"bar", Dim::Pressure, 1e5},
    {"W", Dim::Power, 1.0},
    {"kW", Dim::Power, 1e3},
    {"J_per_m3", Dim::EnergyDensity, 1.0},
    {"GJ_per_m3", Dim::EnergyDensity, 1e9},
    {"kg_per_s", Dim::MassFlow, 1.0},
    {"K", Dim::Temperature, 1.0},
    {"m", Dim::Length, 1.0},
    {"dimensionless", Dim::Dimensionless, 1.0},
    {"W_per_m2K", Dim::HeatTransfer, 1.0},
    {"per_J", Dim::Cost, 1.0},
    {"per_Wh", Dim::Cost, 1.0 / 3600.0},
    {"per_kWh", Dim::Cost, 1.0 / 3.6e6},
    {"kg_per_m3", Dim::Density, 1.0},
};

const char* si_tag(Dim dim) {
  for (const auto& u : kUnits) {
    if (u.dim == dim && u.factor == 1.0) return u.tag;
  }
  return "";
}

struct Reader {
  static const json& object(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    return j;
  }

  static std::string str(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key + ": missing field");
    if (!it->is_string()) throw SchemaError(path + "." + key + ": expected a string");
    return it->get<std::string>();
  }

  static double quantity(const json& j, Dim dim, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected {\"value\", \"unit\"}");
    auto v = j.find("value");
    auto u = j.find("unit");
    if (v == j.end() || !v->is_number()) throw SchemaError(path + ".value: expected a number");
    if (u == j.end() || !u->is_string()) throw SchemaError(path + ".unit: expected a unit tag");
    auto tag = u->get<std::string>();
    for (const auto& info : kUnits) {
      if (tag == info.tag) {
        if (info.dim != dim) throw SchemaError(path + ".unit: unit '" + tag + "' has wrong dimension");
        return v->get<double>() * info.factor;
      }
    }
    throw SchemaError(path + ".unit: unknown unit tag '" + tag + "'");
  }

  static double quantity_or(const json& obj, const std::string& key, Dim dim,
                            const std::string& path, double fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return quantity(*it, dim, path + "." + key);
  }

  static double required(const json& obj, const std::string& key, Dim dim, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "." + key + ": missing field");
    return quantity(*it, dim, path + "." + key);
  }

  static Interval interval_or(const json& obj, const std::string& key, Dim dim,
                              const std::string& path, Interval fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    std::string p = path + "." + key;
    if (!it->is_object()) throw SchemaError(p + ": expected {\"lower\", \"upper\"}");
    Interval iv = fallback;
    if (it->contains("lower")) iv.lower = quantity((*it)["lower"], dim, p + ".lower");
    if (it->contains("upper")) iv.upper = quantity((*it)["upper"], dim, p + ".upper");
    if (iv.empty()) throw SchemaError(p + ": empty interval");
    return iv;
  }
};

struct Defaults {
  double stagnation_pressure = 5.0 * kPascalPerBar;
  double pressure_upper = 25.0 * kPascalPerBar;
  Interval temperature{323.0, 403.0};
  double e_ff_min = 0.35e9;
  double e_bf = 0.30e9;
  double density = kDensity;
};

const json& array_field(const json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) throw SchemaError(std::string(key) + ": missing field");
  if (!it->is_array()) throw SchemaError(std::string(key) + ": expected an array");
  return *it;
}

json quantity_json(double v, Dim dim) { return json{{"value", v}, {"unit", si_tag(dim)}}; }

json interval_json(const Interval& iv, Dim dim) {
  json j = json::object();
  if (std::isfinite(iv.lower)) j["lower"] = quantity_json(iv.lower, dim);
  if (std::isfinite(iv.upper)) j["upper"] = quantity_json(iv.upper, dim);
  return j;
}

}  // namespace

NetworkModel parse_network(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  Reader::object(root, "document");

  Defaults d;
  if (auto it = root.find("defaults"); it != root.end()) {
    const json& dj = Reader::object(*it, "defaults");
    d.stagnation_pressure =
        Reader::quantity_or(dj, "stagnation_pressure", Dim::Pressure, "defaults", d.stagnation_pressure);
    d.pressure_upper = Reader::quantity_or(dj, "pressure_upper", Dim::Pressure, "defaults", d.pressure_upper);
    d.temperature = Reader::interval_or(dj, "temperature", Dim::Temperature, "defaults", d.temperature);
    d.e_ff_min = Reader::quantity_or(dj, "e_ff_min", Dim::EnergyDensity, "defaults", d.e_ff_min);
    d.e_bf = Reader::quantity_or(dj, "e_bf", Dim::EnergyDensity, "defaults", d.e_bf);
    d.density = Reader::quantity_or(dj, "density", Dim::Density, "defaults", d.density);
  }

  std::vector<Node> nodes;
  const json& nj = array_field(root, "nodes");
  for (std::size_t i = 0; i < nj.size(); ++i) {
    std::string path = "nodes[" + std::to_string(i) + "]";
    const json& o = Reader::object(nj[i], path);
    Node n;
    n.id = Reader::str(o, "id", path);
    auto part = Reader::str(o, "part", path);
    if (part == "forward") n.part = FlowPart::Forward;
    else if (part == "backward") n.part = FlowPart::Backward;
    else throw SchemaError(path + ".part: expected 'forward' or 'backward'");
    n.pressure_upper = Reader::quantity_or(o, "pressure_upper", Dim::Pressure, path, d.pressure_upper);
    n.temperature = Reader::interval_or(o, "temperature", Dim::Temperature, path, d.temperature);
    nodes.push_back(std::move(n));
  }

  std::vector<PipeArc> pipes;
  const json& pj = array_field(root, "pipes");
  for (std::size_t i = 0; i < pj.size(); ++i) {
    std::string path = "pipes[" + std::to_string(i) + "]";
    const json& o = Reader::object(pj[i], path);
    PipeArc p;
    p.id = Reader::str(o, "id", path);
    p.tail = Reader::str(o, "tail", path);
    p.head = Reader::str(o, "head", path);
    p.length = Reader::required(o, "length", Dim::Length, path);
    p.diameter = Reader::required(o, "diameter", Dim::Length, path);
    p.friction = Reader::required(o, "friction", Dim::Dimensionless, path);
    p.slope = Reader::quantity_or(o, "slope", Dim::Dimensionless, path, 0.0);
    p.heat_transfer = Reader::required(o, "heat_transfer", Dim::HeatTransfer, path);
    p.wall_temperature = Reader::required(o, "wall_temperature", Dim::Temperature, path);
    p.mass_flow = Reader::interval_or(o, "mass_flow", Dim::MassFlow, path, {-kInf, kInf});
    if (!(p.length > 0)) throw SchemaError(path + ".length: must be positive");
    if (!(p.diameter > 0)) throw SchemaError(path + ".diameter: must be positive");
    if (!(p.friction > 0)) throw SchemaError(path + ".friction: must be positive");
    if (p.heat_transfer < 0) throw SchemaError(path + ".heat_transfer: must be nonnegative");
    pipes.push_back(std::move(p));
  }

  std::vector<ConsumerArc> consumers;
  const json& cj = array_field(root, "consumers");
  for (std::size_t i = 0; i < cj.size(); ++i) {
    std::string path = "consumers[" + std::to_string(i) + "]";
    const json& o = Reader::object(cj[i], path);
    ConsumerArc c;
    c.id = Reader::str(o, "id", path);
    c.tail = Reader::str(o, "tail", path);
    c.head = Reader::str(o, "head", path);
    c.demand = Reader::required(o, "demand", Dim::Power, path);
    c.e_ff_min = Reader::quantity_or(o, "e_ff_min", Dim::EnergyDensity, path, d.e_ff_min);
    c.e_bf = Reader::quantity_or(o, "e_bf", Dim::EnergyDensity, path, d.e_bf);
    c.mass_flow = Reader::interval_or(o, "mass_flow", Dim::MassFlow, path, {0.0, kInf});
    consumers.push_back(std::move(c));
  }

  auto dit = root.find("depot");
  if (dit == root.end()) throw GraphError("network has no depot");
  if (dit->is_array()) throw GraphError("exactly one depot is supported");
  const json& dj = Reader::object(*dit, "depot");
  DepotArc depot;
  depot.id = Reader::str(dj, "id", "depot");
  depot.tail = Reader::str(dj, "tail", "depot");
  depot.head = Reader::str(dj, "head", "depot");
  depot.stagnation_pressure =
      Reader::quantity_or(dj, "stagnation_pressure", Dim::Pressure, "depot", d.stagnation_pressure);
  depot.pump_power = Reader::interval_or(dj, "pump_power", Dim::Power, "depot", {0.0, kInf});
  depot.waste_power = Reader::interval_or(dj, "waste_power", Dim::Power, "depot", {0.0, kInf});
  depot.gas_power = Reader::interval_or(dj, "gas_power", Dim::Power, "depot", {0.0, kInf});
  depot.mass_flow = Reader::interval_or(dj, "mass_flow", Dim::MassFlow, "depot", {0.0, kInf});

  CostParameters costs;
  if (auto it = root.find("costs"); it != root.end()) {
    const json& co = Reader::object(*it, "costs");
    costs.pump = Reader::quantity_or(co, "pump", Dim::Cost, "costs", 0.0);
    costs.waste = Reader::quantity_or(co, "waste", Dim::Cost, "costs", 0.0);
    costs.gas = Reader::quantity_or(co, "gas", Dim::Cost, "costs", 0.0);
    if (costs.pump < 0 || costs.waste < 0 || costs.gas < 0)
      throw SchemaError("costs: values must be nonnegative");
  }

  return NetworkModel(std::move(nodes), std::move(pipes), std::move(consumers), std::move(depot),
                      costs, d.density);
}

NetworkModel load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_network(buf.str());
  } catch (const Error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

std::string serialize_network(const NetworkModel& net) {
  json root;
  root["defaults"] = {{"density", quantity_json(net.density(), Dim::Density)}};
  json nodes = json::array();
  for (const auto& n : net.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"part", std::string(to_string(n.part))},
                     {"pressure_upper", quantity_json(n.pressure_upper, Dim::Pressure)},
                     {"temperature", interval_json(n.temperature, Dim::Temperature)}});
  }
  root["nodes"] = nodes;
  json pipes = json::array();
  for (const auto& p : net.pipes()) {
    pipes.push_back({{"id", p.id},
                     {"tail", p.tail},
                     {"head", p.head},
                     {"length", quantity_json(p.length, Dim::Length)},
                     {"diameter", quantity_json(p.diameter, Dim::Length)},
                     {"friction", quantity_json(p.friction, Dim::Dimensionless)},
                     {"slope", quantity_json(p.slope, Dim::Dimensionless)},
                     {"heat_transfer", quantity_json(p.heat_transfer, Dim::HeatTransfer)},
                     {"wall_temperature", quantity_json(p.wall_temperature, Dim::Temperature)},
                     {"mass_flow", interval_json(p.mass_flow, Dim::MassFlow)}});
  }
  root["pipes"] = pipes;
  json consumers = json::array();
  for (const auto& c : net.consumers()) {
    consumers.push_back({{"id", c.id},
                         {"tail", c.tail},
                         {"head", c.head},
                         {"demand", quantity_json(c.demand, Dim::Power)},
                         {"e_ff_min", quantity_json(c.e_ff_min, Dim::EnergyDensity)},
                         {"e_bf", quantity_json(c.e_bf, Dim::EnergyDensity)},
                         {"mass_flow", interval_json(c.mass_flow, Dim::MassFlow)}});
  }
  root["consumers"] = consumers;
  const auto& d = net.depot();
  // Omitted lower bounds of power and flow intervals read back as 0, so they
  // are always written out explicitly.
  auto bounded = [](const Interval& iv, Dim dim) {
    json j = interval_json(iv, dim);
    j["lower"] = quantity_json(iv.lower, dim);
    return j;
  };
  root["depot"] = {{"id", d.id},
                   {"tail", d.tail},
                   {"head", d.head},
                   {"stagnation_pressure", quantity_json(d.stagnation_pressure, Dim::Pressure)},
                   {"pump_power", bounded(d.pump_power, Dim::Power)},
                   {"waste_power", bounded(d.waste_power, Dim::Power)},
                   {"gas_power", bounded(d.gas_power, Dim::Power)},
                   {"mass_flow", interval_json(d.mass_flow, Dim::MassFlow)}};
  const auto& c = net.costs();
  root["costs"] = {{"pump", quantity_json(c.pump, Dim::Cost)},
                   {"waste", quantity_json(c.waste, Dim::Cost)},
                   {"gas", quantity_json(c.gas, Dim::Cost)}};
  return root.dump(2) + "\n";
}

}  // namespace dhn
