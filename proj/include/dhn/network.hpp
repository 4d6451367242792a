#pragma once

// District heating network graph: nodes, typed arcs, bounds and costs.
// All quantities are stored in SI units (Pa, W, J/m^3, kg/s, K, m).

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dhn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kDensity = 997.0;         // kg/m^3
inline constexpr double kGravity = 9.80665;       // m/s^2
inline constexpr double kPascalPerBar = 1e5;
inline constexpr double kJoulePerGJ = 1e9;

struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool empty() const { return lower > upper; }
  bool contains(double x) const { return x >= lower && x <= upper; }
  bool operator==(const Interval&) const = default;
};

enum class FlowPart { Forward, Backward };

std::string_view to_string(FlowPart part);

struct Node {
  std::string id;
  FlowPart part = FlowPart::Forward;
  double pressure_upper = 25.0 * kPascalPerBar;
  Interval temperature{323.0, 403.0};

  bool operator==(const Node&) const = default;
};

struct PipeArc {
  std::string id;
  std::string tail;
  std::string head;
  double length = 0.0;          // m
  double diameter = 0.0;        // m
  double friction = 0.0;        // lambda, dimensionless
  double slope = 0.0;           // h', dimensionless
  double heat_transfer = 0.0;   // h_c, W/(m^2 K)
  double wall_temperature = 278.0;  // K
  Interval mass_flow{-kInf, kInf};

  bool operator==(const PipeArc&) const = default;
};

struct ConsumerArc {
  std::string id;
  std::string tail;   // forward-flow node
  std::string head;   // backward-flow node
  double demand = 0.0;          // W, positive = heat extracted
  double e_ff_min = 0.35e9;     // J/m^3
  double e_bf = 0.30e9;         // J/m^3
  Interval mass_flow{0.0, kInf};

  bool operator==(const ConsumerArc&) const = default;
};

struct DepotArc {
  std::string id;
  std::string tail;   // backward-flow node
  std::string head;   // forward-flow node
  double stagnation_pressure = 5.0 * kPascalPerBar;
  Interval pump_power{0.0, kInf};
  Interval waste_power{0.0, kInf};
  Interval gas_power{0.0, kInf};
  Interval mass_flow{0.0, kInf};

  bool operator==(const DepotArc&) const = default;
};

/// Prices in currency per joule.
struct CostParameters {
  double pump = 0.0;
  double waste = 0.0;
  double gas = 0.0;

  bool operator==(const CostParameters&) const = default;
};

enum class ArcKind { Pipe, Consumer, Depot };

/// Uniform view of any arc: kind plus index into the kind-specific list.
struct ArcRef {
  ArcKind kind;
  std::size_t index;

  bool operator==(const ArcRef&) const = default;
};

enum class Direction { In, Out };

/// Immutable, validated network. Build through parse_network or the
/// constructor, which checks every structural invariant.
class NetworkModel {
 public:
  NetworkModel(std::vector<Node> nodes, std::vector<PipeArc> pipes,
               std::vector<ConsumerArc> consumers, DepotArc depot,
               CostParameters costs, double density = kDensity);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<PipeArc>& pipes() const { return pipes_; }
  const std::vector<ConsumerArc>& consumers() const { return consumers_; }
  const DepotArc& depot() const { return depot_; }
  const CostParameters& costs() const { return costs_; }
  double density() const { return density_; }

  /// Every arc in a fixed order: pipes, consumers, depot.
  const std::vector<ArcRef>& arcs() const { return arcs_; }
  std::size_t arc_count() const { return arcs_.size(); }

  std::size_t node_index(std::string_view id) const;
  bool has_node(std::string_view id) const;
  const std::string& arc_id(ArcRef arc) const;
  std::size_t arc_tail(ArcRef arc) const;
  std::size_t arc_head(ArcRef arc) const;
  Interval arc_mass_flow(ArcRef arc) const;
  /// Position of `arc` in arcs().
  std::size_t arc_position(ArcRef arc) const;

  /// Arcs whose head (In) or tail (Out) is `node`.
  const std::vector<ArcRef>& incident_arcs(std::size_t node, Direction dir) const;

  bool operator==(const NetworkModel& other) const;

 private:
  void validate() const;
  void build_incidence();

  std::vector<Node> nodes_;
  std::vector<PipeArc> pipes_;
  std::vector<ConsumerArc> consumers_;
  DepotArc depot_;
  CostParameters costs_;
  double density_;

  std::map<std::string, std::size_t, std::less<>> node_index_;
  std::vector<ArcRef> arcs_;
  std::vector<std::size_t> tail_index_;
  std::vector<std::size_t> head_index_;
  std::vector<std::vector<ArcRef>> in_arcs_;
  std::vector<std::vector<ArcRef>> out_arcs_;
};

/// Arc ids incident to node `node_id`, sorted by arc order.
std::vector<std::string> incident_arcs(const NetworkModel& net, std::string_view node_id,
                                       Direction dir);

double cross_section_area(const PipeArc& pipe);
double mass_flow_to_velocity(const PipeArc& pipe, double mass_flow, double density);
double velocity_to_mass_flow(const PipeArc& pipe, double velocity, double density);

/// Parses an instance document (JSON). Throws SchemaError or GraphError.
NetworkModel parse_network(std::string_view text);
NetworkModel load_network(const std::string& path);
/// Serializes with SI unit tags; parse_network(serialize_network(n)) == n.
std::string serialize_network(const NetworkModel& net);

}  // namespace dhn
