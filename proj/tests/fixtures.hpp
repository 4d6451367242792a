#pragma once

// Small hand-written instances shared by the unit tests.

#include <memory>
#include <string>

#include "dhn/network.hpp"

namespace dhn::fixture {

// Depot b0 -> f0, pipe f0 -> f1, consumer f1 -> b1, pipe b1 -> b0.
inline std::string minimal_network_json(double demand_kw = 100.0, const std::string& consumer_head = "b1") {
  std::string pipe_params = R"(
      "length": {"value": 500, "unit": "m"},
      "diameter": {"value": 0.107, "unit": "m"},
      "friction": {"value": 0.017, "unit": "dimensionless"},
      "heat_transfer": {"value": 0.5, "unit": "W_per_m2K"},
      "wall_temperature": {"value": 278, "unit": "K"},
      "mass_flow": {"lower": {"value": -20, "unit": "kg_per_s"}, "upper": {"value": 20, "unit": "kg_per_s"}})";
  return R"({
  "nodes": [
    {"id": "f0", "part": "forward"},
    {"id": "f1", "part": "forward"},
    {"id": "b1", "part": "backward"},
    {"id": "b0", "part": "backward"}
  ],
  "pipes": [
    {"id": "pf", "tail": "f0", "head": "f1", )" +
         pipe_params + R"(},
    {"id": "pb", "tail": "b1", "head": "b0", )" +
         pipe_params + R"(}
  ],
  "consumers": [
    {"id": "c", "tail": "f1", "head": ")" +
         consumer_head + R"(", "demand": {"value": )" + std::to_string(demand_kw) +
         R"(, "unit": "kW"},
     "mass_flow": {"lower": {"value": 0, "unit": "kg_per_s"}, "upper": {"value": 20, "unit": "kg_per_s"}}}
  ],
  "depot": {"id": "d", "tail": "b0", "head": "f0",
            "waste_power": {"lower": {"value": 0, "unit": "W"}, "upper": {"value": 10, "unit": "kW"}},
            "mass_flow": {"lower": {"value": 0, "unit": "kg_per_s"}, "upper": {"value": 40, "unit": "kg_per_s"}}},
  "costs": {"pump": {"value": 0.165, "unit": "per_kWh"},
            "waste": {"value": 0, "unit": "per_kWh"},
            "gas": {"value": 0.0415, "unit": "per_kWh"}}
})";
}

inline std::shared_ptr<const NetworkModel> minimal_network(double demand_kw = 100.0) {
  return std::make_shared<const NetworkModel>(parse_network(minimal_network_json(demand_kw)));
}

}  // namespace dhn::fixture
