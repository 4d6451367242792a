#pragma once

// Deterministic synthetic instances. The aroma-like and street-like
// templates reproduce the published pipe/consumer counts and total pipe
// lengths of two test networks; topology and parameters are synthetic.

#include <cstdint>
#include <string>
#include <string_view>

#include "dhn/network.hpp"

namespace dhn {

enum class NetworkTemplate { Chain, AromaLike, StreetLike };

NetworkTemplate parse_template(std::string_view name);

struct GeneratorOptions {
  int chain_pipes = 3;  // total pipes of the chain template
};

NetworkModel generate_network(NetworkTemplate tmpl, std::uint64_t seed,
                              const GeneratorOptions& opts = {});

}  // namespace dhn
