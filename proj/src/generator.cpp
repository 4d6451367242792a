#include "dhn/generator.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "dhn/errors.hpp"

namespace dhn {

NetworkTemplate parse_template(std::string_view name) {
  if (name == "chain") return NetworkTemplate::Chain;
  if (name == "aroma-like") return NetworkTemplate::AromaLike;
  if (name == "street-like") return NetworkTemplate::StreetLike;
  throw Error("unknown template '" + std::string(name) + "' (expected chain, aroma-like or street-like)");
}

namespace {

constexpr double kPerKWh = 1.0 / 3.6e6;

class Builder {
 public:
  explicit Builder(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double round_to(double v, double step) { return std::round(v / step) * step; }

  std::string ff(int i) const { return "f" + std::to_string(i); }
  std::string bf(int i) const { return "b" + std::to_string(i); }

  void add_node_pair(int i) {
    nodes_.push_back({ff(i), FlowPart::Forward});
    nodes_.push_back({bf(i), FlowPart::Backward});
  }

  // Forward pipe ff(a) -> ff(b) and its mirrored return pipe bf(b) -> bf(a).
  void add_pipe_pair(int a, int b, double length, double diameter = 0.0) {
    PipeArc p;
    p.length = length;
    p.diameter = diameter > 0.0 ? diameter : round_to(uniform(0.08, 0.15), 1e-3);
    p.friction = round_to(uniform(0.015, 0.025), 1e-4);
    p.heat_transfer = round_to(uniform(0.3, 0.7), 1e-2);
    p.wall_temperature = round_to(uniform(275.0, 285.0), 0.1);
    p.mass_flow = {-50.0, 50.0};
    PipeArc r = p;
    p.id = "pf" + std::to_string(forward_.size());
    p.tail = ff(a);
    p.head = ff(b);
    r.id = "pb" + std::to_string(forward_.size());
    r.tail = bf(b);
    r.head = bf(a);
    forward_.push_back(std::move(p));
    backward_.push_back(std::move(r));
  }

  void add_consumer(int i, double demand_w) {
    ConsumerArc c;
    c.id = "c" + std::to_string(consumers_.size());
    c.tail = ff(i);
    c.head = bf(i);
    c.demand = demand_w;
    c.mass_flow = {0.0, 50.0};
    consumers_.push_back(std::move(c));
  }

  /// Random lengths in [lo, hi], rescaled so all forward plus return pipes
  /// sum to `total` (0.1 m resolution, remainder put on the last pipe).
  std::vector<double> lengths(std::size_t count, double lo, double hi, double total) {
    std::vector<double> raw(count);
    double sum = 0.0;
    for (auto& l : raw) {
      l = uniform(lo, hi);
      sum += l;
    }
    double half = total / 2.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
      raw[i] = round_to(raw[i] * half / sum, 0.1);
      acc += raw[i];
    }
    raw[count - 1] = round_to(half - acc, 0.05);
    return raw;
  }

  NetworkModel finish() {
    std::vector<PipeArc> pipes = forward_;
    pipes.insert(pipes.end(), backward_.begin(), backward_.end());
    DepotArc depot;
    depot.id = "depot";
    depot.tail = bf(0);
    depot.head = ff(0);
    depot.waste_power = {0.0, 10e3};
    depot.mass_flow = {0.0, 100.0};
    CostParameters costs{0.165 * kPerKWh, 0.0, 0.0415 * kPerKWh};
    return NetworkModel(nodes_, std::move(pipes), consumers_, std::move(depot), costs);
  }

 private:
  std::mt19937_64 rng_;
  std::vector<Node> nodes_;
  std::vector<PipeArc> forward_;
  std::vector<PipeArc> backward_;
  std::vector<ConsumerArc> consumers_;
};

NetworkModel chain(std::uint64_t seed, int pipes) {
  if (pipes < 1) throw Error("chain template needs at least one pipe");
  Builder b(seed);
  // forward path f0..fa, consumer fa -> br, return path br..b0
  const int a = (pipes + 1) / 2;
  const int r = pipes - a;
  std::vector<double> len = b.lengths(static_cast<std::size_t>(pipes), 300.0, 700.0, 2.0 * 500.0 * pipes);
  // Halves of unequal length cannot be mirrored, so pipes are built here.
  std::vector<PipeArc> all;
  Builder params(seed + 1);
  for (int i = 0; i < pipes; ++i) {
    PipeArc p;
    p.length = len[i];
    p.diameter = params.round_to(params.uniform(0.08, 0.15), 1e-3);
    p.friction = params.round_to(params.uniform(0.015, 0.025), 1e-4);
    p.heat_transfer = params.round_to(params.uniform(0.3, 0.7), 1e-2);
    p.wall_temperature = params.round_to(params.uniform(275.0, 285.0), 0.1);
    p.mass_flow = {-50.0, 50.0};
    if (i < a) {
      p.id = "pf" + std::to_string(i);
      p.tail = b.ff(i);
      p.head = b.ff(i + 1);
    } else {
      int k = i - a;  // return pipe from b(r-k) to b(r-k-1)
      p.id = "pb" + std::to_string(k);
      p.tail = b.bf(r - k);
      p.head = b.bf(r - k - 1);
    }
    all.push_back(std::move(p));
  }
  std::vector<Node> nodes;
  for (int i = 0; i <= a; ++i) nodes.push_back({b.ff(i), FlowPart::Forward});
  for (int i = 0; i <= r; ++i) nodes.push_back({b.bf(i), FlowPart::Backward});
  ConsumerArc c;
  c.id = "c0";
  c.tail = b.ff(a);
  c.head = b.bf(r);
  c.demand = params.round_to(params.uniform(150e3, 300e3), 1e3);
  c.mass_flow = {0.0, 50.0};
  DepotArc depot;
  depot.id = "depot";
  depot.tail = b.bf(0);
  depot.head = b.ff(0);
  depot.waste_power = {0.0, 10e3};
  depot.mass_flow = {0.0, 100.0};
  CostParameters costs{0.165 * kPerKWh, 0.0, 0.0415 * kPerKWh};
  return NetworkModel(std::move(nodes), std::move(all), {c}, std::move(depot), costs);
}

NetworkModel aroma_like(std::uint64_t seed) {
  Builder b(seed);
  for (int i = 0; i < 8; ++i) b.add_node_pair(i);
  // Feed pipe 0-1 and two loops of parallel paths, 1-2-3 / 1-4-3 and 3-5-6 / 3-7-6.
  // Each loop shares one diameter and ends in a node with a large demand, so
  // no loop pipe can carry a vanishing flow (|q| q has no slope at q = 0).
  std::vector<double> len = b.lengths(9, 330.0, 480.0, 7262.4);
  b.add_pipe_pair(0, 1, len[0]);
  double d1 = b.round_to(b.uniform(0.1, 0.15), 1e-3);
  b.add_pipe_pair(1, 2, len[1], d1);
  b.add_pipe_pair(2, 3, len[2], d1);
  b.add_pipe_pair(1, 4, len[3], d1);
  b.add_pipe_pair(4, 3, len[4], d1);
  double d2 = b.round_to(b.uniform(0.08, 0.12), 1e-3);
  b.add_pipe_pair(3, 5, len[5], d2);
  b.add_pipe_pair(5, 6, len[6], d2);
  b.add_pipe_pair(3, 7, len[7], d2);
  b.add_pipe_pair(7, 6, len[8], d2);
  for (int node : {2, 4, 5, 7}) b.add_consumer(node, b.round_to(b.uniform(80e3, 160e3), 1e3));
  b.add_consumer(6, b.round_to(b.uniform(250e3, 320e3), 1e3));
  return b.finish();
}

NetworkModel street_like(std::uint64_t seed) {
  Builder b(seed);
  const int n = 81;
  for (int i = 0; i < n; ++i) b.add_node_pair(i);
  std::vector<double> len = b.lengths(81, 20.0, 75.0, 7627.1);
  std::vector<int> children(n, 0);
  for (int i = 1; i < n; ++i) {
    int lo = std::max(0, i - 6);
    int parent = lo + static_cast<int>(b.uniform(0.0, 1.0) * (i - lo));
    parent = std::min(parent, i - 1);
    children[parent]++;
    b.add_pipe_pair(parent, i, len[i - 1]);
  }
  // single cycle: chord between two nodes of the middle of the tree
  b.add_pipe_pair(20, 27, len[80]);
  std::vector<bool> served(n, false);
  int placed = 0;
  for (int i = n - 1; i > 0 && placed < 32; --i) {
    if (children[i] == 0 || (n - i) % 3 == 0) {
      served[i] = true;
      ++placed;
    }
  }
  for (int i = 1; placed < 32; ++i) {
    if (!served[i]) {
      served[i] = true;
      ++placed;
    }
  }
  for (int i = 1; i < n; ++i) {
    if (served[i]) b.add_consumer(i, b.round_to(b.uniform(20e3, 60e3), 1e3));
  }
  return b.finish();
}

}  // namespace

NetworkModel generate_network(NetworkTemplate tmpl, std::uint64_t seed, const GeneratorOptions& opts) {
  switch (tmpl) {
    case NetworkTemplate::Chain: return chain(seed, opts.chain_pipes);
    case NetworkTemplate::AromaLike: return aroma_like(seed);
    case NetworkTemplate::StreetLike: return street_like(seed);
  }
  throw Error("unknown template");
}

}  // namespace dhn
