#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ncdn/routing_solution.hpp"
#include "ncdn/types.hpp"

namespace ncdn {

struct Link {
  LinkId id = 0;
  PopId src = 0;
  PopId dst = 0;
  std::int64_t capacity_bps = 0;
};

// Directed capacitated PoP graph. Construction validates every invariant:
// positive capacities, no self-loops, no parallel arcs, strong connectivity,
// and an origin that names an existing PoP.
class Topology {
 public:
  Topology(std::vector<std::string> pop_names, std::vector<Link> links, PopId origin);

  int num_pops() const { return static_cast<int>(names_.size()); }
  int num_links() const { return static_cast<int>(links_.size()); }

  const std::string& name(PopId p) const { return names_[p]; }
  PopId origin() const { return origin_; }

  const Link& link(LinkId l) const { return links_[l]; }
  std::span<const Link> links() const { return links_; }
  std::span<const LinkId> out_links(PopId p) const { return out_[p]; }
  std::span<const LinkId> in_links(PopId p) const { return in_[p]; }
  std::optional<LinkId> find_link(PopId src, PopId dst) const;

  // Link capacities in bits/sec, indexed by LinkId.
  Eigen::VectorXd capacities() const;
  double max_capacity() const;

  Topology with_origin(PopId origin) const;
  Topology scaled_capacities(std::int64_t numerator, std::int64_t denominator = 1) const;

 private:
  std::vector<std::string> names_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> out_;
  std::vector<std::vector<LinkId>> in_;
  PopId origin_ = 0;
};

// Line-oriented format: `pop <id> <name>`, `link <a> <b> <mbps>` (both
// directions), `arc <a> <b> <mbps>` (one direction), `origin <id>`.
// Blank lines and `#` comments are ignored. Throws ValidationError with the
// offending line number.
Topology parse_topology(std::string_view text);
Topology load_topology(const std::filesystem::path& path);
std::string format_topology(const Topology& topo);

struct RandomTopologyParams {
  int pops = 20;
  // Undirected links added on top of a random spanning tree.
  int extra_links = 20;
  std::vector<double> capacity_choices_mbps = {2500.0, 10000.0};
  std::uint64_t seed = 1;
};

Topology random_topology(const RandomTopologyParams& params);

// Per-link dimensionless weights, all positive and finite.
using WeightMap = Eigen::VectorXd;

// weight(l) = max capacity / capacity(l); the fastest link weighs 1.
WeightMap inverse_cap_weights(const Topology& topo);

// All-pairs minimum path weight; entry (s, t) is the s -> t distance.
Eigen::MatrixXd distance_matrix(const Topology& topo, const WeightMap& w);

double path_distance(const Topology& topo, const WeightMap& w, PopId s, PopId t);

// ECMP over all minimum-weight paths: at every node the commodity's inflow is
// split evenly across the outgoing links that lie on some shortest path.
RoutingSolution shortest_path_routes(const Topology& topo, const WeightMap& w);

}  // namespace ncdn
