#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "ncdn/random.hpp"
#include "ncdn/routing.hpp"
#include "ncdn/topology.hpp"

namespace ncdn::test {

inline Topology make_topology(int pops, const std::vector<std::tuple<int, int, double>>& links_mbps,
                              PopId origin = 0, bool symmetric = true) {
  std::vector<std::string> names;
  for (int i = 0; i < pops; ++i) names.push_back("p" + std::to_string(i));
  std::vector<Link> links;
  for (auto [a, b, mbps] : links_mbps) {
    const auto bps = static_cast<std::int64_t>(mbps * 1e6);
    links.push_back({0, a, b, bps});
    if (symmetric) links.push_back({0, b, a, bps});
  }
  return Topology(names, links, origin);
}

// 0 - 1 - 2 - 0, capacity 10 Mbps everywhere.
inline Topology triangle(double mbps = 10.0) {
  return make_topology(3, {{0, 1, mbps}, {1, 2, mbps}, {2, 0, mbps}});
}

// A = 0, B = 1, relays 2 and 3: 0-2-1 and 0-3-1.
inline Topology two_paths(double mbps = 10.0) {
  return make_topology(4, {{0, 2, mbps}, {2, 1, mbps}, {0, 3, mbps}, {3, 1, mbps}});
}

// Random strongly connected digraph: a directed Hamiltonian cycle through a
// shuffled order plus random extra arcs with mixed capacities.
inline Topology random_digraph(Rng& rng, int n, double extra_density = 0.3) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::tuple<int, int, double>> arcs;
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  const double caps[] = {2.5, 10.0, 40.0};
  for (int i = 0; i < n; ++i) {
    const int a = order[i], b = order[(i + 1) % n];
    used[a][b] = true;
    arcs.emplace_back(a, b, caps[rng.below(3)]);
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b || used[a][b] || rng.uniform() >= extra_density) continue;
      used[a][b] = true;
      arcs.emplace_back(a, b, caps[rng.below(3)]);
    }
  }
  return make_topology(n, arcs, 0, false);
}

inline TrafficMatrix random_tm(Rng& rng, int n, double density = 0.5, double max_mbps = 20.0) {
  TrafficMatrix tm(n);
  for (int s = 0; s < n; ++s) {
    for (int t = 0; t < n; ++t) {
      if (s != t && rng.uniform() < density) tm.set(s, t, rng.uniform(0.0, max_mbps) * 1e6);
    }
  }
  return tm;
}

}  // namespace ncdn::test
