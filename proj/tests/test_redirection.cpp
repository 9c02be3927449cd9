#include <doctest.h>

#include "ncdn/redirection.hpp"
#include "ncdn/routing.hpp"
#include "support.hpp"

using namespace ncdn;

namespace {

// Chain 0 - 1 - 2 - 3.
Topology chain() { return test::make_topology(4, {{0, 1, 10}, {1, 2, 10}, {2, 3, 10}}); }

Eigen::MatrixXd dist(const Topology& t) { return distance_matrix(t, inverse_cap_weights(t)); }

}  // namespace

TEST_CASE("closest replica examples") {
  const Topology t = chain();
  const Eigen::MatrixXd d = dist(t);
  REQUIRE(d(1, 2) == 1.0);
  REQUIRE(d(1, 3) == 2.0);
  const auto r = redirect_closest(1, pop_bit(2) | pop_bit(3), 0, d);
  CHECK(r.server == 2);
  CHECK(r.reason == RedirectReason::remote_replica);

  const auto local = redirect_closest(3, pop_bit(3), 0, d);
  CHECK(local.server == 3);
  CHECK(local.reason == RedirectReason::local_hit);

  const auto none = redirect_closest(2, 0, 0, d);
  CHECK(none.server == 0);
  CHECK(none.reason == RedirectReason::origin);
  CHECK(std::string(to_string(none.reason)) == "origin");

  // Equidistant replicas: lower id.
  const auto tie = redirect_closest(2, pop_bit(1) | pop_bit(3), 0, d);
  CHECK(tie.server == 1);
}

TEST_CASE("utilization-aware picks the lighter path") {
  // Client 1 with replicas 2 and 3 one hop away; origin 0 reaches 1 through either.
  const Topology t = test::make_topology(4, {{2, 1, 10}, {3, 1, 10}, {0, 2, 10}, {0, 3, 10}});
  const Eigen::MatrixXd d = dist(t);
  const RoutingSolution r = shortest_path_routes(t, inverse_cap_weights(t));
  Eigen::VectorXd loads = Eigen::VectorXd::Zero(t.num_links());
  loads(*t.find_link(2, 1)) = 9e6;
  loads(*t.find_link(3, 1)) = 4e6;
  const auto dec = redirect_utilization_aware(1, pop_bit(2) | pop_bit(3), 0, d, loads, t.capacities(), r, 0.0);
  CHECK(dec.server == 3);
  CHECK(dec.reason == RedirectReason::remote_replica);
  // By hand: server 2 -> 0.9, server 3 -> 0.4, origin -> 0.9 (splits over both).
  // With a large request the origin's split path wins.
  loads(*t.find_link(3, 1)) = 8.9e6;
  const auto big = redirect_utilization_aware(1, pop_bit(2) | pop_bit(3), 0, d, loads, t.capacities(), r, 4e6);
  // server 2: 1.3, server 3: 1.29, origin: max(0.9 + 0.2, 0.89 + 0.2) = 1.1.
  CHECK(big.server == 0);
  CHECK(big.reason == RedirectReason::origin);

  const auto local = redirect_utilization_aware(2, pop_bit(2), 0, d, loads, t.capacities(), r, 1e9);
  CHECK(local.server == 2);
  CHECK(local.reason == RedirectReason::local_hit);
}

TEST_CASE("utilization-aware agrees with closest on idle symmetric networks") {
  // Two disjoint two-hop spokes from client 0; the origin hangs off one of
  // them, so no candidate path splits.
  const Topology t = test::make_topology(
      6, {{0, 1, 10}, {0, 2, 10}, {1, 3, 10}, {2, 4, 10}, {3, 5, 10}}, 5);
  const Eigen::MatrixXd d = dist(t);
  const RoutingSolution r = shortest_path_routes(t, inverse_cap_weights(t));
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(t.num_links());
  // Every replica is closer to client 0 than the origin is.
  for (PopMask m = 1; m < (PopMask{1} << 5); ++m) {
    const auto a = redirect_closest(0, m, 5, d);
    const auto b = redirect_utilization_aware(0, m, 5, d, zero, t.capacities(), r, 1e6);
    CHECK(a.server == b.server);
    CHECK(a.reason == b.reason);
  }
}

TEST_CASE("decisions always name a holder") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const Topology t = test::random_digraph(rng, n);
    const Eigen::MatrixXd d = dist(t);
    const RoutingSolution r = shortest_path_routes(t, inverse_cap_weights(t));
    Eigen::VectorXd loads(t.num_links());
    for (auto& x : loads) x = rng.uniform(0, 2e7);
    const PopMask m = rng.next() & ((PopMask{1} << n) - 1);
    const PopId client = static_cast<PopId>(rng.below(n));
    const PopId origin = static_cast<PopId>(rng.below(n));
    for (const auto& dec : {redirect_closest(client, m, origin, d),
                            redirect_utilization_aware(client, m, origin, d, loads, t.capacities(), r, 1e6)}) {
      CHECK((dec.server == origin || (m & pop_bit(dec.server))));
      CHECK((dec.reason == RedirectReason::origin) == (dec.server == origin));
      CHECK((dec.reason == RedirectReason::local_hit) == (dec.server == client && client != origin));
    }
    // Capacity scaling leaves the closest choice alone.
    const Eigen::MatrixXd d3 = dist(t.scaled_capacities(3));
    CHECK(redirect_closest(client, m, origin, d).server == redirect_closest(client, m, origin, d3).server);
  }
}

TEST_CASE("full replication is all local") {
  const Topology t = chain();
  const Eigen::MatrixXd d = dist(t);
  for (PopId c = 0; c < 4; ++c) {
    const auto dec = redirect_closest(c, 0xF, 0, d);
    CHECK(dec.server == c);
  }
}
