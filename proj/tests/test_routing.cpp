#include <doctest.h>

#include "ncdn/error.hpp"
#include "ncdn/lp/builders.hpp"
#include "ncdn/routing.hpp"
#include "support.hpp"

using namespace ncdn;

namespace {

// min over a grid of split fractions of max link utilization; f(x) gives
// the utilization vector for share x on the first path.
template <typename F>
double grid_min(F f, int steps = 100000) {
  double best = 1e300;
  for (int k = 0; k <= steps; ++k) best = std::min(best, f(static_cast<double>(k) / steps));
  return best;
}

TrafficMatrix single(int n, PopId s, PopId t, double mbps) {
  TrafficMatrix tm(n);
  tm.set(s, t, mbps * 1e6);
  return tm;
}

}  // namespace

TEST_CASE("single link alpha = d / c") {
  for (double d : {0.0, 1.0, 3.0, 25.0}) {
    const Topology t = test::make_topology(2, {{0, 1, 10.0}});
    const RoutingPlan p = solve_min_mlu_routing(t, single(2, 0, 1, d));
    CHECK(p.alpha == doctest::Approx(d / 10.0).epsilon(1e-9));
    CHECK(p.routing.fraction(0, 1, *t.find_link(0, 1)) == doctest::Approx(1.0));
  }
}

TEST_CASE("parallel paths split evenly") {
  const Topology t = test::two_paths();
  const double oracle = grid_min([](double x) { return std::max(x * 10.0, (1.0 - x) * 10.0) / 10.0; });
  const RoutingPlan p = solve_min_mlu_routing(t, single(4, 0, 1, 10.0));
  CHECK(std::abs(p.alpha - 0.5) < 1e-9);
  CHECK(std::abs(p.alpha - oracle) < 1e-9);
  CHECK(p.routing.fraction(0, 1, *t.find_link(0, 2)) == doctest::Approx(0.5));
  CHECK(p.routing.fraction(0, 1, *t.find_link(0, 3)) == doctest::Approx(0.5));
}

TEST_CASE("triangle alpha 0.45") {
  const Topology t = test::triangle();
  const double oracle = grid_min([](double x) { return std::max(9.0 * x, 9.0 * (1.0 - x)) / 10.0; });
  for (auto model : {lp::FlowModel::per_commodity, lp::FlowModel::per_source}) {
    const auto prog = lp::build_min_mlu_lp(t, single(3, 0, 1, 9.0), model);
    const auto sol = lp::solve_lp(prog.lp);
    REQUIRE(sol.optimal());
    CHECK(std::abs(sol.x(prog.alpha) - 0.45) < 1e-9);
    CHECK(std::abs(sol.x(prog.alpha) - oracle) < 1e-9);
  }
  const RoutingPlan p = solve_min_mlu_routing(t, single(3, 0, 1, 9.0));
  CHECK(p.routing.fraction(0, 1, *t.find_link(0, 1)) == doctest::Approx(0.5));
  CHECK(p.routing.fraction(0, 1, *t.find_link(0, 2)) == doctest::Approx(0.5));
  CHECK(p.routing.fraction(0, 1, *t.find_link(2, 1)) == doctest::Approx(0.5));
}

TEST_CASE("single path topology and empty matrix") {
  // Directed ring: each commodity has exactly one path.
  const Topology ring = test::make_topology(3, {{0, 1, 10}, {1, 2, 10}, {2, 0, 10}}, 0, false);
  const RoutingPlan p = solve_min_mlu_routing(ring, single(3, 0, 2, 4.0));
  CHECK(p.routing.fraction(0, 2, *ring.find_link(0, 1)) == doctest::Approx(1.0));
  CHECK(p.routing.fraction(0, 2, *ring.find_link(1, 2)) == doctest::Approx(1.0));
  CHECK(p.routing.fraction(0, 2, *ring.find_link(2, 0)) == 0.0);

  const Topology tri = test::triangle();
  const RoutingPlan e = solve_min_mlu_routing(tri, TrafficMatrix(3));
  CHECK(e.alpha == 0.0);
  CHECK(e.routing.matrix() == shortest_path_routes(tri, inverse_cap_weights(tri)).matrix());
}

TEST_CASE("zero-rate commodities take InverseCap paths") {
  const Topology t = test::two_paths();
  const RoutingSolution ic = shortest_path_routes(t, inverse_cap_weights(t));
  const RoutingPlan p = solve_min_mlu_routing(t, single(4, 0, 1, 10.0));
  for (PopId s = 0; s < 4; ++s) {
    for (PopId d = 0; d < 4; ++d) {
      if (s == d || (s == 0 && d == 1)) continue;
      CHECK(p.routing.defined(s, d));
      CHECK(p.routing.fractions(s, d) == ic.fractions(s, d));
    }
  }
}

TEST_CASE("apply routing and mlu examples") {
  const Topology one = test::make_topology(2, {{0, 1, 100}});
  const RoutingSolution r1 = shortest_path_routes(one, inverse_cap_weights(one));
  TrafficMatrix tm(2);
  tm.set(0, 1, 10.0);
  CHECK(apply_routing(r1, tm).load(*one.find_link(0, 1)) == 10.0);
  CHECK(apply_routing(r1, TrafficMatrix(2)).load.isZero());

  const Topology sq = test::two_paths();
  TrafficMatrix t2(4);
  t2.set(0, 1, 10.0);
  const LinkLoads l2 = apply_routing(shortest_path_routes(sq, inverse_cap_weights(sq)), t2);
  for (auto [a, b] : {std::pair{0, 2}, {2, 1}, {0, 3}, {3, 1}}) CHECK(l2.load(*sq.find_link(a, b)) == 5.0);

  const Topology cap10 = test::make_topology(2, {{0, 1, 10}});
  CHECK(mlu(Eigen::Vector2d(5e6, 2e6), cap10) == 0.5);
  CHECK(mlu(Eigen::Vector2d(0, 0), cap10) == 0.0);
  CHECK(mlu(Eigen::Vector2d(15e6, 0), cap10) == 1.5);

  RoutingSolution partial(2, 2);
  CHECK_THROWS_AS(apply_routing(partial, tm), ValidationError);
}

TEST_CASE("traffic matrix validation and CSV") {
  const Topology t = test::triangle();
  TrafficMatrix tm(3);
  CHECK_THROWS_AS(tm.set(1, 1, 5.0), ValidationError);
  CHECK_THROWS_AS(tm.set(0, 1, -1.0), ValidationError);
  const TrafficMatrix p = parse_traffic_matrix("src_pop,dst_pop,rate_mbps\n0,1,2.5\n0,1,1\n2,0,4\n", t);
  CHECK(p(0, 1) == 3.5e6);
  CHECK(p(2, 0) == 4e6);
  CHECK(parse_traffic_matrix(format_traffic_matrix(p), t).matrix() == p.matrix());
  CHECK_THROWS_AS(parse_traffic_matrix("0,1\n", t), ValidationError);
  CHECK_THROWS_AS(parse_traffic_matrix("0,5,1\n", t), ValidationError);
  CHECK_THROWS_AS(parse_traffic_matrix("0,1,-2\n", t), ValidationError);
  CHECK_THROWS_AS(parse_traffic_matrix("1,1,2\n", t), ValidationError);
}

TEST_CASE("overlay transit") {
  const Topology t = test::triangle();
  const RoutingSolution ic = shortest_path_routes(t, inverse_cap_weights(t));
  Rng rng(2);
  const TrafficMatrix tm = test::random_tm(rng, 3, 1.0);
  const LinkLoads base = apply_routing(ic, tm);
  CHECK(overlay_transit(base, TrafficMatrix(3), ic).load == base.load);
  CHECK((overlay_transit(base, tm, ic).load - 2.0 * base.load).cwiseAbs().maxCoeff() < 1e-6);

  // Disjoint commodities on a 4-pop ring: 0->1 (NCDN) and 2->3 (transit).
  const Topology ring = test::make_topology(4, {{0, 1, 10}, {1, 2, 10}, {2, 3, 10}, {3, 0, 10}});
  const RoutingSolution rr = shortest_path_routes(ring, inverse_cap_weights(ring));
  TrafficMatrix ncdn(4), transit(4);
  ncdn.set(0, 1, 6e6);
  transit.set(2, 3, 3e6);
  transit.set(1, 2, 2e6);
  const LinkLoads both = overlay_transit(apply_routing(rr, ncdn), transit, rr);
  // By hand: 0->1 carries 6, 2->3 carries 3, 1->2 carries 2; max 6 / 10.
  CHECK(mlu(both, ring) == doctest::Approx(0.6));
  transit.set(0, 1, 1e6);
  CHECK(mlu(overlay_transit(apply_routing(rr, ncdn), transit, rr), ring) == doctest::Approx(0.7));
}

TEST_CASE("apply routing is linear") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(5));
    const Topology t = test::random_digraph(rng, n);
    const RoutingSolution r = shortest_path_routes(t, inverse_cap_weights(t));
    const TrafficMatrix a = test::random_tm(rng, n), b = test::random_tm(rng, n);
    const double k = rng.uniform(0.1, 5.0);
    const Eigen::VectorXd lhs = apply_routing(r, k * a + b).load;
    const Eigen::VectorXd rhs = k * apply_routing(r, a).load + apply_routing(r, b).load;
    for (Eigen::Index l = 0; l < lhs.size(); ++l) {
      CHECK(std::abs(lhs(l) - rhs(l)) <= 1e-9 * std::max(1.0, std::abs(rhs(l))));
    }
  }
}

TEST_CASE("min-MLU properties on random graphs") {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(6));
    const Topology t = test::random_digraph(rng, n);
    const TrafficMatrix tm = test::random_tm(rng, n);
    const RoutingPlan p = solve_min_mlu_routing(t, tm);
    const double realized = mlu(apply_routing(p.routing, tm), t);
    const double ic = mlu(apply_routing(shortest_path_routes(t, inverse_cap_weights(t)), tm), t);
    CHECK(p.alpha <= ic + 1e-7);
    CHECK(std::abs(realized - p.alpha) <= 1e-7);
    CHECK(max_conservation_error(t, p.routing) <= 1e-7);

    // The aggregated and per-commodity programs agree.
    const auto full = lp::build_min_mlu_lp(t, tm, lp::FlowModel::per_commodity);
    const auto sol = lp::solve_lp(full.lp);
    REQUIRE(sol.optimal());
    CHECK(sol.duality_gap() <= 1e-6);
    CHECK(std::abs(sol.x(full.alpha) - p.alpha) <= 1e-7);
  }
}

TEST_CASE("min-MLU homogeneity") {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(5));
    const Topology t = test::random_digraph(rng, n);
    const TrafficMatrix tm = test::random_tm(rng, n);
    const double base = solve_min_mlu_routing(t, tm).alpha;
    const double k = 1.0 + static_cast<double>(rng.below(9));
    CHECK(solve_min_mlu_routing(t, k * tm).alpha == doctest::Approx(k * base).epsilon(1e-6));
    CHECK(solve_min_mlu_routing(t.scaled_capacities(static_cast<std::int64_t>(k)), tm).alpha ==
          doctest::Approx(base / k).epsilon(1e-6));
  }
}

TEST_CASE("flow decomposition removes cycles") {
  // Source 0 sends 1 unit to 1 along 0->1, plus a circulation 1->2->1.
  const Topology t = test::triangle();
  Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(3, t.num_links());
  flows(0, *t.find_link(0, 1)) = 1.0;
  flows(0, *t.find_link(1, 2)) = 0.3;
  flows(0, *t.find_link(2, 1)) = 0.3;
  Eigen::MatrixXd demand = Eigen::MatrixXd::Zero(3, 3);
  demand(0, 1) = 1.0;
  const RoutingSolution ic = shortest_path_routes(t, inverse_cap_weights(t));
  const RoutingSolution r = decompose_source_flows(t, flows, demand, ic);
  CHECK(r.fraction(0, 1, *t.find_link(0, 1)) == 1.0);
  CHECK(r.fraction(0, 1, *t.find_link(1, 2)) == 0.0);
  CHECK(r.fractions(0, 2) == ic.fractions(0, 2));
  CHECK(max_conservation_error(t, r) < 1e-12);
}

TEST_CASE("tie-break keeps alpha and sheds load") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const Topology topo = test::random_digraph(rng, 4 + static_cast<int>(rng.below(4)), 0.4);
    const TrafficMatrix tm = test::random_tm(rng, topo.num_pops(), 0.4);
    if (tm.empty()) continue;
    const auto plain = solve_min_mlu_routing(topo, tm, {}, false);
    const auto tidy = solve_min_mlu_routing(topo, tm, {}, true);
    const WeightMap w = inverse_cap_weights(topo);
    const auto lp = apply_routing(plain.routing, tm).load;
    const auto lt = apply_routing(tidy.routing, tm).load;
    CHECK(tidy.alpha == doctest::Approx(plain.alpha).epsilon(1e-9));
    CHECK(mlu(lt, topo) <= plain.alpha * (1 + 1e-7) + 1e-12);
    CHECK(w.dot(lt) <= w.dot(lp) * (1 + 1e-9) + 1e-6);
  }
  // A commodity far from the bottleneck stays on its shortest path.
  const Topology ring = test::make_topology(4, {{0, 1, 10}, {1, 2, 10}, {2, 3, 10}, {3, 0, 10}});
  TrafficMatrix tm(4);
  tm.set(0, 1, 8e6);
  tm.set(2, 3, 1e6);
  const auto plan = solve_min_mlu_routing(ring, tm);
  CHECK(plan.routing.fractions(2, 3).maxCoeff() == doctest::Approx(1.0));
  CHECK(plan.routing.fractions(2, 3).sum() == doctest::Approx(1.0));
}
