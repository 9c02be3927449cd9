#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "ncdn/lp/simplex.hpp"
#include "ncdn/routing_solution.hpp"
#include "ncdn/topology.hpp"
#include "ncdn/types.hpp"

namespace ncdn {

// Rates in bits/sec between ordered PoP pairs. The diagonal stays zero:
// traffic served inside a PoP never enters the backbone.
class TrafficMatrix {
 public:
  TrafficMatrix() = default;
  explicit TrafficMatrix(int num_pops) : rate_(Eigen::MatrixXd::Zero(num_pops, num_pops)) {}

  int num_pops() const { return static_cast<int>(rate_.rows()); }
  double operator()(PopId s, PopId t) const { return rate_(s, t); }
  void set(PopId s, PopId t, double bps);
  void add(PopId s, PopId t, double bps);

  const Eigen::MatrixXd& matrix() const { return rate_; }
  double total() const { return rate_.sum(); }
  bool empty() const { return (rate_.array() == 0.0).all(); }

  TrafficMatrix& operator+=(const TrafficMatrix& other);
  TrafficMatrix& operator*=(double k);
  friend TrafficMatrix operator+(TrafficMatrix a, const TrafficMatrix& b) { return a += b; }
  friend TrafficMatrix operator*(double k, TrafficMatrix a) { return a *= k; }

 private:
  Eigen::MatrixXd rate_;
};

// CSV `src_pop,dst_pop,rate_mbps`; repeated pairs accumulate.
TrafficMatrix parse_traffic_matrix(std::string_view csv, const Topology& topo);
TrafficMatrix load_traffic_matrix(const std::filesystem::path& path, const Topology& topo);
std::string format_traffic_matrix(const TrafficMatrix& tm);

struct LinkLoads {
  Eigen::VectorXd load;  // bits/sec per LinkId
  Seconds start = 0.0;
  Seconds end = 0.0;
};

// load(l) = sum_k rate(k) * frac(k, l). Throws if a commodity with positive
// rate has no installed routing.
LinkLoads apply_routing(const RoutingSolution& routing, const TrafficMatrix& tm);

// Max over links of load / capacity; 0 for a link-less network. Overload is
// reported as is.
double mlu(const LinkLoads& loads, const Topology& topo);
double mlu(const Eigen::VectorXd& loads, const Topology& topo);

LinkLoads overlay_transit(const LinkLoads& loads, const TrafficMatrix& transit,
                          const RoutingSolution& routing);

struct RoutingPlan {
  RoutingSolution routing;
  // Optimal MLU of the planning matrix (0 when it is empty).
  double alpha = 0.0;
  long lp_iterations = 0;
};

// Demand-aware routing: the min-MLU multicommodity flow, split per
// commodity. Zero-rate commodities follow InverseCap ECMP paths. `tie_break`
// picks, among min-MLU flows, one of least InverseCap-weighted total load.
RoutingPlan solve_min_mlu_routing(const Topology& topo, const TrafficMatrix& tm,
                                  const lp::SimplexOptions& options = {}, bool tie_break = true);

// Splits single-source aggregate link flows (row s of `flows`, in the same
// units as `demand`) into per-destination fractions. Cycles are cancelled
// first; commodities without demand take their route from `fallback`.
RoutingSolution decompose_source_flows(const Topology& topo, const Eigen::MatrixXd& flows,
                                       const Eigen::MatrixXd& demand,
                                       const RoutingSolution& fallback);

// Largest per-commodity conservation error over defined commodities.
double max_conservation_error(const Topology& topo, const RoutingSolution& routing);

}  // namespace ncdn
