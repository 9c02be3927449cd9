#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ncdn/lp/linear_program.hpp"
#include "ncdn/lp/simplex.hpp"
#include "ncdn/routing.hpp"
#include "ncdn/topology.hpp"
#include "ncdn/workload.hpp"

namespace ncdn::lp {

// per_commodity: one flow variable per (source, destination, link).
// per_source: flows sharing a source are aggregated, one variable per
// (source, link); same optimum, far fewer rows.
enum class FlowModel { per_commodity, per_source };

// Rates and capacities enter the program divided by the largest capacity, so
// flow values are in units of the fastest link.
struct MinMluProgram {
  LinearProgram<double> lp;
  Eigen::Index alpha = -1;
  FlowModel model = FlowModel::per_source;
  double unit_bps = 1.0;
  // flow_var[k][l]: k is the commodity index s * P + t (per_commodity) or the
  // source PoP (per_source); -1 when the variable does not exist.
  std::vector<std::vector<Eigen::Index>> flow_var;
};

MinMluProgram build_min_mlu_lp(const Topology& topo, const TrafficMatrix& tm,
                               FlowModel model = FlowModel::per_source);

struct JointOptions {
  // Remote servers considered per client besides itself and the origin;
  // 0 means every PoP.
  int candidate_servers = 0;
};

// Joint placement + redirection + routing relaxation. x(c, j) is the stored
// fraction of chunk c at PoP j, y(c, i, j) the share of PoP i's demand for c
// served by j, and per-source flows carry the resulting server-to-client rates.
struct JointProgram {
  LinearProgram<double> lp;
  Eigen::Index alpha = -1;
  double unit_bps = 1.0;
  std::vector<ChunkId> chunks;
  std::map<std::pair<ChunkId, PopId>, Eigen::Index> x;
  struct Serve {
    ChunkId chunk;
    PopId client;
    PopId server;
    Eigen::Index var;
  };
  std::vector<Serve> y;
  // flow_var[s][l], -1 when PoP s never serves remote demand.
  std::vector<std::vector<Eigen::Index>> flow_var;
};

JointProgram build_joint_lp(const Topology& topo, const DemandMatrix& dm,
                            const std::vector<Bytes>& storage, const ChunkedCatalog& chunks,
                            const JointOptions& options = {});

// Candidate servers of `client`: itself, then up to `k` nearest other PoPs
// (all when k = 0) by the given distances, ties to the lower id.
std::vector<PopId> candidate_servers(const Eigen::MatrixXd& distance, PopId client, int k);

struct MinMaxSolution {
  LpSolution<double> solution;
  double alpha = 0.0;  // optimum of the first stage
  long iterations = 0;
};

// Minimizes alpha. With `tie_break`, a second stage keeps alpha at its optimum
// and minimizes the InverseCap-weighted sum of link flows, so links off the
// bottleneck are not loaded for nothing. The first-stage optimum is returned
// when the second stage fails.
MinMaxSolution solve_min_max(const LinearProgram<double>& lp, Eigen::Index alpha, const Topology& topo,
                             const std::vector<std::vector<Eigen::Index>>& flow_var,
                             const SimplexOptions& options, bool tie_break);

}  // namespace ncdn::lp
