#pragma once

#include <list>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ncdn/lp/builders.hpp"
#include "ncdn/lp/simplex.hpp"
#include "ncdn/routing.hpp"
#include "ncdn/topology.hpp"
#include "ncdn/types.hpp"
#include "ncdn/workload.hpp"

namespace ncdn {

struct LruOutcome {
  enum Kind { hit, miss, bypass } kind = miss;
  std::vector<ChunkId> evicted;
};

// Byte-budgeted LRU cache of whole chunks at one PoP.
class CacheState {
 public:
  CacheState() = default;
  CacheState(PopId pop, Bytes budget) : pop_(pop), budget_(budget) {}
  // The index holds list iterators, so copies rebuild it.
  CacheState(const CacheState& other);
  CacheState& operator=(const CacheState& other);
  CacheState(CacheState&&) noexcept = default;
  CacheState& operator=(CacheState&&) noexcept = default;

  PopId pop() const { return pop_; }
  Bytes budget() const { return budget_; }
  Bytes used() const { return used_; }
  std::size_t size() const { return order_.size(); }
  bool contains(ChunkId c) const { return index_.count(c) != 0; }
  // Most recently used first.
  std::vector<std::pair<ChunkId, Bytes>> resident() const { return {order_.begin(), order_.end()}; }

  // Recomputes used bytes and index consistency from scratch.
  bool check_invariants() const;

 private:
  friend LruOutcome lru_access(CacheState&, ChunkId, Bytes);

  PopId pop_ = 0;
  Bytes budget_ = 0;
  Bytes used_ = 0;
  std::list<std::pair<ChunkId, Bytes>> order_;
  std::unordered_map<ChunkId, std::list<std::pair<ChunkId, Bytes>>::iterator, ChunkIdHash> index_;
};

// hit: refresh recency. miss: evict least recent until the chunk fits, then
// insert it as most recent. bypass: the chunk exceeds the whole budget and the
// cache is left untouched.
LruOutcome lru_access(CacheState& state, ChunkId chunk, Bytes size);

// Stored chunks per PoP for one epoch. The origin implicitly holds its own
// content; those chunks are never listed or counted.
struct Placement {
  int epoch = 0;
  std::vector<std::vector<ChunkId>> stored;  // sorted per PoP
  std::vector<Bytes> budgets;
  double storage_ratio = 0.0;

  bool holds(PopId pop, ChunkId c) const;
  Bytes used(PopId pop, const ChunkedCatalog& chunks) const;
};

Placement empty_placement(int num_pops, std::vector<Bytes> budgets, const ChunkedCatalog& chunks,
                          int epoch = 0);

// Per-PoP budget = floor(ratio * catalog bytes / PoP count).
std::vector<Bytes> uniform_budgets(double storage_ratio, const ChunkedCatalog& chunks, int num_pops);

// Server chosen per (chunk, client) by closest replica, and the resulting
// average-rate traffic matrix over dm's window.
TrafficMatrix induced_traffic(const Topology& topo, const Placement& placement, const DemandMatrix& dm,
                              const ChunkedCatalog& chunks, const Eigen::MatrixXd& distance);

struct PlannerOptions {
  lp::JointOptions joint;
  lp::SimplexOptions simplex;
  // Second LP stage: among min-MLU solutions prefer least total load.
  bool tie_break = true;
  // Keep the joint program's LP text in the plan.
  bool capture_lp = false;
};

struct PlacementPlan {
  Placement placement;
  // Min-MLU routing of the induced matrix; routing.alpha is the realized MLU
  // of the rounded placement on the planning demand.
  RoutingPlan routing;
  TrafficMatrix induced;
  // Optimum of the fractional joint program (a lower bound).
  double lp_alpha = 0.0;
  long lp_iterations = 0;
  std::string lp_text;
};

// Joint relaxation, then per-PoP rounding: chunks in decreasing x (ties: more
// local demand, then lower id) are admitted while they fit, skipping those that
// do not. Routing is re-solved on the induced matrix.
PlacementPlan plan_placement_optimized(const DemandMatrix& dm, const Topology& topo,
                                       const std::vector<Bytes>& budgets,
                                       const ChunkedCatalog& chunks, const PlannerOptions& options = {},
                                       int epoch = 0);

// Same planner fed the demand of the epoch being planned.
PlacementPlan plan_placement_future(const DemandMatrix& dm_next, const Topology& topo,
                                    const std::vector<Bytes>& budgets,
                                    const ChunkedCatalog& chunks, const PlannerOptions& options = {},
                                    int epoch = 0);

// Rounds the fractional joint solution `x` (keyed as in lp::JointProgram).
Placement round_placement(const std::map<std::pair<ChunkId, PopId>, double>& x,
                          const DemandMatrix& dm, const Topology& topo,
                          const std::vector<Bytes>& budgets, const ChunkedCatalog& chunks,
                          int epoch = 0);

struct HybridBudgets {
  std::vector<Bytes> planned;
  std::vector<Bytes> cache;
};

// cache = round(reserve * budget), planned = the rest.
HybridBudgets split_hybrid(const std::vector<Bytes>& budgets, double reserve);

// CSV rows `epoch,pop_id,chunk_id` (no header).
std::string format_placement(const Placement& p, const Catalog& catalog);

}  // namespace ncdn
