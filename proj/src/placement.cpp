#include "ncdn/placement.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "ncdn/error.hpp"
#include "ncdn/redirection.hpp"

namespace ncdn {

CacheState::CacheState(const CacheState& other)
    : pop_(other.pop_), budget_(other.budget_), used_(other.used_), order_(other.order_) {
  for (auto it = order_.begin(); it != order_.end(); ++it) index_.emplace(it->first, it);
}

CacheState& CacheState::operator=(const CacheState& other) {
  if (this != &other) {
    CacheState copy(other);
    *this = std::move(copy);
  }
  return *this;
}

bool CacheState::check_invariants() const {
  Bytes sum = 0;
  std::unordered_map<ChunkId, int, ChunkIdHash> seen;
  for (auto it = order_.begin(); it != order_.end(); ++it) {
    sum += it->second;
    if (++seen[it->first] > 1) return false;
    const auto found = index_.find(it->first);
    if (found == index_.end() || found->second != it) return false;
  }
  return sum == used_ && used_ <= budget_ && index_.size() == order_.size();
}

LruOutcome lru_access(CacheState& s, ChunkId chunk, Bytes size) {
  LruOutcome out;
  if (const auto it = s.index_.find(chunk); it != s.index_.end()) {
    s.order_.splice(s.order_.begin(), s.order_, it->second);
    out.kind = LruOutcome::hit;
    return out;
  }
  if (size > s.budget_) {
    out.kind = LruOutcome::bypass;
    return out;
  }
  out.kind = LruOutcome::miss;
  while (s.used_ + size > s.budget_) {
    const auto& [victim, bytes] = s.order_.back();
    out.evicted.push_back(victim);
    s.used_ -= bytes;
    s.index_.erase(victim);
    s.order_.pop_back();
  }
  s.order_.emplace_front(chunk, size);
  s.index_.emplace(chunk, s.order_.begin());
  s.used_ += size;
  return out;
}

bool Placement::holds(PopId pop, ChunkId c) const {
  const auto& v = stored[pop];
  return std::binary_search(v.begin(), v.end(), c);
}

Bytes Placement::used(PopId pop, const ChunkedCatalog& chunks) const {
  Bytes sum = 0;
  for (ChunkId c : stored[pop]) sum += chunks.chunk(c).size;
  return sum;
}

Placement empty_placement(int num_pops, std::vector<Bytes> budgets, const ChunkedCatalog& chunks,
                          int epoch) {
  Placement p;
  p.epoch = epoch;
  p.stored.assign(num_pops, {});
  p.budgets = std::move(budgets);
  Bytes total = 0;
  for (Bytes b : p.budgets) total += b;
  p.storage_ratio = chunks.total_bytes() ? static_cast<double>(total) / chunks.total_bytes() : 0.0;
  return p;
}

std::vector<Bytes> uniform_budgets(double storage_ratio, const ChunkedCatalog& chunks, int num_pops) {
  if (!(storage_ratio >= 0.0) || !std::isfinite(storage_ratio)) {
    throw ValidationError("storage ratio must be finite and >= 0");
  }
  const long double share = static_cast<long double>(storage_ratio) * chunks.total_bytes() / num_pops;
  return std::vector<Bytes>(num_pops, static_cast<Bytes>(std::floor(share)));
}

TrafficMatrix induced_traffic(const Topology& topo, const Placement& placement, const DemandMatrix& dm,
                              const ChunkedCatalog& chunks, const Eigen::MatrixXd& distance) {
  TrafficMatrix tm(topo.num_pops());
  std::vector<PopMask> holders(chunks.num_chunks(), 0);
  for (PopId p = 0; p < topo.num_pops(); ++p) {
    for (ChunkId c : placement.stored[p]) holders[chunks.flat(c)] |= pop_bit(p);
  }
  for (const auto& [key, bytes] : dm.demand) {
    const RedirectDecision d =
        redirect_closest(key.pop, holders[chunks.flat(key.chunk)], chunks.origin(key.chunk), distance);
    if (d.server != key.pop && bytes > 0) {
      tm.add(d.server, key.pop, static_cast<double>(bytes) * 8.0 / dm.length());
    }
  }
  return tm;
}

Placement round_placement(const std::map<std::pair<ChunkId, PopId>, double>& x,
                          const DemandMatrix& dm, const Topology& topo,
                          const std::vector<Bytes>& budgets, const ChunkedCatalog& chunks, int epoch) {
  Placement out = empty_placement(topo.num_pops(), budgets, chunks, epoch);
  struct Candidate {
    long long x;  // fraction on a 1e-9 grid so solver noise does not reorder ties
    Bytes demand;
    ChunkId id;
  };
  std::vector<Bytes> local(chunks.num_chunks());
  for (PopId j = 0; j < topo.num_pops(); ++j) {
    if (budgets[j] == 0) continue;
    std::fill(local.begin(), local.end(), 0);
    for (const auto& [key, bytes] : dm.demand) {
      if (key.pop == j) local[chunks.flat(key.chunk)] += bytes;
    }
    std::vector<Candidate> order;
    for (const Chunk& c : chunks.chunks()) {
      if (chunks.origin(c.id) == j) continue;
      const auto it = x.find({c.id, j});
      const double frac = it == x.end() ? 0.0 : std::clamp(it->second, 0.0, 1.0);
      order.push_back({std::llround(frac * 1e9), local[chunks.flat(c.id)], c.id});
    }
    std::sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) {
      if (a.x != b.x) return a.x > b.x;
      if (a.demand != b.demand) return a.demand > b.demand;
      return a.id < b.id;
    });
    Bytes free = budgets[j];
    for (const Candidate& c : order) {
      const Bytes size = chunks.chunk(c.id).size;
      if (size > free) continue;
      out.stored[j].push_back(c.id);
      free -= size;
      if (free == 0) break;
    }
    std::sort(out.stored[j].begin(), out.stored[j].end());
  }
  return out;
}

PlacementPlan plan_placement_optimized(const DemandMatrix& dm, const Topology& topo,
                                       const std::vector<Bytes>& budgets,
                                       const ChunkedCatalog& chunks, const PlannerOptions& options,
                                       int epoch) {
  if (static_cast<int>(budgets.size()) != topo.num_pops()) {
    throw ValidationError("one storage budget per PoP required");
  }
  PlacementPlan plan;
  std::map<std::pair<ChunkId, PopId>, double> x;
  if (!dm.demand.empty()) {
    const lp::JointProgram prog = lp::build_joint_lp(topo, dm, budgets, chunks, options.joint);
    if (options.capture_lp) plan.lp_text = prog.lp.to_lp_format();
    const auto mm =
        lp::solve_min_max(prog.lp, prog.alpha, topo, prog.flow_var, options.simplex, options.tie_break);
    const auto& sol = mm.solution;
    if (!sol.optimal()) {
      throw NumericError(fmt::format("joint placement LP for epoch {} ended {}: {}", epoch,
                                     lp::to_string(sol.status), sol.message));
    }
    plan.lp_alpha = mm.alpha;
    plan.lp_iterations = mm.iterations;
    for (const auto& [key, var] : prog.x) x[key] = sol.x(var);
  }
  plan.placement = round_placement(x, dm, topo, budgets, chunks, epoch);
  const Eigen::MatrixXd dist = distance_matrix(topo, inverse_cap_weights(topo));
  plan.induced = dm.length() > 0.0 ? induced_traffic(topo, plan.placement, dm, chunks, dist)
                                   : TrafficMatrix(topo.num_pops());
  plan.routing = solve_min_mlu_routing(topo, plan.induced, options.simplex, options.tie_break);
  plan.lp_iterations += plan.routing.lp_iterations;
  return plan;
}

PlacementPlan plan_placement_future(const DemandMatrix& dm_next, const Topology& topo,
                                    const std::vector<Bytes>& budgets,
                                    const ChunkedCatalog& chunks, const PlannerOptions& options,
                                    int epoch) {
  return plan_placement_optimized(dm_next, topo, budgets, chunks, options, epoch);
}

HybridBudgets split_hybrid(const std::vector<Bytes>& budgets, double reserve) {
  if (!(reserve >= 0.0 && reserve <= 1.0)) throw ValidationError("hybrid reserve must lie in [0, 1]");
  HybridBudgets out;
  for (Bytes b : budgets) {
    const auto cache = static_cast<Bytes>(std::llround(reserve * static_cast<long double>(b)));
    out.cache.push_back(cache);
    out.planned.push_back(b - cache);
  }
  return out;
}

std::string format_placement(const Placement& p, const Catalog& catalog) {
  std::string out;
  for (PopId pop = 0; pop < static_cast<PopId>(p.stored.size()); ++pop) {
    for (ChunkId c : p.stored[pop]) out += fmt::format("{},{},{}\n", p.epoch, pop, format_chunk(catalog, c));
  }
  return out;
}

}  // namespace ncdn
