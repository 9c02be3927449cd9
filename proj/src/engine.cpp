#include "ncdn/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include <fmt/core.h>

#include "ncdn/error.hpp"

namespace ncdn {

const char* to_string(PlacementKind k) {
  switch (k) {
    case PlacementKind::lru: return "lru";
    case PlacementKind::optimized: return "optimized";
    case PlacementKind::future: return "future";
    case PlacementKind::hybrid: return "hybrid";
    case PlacementKind::origin: return "origin";
  }
  return "?";
}

const char* to_string(RoutingKind k) {
  switch (k) {
    case RoutingKind::inversecap: return "inversecap";
    case RoutingKind::min_mlu_prior_day: return "min-mlu-prior-day";
    case RoutingKind::min_mlu_future: return "min-mlu-future";
  }
  return "?";
}

const char* to_string(RedirectKind k) {
  return k == RedirectKind::closest ? "closest" : "utilization-aware";
}

const char* to_string(TransitMode k) { return k == TransitMode::same ? "same" : "joint"; }

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const Enum (&all)[N], std::string_view what) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '_', '-');
  for (Enum e : all) {
    if (norm == to_string(e)) return e;
  }
  throw ValidationError(fmt::format("unknown {} '{}'", what, s));
}

}  // namespace

PlacementKind parse_placement_kind(std::string_view s) {
  constexpr PlacementKind all[] = {PlacementKind::lru, PlacementKind::optimized, PlacementKind::future,
                                   PlacementKind::hybrid, PlacementKind::origin};
  return parse_enum(s, all, "placement");
}

RoutingKind parse_routing_kind(std::string_view s) {
  constexpr RoutingKind all[] = {RoutingKind::inversecap, RoutingKind::min_mlu_prior_day,
                                 RoutingKind::min_mlu_future};
  return parse_enum(s, all, "routing");
}

RedirectKind parse_redirect_kind(std::string_view s) {
  constexpr RedirectKind all[] = {RedirectKind::closest, RedirectKind::utilization_aware};
  return parse_enum(s, all, "redirection");
}

TransitMode parse_transit_mode(std::string_view s) {
  constexpr TransitMode all[] = {TransitMode::same, TransitMode::joint};
  return parse_enum(s, all, "transit mode");
}

std::string SchemeSpec::label() const {
  if (!name.empty()) return name;
  std::string out = to_string(placement);
  if (placement == PlacementKind::hybrid) out += fmt::format("({})", hybrid_reserve);
  out += fmt::format("+{}", to_string(routing));
  if (redirection == RedirectKind::utilization_aware) out += "+utilization-aware";
  return out;
}

bool SchemeSpec::demand_aware() const {
  return placement == PlacementKind::optimized || placement == PlacementKind::future ||
         placement == PlacementKind::hybrid || routing != RoutingKind::inversecap;
}

void validate(const SchemeSpec& s, const Topology& topo) {
  const std::string label = s.label();
  if (label.find_first_of(",\n\r\"") != std::string::npos) {
    throw ValidationError(fmt::format("scheme name '{}' may not contain commas, quotes or newlines", label));
  }
  if (!(s.storage_ratio > 0.0) || !std::isfinite(s.storage_ratio)) {
    throw ValidationError(fmt::format("scheme '{}': storage_ratio must be positive", label));
  }
  if (!(s.hybrid_reserve >= 0.0 && s.hybrid_reserve <= 1.0)) {
    throw ValidationError(fmt::format("scheme '{}': hybrid reserve must lie in [0, 1]", label));
  }
  if (s.chunk_size && *s.chunk_size == 0) {
    throw ValidationError(fmt::format("scheme '{}': chunk_size must be positive", label));
  }
  if (s.transit && s.transit->num_pops() != topo.num_pops()) {
    throw ValidationError(fmt::format("scheme '{}': transit matrix size does not match topology", label));
  }
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::clamp(std::ceil(q * n - 1e-9), 1.0, n));
  return values[rank - 1];
}

double MluReport::mean_p99() const {
  if (days.empty()) return 0.0;
  if (days.size() == 1) return days[0].p99_mlu;
  double sum = 0.0;
  for (std::size_t d = 1; d < days.size(); ++d) sum += days[d].p99_mlu;
  return sum / static_cast<double>(days.size() - 1);
}

namespace {

struct Context {
  const Topology& topo;
  const Workload& workload;
  const SchemeSpec& scheme;
  const ExperimentOptions& opt;
  ChunkedCatalog chunks;
  Eigen::MatrixXd distance;
  Eigen::VectorXd capacity;
  RoutingSolution inversecap;
  int days = 0;
  int per_day = 0;
  std::vector<std::size_t> day_begin;  // first request of each day, plus an end marker
};

struct SimState {
  std::vector<CacheState> caches;
  std::vector<PopMask> cached;   // per flat chunk
  std::vector<PopMask> planned;  // per flat chunk
};

struct DayOutput {
  std::vector<TrafficMatrix> matrices;
  TrafficMatrix average;  // day-mean rates
  DayStats stats;
  std::vector<DecisionRecord> decisions;
};

DayOutput simulate_day(const Context& c, SimState& st, int day, const RoutingSolution& routing,
                       bool record) {
  const int n = c.topo.num_pops();
  const Seconds interval = c.opt.interval_s;
  const Seconds day_start = day * c.opt.epoch_s;
  DayOutput out;
  out.matrices.assign(c.per_day, TrafficMatrix(n));
  out.average = TrafficMatrix(n);
  out.stats.day = day;

  const bool aware = c.scheme.redirection == RedirectKind::utilization_aware;
  Eigen::VectorXd base = Eigen::VectorXd::Zero(c.topo.num_links());
  if (aware && c.scheme.transit) base = apply_routing(routing, *c.scheme.transit).load;
  Eigen::VectorXd live = base;
  int live_interval = -1;

  for (std::size_t i = c.day_begin[day]; i < c.day_begin[day + 1]; ++i) {
    const Request& r = c.workload.trace[i];
    const int k = std::min(c.per_day - 1, static_cast<int>((r.timestamp - day_start) / interval));
    if (k != live_interval) {
      live = base;
      live_interval = k;
    }
    const PopId client = r.pop;
    CacheState& cache = st.caches[client];
    c.chunks.expand(r.content, r.bytes, [&](ChunkId chunk, Bytes part) {
      const int f = c.chunks.flat(chunk);
      const PopId origin = c.chunks.origin(chunk);
      RedirectDecision dec;
      if (client == origin) {
        dec = {origin, RedirectReason::origin};
      } else if (cache.budget() > 0 && cache.contains(chunk)) {
        lru_access(cache, chunk, c.chunks.chunk(f).size);
        dec = {client, RedirectReason::local_hit};
      } else if (st.planned[f] & pop_bit(client)) {
        dec = {client, RedirectReason::local_hit};
      } else {
        const PopMask holders = st.planned[f] | st.cached[f];
        const double rate = static_cast<double>(part) * 8.0 / interval;
        dec = aware ? redirect_utilization_aware(client, holders, origin, c.distance, live, c.capacity,
                                                 routing, rate)
                    : redirect_closest(client, holders, origin, c.distance);
        if (cache.budget() > 0) {
          const LruOutcome o = lru_access(cache, chunk, c.chunks.chunk(f).size);
          if (o.kind == LruOutcome::miss) {
            for (ChunkId e : o.evicted) st.cached[c.chunks.flat(e)] &= ~pop_bit(client);
            st.cached[f] |= pop_bit(client);
          }
        }
      }

      out.stats.total_bytes += part;
      switch (dec.reason) {
        case RedirectReason::local_hit: out.stats.local_bytes += part; break;
        case RedirectReason::remote_replica: out.stats.remote_bytes += part; break;
        case RedirectReason::origin: out.stats.origin_bytes += part; break;
      }
      if (dec.server != client) {
        const double rate = static_cast<double>(part) * 8.0 / interval;
        out.matrices[k].add(dec.server, client, rate);
        if (aware) live += rate * routing.fractions(dec.server, client).transpose();
      }
      if (record && c.opt.keep_decisions) {
        out.decisions.push_back({r.timestamp, client, chunk, dec.server, dec.reason});
      }
    });
  }
  for (const TrafficMatrix& tm : out.matrices) out.average += (interval / c.opt.epoch_s) * tm;
  return out;
}

void set_planned(const Context& c, const Placement& p, SimState& st) {
  std::fill(st.planned.begin(), st.planned.end(), 0);
  for (PopId pop = 0; pop < static_cast<PopId>(p.stored.size()); ++pop) {
    for (ChunkId ch : p.stored[pop]) st.planned[c.chunks.flat(ch)] |= pop_bit(pop);
  }
}

bool is_planned(PlacementKind k) {
  return k == PlacementKind::optimized || k == PlacementKind::future || k == PlacementKind::hybrid;
}

}  // namespace

MluReport run_experiment(const Topology& topo, const Workload& workload, const SchemeSpec& scheme,
                         const ExperimentOptions& opt) {
  validate(scheme, topo);
  const std::string label = scheme.label();
  if (topo.num_links() == 0) throw ValidationError("topology has no links to measure");
  if (topo.num_pops() > max_mask_pops) {
    throw ValidationError(fmt::format("at most {} PoPs are supported", max_mask_pops));
  }
  if (!(opt.interval_s > 0.0) || !(opt.epoch_s > 0.0)) {
    throw ValidationError("interval and epoch lengths must be positive");
  }
  const double ratio = opt.epoch_s / opt.interval_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
    throw ValidationError("epoch length must be a whole number of intervals");
  }
  for (const Request& r : workload.trace) {
    if (r.pop < 0 || r.pop >= topo.num_pops()) {
      throw ValidationError(fmt::format("trace names PoP {} outside the topology", r.pop));
    }
    if (r.content < 0 || r.content >= workload.catalog.size()) {
      throw ValidationError("trace references content outside the catalog");
    }
  }
  for (const auto& o : workload.catalog.objects()) {
    if (o.origin < 0 || o.origin >= topo.num_pops()) {
      throw ValidationError(fmt::format("content '{}' has origin outside the topology", o.name));
    }
  }

  Context c{topo,
            workload,
            scheme,
            opt,
            ChunkedCatalog(workload.catalog, scheme.chunk_size),
            distance_matrix(topo, inverse_cap_weights(topo)),
            topo.capacities(),
            shortest_path_routes(topo, inverse_cap_weights(topo)),
            0,
            0,
            {}};
  c.per_day = static_cast<int>(std::llround(ratio));
  const int trace_days =
      workload.trace.empty() ? 0 : static_cast<int>(workload.trace.back().timestamp / opt.epoch_s) + 1;
  c.days = opt.days > 0 ? opt.days : std::max(1, trace_days);
  const bool wants_future =
      scheme.placement == PlacementKind::future || scheme.routing == RoutingKind::min_mlu_future;
  if (wants_future && c.days > trace_days) {
    throw ValidationError(fmt::format("scheme '{}' needs demand for day {} but the trace ends on day {}",
                                      label, c.days - 1, trace_days - 1));
  }
  if (scheme.demand_aware() && c.days < 2) {
    throw ValidationError(fmt::format("scheme '{}' needs a trace spanning at least two days", label));
  }
  for (int d = 0; d <= c.days; ++d) {
    const Seconds t = d * opt.epoch_s;
    c.day_begin.push_back(static_cast<std::size_t>(
        std::lower_bound(workload.trace.begin(), workload.trace.end(), t,
                         [](const Request& r, Seconds v) { return r.timestamp < v; }) -
        workload.trace.begin()));
  }

  const int n = topo.num_pops();
  const std::vector<Bytes> budgets = uniform_budgets(scheme.storage_ratio, c.chunks, n);
  std::vector<Bytes> planned_budget(n, 0), cache_budget(n, 0);
  switch (scheme.placement) {
    case PlacementKind::lru: cache_budget = budgets; break;
    case PlacementKind::optimized:
    case PlacementKind::future: planned_budget = budgets; break;
    case PlacementKind::hybrid: {
      const HybridBudgets h = split_hybrid(budgets, scheme.hybrid_reserve);
      planned_budget = h.planned;
      cache_budget = h.cache;
      break;
    }
    case PlacementKind::origin: break;
  }

  SimState st;
  for (PopId p = 0; p < n; ++p) st.caches.emplace_back(p, cache_budget[p]);
  st.cached.assign(c.chunks.num_chunks(), 0);
  st.planned.assign(c.chunks.num_chunks(), 0);

  std::map<int, DemandMatrix> demand;
  auto demand_of = [&](int d) -> const DemandMatrix& {
    auto it = demand.find(d);
    if (it == demand.end()) {
      it = demand.emplace(d, aggregate_demand(workload.trace, d * opt.epoch_s, (d + 1) * opt.epoch_s,
                                              c.chunks)).first;
    }
    return it->second;
  };

  PlannerOptions planner = opt.planner;
  planner.capture_lp = opt.keep_lp;

  MluReport report;
  report.scheme = label;
  TrafficMatrix previous(n);

  for (int d = 0; d < c.days; ++d) {
    Placement placement = empty_placement(n, planned_budget, c.chunks, d);
    std::optional<PlacementPlan> plan;
    const bool warm = d == 0 && scheme.demand_aware();
    if (!warm && is_planned(scheme.placement)) {
      if (scheme.placement == PlacementKind::future) {
        plan = plan_placement_future(demand_of(d), topo, planned_budget, c.chunks, planner, d);
      } else {
        plan = plan_placement_optimized(demand_of(d - 1), topo, planned_budget, c.chunks, planner, d);
      }
      placement = plan->placement;
      if (opt.keep_lp && !plan->lp_text.empty()) report.lp_dumps.emplace_back(d, plan->lp_text);
    }
    set_planned(c, placement, st);

    RoutingSolution routing = c.inversecap;
    if (!warm && scheme.routing != RoutingKind::inversecap) {
      const bool future = scheme.routing == RoutingKind::min_mlu_future;
      const bool joint = scheme.transit && scheme.transit_mode == TransitMode::joint;
      TrafficMatrix tm(n);
      bool reuse = false;
      if (plan) {
        if (future == (scheme.placement == PlacementKind::future)) {
          tm = plan->induced;
          reuse = !joint;
        } else {
          tm = induced_traffic(topo, placement, demand_of(future ? d : d - 1), c.chunks, c.distance);
        }
      } else if (future) {
        SimState dry = st;
        tm = simulate_day(c, dry, d, c.inversecap, false).average;
      } else {
        tm = previous;
      }
      if (joint) tm += *scheme.transit;
      if (reuse) {
        routing = plan->routing.routing;
      } else {
        routing = solve_min_mlu_routing(topo, tm, planner.simplex, planner.tie_break).routing;
        if (opt.keep_lp) report.lp_dumps.emplace_back(d, lp::build_min_mlu_lp(topo, tm).lp.to_lp_format());
      }
    }

    DayOutput out = simulate_day(c, st, d, routing, true);
    std::vector<double> series;
    for (int k = 0; k < c.per_day; ++k) {
      LinkLoads loads = apply_routing(routing, out.matrices[k]);
      if (scheme.transit) loads = overlay_transit(loads, *scheme.transit, routing);
      const double u = mlu(loads, topo);
      series.push_back(u);
      report.intervals.push_back({d, d * opt.epoch_s + k * opt.interval_s, u});
    }
    DayStats& s = out.stats;
    s.p99_mlu = percentile(series, 0.99);
    s.max_mlu = *std::max_element(series.begin(), series.end());
    double sum = 0.0;
    for (double u : series) sum += u;
    s.mean_mlu = sum / static_cast<double>(series.size());
    s.hit_ratio = s.total_bytes
                      ? static_cast<double>(s.local_bytes + s.remote_bytes) / static_cast<double>(s.total_bytes)
                      : 0.0;
    s.origin_fraction = 1.0 - s.hit_ratio;
    report.days.push_back(s);

    if (opt.keep_matrices) {
      for (auto& tm : out.matrices) report.matrices.push_back(std::move(tm));
      report.routings.push_back(routing);
    }
    if (opt.keep_placements) report.placements.push_back(placement);
    if (opt.keep_decisions) {
      report.decisions.insert(report.decisions.end(), out.decisions.begin(), out.decisions.end());
    }
    previous = out.average;
  }
  return report;
}

namespace {

template <typename Task>
void run_parallel(std::size_t count, int jobs, Task task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  if (threads == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, count); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<MluReport> compare_schemes(const Topology& topo, const Workload& workload,
                                       const std::vector<SchemeSpec>& schemes,
                                       const ExperimentOptions& options, int jobs) {
  if (schemes.empty()) throw ValidationError("at least one scheme is required");
  for (const auto& s : schemes) validate(s, topo);
  std::vector<MluReport> reports(schemes.size());
  run_parallel(schemes.size(), jobs,
               [&](std::size_t i) { reports[i] = run_experiment(topo, workload, schemes[i], options); });
  return reports;
}

std::vector<SweepRow> sweep_storage_ratio(const Topology& topo, const Workload& workload,
                                          const std::vector<SchemeSpec>& templates,
                                          const std::vector<double>& ratios,
                                          const ExperimentOptions& options, int jobs,
                                          std::vector<MluReport>* reports) {
  if (ratios.empty()) throw ValidationError("storage ratio sweep needs at least one ratio");
  if (templates.empty()) throw ValidationError("at least one scheme is required");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0) || !std::isfinite(ratios[i])) throw ValidationError("storage ratios must be positive");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw ValidationError("storage ratios must be ascending");
  }
  std::vector<SchemeSpec> runs;
  for (const auto& t : templates) {
    for (double r : ratios) {
      SchemeSpec s = t;
      s.name = t.label();
      s.storage_ratio = r;
      runs.push_back(std::move(s));
    }
  }
  std::vector<MluReport> out = compare_schemes(topo, workload, runs, options, jobs);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    rows.push_back({runs[i].name, runs[i].storage_ratio, out[i].mean_p99()});
    out[i].scheme = fmt::format("{}@{}", runs[i].name, runs[i].storage_ratio);
  }
  if (reports) *reports = std::move(out);
  return rows;
}

std::string format_report_csv(const std::vector<MluReport>& reports) {
  std::string out = "scheme,day,interval_start_s,mlu\n";
  for (const auto& r : reports) {
    for (const auto& i : r.intervals) out += fmt::format("{},{},{},{}\n", r.scheme, i.day, i.start, i.mlu);
  }
  return out;
}

std::string format_summary_csv(const std::vector<MluReport>& reports) {
  std::string out = "scheme,day,p99_mlu,mean_mlu,hit_ratio,origin_fraction\n";
  for (const auto& r : reports) {
    for (const auto& d : r.days) {
      out += fmt::format("{},{},{},{},{},{}\n", r.scheme, d.day, d.p99_mlu, d.mean_mlu, d.hit_ratio,
                         d.origin_fraction);
    }
  }
  return out;
}

std::string format_comparison_csv(const std::vector<MluReport>& reports) {
  std::string out = "day";
  for (const char* what : {"p99", "ratio", "max"}) {
    for (const auto& r : reports) out += fmt::format(",{}_{}", what, r.scheme);
  }
  out += '\n';
  if (reports.empty()) return out;
  for (std::size_t d = 0; d < reports[0].days.size(); ++d) {
    out += fmt::format("{}", d);
    const double base = reports[0].days[d].p99_mlu;
    for (const auto& r : reports) out += fmt::format(",{}", r.days.at(d).p99_mlu);
    for (const auto& r : reports) {
      const double v = r.days.at(d).p99_mlu;
      const double ratio = v == base ? 1.0 : v / base;
      out += fmt::format(",{}", ratio);
    }
    for (const auto& r : reports) out += fmt::format(",{}", r.days.at(d).max_mlu);
    out += '\n';
  }
  return out;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "scheme,storage_ratio,mean_p99_mlu\n";
  for (const auto& r : rows) out += fmt::format("{},{},{}\n", r.scheme, r.storage_ratio, r.mean_p99_mlu);
  return out;
}

std::string format_decisions_csv(const MluReport& report, const Catalog& catalog) {
  std::string out = "timestamp_s,client_pop,chunk_id,server_pop,reason\n";
  for (const auto& d : report.decisions) {
    out += fmt::format("{},{},{},{},{}\n", d.timestamp, d.client, format_chunk(catalog, d.chunk), d.server,
                       to_string(d.reason));
  }
  return out;
}

}  // namespace ncdn
