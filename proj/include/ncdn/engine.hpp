#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ncdn/placement.hpp"
#include "ncdn/redirection.hpp"
#include "ncdn/routing.hpp"
#include "ncdn/topology.hpp"
#include "ncdn/workload.hpp"

namespace ncdn {

// origin: nothing is stored anywhere; every remote request goes to the origin.
enum class PlacementKind { lru, optimized, future, hybrid, origin };
enum class RoutingKind { inversecap, min_mlu_prior_day, min_mlu_future };
enum class RedirectKind { closest, utilization_aware };
// same: transit rides the epoch's routing as computed for NCDN traffic alone.
// joint: min-MLU routings are computed on NCDN plus transit.
enum class TransitMode { same, joint };

const char* to_string(PlacementKind k);
const char* to_string(RoutingKind k);
const char* to_string(RedirectKind k);
const char* to_string(TransitMode k);
PlacementKind parse_placement_kind(std::string_view s);
RoutingKind parse_routing_kind(std::string_view s);
RedirectKind parse_redirect_kind(std::string_view s);
TransitMode parse_transit_mode(std::string_view s);

struct SchemeSpec {
  std::string name;  // empty: derived from the kinds
  PlacementKind placement = PlacementKind::lru;
  double hybrid_reserve = 0.1;  // share of each PoP's budget given to the LRU front
  RoutingKind routing = RoutingKind::inversecap;
  RedirectKind redirection = RedirectKind::closest;
  std::optional<Bytes> chunk_size;
  double storage_ratio = 1.0;
  std::optional<TrafficMatrix> transit;
  TransitMode transit_mode = TransitMode::same;

  std::string label() const;
  // Planned placements or demand-aware routing: these idle on day 0.
  bool demand_aware() const;
};

void validate(const SchemeSpec& s, const Topology& topo);

struct DecisionRecord {
  Seconds timestamp = 0.0;
  PopId client = 0;
  ChunkId chunk;
  PopId server = 0;
  RedirectReason reason = RedirectReason::origin;
};

struct ExperimentOptions {
  Seconds interval_s = 300.0;
  Seconds epoch_s = 86400.0;
  // Epochs to simulate; 0 covers every epoch the trace touches.
  int days = 0;
  PlannerOptions planner;
  bool keep_matrices = false;
  bool keep_placements = false;
  bool keep_decisions = false;
  bool keep_lp = false;
};

struct IntervalResult {
  int day = 0;
  Seconds start = 0.0;
  double mlu = 0.0;
};

struct DayStats {
  int day = 0;
  double p99_mlu = 0.0;
  double mean_mlu = 0.0;
  double max_mlu = 0.0;
  double hit_ratio = 0.0;
  double origin_fraction = 0.0;
  Bytes total_bytes = 0;
  Bytes local_bytes = 0;
  Bytes remote_bytes = 0;
  Bytes origin_bytes = 0;
};

struct MluReport {
  std::string scheme;
  std::vector<IntervalResult> intervals;
  std::vector<DayStats> days;
  // Optional detail, see ExperimentOptions.
  std::vector<TrafficMatrix> matrices;       // per interval
  std::vector<RoutingSolution> routings;     // per day
  std::vector<Placement> placements;         // per day, planned store only
  std::vector<DecisionRecord> decisions;
  std::vector<std::pair<int, std::string>> lp_dumps;  // (day, LP text)

  // Mean of the daily p99 over days >= 1 (day 0 alone when it is the only one).
  double mean_p99() const;
};

// q-th percentile by the nearest-rank method; 0 for an empty series.
double percentile(std::vector<double> values, double q);

MluReport run_experiment(const Topology& topo, const Workload& workload, const SchemeSpec& scheme,
                         const ExperimentOptions& options = {});

// Runs every scheme on the same inputs, up to `jobs` at a time. Output order
// follows `schemes`.
std::vector<MluReport> compare_schemes(const Topology& topo, const Workload& workload,
                                       const std::vector<SchemeSpec>& schemes,
                                       const ExperimentOptions& options = {}, int jobs = 1);

struct SweepRow {
  std::string scheme;
  double storage_ratio = 0.0;
  double mean_p99_mlu = 0.0;
};

// Each template re-run at every ratio (ascending, positive). Reports are
// named `<label>@<ratio>`.
std::vector<SweepRow> sweep_storage_ratio(const Topology& topo, const Workload& workload,
                                          const std::vector<SchemeSpec>& templates,
                                          const std::vector<double>& ratios,
                                          const ExperimentOptions& options = {}, int jobs = 1,
                                          std::vector<MluReport>* reports = nullptr);

// `scheme,day,interval_start_s,mlu`
std::string format_report_csv(const std::vector<MluReport>& reports);
// `scheme,day,p99_mlu,mean_mlu,hit_ratio,origin_fraction`
std::string format_summary_csv(const std::vector<MluReport>& reports);
// `day,p99_<s>...,ratio_<s>...,max_<s>...`; ratios against the first scheme.
std::string format_comparison_csv(const std::vector<MluReport>& reports);
// `scheme,storage_ratio,mean_p99_mlu`
std::string format_sweep_csv(const std::vector<SweepRow>& rows);
// `timestamp_s,client_pop,chunk_id,server_pop,reason`
std::string format_decisions_csv(const MluReport& report, const Catalog& catalog);

}  // namespace ncdn
