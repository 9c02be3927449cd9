#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "config.hpp"
#include "ncdn/csv.hpp"
#include "ncdn/engine.hpp"
#include "ncdn/error.hpp"
#include "ncdn/lp/builders.hpp"

namespace fs = std::filesystem;
using namespace ncdn;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool dump_lp = false;
  bool decision_log = false;
  bool dump_placement = false;
};

cli::ExperimentConfig load(const Common& c) {
  auto config = cli::load_config(c.config);
  if (c.seed) cli::override_seed(config, *c.seed);
  return config;
}

fs::path out_dir(const Common& c, const cli::ExperimentConfig& config) {
  if (!c.out.empty()) return c.out;
  if (config.output_dir) return *config.output_dir;
  return "out";
}

void echo_config(const fs::path& dir, const cli::ExperimentConfig& config) {
  write_file(dir / "config.json", config.echo.dump(2) + "\n");
}

int gen_trace(const Common& c) {
  const auto config = load(c);
  if (!config.synthetic) throw ValidationError("gen-trace needs a 'synthetic' block");
  const Topology topo = cli::build_topology(config);
  const Workload w = cli::build_workload(config, topo);
  const fs::path dir = out_dir(c, config);
  write_file(dir / "topology.topo", format_topology(topo));
  write_file(dir / "catalog.csv", format_catalog(w.catalog));
  write_file(dir / "trace.csv", format_trace(w));
  echo_config(dir, config);
  fmt::print("{} requests, {} objects -> {}\n", w.trace.size(), w.catalog.size(), dir.string());
  return 0;
}

std::string file_label(std::size_t i, const SchemeSpec& s) {
  std::string out = fmt::format("{}_{}", i, s.label());
  for (char& ch : out) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  }
  return out;
}

int simulate(const Common& c) {
  auto config = load(c);
  const Topology topo = cli::build_topology(config);
  const Workload w = cli::build_workload(config, topo);
  const auto schemes = cli::build_schemes(config, topo);
  ExperimentOptions opt = config.options;
  opt.keep_lp = c.dump_lp;
  opt.keep_decisions = c.decision_log;
  opt.keep_placements = c.dump_placement;
  const fs::path dir = out_dir(c, config);
  echo_config(dir, config);

  std::vector<MluReport> reports;
  std::vector<SchemeSpec> ran;
  if (config.storage_ratios.empty()) {
    reports = compare_schemes(topo, w, schemes, opt, c.jobs);
    ran = schemes;
  } else {
    const auto rows = sweep_storage_ratio(topo, w, schemes, config.storage_ratios, opt, c.jobs, &reports);
    write_file(dir / "sweep.csv", format_sweep_csv(rows));
    for (const auto& s : schemes) {
      for (double r : config.storage_ratios) {
        ran.push_back(s);
        ran.back().storage_ratio = r;
      }
    }
  }
  write_file(dir / "report.csv", format_report_csv(reports));
  write_file(dir / "summary.csv", format_summary_csv(reports));
  if (config.storage_ratios.empty()) write_file(dir / "comparison.csv", format_comparison_csv(reports));

  for (std::size_t i = 0; i < reports.size(); ++i) {
    const MluReport& r = reports[i];
    const std::string base = file_label(i, ran[i]);
    for (const auto& [day, text] : r.lp_dumps) write_file(dir / "lp" / fmt::format("{}_day{}.lp", base, day), text);
    if (c.decision_log) write_file(dir / fmt::format("decisions_{}.csv", base), format_decisions_csv(r, w.catalog));
    if (c.dump_placement) {
      std::string text = "epoch,pop_id,chunk_id\n";
      for (const auto& p : r.placements) text += format_placement(p, w.catalog);
      write_file(dir / fmt::format("placement_{}.csv", base), text);
    }
    fmt::print("{}: mean p99 MLU {:.6g}\n", r.scheme, r.mean_p99());
  }
  return 0;
}

int solve_routing(const std::string& topo_path, const std::string& tm_path, const Common& c) {
  const Topology topo = load_topology(topo_path);
  const TrafficMatrix tm = load_traffic_matrix(tm_path, topo);
  if (c.dump_lp) {
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    write_file(dir / "routing.lp", lp::build_min_mlu_lp(topo, tm).lp.to_lp_format());
  }
  const RoutingPlan plan = solve_min_mlu_routing(topo, tm);
  const RoutingSolution ic = shortest_path_routes(topo, inverse_cap_weights(topo));
  fmt::print("alpha* = {:.10g}\n", plan.alpha);
  fmt::print("inversecap_mlu = {:.10g}\n", mlu(apply_routing(ic, tm), topo));
  fmt::print("src_pop,dst_pop,link_src,link_dst,fraction\n");
  for (PopId s = 0; s < topo.num_pops(); ++s) {
    for (PopId t = 0; t < topo.num_pops(); ++t) {
      if (tm(s, t) <= 0.0) continue;
      const auto f = plan.routing.fractions(s, t);
      for (LinkId l = 0; l < topo.num_links(); ++l) {
        if (f(l) > 1e-12) fmt::print("{},{},{},{},{:.10g}\n", s, t, topo.link(l).src, topo.link(l).dst, f(l));
      }
    }
  }
  return 0;
}

int solve_placement(const Common& c, int day, std::size_t scheme_index) {
  const auto config = load(c);
  const Topology topo = cli::build_topology(config);
  const Workload w = cli::build_workload(config, topo);
  if (scheme_index >= config.schemes.size()) throw ValidationError("scheme index out of range");
  const SchemeSpec& s = config.schemes[scheme_index];
  if (day < 0) throw ValidationError("day must be >= 0");
  const ChunkedCatalog chunks(w.catalog, s.chunk_size);
  const Seconds epoch = config.options.epoch_s;
  const DemandMatrix dm = aggregate_demand(w.trace, day * epoch, (day + 1) * epoch, chunks);
  if (dm.demand.empty()) throw ValidationError(fmt::format("no requests on day {}", day));
  PlannerOptions planner = config.options.planner;
  planner.capture_lp = c.dump_lp;
  const auto budgets = uniform_budgets(s.storage_ratio, chunks, topo.num_pops());
  const PlacementPlan plan = plan_placement_optimized(dm, topo, budgets, chunks, planner, day);

  const fs::path dir = out_dir(c, config);
  echo_config(dir, config);
  write_file(dir / "placement.csv", "epoch,pop_id,chunk_id\n" + format_placement(plan.placement, w.catalog));
  if (c.dump_lp) write_file(dir / fmt::format("placement_day{}.lp", day), plan.lp_text);
  fmt::print("lp_alpha = {:.10g}\n", plan.lp_alpha);
  fmt::print("rounded_alpha = {:.10g}\n", plan.routing.alpha);
  fmt::print("stored_chunks = {}\n", [&] {
    std::size_t n = 0;
    for (const auto& v : plan.placement.stored) n += v.size();
    return n;
  }());
  return 0;
}

// Rebuilds per-day statistics from `scheme,day,interval_start_s,mlu` rows.
std::vector<MluReport> read_reports(const std::vector<std::string>& paths) {
  std::vector<MluReport> out;
  for (const auto& path : paths) {
    const auto lines = csv::lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (csv::trim(lines[i]).empty()) continue;
      if (i == 0 && lines[i].starts_with("scheme,")) continue;
      const auto f = csv::split(lines[i]);
      const auto day = f.size() == 4 ? csv::number<int>(f[1]) : std::nullopt;
      const auto start = f.size() == 4 ? csv::number<double>(f[2]) : std::nullopt;
      const auto value = f.size() == 4 ? csv::number<double>(f[3]) : std::nullopt;
      if (!day || !start || !value || *day < 0) {
        throw ValidationError(fmt::format("{} row {}: expected scheme,day,interval_start_s,mlu", path, i + 1));
      }
      const std::string name(f[0]);
      auto it = std::find_if(out.begin(), out.end(), [&](const MluReport& r) { return r.scheme == name; });
      if (it == out.end()) {
        out.emplace_back().scheme = name;
        it = out.end() - 1;
      }
      it->intervals.push_back({*day, *start, *value});
    }
  }
  if (out.empty()) throw ValidationError("no interval rows found");
  for (auto& r : out) {
    int days = 0;
    for (const auto& i : r.intervals) days = std::max(days, i.day + 1);
    for (int d = 0; d < days; ++d) {
      std::vector<double> v;
      for (const auto& i : r.intervals) {
        if (i.day == d) v.push_back(i.mlu);
      }
      DayStats s;
      s.day = d;
      if (!v.empty()) {
        s.p99_mlu = percentile(v, 0.99);
        s.max_mlu = *std::max_element(v.begin(), v.end());
        for (double x : v) s.mean_mlu += x;
        s.mean_mlu /= static_cast<double>(v.size());
      }
      r.days.push_back(s);
    }
  }
  return out;
}

int report(const std::vector<std::string>& inputs, const Common& c) {
  const auto reports = read_reports(inputs);
  std::string summary = "scheme,day,p99_mlu,mean_mlu,max_mlu\n";
  for (const auto& r : reports) {
    for (const auto& d : r.days) summary += fmt::format("{},{},{},{},{}\n", r.scheme, d.day, d.p99_mlu, d.mean_mlu, d.max_mlu);
  }
  const std::string table = format_comparison_csv(reports);
  if (c.out.empty()) {
    fmt::print("{}\n{}", summary, table);
  } else {
    write_file(fs::path(c.out) / "summary.csv", summary);
    write_file(fs::path(c.out) / "comparison.csv", table);
  }
  for (const auto& r : reports) fmt::print(stderr, "{}: mean p99 MLU {:.6g}\n", r.scheme, r.mean_p99());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NCDN placement, redirection and routing simulator"};
  app.require_subcommand(1);
  Common c;
  int day = 0;
  std::size_t scheme_index = 0;
  std::string topo_path, tm_path;
  std::vector<std::string> inputs;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "experiment config (JSON, comments allowed)")->required();
    sub->add_option("--seed", c.seed, "overrides the config seed");
  };
  auto* gen = app.add_subcommand("gen-trace", "write a synthetic trace, catalog and topology");
  add_config(gen);
  gen->add_option("--out", c.out, "output directory");

  auto* sim = app.add_subcommand("simulate", "run every configured scheme and write reports");
  add_config(sim);
  sim->add_option("--out", c.out, "output directory");
  sim->add_option("--jobs", c.jobs, "parallel scheme runs")->check(CLI::PositiveNumber);
  sim->add_flag("--dump-lp", c.dump_lp, "write the LPs solved per day");
  sim->add_flag("--decision-log", c.decision_log, "write every redirection decision");
  sim->add_flag("--dump-placement", c.dump_placement, "write planned placements");

  auto* route = app.add_subcommand("solve-routing", "min-MLU routing of one traffic matrix");
  route->add_option("topology", topo_path, "topology file")->required();
  route->add_option("matrix", tm_path, "traffic matrix CSV (src_pop,dst_pop,rate_mbps)")->required();
  route->add_flag("--dump-lp", c.dump_lp, "write routing.lp");
  route->add_option("--out", c.out, "directory for --dump-lp");

  auto* place = app.add_subcommand("solve-placement", "plan one day's placement from that day's demand");
  add_config(place);
  place->add_option("--out", c.out, "output directory");
  place->add_option("--day", day, "day whose demand is planned for");
  place->add_option("--scheme", scheme_index, "index of the scheme supplying storage and chunking");
  place->add_flag("--dump-lp", c.dump_lp, "write the joint LP");

  auto* rep = app.add_subcommand("report", "re-derive daily summaries from interval CSVs");
  rep->add_option("reports", inputs, "report.csv files")->required();
  rep->add_option("--out", c.out, "output directory (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return gen_trace(c);
    if (*sim) return simulate(c);
    if (*route) return solve_routing(topo_path, tm_path, c);
    if (*place) return solve_placement(c, day, scheme_index);
    if (*rep) return report(inputs, c);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
