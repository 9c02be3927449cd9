#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "ncdn/error.hpp"

namespace ncdn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw ValidationError(fmt::format("config: {} must be an object", where));
  const std::set<std::string_view> known(keys);
  for (const auto& [k, v] : obj.items()) {
    if (!known.count(k)) throw ValidationError(fmt::format("config: unknown key '{}' in {}", k, where));
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

fs::path resolve(const json& v, const fs::path& base) {
  fs::path p = v.get<std::string>();
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

SchemeSpec parse_scheme(const json& j, double default_ratio) {
  only_keys(j, "scheme", {"name", "placement", "routing", "redirection", "hybrid_reserve", "chunk_size",
                          "storage_ratio", "transit_matrix", "transit_mode"});
  SchemeSpec s;
  s.storage_ratio = default_ratio;
  read(j, "name", s.name);
  if (j.contains("placement")) s.placement = parse_placement_kind(j.at("placement").get<std::string>());
  if (j.contains("routing")) s.routing = parse_routing_kind(j.at("routing").get<std::string>());
  if (j.contains("redirection")) s.redirection = parse_redirect_kind(j.at("redirection").get<std::string>());
  if (j.contains("transit_mode")) s.transit_mode = parse_transit_mode(j.at("transit_mode").get<std::string>());
  read(j, "hybrid_reserve", s.hybrid_reserve);
  read(j, "storage_ratio", s.storage_ratio);
  if (j.contains("chunk_size")) s.chunk_size = j.at("chunk_size").get<Bytes>();
  return s;
}

ExperimentConfig parse(const json& root, const fs::path& base) {
  only_keys(root, "config",
            {"topology", "trace", "catalog", "synthetic", "schemes", "storage_ratio", "storage_ratios",
             "interval_s", "epoch_s", "days", "candidate_servers", "output_dir", "seed"});
  ExperimentConfig c;
  json echo = root;
  read(root, "seed", c.seed);
  echo["seed"] = c.seed;

  if (!root.contains("topology")) throw ValidationError("config: 'topology' is required");
  const json& t = root.at("topology");
  if (t.is_string()) {
    c.topology_path = resolve(t, base);
    echo["topology"] = c.topology_path->string();
  } else {
    only_keys(t, "topology", {"random"});
    const json& r = t.at("random");
    only_keys(r, "topology.random", {"pops", "extra_links", "capacities_mbps"});
    RandomTopologyParams p;
    read(r, "pops", p.pops);
    read(r, "extra_links", p.extra_links);
    read(r, "capacities_mbps", p.capacity_choices_mbps);
    p.seed = c.seed;
    c.random_topology = p;
  }

  if (root.contains("trace") == root.contains("synthetic")) {
    throw ValidationError("config: give exactly one of 'trace' or 'synthetic'");
  }
  if (root.contains("trace")) {
    c.trace_path = resolve(root.at("trace"), base);
    echo["trace"] = c.trace_path->string();
    if (root.contains("catalog")) {
      c.catalog_path = resolve(root.at("catalog"), base);
      echo["catalog"] = c.catalog_path->string();
    }
  } else {
    if (root.contains("catalog")) throw ValidationError("config: 'catalog' goes with 'trace'");
    const json& s = root.at("synthetic");
    only_keys(s, "synthetic",
              {"catalog_size", "zipf_alpha", "requests_per_day", "days", "churn", "object_size_min",
               "object_size_max", "diurnal_peak_ratio", "pop_weights", "day_length"});
    SynthParams p;
    read(s, "catalog_size", p.catalog_size);
    read(s, "zipf_alpha", p.zipf_alpha);
    read(s, "requests_per_day", p.requests_per_day);
    read(s, "days", p.days);
    read(s, "churn", p.churn);
    read(s, "object_size_min", p.object_size_min);
    read(s, "object_size_max", p.object_size_max);
    read(s, "diurnal_peak_ratio", p.diurnal_peak_ratio);
    read(s, "pop_weights", p.pop_weights);
    read(s, "day_length", p.day_length);
    p.seed = c.seed;
    c.synthetic = p;
  }

  double ratio = 1.0;
  read(root, "storage_ratio", ratio);
  read(root, "storage_ratios", c.storage_ratios);
  read(root, "interval_s", c.options.interval_s);
  read(root, "epoch_s", c.options.epoch_s);
  read(root, "days", c.options.days);
  read(root, "candidate_servers", c.options.planner.joint.candidate_servers);
  if (root.contains("output_dir")) {
    c.output_dir = resolve(root.at("output_dir"), base);
    echo["output_dir"] = c.output_dir->string();
  }

  if (!root.contains("schemes") || !root.at("schemes").is_array() || root.at("schemes").empty()) {
    throw ValidationError("config: 'schemes' must be a non-empty list");
  }
  for (std::size_t i = 0; i < root.at("schemes").size(); ++i) {
    const json& js = root.at("schemes")[i];
    c.schemes.push_back(parse_scheme(js, ratio));
    c.transit_paths.emplace_back();
    if (js.contains("transit_matrix")) {
      c.transit_paths.back() = resolve(js.at("transit_matrix"), base);
      echo["schemes"][i]["transit_matrix"] = c.transit_paths.back()->string();
    }
  }
  c.echo = std::move(echo);
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("config: {}", e.what()));
  }
  try {
    return parse(root, base_dir);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("config: {}", e.what()));
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), fs::absolute(path).parent_path());
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.echo["seed"] = seed;
  if (config.random_topology) config.random_topology->seed = seed;
  if (config.synthetic) config.synthetic->seed = seed;
}

Topology build_topology(const ExperimentConfig& config) {
  return config.topology_path ? load_topology(*config.topology_path) : random_topology(*config.random_topology);
}

std::vector<SchemeSpec> build_schemes(const ExperimentConfig& config, const Topology& topo) {
  std::vector<SchemeSpec> out = config.schemes;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (config.transit_paths[i]) out[i].transit = load_traffic_matrix(*config.transit_paths[i], topo);
  }
  return out;
}

Workload build_workload(const ExperimentConfig& config, const Topology& topo) {
  if (config.synthetic) return generate_synthetic_trace(*config.synthetic, topo);
  return load_trace(*config.trace_path, topo, config.catalog_path);
}

}  // namespace ncdn::cli
