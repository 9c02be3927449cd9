#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncdn/engine.hpp"

namespace ncdn::cli {

// One experiment, as read from a JSON config (comments allowed). Relative
// paths resolve against the config file's directory.
struct ExperimentConfig {
  std::optional<std::filesystem::path> topology_path;
  std::optional<RandomTopologyParams> random_topology;
  std::optional<std::filesystem::path> trace_path;
  std::optional<std::filesystem::path> catalog_path;
  std::optional<SynthParams> synthetic;
  std::vector<SchemeSpec> schemes;
  std::vector<std::optional<std::filesystem::path>> transit_paths;  // per scheme
  std::vector<double> storage_ratios;  // non-empty: run a sweep
  ExperimentOptions options;
  std::optional<std::filesystem::path> output_dir;
  std::uint64_t seed = 42;
  // Effective configuration, paths made absolute and the seed applied.
  nlohmann::json echo;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Replaces the config seed and every seed derived from it.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

Topology build_topology(const ExperimentConfig& config);
// Schemes with their transit matrices loaded.
std::vector<SchemeSpec> build_schemes(const ExperimentConfig& config, const Topology& topo);
Workload build_workload(const ExperimentConfig& config, const Topology& topo);

}  // namespace ncdn::cli
