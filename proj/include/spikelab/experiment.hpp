#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikelab/geometry.hpp"
#include "spikelab/mu_solver.hpp"
#include "spikelab/reduced_energy.hpp"
#include "spikelab/weight.hpp"

namespace spikelab {

struct SpikeSpec {
  SourceKind kind = SourceKind::Boundary;
  std::optional<Vec2> x;     ///< interior position
  std::optional<double> s;   ///< boundary parameter
};

struct ExperimentConfig {
  nlohmann::json domain_spec = {{"type", "disk"}, {"center", {0, 0}}, {"radius", 1.0}};
  nlohmann::json weight_spec = {{"type", "constant"}, {"value", 1.0}};
  Domain domain = Domain::disk({0, 0}, 1.0);
  WeightField weight;
  std::size_t m = 1;
  std::size_t l = 0;
  std::vector<SpikeSpec> spikes;  ///< empty means "auto"
  std::vector<double> p_schedule{30.0};
  double h = 0.1;
  double resolution = 0.15;
  std::string regime = "separated";
  std::optional<double> lambda_d;
  double xi_star_s = 0.0;
  ClusteredOptions clustered;
  int landscape_samples = 16;
  std::vector<std::pair<int, int>> lift_exponents{{1, 0}, {1, 1}, {2, 3}};
  int lift_points = 100;
  std::uint64_t seed = 1;

  /// Canonical JSON echo of the parsed configuration.
  nlohmann::json to_json() const;
};

/// Parses and validates a configuration; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Named presets: disk-boundary-spike, disk-interior-spike, linear-weight-interior,
/// bump-cluster.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Spike list from the config; boundary spikes without a parameter are spread evenly.
std::vector<Spike> configured_spikes(const ExperimentConfig& cfg);

/// Runs one subcommand (constants, greens, mu, ansatz, landscape, verify, lift-check),
/// writes its artifacts and report.json into `out`, and returns the report. Stage failures
/// are recorded in the report (status "failed") rather than thrown.
nlohmann::json run_experiment(const std::string& command, const ExperimentConfig& cfg,
                              const std::filesystem::path& out);

/// Rounds to 15 significant digits so serialized floats are reproducible.
double round15(double x);

}  // namespace spikelab
