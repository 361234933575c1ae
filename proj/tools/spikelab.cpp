// Command-line front end: spikelab <subcommand> [--config PATH | --preset NAME] [--out DIR] ...

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "spikelab/error.hpp"
#include "spikelab/experiment.hpp"

using namespace spikelab;

int main(int argc, char** argv) {
  CLI::App app{"spike-layer experiments for the weighted Neumann problem"};
  app.require_subcommand(1, 1);

  std::string config_path, preset_name, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<double> p, mesh_h;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"constants", "asymptotic constants C1, C2, K and the bubble mass"},
      {"greens", "regular part of the Green's function at each spike (greens.csv)"},
      {"mu", "concentration parameters per p (mu.json)"},
      {"ansatz", "approximate solution and its energy (ansatz.csv)"},
      {"landscape", "reduced-energy scan and critical points (landscape.csv, critical_points.json)"},
      {"verify", "Newton continuation in p from the ansatz (branch.json)"},
      {"lift-check", "operator identity for monomial weights (lift.json)"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON experiment file")->check(CLI::ExistingFile);
    sub->add_option("--preset", preset_name, "named configuration");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "RNG seed for randomized steps");
    sub->add_option("--p", p, "single exponent, replacing the schedule");
    sub->add_option("--mesh-h", mesh_h, "background mesh size");
  }
  app.footer("presets: disk-boundary-spike, disk-interior-spike, linear-weight-interior, bump-cluster");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    if (!config_path.empty() && !preset_name.empty()) throw ConfigError("give either --config or --preset");
    nlohmann::json j;
    if (!config_path.empty()) {
      j = load_config(config_path).to_json();
    } else if (!preset_name.empty()) {
      j = preset(preset_name).to_json();
    } else {
      j = ExperimentConfig{}.to_json();
    }
    // command-line overrides go through the same validation as the file
    if (seed) j["seed"] = *seed;
    if (p) {
      j.erase("p_schedule");
      j["p"] = *p;
    }
    if (mesh_h) j["mesh"]["h"] = *mesh_h;
    cfg = parse_config(j);
  } catch (const Error& e) {
    std::cerr << "spikelab: invalid configuration: " << e.what() << '\n';
    return 1;
  }

  try {
    const nlohmann::json report = run_experiment(command, cfg, out_dir);
    std::cout << report.dump(2) << '\n';
    if (report["status"] != "ok") return 2;
    return report["checks_pass"].get<bool>() ? 0 : 3;
  } catch (const Error& e) {
    std::cerr << "spikelab: " << e.what() << '\n';
    return 1;
  }
}
