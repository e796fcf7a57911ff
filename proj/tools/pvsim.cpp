// pvsim: scenario runner for the alpha point-vortex toolkit.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pointvortex/scenario.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Generalized point-vortex simulator and collapse analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<double> tol;
  std::optional<double> collapse_radius;
  std::optional<std::uint64_t> seed;
  app.add_option("--tol", tol, "Relative integration tolerance")->check(CLI::PositiveNumber);
  app.add_option("--collapse-radius", collapse_radius, "Minimal pair distance that counts as a collapse")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Seed for random initial configurations");

  std::string scenario_path;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Simulate one scenario and write trajectory.csv and summary.json");
  run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  std::string alpha_list;
  std::string seed_list;
  std::string template_path;
  std::string sweep_out;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario template over a list of alphas");
  sweep->add_option("--alphas", alpha_list, "Comma-separated alpha values")->required();
  sweep->add_option("--seeds", seed_list, "Comma-separated seeds (random templates)");
  sweep->add_option("--template", template_path, "Scenario template JSON")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pv::kExitSchema;
  }

  const pv::RunOverrides overrides{tol, collapse_radius, seed};

  if (*run) {
    std::string error;
    const int code = pv::run_command(scenario_path, out_dir, overrides, &error);
    if (code != pv::kExitOk) std::cerr << "pvsim: " << error << "\n";
    return code;
  }

  try {
    std::vector<double> alphas;
    for (const auto& tok : CLI::detail::split(alpha_list, ',')) {
      if (tok.empty()) continue;
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw pv::SchemaError("bad alpha '" + tok + "'");
      alphas.push_back(v);
    }
    std::vector<std::uint64_t> seeds;
    for (const auto& tok : CLI::detail::split(seed_list, ',')) {
      if (tok.empty()) continue;
      std::size_t used = 0;
      const unsigned long long v = std::stoull(tok, &used);
      if (used != tok.size()) throw pv::SchemaError("bad seed '" + tok + "'");
      seeds.push_back(v);
    }
    if (alphas.empty()) throw pv::SchemaError("--alphas must list at least one value");
    const pv::Scenario tmpl = pv::load_scenario(template_path);
    const pv::SweepResult res = pv::sweep_command(tmpl, alphas, seeds, overrides, sweep_out, threads);
    for (const auto& row : res.rows) {
      if (row.exit_code != pv::kExitOk) {
        std::cerr << "pvsim: row " << row.row << " (alpha " << row.alpha << ") failed: " << row.error << "\n";
      }
    }
    return res.exit_code;
  } catch (const pv::SchemaError& e) {
    std::cerr << "pvsim: " << e.what() << "\n";
    return pv::kExitSchema;
  } catch (const std::invalid_argument&) {
    std::cerr << "pvsim: malformed --alphas or --seeds list\n";
    return pv::kExitSchema;
  } catch (const std::out_of_range&) {
    std::cerr << "pvsim: value out of range in --alphas or --seeds\n";
    return pv::kExitSchema;
  } catch (const std::exception& e) {
    std::cerr << "pvsim: " << e.what() << "\n";
    return pv::kExitIntegration;
  }
}
