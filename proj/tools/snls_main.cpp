#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "snls/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Damped stochastic NLS experiments"};
  std::string experiment, config_path, out_dir;
  std::uint64_t seed = 0;
  app.add_option("experiment", experiment, "experiment name")
      ->required()
      ->check(CLI::IsMember(snls::experiment_names()));
  app.add_option("--config", config_path, "config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "artifact directory (overrides the config)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? snls::exit_ok : snls::exit_usage;
  }

  std::ifstream is(config_path);
  if (!is) {
    std::cerr << "config error: cannot open " << config_path << "\n";
    return snls::exit_config;
  }
  std::stringstream text;
  text << is.rdbuf();

  std::optional<snls::RunConfig> cfg;
  try {
    cfg = snls::RunConfig::parse(text.str());
    if (*seed_opt) cfg->set("seed", std::to_string(seed), "command line");
    if (*out_opt) cfg->set("output", out_dir, "command line");
  } catch (const snls::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return snls::exit_config;
  }
  if (cfg->experiment() != experiment) {
    std::cerr << config_path << ": experiment: config runs '" << cfg->experiment() << "', command line asked for '"
              << experiment << "'\n";
    return snls::exit_config;
  }
  for (const auto& w : cfg->warnings()) std::cerr << "warning: " << w << "\n";

  snls::RunOutcome outcome;
  std::string err;
  const int code = snls::run_guarded(*cfg, cfg->string("output"), &outcome, err);
  if (!err.empty()) {
    std::cerr << err << "\n";
    return code;
  }
  for (const auto& line : outcome.lines) std::cout << line << "\n";
  std::cout << "artifacts: " << cfg->string("output") << "\n";
  return code;
}
