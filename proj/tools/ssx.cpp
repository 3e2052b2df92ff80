#include <iostream>

#include <CLI11.hpp>

#include "ssx/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sojourn and exceedance experiments for order statistics of self-similar processes"};
  app.set_version_flag("--version", std::string(ssx::kVersion));
  app.require_subcommand(1);

  ssx::cli::Options opt;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string out;

  const char* commands[][2] = {
      {"simulate", "Dump sample paths or functional samples"},
      {"estimate-p", "Exceedance probabilities against their predictions"},
      {"theta", "Occupation-time tail of the limit process"},
      {"check-conditions", "Numerical probes of conditions A, B, C and C*"},
      {"prop2", "Excess integral of normalized sojourns against the Theta band"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config_path, "Config file (sectioned key = value)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--workers", workers, "Worker threads (overrides SSX_WORKERS and the config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_flag("--strict", opt.strict, "Exit with status 3 when a condition probe fails");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ssx::cli::kConfig;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--workers")) opt.workers = workers;
    if (sub->count("--out")) opt.out = out;
    return ssx::cli::run(sub->get_name(), opt, std::cout, std::cerr);
  }
  return ssx::cli::kConfig;
}
