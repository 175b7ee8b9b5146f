#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cfdecomp/error.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cfdecomp"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Counterfactual distribution decompositions of two-period microdata"};
  app.set_version_flag("--version", std::string(CFDECOMP_VERSION));
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  cfdecomp::cli::Overrides overrides;
  std::string config;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", overrides.out, "Output directory");
    sub->add_option("--seed", overrides.seed, "Random seed");
  };
  auto* decompose = app.add_subcommand("decompose", "Distribution-regression decomposition");
  add_common(decompose);
  decompose->add_option("--reps", overrides.reps, "Bootstrap replications (0 disables)");
  decompose->add_option("--link", overrides.link, "Binary link: logit, probit, cloglog, cauchit, lpm");
  decompose->add_option("--grid", overrides.grid, "Threshold count, or 'all' for every distinct outcome");
  auto* melly = app.add_subcommand("melly", "Quantile-regression decomposition");
  add_common(melly);
  auto* prep = app.add_subcommand("prep", "Deflate, equivalize and impute household consumption");
  add_common(prep);
  auto* simulate = app.add_subcommand("simulate", "Generate DGP data and check the pipeline against oracles");
  add_common(simulate);
  simulate->add_option("--link", overrides.link, "Binary link");
  simulate->add_option("--grid", overrides.grid, "Threshold count, or 'all'");

  CLI11_PARSE(app, argc, argv);
  if (verbose) spdlog::set_level(spdlog::level::debug);
  if (quiet) spdlog::set_level(spdlog::level::warn);


  try {
    if (decompose->parsed()) return cfdecomp::cli::run_decompose(config, overrides);
    if (melly->parsed()) return cfdecomp::cli::run_melly(config, overrides);
    if (prep->parsed()) return cfdecomp::cli::run_prep(config, overrides);
    if (simulate->parsed()) return cfdecomp::cli::run_simulate(config, overrides);
  } catch (const cfdecomp::ValidationError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
