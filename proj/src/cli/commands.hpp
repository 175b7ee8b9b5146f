#pragma once

#include <string>

#include "config.hpp"

namespace cfdecomp::cli {

// Each command loads the JSON config at `config_path`, applies the
// overrides, writes its outputs plus manifest.json into the configured
// output directory and returns the process exit code.
int run_decompose(const std::string& config_path, const Overrides& overrides);
int run_melly(const std::string& config_path, const Overrides& overrides);
int run_prep(const std::string& config_path, const Overrides& overrides);
// Exit code 1 when any validation property fails.
int run_simulate(const std::string& config_path, const Overrides& overrides);

}  // namespace cfdecomp::cli
