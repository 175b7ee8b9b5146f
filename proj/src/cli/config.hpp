#pragma once

// Run configurations for the command-line front end. Every field error is
// collected before anything is rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cfdecomp/analysis.hpp"
#include "cfdecomp/dataset.hpp"
#include "cfdecomp/inference.hpp"
#include "cfdecomp/prep.hpp"
#include "cfdecomp/quantreg.hpp"

namespace cfdecomp::cli {

// Scalar overrides from the command line.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::string> link;
  std::optional<std::string> grid;  // point count or "all"
  std::optional<std::string> out;
};

// Collects validation messages; check() throws one ValidationError
// listing all of them.
class Problems {
 public:
  void add(std::string message) { messages_.push_back(std::move(message)); }
  bool empty() const { return messages_.empty(); }
  const std::vector<std::string>& messages() const { return messages_; }
  void check(const std::string& what) const;

 private:
  std::vector<std::string> messages_;
};

// A config document plus the directory its relative paths refer to.
struct ConfigDocument {
  nlohmann::json doc;
  std::string base_dir;

  std::string path(const std::string& relative) const;
};

ConfigDocument load_config(const std::string& path);
// Applies the overrides to the document's scalar fields.
void apply_overrides(nlohmann::json& doc, const Overrides& overrides);

struct DecomposeConfig {
  std::string data;
  std::optional<std::array<std::string, 2>> periods;
  FactorSchema schema;
  AnalysisSpec analysis;
  std::size_t replications = 0;
  BootstrapConfig bootstrap;
  SeMethod se = SeMethod::iqr;
  double de_lo = 0.01;
  double de_hi = 0.97;
  std::size_t de_count = 101;
  std::string output;
};

DecomposeConfig parse_decompose(const ConfigDocument& config);

struct MellyConfig {
  std::string data;
  std::optional<std::array<std::string, 2>> periods;
  FactorSchema schema;
  std::vector<double> taus;
  QrControl qr;
  std::string output;
};

MellyConfig parse_melly(const ConfigDocument& config);

struct VehicleInput {
  std::string path;
  std::vector<std::string> characteristics;
};

struct HousingInput {
  std::string path;
  std::vector<std::string> characteristics;
};

struct IvInput {
  std::string path;
  std::string y = "log_well_measured";
  std::string x = "log_total";
  std::string z = "log_income";
  std::string w = "weight";
  std::optional<std::string> period;  // column holding the period; rows split by it
  double trim = 0.05;
};

struct BasketInput {
  std::string label;
  std::vector<double> components;
  std::vector<double> weights;
  double all_items = 0.0;
};

struct PrepConfig {
  std::string households;
  FactorSchema schema;  // covariate columns carried into the prepared dataset
  Deflator deflator;
  EquivalenceScale scale = EquivalenceScale::sqrt_size;
  bool log_outcome = true;
  ImputationConfig imputation;
  std::optional<VehicleInput> vehicles;
  std::optional<HousingInput> housing;
  std::optional<IvInput> iv;
  std::vector<BasketInput> baskets;
  std::string output;
};

PrepConfig parse_prep(const ConfigDocument& config);

struct SimulateConfig {
  nlohmann::json dgp;  // discrete or linear_qr document
  std::array<std::string, 2> periods{"base", "comparison"};
  Link link = Link::logit;
  GridSpec grid;
  std::vector<double> taus;
  // Property tolerances.
  double exact_tolerance = 1e-10;
  double population_tolerance = 0.02;
  double residual_tolerance = 0.1;
  double variance_tolerance = 0.02;
  bool saturated = false;
  std::optional<std::string> fixture;
  std::string output;
};

SimulateConfig parse_simulate(const ConfigDocument& config);

// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& bytes);

}  // namespace cfdecomp::cli
