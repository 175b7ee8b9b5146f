#pragma once

// Bootstrap standard errors and confidence bands.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cfdecomp/analysis.hpp"
#include "cfdecomp/rng.hpp"

namespace cfdecomp {

enum class BootstrapScheme {
  resample_rows,         // rows drawn with replacement within each period
  exchangeable_weights,  // survey weights times i.i.d. Exp(1) multipliers
};

std::string_view to_string(BootstrapScheme scheme);
BootstrapScheme parse_bootstrap_scheme(std::string_view text);

enum class SeMethod {
  iqr,  // interquartile range / 1.3489795
  sd,
};

std::string_view to_string(SeMethod method);
SeMethod parse_se_method(std::string_view text);

struct BootstrapConfig {
  std::size_t replications = 500;
  BootstrapScheme scheme = BootstrapScheme::resample_rows;
  std::uint64_t seed = 20240601;
  double coverage = 0.95;
  unsigned threads = 0;  // 0: all hardware threads
  double max_failure_rate = 0.10;
  // Exchangeable scheme only: multipliers fixed at 1.
  bool unit_multipliers = false;
};

void validate(const BootstrapConfig& config);

// One bootstrap sample of `data`.
Dataset bootstrap_sample(const Dataset& data, BootstrapScheme scheme, Rng& rng,
                         bool unit_multipliers = false);

struct BootstrapDraws {
  std::size_t replications = 0;
  // Successful replications in replication order.
  std::vector<std::size_t> index;
  std::vector<std::vector<double>> report;  // DecompositionReport::flatten()
  std::vector<std::vector<double>> curves;  // CurveBundle::flatten()
  std::vector<std::size_t> failed;
  std::vector<std::string> failures;
};

// Replication r uses the stream make_rng(seed, r + 1) and reruns the whole
// analysis. Failed replications are recorded and skipped; more than
// max_failure_rate of them is an error.
BootstrapDraws bootstrap_pipeline(const Dataset& data, const AnalysisSpec& spec,
                                  const BootstrapConfig& config);

// Per-column standard error of draws[draw][column].
std::vector<double> draw_se(const std::vector<std::vector<double>>& draws, SeMethod method);

// Rescaled interquartile range (type-7 quartiles).
double robust_se(std::span<const double> values);

// Copy of `report` with total_se and effect_se filled from the draws.
DecompositionReport summarize_se(const DecompositionReport& report, const BootstrapDraws& draws,
                                 SeMethod method = SeMethod::iqr);

struct BandedCurve {
  std::vector<double> argument;
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> scale;
  std::vector<double> critical;  // one value repeated for uniform bands
};

// Sup-t band: critical value is the coverage quantile over draws of
// max_j |draw_j - estimate_j| / scale_j.
BandedCurve uniform_band(std::span<const double> argument, std::span<const double> estimate,
                         const std::vector<std::vector<double>>& draws, double coverage,
                         SeMethod method = SeMethod::iqr);

// Per-argument critical values: coverage quantile of |draw_j - estimate_j| / scale_j.
BandedCurve pointwise_band(std::span<const double> argument, std::span<const double> estimate,
                           const std::vector<std::vector<double>>& draws, double coverage,
                           SeMethod method = SeMethod::iqr);

struct CurveBands {
  std::vector<std::string> curves;
  std::vector<BandedCurve> qe;
  std::vector<BandedCurve> de;
};

// Uniform bands for every curve of the bundle from bootstrap curve draws.
CurveBands band_curves(const CurveBundle& estimate, const BootstrapDraws& draws, double coverage,
                       SeMethod method = SeMethod::iqr);

}  // namespace cfdecomp
