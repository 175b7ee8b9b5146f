#include "cfdecomp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "cfdecomp/error.hpp"
#include "cfdecomp/parallel.hpp"

namespace cfdecomp {

namespace {

constexpr double kIqrToSd = 1.3489795003921634;  // 2 * Phi^{-1}(0.75)
constexpr double kScaleFloor = 1e-12;

// Type-7 sample quantile of sorted values.
double type7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Smallest order statistic with at least `p` of the values at or below it.
double type1(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size()) - 1e-12));
  return values[std::clamp<std::size_t>(k, 1, values.size()) - 1];
}

double column_se(const std::vector<std::vector<double>>& draws, std::size_t col, SeMethod method) {
  std::vector<double> v(draws.size());
  for (std::size_t d = 0; d < draws.size(); ++d) v[d] = draws[d][col];
  if (method == SeMethod::iqr) return robust_se(v);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void check_draws(std::span<const double> argument, std::span<const double> estimate,
                 const std::vector<std::vector<double>>& draws, double coverage) {
  if (argument.size() != estimate.size()) throw ValidationError("band argument and estimate differ in length");
  if (draws.size() < 2) throw ValidationError("bands need at least 2 bootstrap draws");
  for (const auto& d : draws)
    if (d.size() != estimate.size()) throw ValidationError("bootstrap draw has the wrong length");
  if (!(coverage > 0.0 && coverage < 1.0)) throw ValidationError("coverage must lie in (0, 1)");
}

std::vector<double> floored_scale(const std::vector<std::vector<double>>& draws, SeMethod method) {
  std::vector<double> scale = draw_se(draws, method);
  std::size_t floored = 0;
  for (double& s : scale) {
    if (s < kScaleFloor) {
      s = kScaleFloor;
      ++floored;
    }
  }
  if (floored > 0)
    spdlog::warn("band scale is zero at {} of {} arguments; floored at {}", floored, scale.size(),
                 kScaleFloor);
  return scale;
}

std::vector<std::vector<double>> slice(const std::vector<std::vector<double>>& draws,
                                       std::size_t offset, std::size_t length) {
  std::vector<std::vector<double>> out;
  out.reserve(draws.size());
  for (const auto& d : draws)
    out.emplace_back(d.begin() + static_cast<std::ptrdiff_t>(offset),
                     d.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return out;
}

}  // namespace

std::string_view to_string(BootstrapScheme scheme) {
  return scheme == BootstrapScheme::resample_rows ? "resample_rows" : "exchangeable_weights";
}

BootstrapScheme parse_bootstrap_scheme(std::string_view text) {
  if (text == "resample_rows") return BootstrapScheme::resample_rows;
  if (text == "exchangeable_weights") return BootstrapScheme::exchangeable_weights;
  throw ValidationError("unknown bootstrap scheme '" + std::string(text) + "'");
}

std::string_view to_string(SeMethod method) { return method == SeMethod::iqr ? "iqr" : "sd"; }

SeMethod parse_se_method(std::string_view text) {
  if (text == "iqr") return SeMethod::iqr;
  if (text == "sd") return SeMethod::sd;
  throw ValidationError("unknown standard-error method '" + std::string(text) + "'");
}

void validate(const BootstrapConfig& config) {
  if (config.replications < 2) throw ValidationError("bootstrap needs at least 2 replications");
  if (!(config.coverage > 0.0 && config.coverage < 1.0))
    throw ValidationError("band coverage must lie in (0, 1)");
  if (!(config.max_failure_rate >= 0.0 && config.max_failure_rate < 1.0))
    throw ValidationError("max_failure_rate must lie in [0, 1)");
}

Dataset bootstrap_sample(const Dataset& data, BootstrapScheme scheme, Rng& rng,
                         bool unit_multipliers) {
  std::array<PeriodSample, 2> samples;
  for (std::size_t p = 0; p < 2; ++p) {
    const PeriodSample& s = data.sample(p);
    PeriodSample& out = samples[p];
    out.width = s.width;
    if (scheme == BootstrapScheme::resample_rows) {
      out.outcome.reserve(s.size());
      out.weight.reserve(s.size());
      out.covariates.reserve(s.covariates.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, s.size()));
        out.push_back(s.outcome[j], s.weight[j], s.row(j));
      }
    } else {
      out = s;
      for (double& w : out.weight) w *= unit_multipliers ? 1.0 : standard_exponential(rng);
    }
  }
  return data.with_samples(std::move(samples));
}

BootstrapDraws bootstrap_pipeline(const Dataset& data, const AnalysisSpec& spec,
                                  const BootstrapConfig& config) {
  validate(config);
  AnalysisSpec rep_spec = spec;
  if (rep_spec.de_points.empty()) rep_spec.de_points = default_de_points(data);
  rep_spec.decomposition.evaluation.log_pooling = false;
  rep_spec.fail_on_nonconvergence = true;

  const std::size_t n = config.replications;
  std::vector<std::vector<double>> reports(n), curves(n);
  std::vector<std::string> errors(n);
  std::vector<char> ok(n, 0);
  parallel_for(n, config.threads, [&](std::size_t r) {
    Rng rng = make_rng(config.seed, r + 1);
    try {
      const Dataset sample = bootstrap_sample(data, config.scheme, rng, config.unit_multipliers);
      const AnalysisResult result = run_analysis(sample, rep_spec);
      reports[r] = result.report.flatten();
      curves[r] = result.curves.flatten();
      ok[r] = 1;
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  BootstrapDraws draws;
  draws.replications = n;
  for (std::size_t r = 0; r < n; ++r) {
    if (ok[r]) {
      draws.index.push_back(r);
      draws.report.push_back(std::move(reports[r]));
      draws.curves.push_back(std::move(curves[r]));
    } else {
      draws.failed.push_back(r);
      draws.failures.push_back(std::move(errors[r]));
    }
  }
  if (!draws.failed.empty())
    spdlog::warn("{} of {} bootstrap replications failed; first: {}", draws.failed.size(), n,
                 draws.failures.front());
  if (static_cast<double>(draws.failed.size()) > config.max_failure_rate * static_cast<double>(n))
    throw NumericalError(std::to_string(draws.failed.size()) + " of " + std::to_string(n) +
                         " bootstrap replications failed");
  return draws;
}

double robust_se(std::span<const double> values) {
  if (values.size() < 2) throw ValidationError("standard errors need at least 2 draws");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return (type7(sorted, 0.75) - type7(sorted, 0.25)) / kIqrToSd;
}

std::vector<double> draw_se(const std::vector<std::vector<double>>& draws, SeMethod method) {
  if (draws.size() < 2) throw ValidationError("standard errors need at least 2 successful draws");
  const std::size_t cols = draws.front().size();
  for (const auto& d : draws)
    if (d.size() != cols) throw ValidationError("bootstrap draws differ in length");
  std::vector<double> out(cols);
  for (std::size_t c = 0; c < cols; ++c) out[c] = column_se(draws, c, method);
  return out;
}

DecompositionReport summarize_se(const DecompositionReport& report, const BootstrapDraws& draws,
                                 SeMethod method) {
  const std::vector<double> se = draw_se(draws.report, method);
  if (se.size() != report.cell_count())
    throw ValidationError("bootstrap draws do not match the report layout");
  DecompositionReport out = report;
  const std::size_t ns = report.total.size();
  const std::size_t ne = report.effects.size();
  out.total_se.assign(se.begin(), se.begin() + static_cast<std::ptrdiff_t>(ns));
  out.effect_se.assign(ns, std::vector<double>(ne));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t k = 0; k < ne; ++k) out.effect_se[s][k] = se[ns + s * ne + k];
  return out;
}

BandedCurve uniform_band(std::span<const double> argument, std::span<const double> estimate,
                         const std::vector<std::vector<double>>& draws, double coverage,
                         SeMethod method) {
  check_draws(argument, estimate, draws, coverage);
  BandedCurve band;
  band.argument.assign(argument.begin(), argument.end());
  band.estimate.assign(estimate.begin(), estimate.end());
  band.scale = floored_scale(draws, method);
  std::vector<double> sup(draws.size(), 0.0);
  for (std::size_t d = 0; d < draws.size(); ++d)
    for (std::size_t j = 0; j < estimate.size(); ++j)
      sup[d] = std::max(sup[d], std::abs(draws[d][j] - estimate[j]) / band.scale[j]);
  const double crit = type1(sup, coverage);
  band.critical.assign(estimate.size(), crit);
  for (std::size_t j = 0; j < estimate.size(); ++j) {
    band.lower.push_back(estimate[j] - crit * band.scale[j]);
    band.upper.push_back(estimate[j] + crit * band.scale[j]);
  }
  return band;
}

BandedCurve pointwise_band(std::span<const double> argument, std::span<const double> estimate,
                           const std::vector<std::vector<double>>& draws, double coverage,
                           SeMethod method) {
  check_draws(argument, estimate, draws, coverage);
  BandedCurve band;
  band.argument.assign(argument.begin(), argument.end());
  band.estimate.assign(estimate.begin(), estimate.end());
  band.scale = floored_scale(draws, method);
  for (std::size_t j = 0; j < estimate.size(); ++j) {
    std::vector<double> t(draws.size());
    for (std::size_t d = 0; d < draws.size(); ++d)
      t[d] = std::abs(draws[d][j] - estimate[j]) / band.scale[j];
    const double crit = type1(std::move(t), coverage);
    band.critical.push_back(crit);
    band.lower.push_back(estimate[j] - crit * band.scale[j]);
    band.upper.push_back(estimate[j] + crit * band.scale[j]);
  }
  return band;
}

CurveBands band_curves(const CurveBundle& estimate, const BootstrapDraws& draws, double coverage,
                       SeMethod method) {
  const std::size_t nc = estimate.curves.size();
  const std::size_t nl = estimate.levels.size();
  const std::size_t np = estimate.points.size();
  CurveBands out;
  out.curves = estimate.curves;
  for (std::size_t c = 0; c < nc; ++c) {
    out.qe.push_back(uniform_band(estimate.levels, estimate.qe[c], slice(draws.curves, c * nl, nl),
                                  coverage, method));
    out.de.push_back(uniform_band(estimate.points, estimate.de[c],
                                  slice(draws.curves, nc * nl + c * np, np), coverage, method));
  }
  return out;
}

}  // namespace cfdecomp
