#pragma once

// Distribution regression: F(y | x) on a threshold grid, one binary
// regression of 1{Y <= y} on x per threshold.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cfdecomp/binary_glm.hpp"
#include "cfdecomp/dataset.hpp"
#include "cfdecomp/design.hpp"

namespace cfdecomp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct GridSpec {
  enum class Kind { all_unique, quantile_spaced };
  Kind kind = Kind::quantile_spaced;
  // quantile_spaced: number of points including the minimum and maximum.
  // Fewer points result when the sample has fewer distinct values.
  std::size_t points = 100;
  // Interior points are placed on [trim, 1 - trim]; the minimum and maximum
  // are always kept.
  double trim = 0.0;
  bool operator==(const GridSpec&) const = default;
};

// Strictly increasing threshold values drawn from the sample: unweighted
// type-1 quantiles at probabilities spread evenly over [trim, 1 - trim],
// plus the sample minimum and maximum.
std::vector<double> make_grid(std::span<const double> values, const GridSpec& spec);

struct ThresholdFitOptions {
  Link link = Link::logit;
  GlmControl control;
};

// Conditional CDF of an outcome on a threshold grid. Rows of `coefficients`
// are per-threshold fits over `design`; thresholds whose responses were all
// 0 or all 1 carry a constant prediction instead.
class ConditionalOutcomeModel {
 public:
  ConditionalOutcomeModel() = default;
  ConditionalOutcomeModel(std::vector<double> grid, Link link, DesignSpec design,
                          Eigen::MatrixXd coefficients, std::vector<FitStatus> status,
                          std::vector<double> constants, std::string period,
                          std::vector<FixedFeature> fixed = {});

  const std::vector<double>& grid() const { return grid_; }
  Link link() const { return link_; }
  const DesignSpec& design() const { return design_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }
  const std::vector<FitStatus>& status() const { return status_; }
  const std::vector<double>& constants() const { return constants_; }
  const std::string& period() const { return period_; }
  // Features that were constant in the estimation sample and therefore left
  // out of `design`; predictions treat them as taking that value.
  const std::vector<FixedFeature>& fixed_features() const { return fixed_; }

  std::size_t size() const { return grid_.size(); }
  std::size_t degenerate_count() const;

  // True when `covariates` sets a fixed feature to a value not seen in the
  // estimation sample, so the prediction pools over that feature.
  bool extrapolates(std::span<const double> covariates) const;

  // Rearranged CDF over the grid at one covariate vector (schema width).
  std::vector<double> cdf(std::span<const double> covariates) const;

  // Rearranged CDFs for many design rows at once (rows already filled by
  // design()); result is rows x grid.
  RowMatrix cdf_rows(const Eigen::MatrixXd& design_rows) const;

  bool operator==(const ConditionalOutcomeModel& other) const;

 private:
  void finalize_row(std::span<double> row) const;

  std::vector<double> grid_;
  Link link_ = Link::logit;
  DesignSpec design_;
  Eigen::MatrixXd coefficients_;
  std::vector<FitStatus> status_;
  std::vector<double> constants_;  // NaN unless the threshold is degenerate
  std::string period_;
  std::vector<FixedFeature> fixed_;
};

// Fits the threshold family for outcome `y` on the covariate rows of
// `covariates` (row-major, `width` per row) over `grid`. Used for the
// outcome model and for continuous covariate-block models.
ConditionalOutcomeModel fit_threshold_family(std::span<const double> y,
                                             std::span<const double> covariates,
                                             std::size_t width, std::span<const double> weights,
                                             const DesignSpec& design, std::vector<double> grid,
                                             const ThresholdFitOptions& options,
                                             std::string period);

// Outcome model of one period on all schema blocks, grid built from that
// period's outcomes.
ConditionalOutcomeModel fit_distribution_regression(const Dataset& data, std::string_view period,
                                                    const GridSpec& grid,
                                                    const ThresholdFitOptions& options = {});

// Monotone rearrangement: sorts in place.
void rearrange(std::span<double> cdf);

// The conditional_cdf evaluator as a free function.
std::vector<double> conditional_cdf(const ConditionalOutcomeModel& model,
                                    std::span<const double> covariates);

nlohmann::json to_json(const ConditionalOutcomeModel& model);
ConditionalOutcomeModel model_from_json(const nlohmann::json& doc);

}  // namespace cfdecomp
