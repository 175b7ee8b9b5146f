#pragma once

// Microdata preparation: deflation, equivalence scaling, hedonic
// imputations of durable service flows, and two measurement diagnostics
// (an IV elasticity and a basket price ratio).

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cfdecomp {

// Price index with base 1982-84 = 100, one value per period label.
struct Deflator {
  std::string name;
  std::map<std::string, double, std::less<>> values;

  void validate() const;
  double index(std::string_view period) const;
};

// nominal / (index / 100).
double deflate(double nominal, double index);

enum class EquivalenceScale {
  sqrt_size,      // sqrt(adults + children)
  per_capita,     // adults + children
  oecd_modified,  // 1 + 0.5 (adults - 1) + 0.3 children
  none,
};

std::string_view to_string(EquivalenceScale scale);
EquivalenceScale parse_equivalence_scale(std::string_view text);

// Divisor of the scale; 1 for a single adult under every scale.
double equivalence_divisor(std::size_t adults, std::size_t children,
                           EquivalenceScale scale = EquivalenceScale::sqrt_size);
double equivalence_scale(double consumption, std::size_t adults, std::size_t children,
                         EquivalenceScale scale = EquivalenceScale::sqrt_size);

enum class Retransform {
  smearing,  // mean of exp(residual)
  normal,    // exp(s^2 / 2)
  none,
};

std::string_view to_string(Retransform mode);
Retransform parse_retransform(std::string_view text);

// Log-linear regression with an intercept, fitted by ordinary least
// squares, and its retransformation factor back to levels.
struct LogLinearFit {
  Eigen::VectorXd coefficients;  // intercept first
  double retransform = 1.0;
  std::size_t n = 0;

  double predict_log(std::span<const double> x) const;
  double predict_level(std::span<const double> x) const;
};

// Rows of `x` are observations; `log_y` are the log outcomes.
LogLinearFit fit_log_linear(const Eigen::MatrixXd& x, std::span<const double> log_y,
                            Retransform mode);

struct ImputationConfig {
  // Share of current market value consumed per quarter. Required; no
  // default is assumed.
  std::optional<double> flow_rate;
  // Annual geometric depreciation applied to purchase prices of vehicles
  // bought a year or more ago. Required for vehicles.
  std::optional<double> annual_depreciation;
  Retransform retransform = Retransform::smearing;

  void validate_vehicle() const;
};

struct VehicleRecord {
  std::optional<double> purchase_price;
  double years_since_purchase = 0.0;
  std::vector<double> characteristics;
};

enum class VehicleBranch {
  recent_price,   // bought within the last 12 months, price used as is
  older_price,    // price depreciated geometrically over the years held
  imputed_price,  // price predicted from characteristics, then depreciated
};

std::string_view to_string(VehicleBranch branch);

struct VehicleImputation {
  std::vector<double> value;  // current market value
  std::vector<double> flow;   // value * flow_rate
  std::vector<VehicleBranch> branch;
  std::optional<LogLinearFit> price_model;  // set when any price was imputed
  std::size_t count(VehicleBranch b) const;
};

// Throws ValidationError when some record needs a prediction and no
// record carries a price.
VehicleImputation impute_vehicle_flow(const std::vector<VehicleRecord>& records,
                                      const ImputationConfig& config);

struct HousingRecord {
  std::optional<double> reported_quarterly;  // reported rental equivalent
  std::optional<double> monthly_rent;        // renters only
  std::vector<double> characteristics;
};

struct RentalImputation {
  std::vector<double> quarterly;  // enters consumption only
  std::vector<bool> imputed;
  std::optional<LogLinearFit> rent_model;
};

// Records without a reported equivalent get 3 * exp(x'b) * retransform,
// with b from the log monthly rent regression on renters. Throws
// ValidationError if an imputation is needed and there are no renters.
RentalImputation impute_rental_equivalent(const std::vector<HousingRecord>& records,
                                          const ImputationConfig& config);

struct IvResult {
  double coefficient = 0.0;
  double se = 0.0;
  double intercept = 0.0;
  double first_stage_f = 0.0;
  bool weak = false;  // first-stage F below 1
  std::size_t n = 0;  // rows kept after trimming
};

// Two-stage least squares of y on x (with an intercept) using z as the
// instrument, after dropping rows whose z lies below the weighted `trim`
// quantile or above the (1 - trim) quantile. Conventional homoskedastic
// standard error with weights normalized to the kept row count.
IvResult iv_elasticity(std::span<const double> y, std::span<const double> x,
                       std::span<const double> z, std::span<const double> w, double trim);

// "0.937 (0.007)".
std::string format_coef_se(double coefficient, double se, int digits = 3);

// Weighted mean of component indices over the all-items index. Weights
// that do not sum to 1 are normalized with a warning.
double basket_cpi_ratio(std::span<const double> components, std::span<const double> weights,
                        double all_items);

}  // namespace cfdecomp
