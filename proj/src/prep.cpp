#include "cfdecomp/prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <spdlog/spdlog.h>

#include "cfdecomp/error.hpp"
#include "cfdecomp/functionals.hpp"

namespace cfdecomp {

namespace {

void check_rate(const std::optional<double>& rate, std::string_view name) {
  if (!rate) throw ValidationError(std::string(name) + " is required");
  if (!(*rate > 0.0 && *rate < 1.0)) throw ValidationError(std::string(name) + " must lie in (0, 1)");
}

Eigen::MatrixXd characteristics_matrix(const std::vector<const std::vector<double>*>& rows) {
  const std::size_t k = rows.empty() ? 0 : rows.front()->size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->size() != k) throw ValidationError("records carry different numbers of characteristics");
    for (std::size_t j = 0; j < k; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*rows[i])[j];
  }
  return x;
}

double held_factor(double years, double annual) {
  return years < 1.0 ? 1.0 : std::pow(1.0 - annual, years);
}

}  // namespace

void Deflator::validate() const {
  if (values.empty()) throw ValidationError("deflator '" + name + "' has no values");
  for (const auto& [period, v] : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw ValidationError("deflator '" + name + "' has a nonpositive value for " + period);
}

double Deflator::index(std::string_view period) const {
  const auto it = values.find(period);
  if (it == values.end())
    throw ValidationError("deflator '" + name + "' has no value for period " + std::string(period));
  return it->second;
}

double deflate(double nominal, double index) {
  if (!(index > 0.0) || !std::isfinite(index)) throw ValidationError("price index must be positive");
  return nominal / (index / 100.0);
}

std::string_view to_string(EquivalenceScale scale) {
  switch (scale) {
    case EquivalenceScale::sqrt_size: return "sqrt";
    case EquivalenceScale::per_capita: return "per_capita";
    case EquivalenceScale::oecd_modified: return "oecd_modified";
    case EquivalenceScale::none: return "none";
  }
  return "?";
}

EquivalenceScale parse_equivalence_scale(std::string_view text) {
  if (text == "sqrt") return EquivalenceScale::sqrt_size;
  if (text == "per_capita") return EquivalenceScale::per_capita;
  if (text == "oecd_modified") return EquivalenceScale::oecd_modified;
  if (text == "none") return EquivalenceScale::none;
  throw ValidationError("unknown equivalence scale '" + std::string(text) + "'");
}

double equivalence_divisor(std::size_t adults, std::size_t children, EquivalenceScale scale) {
  if (adults == 0) throw ValidationError("household needs at least one adult");
  const double size = static_cast<double>(adults + children);
  switch (scale) {
    case EquivalenceScale::sqrt_size: return std::sqrt(size);
    case EquivalenceScale::per_capita: return size;
    case EquivalenceScale::oecd_modified:
      return 1.0 + 0.5 * static_cast<double>(adults - 1) + 0.3 * static_cast<double>(children);
    case EquivalenceScale::none: return 1.0;
  }
  return 1.0;
}

double equivalence_scale(double consumption, std::size_t adults, std::size_t children,
                         EquivalenceScale scale) {
  return consumption / equivalence_divisor(adults, children, scale);
}

std::string_view to_string(Retransform mode) {
  switch (mode) {
    case Retransform::smearing: return "smearing";
    case Retransform::normal: return "normal";
    case Retransform::none: return "none";
  }
  return "?";
}

Retransform parse_retransform(std::string_view text) {
  if (text == "smearing") return Retransform::smearing;
  if (text == "normal") return Retransform::normal;
  if (text == "none") return Retransform::none;
  throw ValidationError("unknown retransformation '" + std::string(text) + "'");
}

double LogLinearFit::predict_log(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) + 1 != coefficients.size())
    throw ValidationError("characteristics do not match the fitted regression");
  double eta = coefficients[0];
  for (std::size_t j = 0; j < x.size(); ++j) eta += coefficients[static_cast<Eigen::Index>(j) + 1] * x[j];
  return eta;
}

double LogLinearFit::predict_level(std::span<const double> x) const {
  return std::exp(predict_log(x)) * retransform;
}

LogLinearFit fit_log_linear(const Eigen::MatrixXd& x, std::span<const double> log_y, Retransform mode) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ValidationError("log-linear regression has no observations");
  if (static_cast<std::size_t>(n) != log_y.size())
    throw ValidationError("regressors and outcomes differ in length");
  Eigen::MatrixXd d(n, x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  const Eigen::Map<const Eigen::VectorXd> yv(log_y.data(), n);
  if (!d.allFinite() || !yv.allFinite()) throw ValidationError("log-linear regression has non-finite data");

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
  if (qr.rank() < d.cols()) throw NumericalError("log-linear regression design is rank deficient");
  LogLinearFit fit;
  fit.coefficients = qr.solve(yv);
  fit.n = static_cast<std::size_t>(n);
  const Eigen::VectorXd resid = yv - d * fit.coefficients;
  switch (mode) {
    case Retransform::smearing: fit.retransform = resid.array().exp().mean(); break;
    case Retransform::normal: {
      const double dof = static_cast<double>(std::max<Eigen::Index>(1, n - d.cols()));
      fit.retransform = std::exp(0.5 * resid.squaredNorm() / dof);
      break;
    }
    case Retransform::none: fit.retransform = 1.0; break;
  }
  return fit;
}

void ImputationConfig::validate_vehicle() const {
  check_rate(flow_rate, "flow_rate");
  check_rate(annual_depreciation, "annual_depreciation");
}

std::string_view to_string(VehicleBranch branch) {
  switch (branch) {
    case VehicleBranch::recent_price: return "recent_price";
    case VehicleBranch::older_price: return "older_price";
    case VehicleBranch::imputed_price: return "imputed_price";
  }
  return "?";
}

std::size_t VehicleImputation::count(VehicleBranch b) const {
  return static_cast<std::size_t>(std::count(branch.begin(), branch.end(), b));
}

VehicleImputation impute_vehicle_flow(const std::vector<VehicleRecord>& records,
                                      const ImputationConfig& config) {
  config.validate_vehicle();
  const double d = *config.annual_depreciation;
  VehicleImputation out;
  out.value.resize(records.size());
  out.branch.resize(records.size());

  std::vector<const std::vector<double>*> priced;
  std::vector<double> log_price;
  bool needs_model = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const VehicleRecord& r = records[i];
    if (!(r.years_since_purchase >= 0.0)) throw ValidationError("vehicle age must be nonnegative");
    if (r.purchase_price) {
      if (!(*r.purchase_price > 0.0)) throw ValidationError("vehicle purchase price must be positive");
      priced.push_back(&r.characteristics);
      log_price.push_back(std::log(*r.purchase_price));
      out.branch[i] = r.years_since_purchase < 1.0 ? VehicleBranch::recent_price
                                                   : VehicleBranch::older_price;
      out.value[i] = *r.purchase_price * held_factor(r.years_since_purchase, d);
    } else {
      out.branch[i] = VehicleBranch::imputed_price;
      needs_model = true;
    }
  }
  if (needs_model) {
    if (priced.empty()) throw ValidationError("no vehicle carries a purchase price to impute from");
    out.price_model = fit_log_linear(characteristics_matrix(priced), log_price, config.retransform);
    for (std::size_t i = 0; i < records.size(); ++i)
      if (out.branch[i] == VehicleBranch::imputed_price)
        out.value[i] = out.price_model->predict_level(records[i].characteristics) *
                       held_factor(records[i].years_since_purchase, d);
  }
  out.flow.resize(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) out.flow[i] = out.value[i] * *config.flow_rate;
  return out;
}

RentalImputation impute_rental_equivalent(const std::vector<HousingRecord>& records,
                                          const ImputationConfig& config) {
  RentalImputation out;
  out.quarterly.resize(records.size());
  out.imputed.assign(records.size(), false);
  std::vector<const std::vector<double>*> renters;
  std::vector<double> log_rent;
  bool needs_model = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const HousingRecord& r = records[i];
    if (r.monthly_rent) {
      if (!(*r.monthly_rent > 0.0)) throw ValidationError("monthly rent must be positive");
      renters.push_back(&r.characteristics);
      log_rent.push_back(std::log(*r.monthly_rent));
    }
    if (r.reported_quarterly) {
      out.quarterly[i] = *r.reported_quarterly;
    } else {
      out.imputed[i] = true;
      needs_model = true;
    }
  }
  if (needs_model) {
    if (renters.empty()) throw ValidationError("no renter records to fit the rent regression");
    out.rent_model = fit_log_linear(characteristics_matrix(renters), log_rent, config.retransform);
    for (std::size_t i = 0; i < records.size(); ++i)
      if (out.imputed[i]) out.quarterly[i] = 3.0 * out.rent_model->predict_level(records[i].characteristics);
  }
  return out;
}

IvResult iv_elasticity(std::span<const double> y, std::span<const double> x,
                       std::span<const double> z, std::span<const double> w, double trim) {
  if (!(trim >= 0.0 && trim < 0.25)) throw ValidationError("trim must lie in [0, 0.25)");
  if (x.size() != y.size() || z.size() != y.size() || w.size() != y.size())
    throw ValidationError("IV columns differ in length");
  if (y.empty()) throw ValidationError("IV sample is empty");

  double lo = -INFINITY, hi = INFINITY;
  if (trim > 0.0) {
    const GridDistribution dz = GridDistribution::empirical(z, w);
    lo = quantile(dz, trim, QuantileMode::step);
    hi = quantile(dz, 1.0 - trim, QuantileMode::step);
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (z[i] >= lo && z[i] <= hi) keep.push_back(i);
  const std::size_t n = keep.size();
  if (n < 3) throw ValidationError("IV sample has fewer than three rows after trimming");

  double wsum = 0.0;
  for (std::size_t i : keep) {
    if (!(w[i] > 0.0)) throw ValidationError("IV weights must be positive");
    wsum += w[i];
  }
  const double scale = static_cast<double>(n) / wsum;
  double mx = 0.0, my = 0.0, mz = 0.0;
  for (std::size_t i : keep) {
    const double wi = w[i] * scale;
    mx += wi * x[i];
    my += wi * y[i];
    mz += wi * z[i];
  }
  const double nn = static_cast<double>(n);
  mx /= nn;
  my /= nn;
  mz /= nn;
  double szz = 0.0, szx = 0.0, szy = 0.0;
  for (std::size_t i : keep) {
    const double wi = w[i] * scale;
    szz += wi * (z[i] - mz) * (z[i] - mz);
    szx += wi * (z[i] - mz) * (x[i] - mx);
    szy += wi * (z[i] - mz) * (y[i] - my);
  }
  if (!(szz > 0.0)) throw NumericalError("instrument has no variation");
  if (szx == 0.0) throw NumericalError("instrument is uncorrelated with the regressor");

  IvResult r;
  r.n = n;
  r.coefficient = szy / szx;
  r.intercept = my - r.coefficient * mx;

  // First stage x = c + pi z: F = pi^2 / se(pi)^2.
  const double pi = szx / szz;
  double ssr1 = 0.0, ssr2 = 0.0;
  for (std::size_t i : keep) {
    const double wi = w[i] * scale;
    const double e1 = (x[i] - mx) - pi * (z[i] - mz);
    const double e2 = y[i] - r.intercept - r.coefficient * x[i];
    ssr1 += wi * e1 * e1;
    ssr2 += wi * e2 * e2;
  }
  const double s1 = ssr1 / (nn - 2.0);
  r.first_stage_f = s1 > 0.0 ? pi * pi * szz / s1 : INFINITY;
  r.weak = r.first_stage_f < 1.0;
  if (r.weak) spdlog::warn("weak first stage: F = {:.3f}", r.first_stage_f);

  // Var(b) = s^2 (xhat' W xhat)^-1 on centred fitted values.
  const double s2 = ssr2 / (nn - 2.0);
  r.se = std::sqrt(s2 / (pi * pi * szz));
  return r;
}

std::string format_coef_se(double coefficient, double se, int digits) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f (%.*f)", digits, coefficient, digits, se);
  return buf;
}

double basket_cpi_ratio(std::span<const double> components, std::span<const double> weights,
                        double all_items) {
  if (components.empty()) throw ValidationError("basket has no components");
  if (components.size() != weights.size())
    throw ValidationError("basket components and weights differ in length");
  if (!(all_items > 0.0)) throw ValidationError("all-items index must be positive");
  double wsum = 0.0, acc = 0.0;
  for (std::size_t j = 0; j < components.size(); ++j) {
    if (!(components[j] > 0.0)) throw ValidationError("component index must be positive");
    if (!(weights[j] >= 0.0)) throw ValidationError("basket weights must be nonnegative");
    wsum += weights[j];
    acc += weights[j] * components[j];
  }
  if (!(wsum > 0.0)) throw ValidationError("basket weights sum to zero");
  if (std::abs(wsum - 1.0) > 1e-9) spdlog::warn("basket weights sum to {}; normalized", wsum);
  return acc / wsum / all_items;
}

}  // namespace cfdecomp
