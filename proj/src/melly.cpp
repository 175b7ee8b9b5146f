#include "cfdecomp/melly.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

std::size_t median_index(std::span<const double> taus) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < taus.size(); ++j)
    if (std::abs(taus[j] - 0.5) < std::abs(taus[best] - 0.5)) best = j;
  return best;
}

void check_grid(std::span<const double> taus) {
  if (taus.empty()) throw ValidationError("quantile grid is empty");
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (!(taus[j] > 0.0 && taus[j] < 1.0)) throw ValidationError("quantile levels must lie in (0, 1)");
    if (j > 0 && !(taus[j] > taus[j - 1])) throw ValidationError("quantile grid must be increasing");
  }
}

}  // namespace

std::vector<double> default_tau_grid(std::size_t points) {
  std::vector<double> out;
  for (std::size_t j = 1; j <= points; ++j)
    out.push_back(static_cast<double>(j) / static_cast<double>(points + 1));
  return out;
}

QrPath fit_qr_path(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> w,
                   std::span<const double> taus, const QrControl& control) {
  check_grid(taus);
  QrPath path;
  path.taus.assign(taus.begin(), taus.end());
  path.coefficients.resize(static_cast<Eigen::Index>(taus.size()), x.cols());
  std::vector<bool> ok(taus.size());
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const QrFit fit = fit_quantile_regression(x, y, w, taus[j], control);
    ok[j] = fit.converged;
    path.coefficients.row(static_cast<Eigen::Index>(j)) = fit.coefficients.transpose();
  }
  if (std::none_of(ok.begin(), ok.end(), [](bool b) { return b; }))
    throw NumericalError("quantile regression failed at every grid point");
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (ok[j]) continue;
    path.interpolated.push_back(j);
    std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(j) - 1;
    std::size_t hi = j + 1;
    while (lo >= 0 && !ok[static_cast<std::size_t>(lo)]) --lo;
    while (hi < taus.size() && !ok[hi]) ++hi;
    auto row = [&](std::size_t k) { return path.coefficients.row(static_cast<Eigen::Index>(k)); };
    if (lo < 0) {
      path.coefficients.row(static_cast<Eigen::Index>(j)) = row(hi);
    } else if (hi >= taus.size()) {
      path.coefficients.row(static_cast<Eigen::Index>(j)) = row(static_cast<std::size_t>(lo));
    } else {
      const auto l = static_cast<std::size_t>(lo);
      const double t = (taus[j] - taus[l]) / (taus[hi] - taus[l]);
      path.coefficients.row(static_cast<Eigen::Index>(j)) = (1.0 - t) * row(l) + t * row(hi);
    }
  }
  if (!path.interpolated.empty())
    spdlog::warn("quantile regression did not converge at {} grid points; interpolated",
                 path.interpolated.size());
  return path;
}

QrPath fit_qr_path(const Dataset& data, std::string_view period, std::span<const double> taus,
                   const QrControl& control) {
  const PeriodSample& s = data.sample(period);
  const DesignSpec design = DesignSpec::outcome(data.schema());
  QrPath path = fit_qr_path(design.matrix(s), s.outcome, s.weight, taus, control);
  path.design = design;
  path.period = std::string(period);
  return path;
}

std::vector<double> tau_cell_widths(std::span<const double> taus) {
  check_grid(taus);
  std::vector<double> out(taus.size());
  double lower = 0.0;
  for (std::size_t j = 0; j < taus.size(); ++j) {
    const double upper = j + 1 < taus.size() ? 0.5 * (taus[j] + taus[j + 1]) : 1.0;
    out[j] = upper - lower;
    lower = upper;
  }
  return out;
}

GridDistribution pooled_distribution(const Eigen::MatrixXd& coefficients,
                                     std::span<const double> taus, const Eigen::MatrixXd& x,
                                     std::span<const double> w) {
  if (coefficients.cols() != x.cols() || static_cast<std::size_t>(coefficients.rows()) != taus.size())
    throw ValidationError("coefficient path does not match the grid or the design");
  if (static_cast<std::size_t>(x.rows()) != w.size())
    throw ValidationError("covariate rows and weights differ in length");
  const std::vector<double> dtau = tau_cell_widths(taus);
  const Eigen::MatrixXd fitted = x * coefficients.transpose();  // rows x taus
  std::vector<double> values, weights;
  values.reserve(static_cast<std::size_t>(fitted.size()));
  weights.reserve(static_cast<std::size_t>(fitted.size()));
  for (Eigen::Index j = 0; j < fitted.cols(); ++j)
    for (Eigen::Index i = 0; i < fitted.rows(); ++i) {
      values.push_back(fitted(i, j));
      weights.push_back(w[static_cast<std::size_t>(i)] * dtau[static_cast<std::size_t>(j)]);
    }
  return GridDistribution::empirical(values, weights);
}

double unconditional_quantile(const QrPath& path, const Eigen::MatrixXd& x,
                              std::span<const double> w, double level) {
  return quantile(pooled_distribution(path.coefficients, path.taus, x, w), level, QuantileMode::step);
}

double crossing_frequency(const QrPath& path, const Eigen::MatrixXd& x) {
  if (path.taus.size() < 2 || x.rows() == 0) return 0.0;
  const Eigen::MatrixXd fitted = x * path.coefficients.transpose();
  std::size_t crossings = 0;
  for (Eigen::Index i = 0; i < fitted.rows(); ++i)
    for (Eigen::Index j = 1; j < fitted.cols(); ++j)
      if (fitted(i, j) < fitted(i, j - 1)) ++crossings;
  return static_cast<double>(crossings) /
         static_cast<double>(fitted.rows() * (fitted.cols() - 1));
}

Eigen::MatrixXd constructed_coefficients(const QrPath& base, const QrPath& comparison) {
  if (base.taus != comparison.taus || base.coefficients.cols() != comparison.coefficients.cols())
    throw ValidationError("quantile paths use different grids or designs");
  const auto m = static_cast<Eigen::Index>(median_index(base.taus));
  Eigen::MatrixXd out = base.coefficients;
  out.rowwise() += comparison.coefficients.row(m) - base.coefficients.row(m);
  return out;
}

MellyReport melly_decompose(const QrPath& base, const QrPath& comparison,
                            const Eigen::MatrixXd& x_base, std::span<const double> w_base,
                            const Eigen::MatrixXd& x_comparison,
                            std::span<const double> w_comparison) {
  const Eigen::MatrixXd constructed = constructed_coefficients(base, comparison);
  const auto& taus = base.taus;
  // Chain: (b22, X22) -> (b m22 r18, X22) -> (b18, X22) -> (b18, X18).
  std::vector<GridDistribution> steps{
      pooled_distribution(comparison.coefficients, taus, x_comparison, w_comparison),
      pooled_distribution(constructed, taus, x_comparison, w_comparison),
      pooled_distribution(base.coefficients, taus, x_comparison, w_comparison),
      pooled_distribution(base.coefficients, taus, x_base, w_base)};
  const std::vector<std::string> labels{"comparison coefficients, comparison covariates",
                                        "constructed coefficients, comparison covariates",
                                        "base coefficients, comparison covariates",
                                        "base coefficients, base covariates"};
  const DecompositionReport chain = assemble_report(
      steps, labels, {"residuals", "coefficients", "characteristics"}, QuantileMode::step);

  MellyReport out;
  out.table = chain;
  out.table.effects = {"coefficients", "characteristics", "residuals"};
  for (std::size_t s = 0; s < chain.effect.size(); ++s)
    out.table.effect[s] = {chain.effect[s][1], chain.effect[s][2], chain.effect[s][0]};
  out.crossing_base = crossing_frequency(base, x_base);
  out.crossing_comparison = crossing_frequency(comparison, x_comparison);
  out.interpolated_base = base.interpolated.size();
  out.interpolated_comparison = comparison.interpolated.size();
  return out;
}

MellyReport melly_decompose(const Dataset& data, std::span<const double> taus,
                            const QrControl& control) {
  const QrPath base = fit_qr_path(data, data.periods()[0], taus, control);
  const QrPath comparison = fit_qr_path(data, data.periods()[1], taus, control);
  const PeriodSample& sb = data.sample(std::size_t{0});
  const PeriodSample& sc = data.sample(std::size_t{1});
  MellyReport out = melly_decompose(base, comparison, base.design.matrix(sb), sb.weight,
                                    comparison.design.matrix(sc), sc.weight);
  out.table.sequence = {"coefficients", "characteristics", "residuals"};
  return out;
}

}  // namespace cfdecomp
