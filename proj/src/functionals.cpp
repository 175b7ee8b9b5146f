#include "cfdecomp/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

void check_monotone(const GridDistribution& dist) {
  double prev = 0.0;
  for (double f : dist.cdf) {
    if (!(f >= prev)) throw ValidationError("distribution function is not monotone");
    prev = f;
  }
}

}  // namespace

GridDistribution::GridDistribution(std::vector<double> g, std::vector<double> f)
    : grid(std::move(g)), cdf(std::move(f)) {
  if (grid.empty() || grid.size() != cdf.size())
    throw ValidationError("grid distribution needs one CDF value per grid point");
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1])) throw ValidationError("grid must be strictly increasing");
}

GridDistribution GridDistribution::empirical(std::span<const double> values,
                                             std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty())
    throw ValidationError("empirical distribution needs matching, nonempty values and weights");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> grid, cdf;
  double cum = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += weights[order[k]];
    const double v = values[order[k]];
    if (!grid.empty() && grid.back() == v) {
      cdf.back() = cum / total;
    } else {
      grid.push_back(v);
      cdf.push_back(cum / total);
    }
  }
  cdf.back() = 1.0;
  return GridDistribution(std::move(grid), std::move(cdf));
}

double quantile(const GridDistribution& dist, double tau, QuantileMode mode) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  const auto& f = dist.cdf;
  const auto it = std::lower_bound(f.begin(), f.end(), tau);
  if (it == f.end()) return dist.grid.back();
  const auto j = static_cast<std::size_t>(it - f.begin());
  if (j == 0 || mode == QuantileMode::step) return dist.grid[j];
  const double lo = f[j - 1], hi = f[j];
  const double frac = (tau - lo) / (hi - lo);
  return dist.grid[j - 1] + frac * (dist.grid[j] - dist.grid[j - 1]);
}

double cdf_at(const GridDistribution& dist, double y, QuantileMode mode) {
  const auto& g = dist.grid;
  if (y < g.front()) return 0.0;
  if (y >= g.back()) return dist.cdf.back();
  const auto j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), y) - g.begin());
  // g[j-1] <= y < g[j]
  if (mode == QuantileMode::step || y == g[j - 1]) return dist.cdf[j - 1];
  const double frac = (y - g[j - 1]) / (g[j] - g[j - 1]);
  return dist.cdf[j - 1] + frac * (dist.cdf[j] - dist.cdf[j - 1]);
}

Moments moments(const GridDistribution& dist) {
  check_monotone(dist);
  const double mass = dist.cdf.back();
  if (!(mass > 0.0)) throw ValidationError("distribution has no mass");
  double mean = 0.0, prev = 0.0;
  for (std::size_t j = 0; j < dist.grid.size(); ++j) {
    mean += dist.grid[j] * (dist.cdf[j] - prev);
    prev = dist.cdf[j];
  }
  mean /= mass;
  double var = 0.0;
  prev = 0.0;
  for (std::size_t j = 0; j < dist.grid.size(); ++j) {
    const double d = dist.grid[j] - mean;
    var += d * d * (dist.cdf[j] - prev);
    prev = dist.cdf[j];
  }
  return {mean, std::sqrt(std::max(0.0, var / mass))};
}

double gini(const GridDistribution& dist) {
  check_monotone(dist);
  if (!(dist.grid.front() > 0.0))
    throw ValidationError("Gini coefficient requires positive grid values");
  double total = 0.0, prev = 0.0;
  for (std::size_t j = 0; j < dist.grid.size(); ++j) {
    total += dist.grid[j] * (dist.cdf[j] - prev);
    prev = dist.cdf[j];
  }
  if (!(total > 0.0)) throw ValidationError("distribution has no mass");
  double area = 0.0, lorenz = 0.0, cum = 0.0;
  prev = 0.0;
  const double mass = dist.cdf.back();
  for (std::size_t j = 0; j < dist.grid.size(); ++j) {
    const double df = dist.cdf[j] - prev;
    cum += dist.grid[j] * df;
    const double next = cum / total;
    area += df / mass * (lorenz + next);
    lorenz = next;
    prev = dist.cdf[j];
  }
  return 1.0 - area;
}

std::vector<double> InequalityStats::values() const {
  return {sd, iqr_90_10, iqr_50_10, iqr_90_50, iqr_75_25, iqr_95_5, gini};
}

const std::vector<std::string>& statistic_names() {
  static const std::vector<std::string> names{"SD", "90-10", "50-10", "90-50", "75-25", "95-5",
                                              "Gini"};
  return names;
}

InequalityStats inequality_stats(const GridDistribution& dist, QuantileMode mode) {
  auto q = [&](double tau) { return quantile(dist, tau, mode); };
  InequalityStats s;
  const Moments m = moments(dist);
  s.mean = m.mean;
  s.sd = m.sd;
  const double q10 = q(0.10), q50 = q(0.50), q90 = q(0.90);
  s.iqr_50_10 = q50 - q10;
  s.iqr_90_50 = q90 - q50;
  s.iqr_90_10 = s.iqr_90_50 + s.iqr_50_10;
  s.iqr_75_25 = q(0.75) - q(0.25);
  s.iqr_95_5 = q(0.95) - q(0.05);
  s.gini = gini(dist);
  return s;
}

std::vector<double> band_quantile_levels() {
  std::vector<double> out;
  for (int j = 8; j <= 92; ++j) out.push_back(j / 100.0);
  return out;
}

std::vector<double> default_quantile_levels() {
  std::vector<double> out = band_quantile_levels();
  for (int j : {5, 10, 25, 50, 75, 90, 95}) out.push_back(j / 100.0);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> DecompositionReport::flatten() const {
  std::vector<double> out(total);
  for (const auto& row : effect) out.insert(out.end(), row.begin(), row.end());
  return out;
}

DecompositionReport assemble_report(const std::vector<CounterfactualDistribution>& chain,
                                    const std::vector<std::string>& effects, QuantileMode mode) {
  std::vector<GridDistribution> steps;
  std::vector<std::string> labels;
  for (const auto& step : chain) {
    steps.emplace_back(step);
    labels.push_back(step.spec.label());
  }
  return assemble_report(steps, labels, effects, mode);
}

DecompositionReport assemble_report(const std::vector<GridDistribution>& steps,
                                    const std::vector<std::string>& step_labels,
                                    const std::vector<std::string>& effects, QuantileMode mode) {
  if (steps.size() < 3) throw ValidationError("a decomposition chain needs at least 3 steps");
  if (effects.size() + 1 != steps.size() || step_labels.size() != steps.size())
    throw ValidationError("need one effect label per adjacent pair of chain steps");
  DecompositionReport report;
  report.statistics = statistic_names();
  report.effects = effects;
  report.step_labels = step_labels;
  std::vector<std::vector<double>> values;
  for (const auto& step : steps) {
    report.step_stats.push_back(inequality_stats(step, mode));
    values.push_back(report.step_stats.back().values());
  }
  const std::size_t ns = report.statistics.size();
  report.total.resize(ns);
  report.effect.assign(ns, std::vector<double>(effects.size()));
  for (std::size_t s = 0; s < ns; ++s) {
    report.total[s] = 100.0 * (values.front()[s] - values.back()[s]);
    for (std::size_t k = 0; k < effects.size(); ++k)
      report.effect[s][k] = 100.0 * (values[k][s] - values[k + 1][s]);
  }
  return report;
}

std::vector<double> CurveBundle::flatten() const {
  std::vector<double> out;
  for (const auto& c : qe) out.insert(out.end(), c.begin(), c.end());
  for (const auto& c : de) out.insert(out.end(), c.begin(), c.end());
  return out;
}

CurveBundle qe_de_curves(const std::vector<CounterfactualDistribution>& chain,
                         const std::vector<std::string>& effects, std::span<const double> levels,
                         std::span<const double> points, QuantileMode mode) {
  if (chain.size() < 2 || effects.size() + 1 != chain.size())
    throw ValidationError("need one effect label per adjacent pair of chain steps");
  CurveBundle out;
  out.levels.assign(levels.begin(), levels.end());
  out.points.assign(points.begin(), points.end());
  out.curves = effects;
  out.curves.push_back("observed");

  std::vector<std::vector<double>> q(chain.size()), f(chain.size());
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const GridDistribution d(chain[k]);
    for (double tau : levels) q[k].push_back(quantile(d, tau, mode));
    for (double y : points) f[k].push_back(cdf_at(d, y, mode));
  }
  auto diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
  };
  for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
    out.qe.push_back(diff(q[k], q[k + 1]));
    out.de.push_back(diff(f[k], f[k + 1]));
  }
  out.qe.push_back(diff(q.front(), q.back()));
  out.de.push_back(diff(f.front(), f.back()));
  return out;
}

std::vector<double> default_de_points(const Dataset& data, double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && lo < hi && hi < 1.0) || count < 2)
    throw ValidationError("distribution-effect range needs 0 < lo < hi < 1 and at least 2 points");
  std::vector<double> values, weights;
  for (std::size_t p = 0; p < 2; ++p) {
    const PeriodSample& s = data.sample(p);
    const double total = s.total_weight();
    for (std::size_t i = 0; i < s.size(); ++i) {
      values.push_back(s.outcome[i]);
      weights.push_back(s.weight[i] / total);
    }
  }
  const GridDistribution pooled = GridDistribution::empirical(values, weights);
  const double a = quantile(pooled, lo, QuantileMode::step);
  const double b = quantile(pooled, hi, QuantileMode::step);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

VarianceChannels variance_channels(const Eigen::MatrixXd& coefficients, const Eigen::MatrixXd& x,
                                   std::span<const double> weights) {
  if (coefficients.cols() != x.cols())
    throw ValidationError("coefficient path and covariates differ in dimension");
  if (static_cast<std::size_t>(x.rows()) != weights.size() || x.rows() == 0 ||
      coefficients.rows() == 0)
    throw ValidationError("covariate rows and weights differ in length");
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  const double wsum = w.sum();
  const Eigen::VectorXd mu = x.transpose() * w / wsum;
  const Eigen::MatrixXd exx = x.transpose() * w.asDiagonal() * x / wsum;
  const Eigen::MatrixXd var_x = exx - mu * mu.transpose();

  const Eigen::VectorXd eb = coefficients.colwise().mean().transpose();
  const Eigen::MatrixXd centered = coefficients.rowwise() - eb.transpose();
  const Eigen::MatrixXd var_b =
      centered.transpose() * centered / static_cast<double>(coefficients.rows());

  VarianceChannels out;
  out.between = eb.dot(var_x * eb);
  out.within = (exx * var_b).trace();
  return out;
}

}  // namespace cfdecomp
