#pragma once

// Statistics of grid-represented distributions and the decomposition tables
// built from a counterfactual chain.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfdecomp/counterfactual.hpp"

namespace cfdecomp {

enum class QuantileMode {
  linear,  // invert the CDF interpolated linearly between grid points
  step,    // inf{y in grid : F(y) >= tau}
};

// A CDF known at strictly increasing grid points. Below the first grid
// point the CDF is 0; the mass F(g0) sits at g0 and each increment
// F(gj) - F(gj-1) at gj.
struct GridDistribution {
  std::vector<double> grid;
  std::vector<double> cdf;

  GridDistribution() = default;
  GridDistribution(std::vector<double> g, std::vector<double> f);
  explicit GridDistribution(const CounterfactualDistribution& d) : GridDistribution(d.grid, d.cdf) {}

  // Weighted empirical distribution of a sample on its distinct values.
  static GridDistribution empirical(std::span<const double> values, std::span<const double> weights);
};

double quantile(const GridDistribution& dist, double tau, QuantileMode mode = QuantileMode::linear);

// F(y); linear mode interpolates between grid points (0 below the first).
double cdf_at(const GridDistribution& dist, double y, QuantileMode mode = QuantileMode::linear);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

// Stieltjes sums over the grid increments, normalized by the final CDF value.
Moments moments(const GridDistribution& dist);

// 1 - 2 * integral of the Lorenz curve, trapezoidal in F. Requires positive
// grid values.
double gini(const GridDistribution& dist);

struct InequalityStats {
  double sd = 0.0;
  double iqr_90_10 = 0.0;
  double iqr_50_10 = 0.0;
  double iqr_90_50 = 0.0;
  double iqr_75_25 = 0.0;
  double iqr_95_5 = 0.0;
  double gini = 0.0;
  double mean = 0.0;

  // Report order: SD, 90-10, 50-10, 90-50, 75-25, 95-5, Gini.
  std::vector<double> values() const;
};

const std::vector<std::string>& statistic_names();

InequalityStats inequality_stats(const GridDistribution& dist,
                                 QuantileMode mode = QuantileMode::linear);

// Report levels {.05, .1, .25, .5, .75, .9, .95} merged with the band grid
// .08, .09, ..., .92.
std::vector<double> default_quantile_levels();
// The band grid alone (85 levels).
std::vector<double> band_quantile_levels();

struct DecompositionReport {
  std::vector<std::string> statistics;
  std::vector<std::string> effects;  // factor effects then structure, in chain order
  std::vector<double> total;                 // per statistic, x100
  std::vector<std::vector<double>> effect;   // [statistic][effect], x100
  std::vector<double> total_se;              // empty until bootstrapped
  std::vector<std::vector<double>> effect_se;
  std::vector<InequalityStats> step_stats;   // raw statistics of every chain step
  std::vector<std::string> step_labels;
  std::vector<std::string> sequence;
  std::string link;
  std::string grid;

  // Totals then effects row by row.
  std::vector<double> flatten() const;
  std::size_t cell_count() const { return total.size() * (1 + effects.size()); }
};

// Effect k = stat(step k) - stat(step k+1); total = stat(first) -
// stat(last). All scaled by 100.
DecompositionReport assemble_report(const std::vector<CounterfactualDistribution>& chain,
                                    const std::vector<std::string>& effects,
                                    QuantileMode mode = QuantileMode::linear);
DecompositionReport assemble_report(const std::vector<GridDistribution>& steps,
                                    const std::vector<std::string>& step_labels,
                                    const std::vector<std::string>& effects,
                                    QuantileMode mode = QuantileMode::linear);

struct CurveBundle {
  std::vector<double> levels;      // QE arguments
  std::vector<double> points;      // DE arguments
  std::vector<std::string> curves; // effect names, then "observed"
  std::vector<std::vector<double>> qe;  // [curve][level]
  std::vector<std::vector<double>> de;  // [curve][point]

  std::vector<double> flatten() const;
};

// Per-effect quantile and distribution effects, same sign convention as
// assemble_report, unscaled. The last curve is the observed change.
CurveBundle qe_de_curves(const std::vector<CounterfactualDistribution>& chain,
                         const std::vector<std::string>& effects, std::span<const double> levels,
                         std::span<const double> points, QuantileMode mode = QuantileMode::linear);

// `count` evenly spaced points between the `lo` and `hi` weighted quantiles
// of the pooled sample.
std::vector<double> default_de_points(const Dataset& data, double lo = 0.01, double hi = 0.97,
                                      std::size_t count = 101);

struct VarianceChannels {
  double between = 0.0;
  double within = 0.0;
};

// Linear quantile model Y = X'b(U), U uniform and independent of X:
// between = E[b]' Var[X] E[b], within = tr(E[XX'] Var[b(U)]), with b
// averaged over the rows of `coefficients` (one per tau, equally spaced)
// and weighted moments of the rows of `x`.
VarianceChannels variance_channels(const Eigen::MatrixXd& coefficients, const Eigen::MatrixXd& x,
                                   std::span<const double> weights);

}  // namespace cfdecomp
