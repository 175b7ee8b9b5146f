#pragma once

// Synthetic two-period data-generating processes and exact oracles for the
// counterfactual distributions they imply.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/dataset.hpp"
#include "cfdecomp/rng.hpp"

namespace cfdecomp {

// Outcome law of one covariate cell in one period.
struct OutcomeLaw {
  enum class Kind { discrete, normal };
  Kind kind = Kind::discrete;
  std::vector<double> values;  // discrete: support, increasing
  std::vector<double> probs;   // discrete: masses summing to 1
  double mean = 0.0;           // normal
  double sd = 1.0;             // normal

  static OutcomeLaw discrete(std::vector<double> values, std::vector<double> probs);
  static OutcomeLaw normal(double mean, double sd);

  void validate() const;
  double cdf(double y) const;
  double draw(Rng& rng) const;
  bool operator==(const OutcomeLaw&) const = default;
};

struct DiscreteCell {
  std::vector<double> covariates;      // one value per schema column
  std::array<double, 2> probability{};  // (base, comparison)
  std::array<OutcomeLaw, 2> outcome;
  bool operator==(const DiscreteCell&) const = default;
};

// A covariate lattice of at most 16 cells. Every schema column must belong
// to a block; every cell is a possible covariate vector in both periods.
struct DiscreteDgp {
  static constexpr std::size_t max_cells = 16;

  FactorSchema schema;
  std::vector<DiscreteCell> cells;
  std::size_t n = 5000;  // rows per period
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const DiscreteDgp&) const = default;
};

// Law of one covariate of a linear quantile model.
struct CovariateLaw {
  enum class Kind { normal, uniform, bernoulli };
  Kind kind = Kind::normal;
  double a = 0.0;  // normal mean, uniform lower bound, bernoulli p
  double b = 1.0;  // normal sd, uniform upper bound
  bool operator==(const CovariateLaw&) const = default;
};

// Y = X'b(U), U ~ Unif(0, 1) independent of X = (1, x1, ..., xk), with
// b(u) = location + scale * g(u).
struct LinearQrPeriod {
  std::vector<CovariateLaw> covariates;
  std::vector<double> location;  // size k + 1, intercept first
  std::vector<double> scale;     // size k + 1
  bool operator==(const LinearQrPeriod&) const = default;
};

struct LinearQrDgp {
  enum class Quantile {
    normal,   // g = standard normal quantile
    uniform,  // g(u) = u
  };
  std::vector<std::string> names;  // covariate names, size k
  std::array<LinearQrPeriod, 2> periods;
  Quantile quantile = Quantile::normal;
  // The comparison period reuses the base period's X and U draws, so its
  // covariate laws are ignored.
  bool common_draws = false;
  std::size_t n = 5000;
  std::uint64_t seed = 1;

  void validate() const;
  double g(double u) const;
  // Coefficient path b(tau_j), one row per level.
  Eigen::MatrixXd coefficients(std::size_t period, std::span<const double> taus) const;
  bool operator==(const LinearQrDgp&) const = default;
};

// Rows are deterministic given the seed. Weights are 1.
Dataset generate(const DiscreteDgp& dgp, const std::array<std::string, 2>& periods);
// Throws ValidationError if some drawn X makes y decreasing in U.
Dataset generate(const LinearQrDgp& dgp, const std::array<std::string, 2>& periods);

// Population counterfactual CDF as a finite mixture of cell outcome laws.
struct ExactCounterfactual {
  std::vector<double> mass;
  std::vector<OutcomeLaw> laws;
  double cdf(double y) const;
  std::vector<double> cdf(std::span<const double> ys) const;
};

// Enumerates the nested sums over the lattice from the DGP parameters.
// `periods` maps the DGP's (base, comparison) to the labels the spec uses.
ExactCounterfactual exact_counterfactual(const DiscreteDgp& dgp,
                                         const std::array<std::string, 2>& periods,
                                         const CounterfactualSpec& spec);

// The same sums with the sample's weighted cell frequencies and weighted
// empirical conditional CDFs, evaluated at `points`. Requires discrete
// covariates.
std::vector<double> plugin_counterfactual(const Dataset& data, const CounterfactualSpec& spec,
                                          std::span<const double> points);

// Two dummies in two blocks with their interaction (4 cells), finite
// outcome supports; saturated in every model of the chain.
DiscreteDgp saturated_dgp(std::size_t n = 20000, std::uint64_t seed = 11);
// Three blocks over 16 cells, normal cell outcomes, no interactions.
DiscreteDgp default_discrete_dgp(std::size_t n = 5000, std::uint64_t seed = 7);
// Independent blocks, identical laws in both periods, normal outcomes.
DiscreteDgp null_dgp(std::size_t n = 20000, std::uint64_t seed = 3);
// Intercept-only dependence on U, shifted coefficients in the comparison
// period, common draws.
LinearQrDgp location_shift_dgp(std::size_t n = 20000, std::uint64_t seed = 5);
// Slopes that vary with U; g(u) = u and nonnegative covariates keep y
// increasing in U.
LinearQrDgp heterogeneous_slope_dgp(std::size_t n = 200000, std::uint64_t seed = 9);

nlohmann::json to_json(const DiscreteDgp& dgp);
nlohmann::json to_json(const LinearQrDgp& dgp);
DiscreteDgp discrete_dgp_from_json(const nlohmann::json& doc);
LinearQrDgp linear_qr_dgp_from_json(const nlohmann::json& doc);

}  // namespace cfdecomp
