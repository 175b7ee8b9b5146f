#pragma once

// Counterfactual unconditional distributions under swaps of the outcome
// structure and of covariate blocks, and the telescoping chain built from
// them.

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cfdecomp/binary_glm.hpp"
#include "cfdecomp/dataset.hpp"
#include "cfdecomp/design.hpp"
#include "cfdecomp/distreg.hpp"

namespace cfdecomp {

// Structure period plus one covariate period per schema block, in schema
// block order.
struct CounterfactualSpec {
  std::string structure_period;
  std::vector<std::pair<std::string, std::string>> block_periods;  // (block, period)

  bool observed() const;
  // "(t; s1, s2, ...)"
  std::string label() const;
  bool operator==(const CounterfactualSpec&) const = default;
};

struct BlockModelOptions {
  ThresholdFitOptions fit;
  // Blocks with at most this many distinct values in the donor period, and
  // all-dummy blocks, are modeled as discrete cells.
  std::size_t max_categories = 50;
  // Grid size for a single continuous column modeled by distribution
  // regression.
  std::size_t continuous_points = 50;
};

// Law of one block's columns given all later blocks, in one period.
class CovariateBlockModel {
 public:
  enum class Kind { discrete_cells, distribution_regression };

  // Continuation-ratio stage k: P(value = support[k] | value not in
  // support[0..k-1], later blocks).
  struct Stage {
    GlmFit fit;
    DesignSpec design;
    std::vector<FixedFeature> fixed;
  };

  CovariateBlockModel(std::size_t block, std::string name, std::string period,
                      std::vector<std::size_t> columns, std::vector<std::vector<double>> support,
                      Link link, std::vector<Stage> stages);
  CovariateBlockModel(std::size_t block, std::string name, std::string period,
                      std::size_t column, ConditionalOutcomeModel model);

  std::size_t block() const { return block_; }
  const std::string& name() const { return name_; }
  const std::string& period() const { return period_; }
  Kind kind() const { return kind_; }
  const std::vector<std::size_t>& columns() const { return columns_; }
  // Values the block can take: one vector per support point.
  const std::vector<std::vector<double>>& support() const { return support_; }
  const std::vector<Stage>& stages() const { return stages_; }
  const ConditionalOutcomeModel& continuous_model() const { return dr_; }

  // Probability of each support point given a covariate vector whose later
  // blocks are set. Sums to 1.
  void probabilities(std::span<const double> covariates, std::span<double> out) const;
  std::vector<double> probabilities(std::span<const double> covariates) const;

  // True when the covariate vector sets a feature that was constant in the
  // donor sample to a different value.
  bool extrapolates(std::span<const double> covariates) const;

 private:
  std::size_t block_;
  std::string name_;
  std::string period_;
  Kind kind_;
  std::vector<std::size_t> columns_;
  std::vector<std::vector<double>> support_;
  Link link_ = Link::logit;
  std::vector<Stage> stages_;
  ConditionalOutcomeModel dr_;
};

using BlockKey = std::pair<std::size_t, std::string>;  // (block index, period)
using BlockModelSet = std::map<BlockKey, CovariateBlockModel>;

BlockModelSet fit_block_models(const Dataset& data, const std::vector<BlockKey>& needed,
                               const BlockModelOptions& options = {});

// Block models a spec needs: every block before the trailing run of blocks
// that share one period.
std::vector<BlockKey> required_block_models(const FactorSchema& schema,
                                            const CounterfactualSpec& spec);

struct CounterfactualOptions {
  // Upper bound on enumerated covariate vectors per distribution.
  std::size_t leaf_budget = 100'000'000;
  bool log_pooling = true;
};

struct CounterfactualDistribution {
  CounterfactualSpec spec;
  std::vector<double> grid;
  std::vector<double> cdf;
  std::string support_period;  // period whose rows are the evaluation sample
  double support_weight = 0.0;
  std::size_t leaves = 0;
  std::size_t pooled_evaluations = 0;  // evaluations that fell back to pooling
};

// Integrates the structure period's conditional CDF against the covariate
// law the spec assigns. The trailing run of blocks sharing one period is
// taken from that period's rows; each earlier block is integrated against
// its fitted model, last block first.
CounterfactualDistribution counterfactual_cdf(const CounterfactualSpec& spec,
                                              const ConditionalOutcomeModel& outcome_model,
                                              const BlockModelSet& block_models,
                                              const Dataset& data,
                                              const CounterfactualOptions& options = {});

// Chain layout. Default: (c; c..c), (c; b, c..c), ..., (c; b..b), (b; b..b)
// with c the comparison and b the base period, so the structure is swapped
// last. structure_first: (c; c..c), (b; c..c), (b; b, c..c), ..., (b; b..b).
std::vector<CounterfactualSpec> chain_specs(const FactorSchema& schema,
                                            const std::array<std::string, 2>& periods,
                                            bool structure_first = false);

struct DecompositionOptions {
  GridSpec grid;
  ThresholdFitOptions fit;
  BlockModelOptions blocks;
  CounterfactualOptions evaluation;
  std::vector<std::string> sequence;  // block order; empty keeps the schema order
  bool structure_first = false;
};

struct FitSummary {
  std::size_t thresholds = 0;
  std::size_t degenerate = 0;
  std::size_t separated = 0;
  std::size_t not_converged = 0;
};

struct DecompositionChain {
  FactorSchema schema;  // reordered into the decomposition sequence
  std::vector<CounterfactualDistribution> steps;
  // One name per adjacent pair of steps: the block swapped, or "structure".
  std::vector<std::string> effects;
  FitSummary outcome_fits;
};

DecompositionChain decomposition_sequence(const Dataset& data, const DecompositionOptions& options);

nlohmann::json to_json(const CounterfactualSpec& spec);
nlohmann::json to_json(const CounterfactualDistribution& dist);

}  // namespace cfdecomp
