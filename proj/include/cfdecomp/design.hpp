#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfdecomp/dataset.hpp"

namespace cfdecomp {

// A regression design as a list of features, each the product of a set of
// covariate columns. The empty product is the intercept.
class DesignSpec {
 public:
  using Feature = std::vector<std::size_t>;

  DesignSpec() = default;
  explicit DesignSpec(std::vector<Feature> features) : features_(std::move(features)) {}

  // Intercept (if the schema has one), every column of the listed blocks in
  // block order, then every schema interaction whose columns all fall in
  // those blocks.
  static DesignSpec for_blocks(const FactorSchema& schema, std::span<const std::size_t> blocks);

  // Design of the conditional outcome model: all blocks.
  static DesignSpec outcome(const FactorSchema& schema);

  // Design of block b's conditional law: blocks b+1, ..., k-1.
  static DesignSpec conditioning(const FactorSchema& schema, std::size_t block);

  std::size_t width() const { return features_.size(); }
  const std::vector<Feature>& features() const { return features_; }

  void fill(std::span<const double> covariates, std::span<double> out) const;
  std::vector<double> row(std::span<const double> covariates) const;
  Eigen::MatrixXd matrix(const PeriodSample& sample) const;

  std::vector<std::string> names(const FactorSchema& schema) const;

  // Copy without the features whose positions are listed.
  DesignSpec without(const std::vector<std::size_t>& positions) const;

  bool operator==(const DesignSpec&) const = default;

 private:
  std::vector<Feature> features_;
};

// A feature held at the single value it took in an estimation sample.
struct FixedFeature {
  DesignSpec::Feature feature;
  double value = 0.0;
  bool operator==(const FixedFeature&) const = default;
};

}  // namespace cfdecomp
