#pragma once

// Internal helpers shared by the threshold-family and block-model fits.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cfdecomp/design.hpp"

namespace cfdecomp::detail {

struct ReducedDesign {
  DesignSpec design;
  std::vector<FixedFeature> fixed;
  std::vector<Eigen::Index> kept;  // columns of the full matrix that remain
};

// Drops features that are constant over the rows of `x`. With an intercept
// every constant feature goes; without one, constant zero features go and
// the first nonzero constant feature stays as the intercept.
ReducedDesign reduce_constant_features(const DesignSpec& design, const Eigen::MatrixXd& x);

Eigen::MatrixXd keep_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& cols);

// Identical rows of `x`, groups numbered in lexicographic row order.
struct RowGroups {
  std::vector<std::size_t> group_of;
  std::vector<std::size_t> first;  // one representative row per group
  std::size_t count() const { return first.size(); }
};

RowGroups group_rows(const Eigen::MatrixXd& x);

}  // namespace cfdecomp::detail
