#include "grouping.hpp"

#include <algorithm>
#include <numeric>

namespace cfdecomp::detail {

ReducedDesign reduce_constant_features(const DesignSpec& design, const Eigen::MatrixXd& x) {
  const auto& features = design.features();
  const bool has_intercept =
      std::any_of(features.begin(), features.end(), [](const auto& f) { return f.empty(); });
  ReducedDesign out;
  std::vector<std::size_t> dropped;
  bool kept_constant = has_intercept;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const auto& f = features[static_cast<std::size_t>(c)];
    const bool constant = x.rows() > 0 && (x.col(c).array() == x(0, c)).all();
    if (f.empty() || !constant) {
      out.kept.push_back(c);
      continue;
    }
    if (!kept_constant && x(0, c) != 0.0) {
      kept_constant = true;
      out.kept.push_back(c);
      continue;
    }
    dropped.push_back(static_cast<std::size_t>(c));
    out.fixed.push_back({f, x(0, c)});
  }
  out.design = design.without(dropped);
  return out;
}

Eigen::MatrixXd keep_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

RowGroups group_rows(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double va = x(static_cast<Eigen::Index>(a), c);
      const double vb = x(static_cast<Eigen::Index>(b), c);
      if (va != vb) return va < vb;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);
  RowGroups groups;
  groups.group_of.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0 || less(order[k - 1], order[k])) groups.first.push_back(order[k]);
    groups.group_of[order[k]] = groups.first.size() - 1;
  }
  return groups;
}

}  // namespace cfdecomp::detail
