#include "cfdecomp/design.hpp"

#include <algorithm>
#include <numeric>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

DesignSpec DesignSpec::for_blocks(const FactorSchema& schema,
                                  std::span<const std::size_t> blocks) {
  std::vector<Feature> features;
  if (schema.intercept()) features.push_back({});
  std::vector<bool> included(schema.columns().size(), false);
  for (std::size_t b : blocks) {
    for (std::size_t c : schema.blocks().at(b).columns) {
      features.push_back({c});
      included[c] = true;
    }
  }
  for (const auto& term : schema.interactions()) {
    if (std::all_of(term.begin(), term.end(), [&](std::size_t c) { return included[c]; }))
      features.push_back(term);
  }
  return DesignSpec(std::move(features));
}

DesignSpec DesignSpec::outcome(const FactorSchema& schema) {
  std::vector<std::size_t> all(schema.blocks().size());
  std::iota(all.begin(), all.end(), 0);
  return for_blocks(schema, all);
}

DesignSpec DesignSpec::conditioning(const FactorSchema& schema, std::size_t block) {
  std::vector<std::size_t> later;
  for (std::size_t b = block + 1; b < schema.blocks().size(); ++b) later.push_back(b);
  return for_blocks(schema, later);
}

void DesignSpec::fill(std::span<const double> covariates, std::span<double> out) const {
  for (std::size_t f = 0; f < features_.size(); ++f) {
    double v = 1.0;
    for (std::size_t c : features_[f]) v *= covariates[c];
    out[f] = v;
  }
}

std::vector<double> DesignSpec::row(std::span<const double> covariates) const {
  std::vector<double> out(width());
  fill(covariates, out);
  return out;
}

Eigen::MatrixXd DesignSpec::matrix(const PeriodSample& sample) const {
  Eigen::MatrixXd x(sample.size(), width());
  std::vector<double> buf(width());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    fill(sample.row(i), buf);
    for (std::size_t f = 0; f < buf.size(); ++f) x(i, f) = buf[f];
  }
  return x;
}

std::vector<std::string> DesignSpec::names(const FactorSchema& schema) const {
  std::vector<std::string> out;
  for (const auto& f : features_) {
    if (f.empty()) {
      out.emplace_back("(intercept)");
      continue;
    }
    std::string name;
    for (std::size_t c : f) name += (name.empty() ? "" : ":") + schema.columns().at(c).name;
    out.push_back(std::move(name));
  }
  return out;
}

DesignSpec DesignSpec::without(const std::vector<std::size_t>& positions) const {
  std::vector<Feature> kept;
  for (std::size_t f = 0; f < features_.size(); ++f)
    if (std::find(positions.begin(), positions.end(), f) == positions.end())
      kept.push_back(features_[f]);
  return DesignSpec(std::move(kept));
}

}  // namespace cfdecomp
