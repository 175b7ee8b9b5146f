#pragma once

// One full decomposition run: chain, statistics table and curves.

#include <vector>

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/functionals.hpp"

namespace cfdecomp {

struct AnalysisSpec {
  DecompositionOptions decomposition;
  QuantileMode quantile_mode = QuantileMode::linear;
  std::vector<double> qe_levels = default_quantile_levels();
  // Empty: default_de_points of the sample being analysed. Bootstrap runs
  // fix these to the point sample's values.
  std::vector<double> de_points;
  // Treat any non-converged threshold fit as an error.
  bool fail_on_nonconvergence = false;
};

struct AnalysisResult {
  DecompositionChain chain;
  DecompositionReport report;
  CurveBundle curves;
};

AnalysisResult run_analysis(const Dataset& data, const AnalysisSpec& spec);

}  // namespace cfdecomp
