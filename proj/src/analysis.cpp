#include "cfdecomp/analysis.hpp"

#include <string>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

std::string describe(const GridSpec& grid) {
  if (grid.kind == GridSpec::Kind::all_unique) return "all_unique";
  std::string out = "quantile_spaced(" + std::to_string(grid.points) + ")";
  if (grid.trim > 0.0) out += " trim " + std::to_string(grid.trim);
  return out;
}

}  // namespace

AnalysisResult run_analysis(const Dataset& data, const AnalysisSpec& spec) {
  AnalysisResult out;
  out.chain = decomposition_sequence(data, spec.decomposition);
  if (spec.fail_on_nonconvergence && out.chain.outcome_fits.not_converged > 0)
    throw NumericalError(std::to_string(out.chain.outcome_fits.not_converged) +
                         " threshold fits did not converge");
  out.report = assemble_report(out.chain.steps, out.chain.effects, spec.quantile_mode);
  out.report.sequence = out.chain.schema.block_names();
  out.report.link = std::string(to_string(spec.decomposition.fit.link));
  out.report.grid = describe(spec.decomposition.grid);
  const std::vector<double> points =
      spec.de_points.empty() ? default_de_points(data) : spec.de_points;
  out.curves = qe_de_curves(out.chain.steps, out.chain.effects, spec.qe_levels, points,
                            spec.quantile_mode);
  return out;
}

}  // namespace cfdecomp
