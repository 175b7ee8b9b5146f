#pragma once

// Serialization of schemas and reports.

#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cfdecomp/dataset.hpp"
#include "cfdecomp/functionals.hpp"
#include "cfdecomp/inference.hpp"

namespace cfdecomp {

// {"columns": [{"name", "kind"}], "blocks": [{"name", "columns": [names]}],
//  "interactions": [[names]], "intercept": bool}
nlohmann::json to_json(const FactorSchema& schema);
FactorSchema schema_from_json(const nlohmann::json& doc);

// Wide table: one row per statistic; columns total, total_se, then
// <effect>, <effect>_se in effect order. SE columns are empty when the
// report was not bootstrapped. Values are in the report's units (x100).
void write_decomposition_csv(std::ostream& out, const DecompositionReport& report);

// Display table: "estimate (se)" cells rounded to `digits` decimals,
// effect names capitalized.
void write_decomposition_table(std::ostream& out, const DecompositionReport& report,
                               int digits = 1);

// Long format: kind (qe|de), curve, argument, estimate, lower, upper.
// Bounds are empty when `bands` is null.
void write_curves_csv(std::ostream& out, const CurveBundle& curves, const CurveBands* bands);

nlohmann::json to_json(const DecompositionReport& report);

// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cfdecomp
