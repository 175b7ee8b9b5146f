#include "cfdecomp/report_io.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "cfdecomp/csv.hpp"
#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

std::string number_or_empty(const std::vector<double>& v, std::size_t i) {
  return i < v.size() ? csv::format_double(v[i]) : std::string();
}

std::string display_label(std::string name) {
  if (!name.empty() && name[0] >= 'a' && name[0] <= 'z') name[0] = static_cast<char>(name[0] - 'a' + 'A');
  return name;
}

std::string cell(double estimate, const double* se, int digits) {
  std::string out = csv::format_fixed(estimate, digits);
  if (se) out += " (" + csv::format_fixed(*se, digits) + ")";
  return out;
}

}  // namespace

nlohmann::json to_json(const FactorSchema& schema) {
  nlohmann::json columns = nlohmann::json::array();
  for (const auto& c : schema.columns())
    columns.push_back({{"name", c.name}, {"kind", std::string(to_string(c.kind))}});
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : schema.blocks()) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t c : b.columns) names.push_back(schema.columns()[c].name);
    blocks.push_back({{"name", b.name}, {"columns", names}});
  }
  nlohmann::json interactions = nlohmann::json::array();
  for (const auto& term : schema.interactions()) {
    nlohmann::json names = nlohmann::json::array();
    for (std::size_t c : term) names.push_back(schema.columns()[c].name);
    interactions.push_back(names);
  }
  return {{"columns", columns},
          {"blocks", blocks},
          {"interactions", interactions},
          {"intercept", schema.intercept()}};
}

FactorSchema schema_from_json(const nlohmann::json& doc) {
  try {
    std::vector<Column> columns;
    for (const auto& c : doc.at("columns"))
      columns.push_back({c.at("name").get<std::string>(),
                         parse_column_kind(c.value("kind", std::string("continuous")))});
    auto index = [&](const std::string& name) {
      for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == name) return i;
      throw ValidationError("schema references unknown column '" + name + "'");
    };
    std::vector<Block> blocks;
    for (const auto& b : doc.at("blocks")) {
      Block block{b.at("name").get<std::string>(), {}};
      for (const auto& c : b.at("columns")) block.columns.push_back(index(c.get<std::string>()));
      blocks.push_back(std::move(block));
    }
    std::vector<std::vector<std::size_t>> interactions;
    for (const auto& term : doc.value("interactions", nlohmann::json::array())) {
      std::vector<std::size_t> cols;
      for (const auto& c : term) cols.push_back(index(c.get<std::string>()));
      interactions.push_back(std::move(cols));
    }
    return FactorSchema(std::move(columns), std::move(blocks), std::move(interactions),
                        doc.value("intercept", true));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed schema: ") + e.what());
  }
}

void write_decomposition_csv(std::ostream& out, const DecompositionReport& report) {
  std::vector<std::string> header{"statistic", "total", "total_se"};
  for (const auto& e : report.effects) {
    header.push_back(e);
    header.push_back(e + "_se");
  }
  csv::write_row(out, header);
  for (std::size_t s = 0; s < report.statistics.size(); ++s) {
    std::vector<std::string> row{report.statistics[s], csv::format_double(report.total[s]),
                                 number_or_empty(report.total_se, s)};
    for (std::size_t k = 0; k < report.effects.size(); ++k) {
      row.push_back(csv::format_double(report.effect[s][k]));
      row.push_back(s < report.effect_se.size() ? number_or_empty(report.effect_se[s], k)
                                                : std::string());
    }
    csv::write_row(out, row);
  }
}

void write_decomposition_table(std::ostream& out, const DecompositionReport& report, int digits) {
  std::vector<std::string> header{"Statistics", "Total Changes"};
  for (const auto& e : report.effects) header.push_back(display_label(e));
  csv::write_row(out, header);
  const bool has_se = !report.total_se.empty();
  for (std::size_t s = 0; s < report.statistics.size(); ++s) {
    std::vector<std::string> row{report.statistics[s],
                                 cell(report.total[s], has_se ? &report.total_se[s] : nullptr, digits)};
    for (std::size_t k = 0; k < report.effects.size(); ++k)
      row.push_back(cell(report.effect[s][k], has_se ? &report.effect_se[s][k] : nullptr, digits));
    csv::write_row(out, row);
  }
}

void write_curves_csv(std::ostream& out, const CurveBundle& curves, const CurveBands* bands) {
  csv::write_row(out, {"kind", "curve", "argument", "estimate", "lower", "upper"});
  auto emit = [&](const char* kind, std::size_t c, const std::vector<double>& args,
                  const std::vector<double>& est, const BandedCurve* band) {
    for (std::size_t i = 0; i < args.size(); ++i)
      csv::write_row(out, {kind, curves.curves[c], csv::format_double(args[i]),
                           csv::format_double(est[i]), band ? csv::format_double(band->lower[i]) : "",
                           band ? csv::format_double(band->upper[i]) : ""});
  };
  for (std::size_t c = 0; c < curves.curves.size(); ++c)
    emit("qe", c, curves.levels, curves.qe[c], bands ? &bands->qe[c] : nullptr);
  for (std::size_t c = 0; c < curves.curves.size(); ++c)
    emit("de", c, curves.points, curves.de[c], bands ? &bands->de[c] : nullptr);
}

nlohmann::json to_json(const DecompositionReport& report) {
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t k = 0; k < report.step_stats.size(); ++k)
    steps.push_back({{"label", report.step_labels[k]},
                     {"statistics", report.step_stats[k].values()},
                     {"mean", report.step_stats[k].mean}});
  return {{"statistics", report.statistics}, {"effects", report.effects},
          {"total", report.total},           {"effect", report.effect},
          {"total_se", report.total_se},     {"effect_se", report.effect_se},
          {"steps", steps},                  {"sequence", report.sequence},
          {"link", report.link},             {"grid", report.grid}};
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

}  // namespace cfdecomp
