#include "commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/opensslv.h>
#include <spdlog/spdlog.h>
#include <spdlog/version.h>

#include "cfdecomp/analysis.hpp"
#include "cfdecomp/csv.hpp"
#include "cfdecomp/dgp.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/inference.hpp"
#include "cfdecomp/melly.hpp"
#include "cfdecomp/prep.hpp"
#include "cfdecomp/report_io.hpp"

namespace cfdecomp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Output files of one run, in emission order.
class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& text) {
    write_text_file((fs::path(dir_) / name).string(), text);
    files_.push_back({{"path", name}, {"sha256", sha256_hex(text)}});
  }

  void manifest(const std::string& command, const json& config, std::uint64_t seed) {
    json doc;
    doc["command"] = command;
    doc["seed"] = seed;
    doc["config"] = config;
    doc["config_sha256"] = sha256_hex(config.dump());
    doc["outputs"] = files_;
    doc["versions"] = {
        {"cfdecomp", CFDECOMP_VERSION},
        {"compiler", __VERSION__},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                      "." + std::to_string(EIGEN_MINOR_VERSION)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                       std::to_string(SPDLOG_VER_PATCH)},
        {"openssl", OPENSSL_VERSION_TEXT}};
    write_text_file((fs::path(dir_) / "manifest.json").string(), doc.dump(2) + "\n");
  }

 private:
  std::string dir_;
  json files_ = json::array();
};

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

json effective_config(const std::string& path, const Overrides& overrides, ConfigDocument& config) {
  config = load_config(path);
  apply_overrides(config.doc, overrides);
  return config.doc;
}

Dataset load_dataset(const std::string& path, const FactorSchema& schema,
                     const std::optional<std::array<std::string, 2>>& periods) {
  IngestOptions options;
  options.period_order = periods;
  IngestResult in = ingest_csv(path, schema, options);
  if (in.dropped.total() > 0)
    spdlog::warn("dropped {} rows: {} missing outcome, {} nonpositive weight, {} schema violations",
                 in.dropped.total(), in.dropped.missing_outcome, in.dropped.nonpositive_weight,
                 in.dropped.schema_violation);
  spdlog::info("loaded {} rows ({} / {})", in.dataset.size(), in.dataset.sample(std::size_t{0}).size(),
               in.dataset.sample(std::size_t{1}).size());
  return std::move(in.dataset);
}

// CSV with a header row, accessed by column name.
class Table {
 public:
  explicit Table(const std::string& path) : path_(path) {
    auto records = csv::read_file(path);
    if (records.empty()) throw ValidationError(path + ": empty file");
    for (std::size_t j = 0; j < records[0].fields.size(); ++j) index_[records[0].fields[j]] = j;
    rows_.assign(records.begin() + 1, records.end());
    for (const auto& r : rows_)
      if (r.fields.size() != records[0].fields.size())
        throw ParseError("wrong number of fields in " + path, r.row);
  }

  std::size_t size() const { return rows_.size(); }
  std::size_t column(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError(path_ + ": missing column '" + name + "'");
    return it->second;
  }
  const std::string& text(std::size_t row, std::size_t col) const { return rows_[row].fields[col]; }
  std::optional<double> number(std::size_t row, std::size_t col) const {
    const std::string& f = rows_[row].fields[col];
    if (csv::is_missing(f)) return std::nullopt;
    const auto v = csv::parse_double(f);
    if (!v) throw ParseError("not a number: '" + f + "' in " + path_, rows_[row].row);
    return v;
  }
  double required(std::size_t row, std::size_t col) const {
    const auto v = number(row, col);
    if (!v) throw ParseError("missing value in " + path_, rows_[row].row);
    return *v;
  }

 private:
  std::string path_;
  std::map<std::string, std::size_t> index_;
  std::vector<csv::Record> rows_;
};

std::vector<double> characteristics(const Table& t, std::size_t row, const std::vector<std::size_t>& cols) {
  std::vector<double> out;
  for (std::size_t c : cols) out.push_back(t.required(row, c));
  return out;
}

std::vector<std::size_t> columns_of(const Table& t, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(t.column(n));
  return out;
}

double max_abs(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Largest |sum of effects - total| over the statistics of a report.
double telescoping_error(const DecompositionReport& r) {
  double m = 0.0;
  for (std::size_t s = 0; s < r.total.size(); ++s) {
    double sum = 0.0;
    for (double e : r.effect[s]) sum += e;
    m = std::max(m, std::abs(sum - r.total[s]));
  }
  return m;
}

struct Check {
  std::string property;
  double value;
  double tolerance;
  bool pass() const { return value <= tolerance; }
};

}  // namespace

int run_decompose(const std::string& config_path, const Overrides& overrides) {
  ConfigDocument config;
  const json effective = effective_config(config_path, overrides, config);
  DecomposeConfig c = parse_decompose(config);
  const Dataset data = load_dataset(c.data, c.schema, c.periods);

  c.analysis.de_points = default_de_points(data, c.de_lo, c.de_hi, c.de_count);
  const AnalysisResult result = run_analysis(data, c.analysis);
  const FitSummary& fits = result.chain.outcome_fits;
  spdlog::info("threshold fits: {} total, {} degenerate, {} separated, {} not converged",
               fits.thresholds, fits.degenerate, fits.separated, fits.not_converged);

  DecompositionReport report = result.report;
  std::optional<CurveBands> bands;
  json bootstrap_info = nullptr;
  if (c.replications > 0) {
    const BootstrapDraws draws = bootstrap_pipeline(data, c.analysis, c.bootstrap);
    report = summarize_se(report, draws, c.se);
    bands = band_curves(result.curves, draws, c.bootstrap.coverage, c.se);
    bootstrap_info = {{"replications", draws.replications},
                      {"failed", draws.failed},
                      {"scheme", std::string(to_string(c.bootstrap.scheme))},
                      {"se", std::string(to_string(c.se))},
                      {"coverage", c.bootstrap.coverage}};
  }

  Outputs out(c.output);
  out.write("decomposition.csv", render([&](std::ostream& os) { write_decomposition_csv(os, report); }));
  out.write("decomposition_table.csv",
            render([&](std::ostream& os) { write_decomposition_table(os, report); }));
  out.write("curves.csv", render([&](std::ostream& os) {
              write_curves_csv(os, result.curves, bands ? &*bands : nullptr);
            }));
  json steps = json::array();
  for (const auto& s : result.chain.steps) steps.push_back(to_json(s));
  const json chain = {{"report", to_json(report)},
                      {"steps", steps},
                      {"fits",
                       {{"thresholds", fits.thresholds},
                        {"degenerate", fits.degenerate},
                        {"separated", fits.separated},
                        {"not_converged", fits.not_converged}}},
                      {"bootstrap", bootstrap_info}};
  out.write("chain.json", chain.dump(2) + "\n");
  out.manifest("decompose", effective, c.bootstrap.seed);
  spdlog::info("wrote decomposition to {}", c.output);
  return 0;
}

int run_melly(const std::string& config_path, const Overrides& overrides) {
  ConfigDocument config;
  const json effective = effective_config(config_path, overrides, config);
  const MellyConfig c = parse_melly(config);
  const Dataset data = load_dataset(c.data, c.schema, c.periods);
  const MellyReport m = melly_decompose(data, c.taus, c.qr);
  if (m.crossing_base > 0.0 || m.crossing_comparison > 0.0)
    spdlog::info("quantile crossing frequency: base {:.4f}, comparison {:.4f}", m.crossing_base,
                 m.crossing_comparison);

  Outputs out(c.output);
  out.write("melly.csv", render([&](std::ostream& os) { write_decomposition_csv(os, m.table); }));
  out.write("melly_table.csv", render([&](std::ostream& os) { write_decomposition_table(os, m.table); }));
  const json doc = {{"report", to_json(m.table)},
                    {"taus", c.taus},
                    {"crossing", {{"base", m.crossing_base}, {"comparison", m.crossing_comparison}}},
                    {"interpolated", {{"base", m.interpolated_base}, {"comparison", m.interpolated_comparison}}}};
  out.write("melly.json", doc.dump(2) + "\n");
  out.manifest("melly", effective, effective.value("seed", std::uint64_t{0}));
  return 0;
}

int run_prep(const std::string& config_path, const Overrides& overrides) {
  ConfigDocument config;
  const json effective = effective_config(config_path, overrides, config);
  const PrepConfig c = parse_prep(config);
  json log;

  const Table hh(c.households);
  const std::size_t c_id = hh.column("household_id"), c_period = hh.column("period"),
                    c_weight = hh.column("weight"), c_cons = hh.column("consumption"),
                    c_adults = hh.column("adults"), c_children = hh.column("children");
  std::vector<std::size_t> c_cov;
  for (const auto& col : c.schema.columns()) c_cov.push_back(hh.column(col.name));
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < hh.size(); ++i)
    if (!row_of.emplace(hh.text(i, c_id), i).second)
      throw ValidationError("duplicate household_id '" + hh.text(i, c_id) + "'");

  std::vector<double> consumption(hh.size());
  for (std::size_t i = 0; i < hh.size(); ++i) consumption[i] = hh.required(i, c_cons);
  log["households"] = hh.size();

  if (c.vehicles) {
    const Table vt(c.vehicles->path);
    const std::size_t v_id = vt.column("household_id"), v_price = vt.column("purchase_price"),
                      v_years = vt.column("years_since_purchase");
    const auto v_cols = columns_of(vt, c.vehicles->characteristics);
    std::vector<VehicleRecord> records;
    for (std::size_t i = 0; i < vt.size(); ++i)
      records.push_back({vt.number(i, v_price), vt.required(i, v_years), characteristics(vt, i, v_cols)});
    const VehicleImputation imp = impute_vehicle_flow(records, c.imputation);
    for (std::size_t i = 0; i < vt.size(); ++i) {
      const auto it = row_of.find(vt.text(i, v_id));
      if (it == row_of.end()) throw ValidationError("vehicle for unknown household '" + vt.text(i, v_id) + "'");
      consumption[it->second] += imp.flow[i];
    }
    json counts;
    for (auto b : {VehicleBranch::recent_price, VehicleBranch::older_price, VehicleBranch::imputed_price}) {
      counts[std::string(to_string(b))] = imp.count(b);
      spdlog::info("vehicles {}: {}", to_string(b), imp.count(b));
    }
    log["vehicles"] = {{"records", vt.size()},
                       {"branches", counts},
                       {"retransform", imp.price_model ? imp.price_model->retransform : 1.0}};
  }

  if (c.housing) {
    const Table ht(c.housing->path);
    const std::size_t h_id = ht.column("household_id"), h_rep = ht.column("reported_quarterly"),
                      h_rent = ht.column("monthly_rent");
    const auto h_cols = columns_of(ht, c.housing->characteristics);
    std::vector<HousingRecord> records;
    for (std::size_t i = 0; i < ht.size(); ++i)
      records.push_back({ht.number(i, h_rep), ht.number(i, h_rent), characteristics(ht, i, h_cols)});
    const RentalImputation imp = impute_rental_equivalent(records, c.imputation);
    std::size_t imputed = 0;
    for (std::size_t i = 0; i < ht.size(); ++i) {
      const auto it = row_of.find(ht.text(i, h_id));
      if (it == row_of.end()) throw ValidationError("housing record for unknown household '" + ht.text(i, h_id) + "'");
      consumption[it->second] += imp.quarterly[i];
      imputed += imp.imputed[i] ? 1 : 0;
    }
    spdlog::info("rental equivalents: {} reported, {} imputed", ht.size() - imputed, imputed);
    log["housing"] = {{"records", ht.size()},
                      {"imputed", imputed},
                      {"retransform", imp.rent_model ? imp.rent_model->retransform : 1.0}};
  }

  std::set<std::string> labels;
  for (std::size_t i = 0; i < hh.size(); ++i) labels.insert(hh.text(i, c_period));
  if (labels.size() != 2) throw ValidationError("households must span exactly two periods");
  const std::array<std::string, 2> periods{*labels.begin(), *labels.rbegin()};

  std::vector<Observation> rows;
  for (std::size_t i = 0; i < hh.size(); ++i) {
    const std::string& period = hh.text(i, c_period);
    const double adults = hh.required(i, c_adults), children = hh.required(i, c_children);
    if (adults < 1 || children < 0 || adults != std::floor(adults) || children != std::floor(children))
      throw ValidationError("household '" + hh.text(i, c_id) + "' has an invalid size");
    double y = deflate(consumption[i], c.deflator.index(period));
    y = equivalence_scale(y, static_cast<std::size_t>(adults), static_cast<std::size_t>(children), c.scale);
    if (c.log_outcome) {
      if (!(y > 0.0)) throw ValidationError("household '" + hh.text(i, c_id) + "' has nonpositive consumption");
      y = std::log(y);
    }
    Observation o{y, hh.required(i, c_weight), period, {}};
    for (std::size_t col : c_cov) o.covariates.push_back(hh.required(i, col));
    rows.push_back(std::move(o));
  }
  const Dataset prepared = Dataset::from_rows(c.schema, periods, rows);
  log["deflator"] = {{"name", c.deflator.name}, {"values", c.deflator.values}};
  log["equivalence_scale"] = std::string(to_string(c.scale));

  std::ostringstream diag;
  csv::write_row(diag, {"diagnostic", "label", "value", "detail"});
  if (c.iv) {
    const Table it(c.iv->path);
    const std::size_t cy = it.column(c.iv->y), cx = it.column(c.iv->x), cz = it.column(c.iv->z),
                      cw = it.column(c.iv->w);
    std::map<std::string, std::vector<std::size_t>> groups;
    const std::optional<std::size_t> cp =
        c.iv->period ? std::optional<std::size_t>(it.column(*c.iv->period)) : std::nullopt;
    for (std::size_t i = 0; i < it.size(); ++i) groups[cp ? it.text(i, *cp) : "all"].push_back(i);
    for (const auto& [label, idx] : groups) {
      std::vector<double> y, x, z, w;
      for (std::size_t i : idx) {
        y.push_back(it.required(i, cy));
        x.push_back(it.required(i, cx));
        z.push_back(it.required(i, cz));
        w.push_back(it.required(i, cw));
      }
      const IvResult r = iv_elasticity(y, x, z, w, c.iv->trim);
      csv::write_row(diag, {"iv_elasticity", label, format_coef_se(r.coefficient, r.se),
                            "n=" + std::to_string(r.n) + " first_stage_F=" + csv::format_fixed(r.first_stage_f, 2) +
                                (r.weak ? " weak" : "")});
    }
  }
  for (const auto& b : c.baskets) {
    const double ratio = basket_cpi_ratio(b.components, b.weights, b.all_items);
    csv::write_row(diag, {"basket_cpi_ratio", b.label, csv::format_fixed(ratio, 3),
                          "ratio=" + csv::format_double(ratio)});
  }

  Outputs out(c.output);
  out.write("prepared.csv", render([&](std::ostream& os) { write_csv(os, prepared); }));
  out.write("diagnostics.csv", diag.str());
  out.write("prep_log.json", log.dump(2) + "\n");
  out.manifest("prep", effective, effective.value("seed", std::uint64_t{0}));
  return 0;
}

namespace {

json resolve_dgp(const json& doc) {
  if (!doc.contains("default")) return doc;
  const std::string name = doc.at("default").get<std::string>();
  const std::size_t n = doc.value("n", std::size_t{0});
  json out;
  if (name == "saturated") out = to_json(saturated_dgp());
  else if (name == "discrete") out = to_json(default_discrete_dgp());
  else if (name == "null") out = to_json(null_dgp());
  else if (name == "location") out = to_json(location_shift_dgp());
  else if (name == "slope") out = to_json(heterogeneous_slope_dgp());
  else throw ValidationError("unknown default DGP '" + name + "'");
  if (n > 0) out["n"] = n;
  if (doc.contains("seed")) out["seed"] = doc.at("seed");
  return out;
}

std::vector<Check> simulate_discrete(const SimulateConfig& c, const DiscreteDgp& dgp, const Dataset& data,
                                     Outputs& out) {
  AnalysisSpec spec;
  spec.decomposition.grid = c.grid;
  spec.decomposition.fit.link = c.link;
  const AnalysisResult r = run_analysis(data, spec);
  std::vector<Check> checks;
  checks.push_back({"telescoping_statistics", telescoping_error(r.report), c.exact_tolerance});
  double curve_err = 0.0;
  const std::size_t nc = r.curves.curves.size();
  for (const auto* family : {&r.curves.qe, &r.curves.de}) {
    std::vector<double> sum((*family)[0].size(), 0.0);
    for (std::size_t k = 0; k + 1 < nc; ++k)
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += (*family)[k][j];
    curve_err = std::max(curve_err, max_abs(sum, (*family)[nc - 1]));
  }
  checks.push_back({"telescoping_curves", curve_err, c.exact_tolerance});

  std::ostringstream fixture;
  csv::write_row(fixture, {"spec", "y", "cdf"});
  double plugin = 0.0, population = 0.0;
  for (const auto& step : r.chain.steps) {
    const ExactCounterfactual exact = exact_counterfactual(dgp, data.periods(), step.spec);
    const std::vector<double> pop = exact.cdf(step.grid);
    population = std::max(population, max_abs(pop, step.cdf));
    if (c.saturated) plugin = std::max(plugin, max_abs(plugin_counterfactual(data, step.spec, step.grid), step.cdf));
    for (std::size_t j = 0; j < step.grid.size(); ++j)
      csv::write_row(fixture, {step.spec.label(), csv::format_double(step.grid[j]), csv::format_double(pop[j])});
  }
  if (c.saturated) {
    checks.push_back({"plugin_exact", plugin, c.exact_tolerance});
    checks.push_back({"population_sup_distance", population, c.population_tolerance});
  }
  out.write("oracle_cdf.csv", fixture.str());

  if (c.fixture) {
    // Committed oracle values must match a fresh enumeration.
    const Table t(*c.fixture);
    const std::size_t cs = t.column("spec"), cy = t.column("y"), cf = t.column("cdf");
    std::map<std::string, ExactCounterfactual> by_label;
    for (const auto& step : r.chain.steps)
      by_label.emplace(step.spec.label(), exact_counterfactual(dgp, data.periods(), step.spec));
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto it = by_label.find(t.text(i, cs));
      if (it == by_label.end()) {
        worst = INFINITY;
        break;
      }
      worst = std::max(worst, std::abs(it->second.cdf(t.required(i, cy)) - t.required(i, cf)));
    }
    if (t.size() == 0) worst = INFINITY;
    checks.push_back({"fixture_match", worst, 1e-9});
  }
  out.write("decomposition.csv", render([&](std::ostream& os) { write_decomposition_csv(os, r.report); }));
  return checks;
}

std::vector<Check> simulate_linear(const SimulateConfig& c, const LinearQrDgp& dgp, const Dataset& data,
                                   Outputs& out) {
  const MellyReport m = melly_decompose(data, c.taus);
  std::vector<Check> checks;
  checks.push_back({"telescoping_statistics", telescoping_error(m.table), c.exact_tolerance});
  bool location = true;
  for (const auto& p : dgp.periods)
    for (std::size_t j = 1; j < p.scale.size(); ++j) location = location && p.scale[j] == 0.0;
  if (location) {
    double worst = 0.0;
    for (const auto& row : m.table.effect) worst = std::max(worst, std::abs(row[2]));
    checks.push_back({"location_residuals_zero", worst, c.residual_tolerance});
  }
  // Channels of the true coefficient path, integrated over U by the
  // midpoint rule on a fine grid.
  std::vector<double> fine(4000);
  for (std::size_t j = 0; j < fine.size(); ++j) fine[j] = (j + 0.5) / static_cast<double>(fine.size());
  const DesignSpec design = DesignSpec::outcome(data.schema());
  for (std::size_t p = 0; p < 2; ++p) {
    const PeriodSample& s = data.sample(p);
    const VarianceChannels v = variance_channels(dgp.coefficients(p, fine), design.matrix(s), s.weight);
    const MeanSd y = weighted_mean_sd(s.outcome, s.weight);
    const double rel = std::abs(v.between + v.within - y.sd * y.sd) / (y.sd * y.sd);
    checks.push_back({"variance_channels_" + data.periods()[p], rel, c.variance_tolerance});
  }
  out.write("melly.csv", render([&](std::ostream& os) { write_decomposition_csv(os, m.table); }));
  return checks;
}

}  // namespace

int run_simulate(const std::string& config_path, const Overrides& overrides) {
  ConfigDocument config;
  json effective = effective_config(config_path, overrides, config);
  SimulateConfig c = parse_simulate(config);
  c.dgp = resolve_dgp(c.dgp);
  effective["dgp"] = c.dgp;

  Outputs out(c.output);
  std::vector<Check> checks;
  std::uint64_t seed = 0;
  const std::string kind = c.dgp.value("kind", std::string("discrete"));
  if (kind == "discrete") {
    const DiscreteDgp dgp = discrete_dgp_from_json(c.dgp);
    seed = dgp.seed;
    const Dataset data = generate(dgp, c.periods);
    out.write("data.csv", render([&](std::ostream& os) { write_csv(os, data); }));
    checks = simulate_discrete(c, dgp, data, out);
  } else if (kind == "linear_qr") {
    const LinearQrDgp dgp = linear_qr_dgp_from_json(c.dgp);
    seed = dgp.seed;
    const Dataset data = generate(dgp, c.periods);
    out.write("data.csv", render([&](std::ostream& os) { write_csv(os, data); }));
    checks = simulate_linear(c, dgp, data, out);
  } else {
    throw ValidationError("dgp.kind must be discrete or linear_qr");
  }

  std::ostringstream report;
  csv::write_row(report, {"property", "value", "tolerance", "pass"});
  bool all = true;
  for (const auto& ch : checks) {
    csv::write_row(report, {ch.property, csv::format_double(ch.value), csv::format_double(ch.tolerance),
                            ch.pass() ? "PASS" : "FAIL"});
    if (!ch.pass()) spdlog::error("{} = {} exceeds {}", ch.property, ch.value, ch.tolerance);
    all = all && ch.pass();
  }
  out.write("validation.csv", report.str());
  out.manifest("simulate", effective, seed);
  return all ? 0 : 1;
}

}  // namespace cfdecomp::cli
