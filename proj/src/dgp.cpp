#include "cfdecomp/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "cfdecomp/error.hpp"
#include "cfdecomp/links.hpp"
#include "cfdecomp/report_io.hpp"

namespace cfdecomp {

namespace {

using Vec = std::vector<double>;

// Covariate vectors of one period with their probability masses.
struct CellTable {
  std::vector<Vec> cells;
  std::vector<double> mass;
};

bool matches(const Vec& x, const Vec& assigned, const std::vector<bool>& set) {
  for (std::size_t c = 0; c < x.size(); ++c)
    if (set[c] && x[c] != assigned[c]) return false;
  return true;
}

// Visits every covariate vector of the counterfactual law with its mass:
// blocks are drawn last to first, block b from its period's conditional
// law given the blocks already drawn.
void enumerate_law(const FactorSchema& schema, const std::array<CellTable, 2>& tables,
                   const std::vector<std::size_t>& block_period,
                   const std::function<void(const Vec&, double)>& leaf) {
  const std::size_t width = schema.columns().size();
  Vec assigned(width, 0.0);
  std::vector<bool> set(width, false);
  std::function<void(std::size_t, double)> visit = [&](std::size_t remaining, double mass) {
    if (remaining == 0) {
      leaf(assigned, mass);
      return;
    }
    const std::size_t b = remaining - 1;
    const auto& cols = schema.blocks()[b].columns;
    const CellTable& t = tables[block_period[b]];
    double denominator = 0.0;
    std::map<Vec, double> numerator;
    for (std::size_t i = 0; i < t.cells.size(); ++i) {
      if (!(t.mass[i] > 0.0) || !matches(t.cells[i], assigned, set)) continue;
      denominator += t.mass[i];
      Vec v;
      for (std::size_t c : cols) v.push_back(t.cells[i][c]);
      numerator[v] += t.mass[i];
    }
    if (!(denominator > 0.0)) return;
    for (const auto& [v, num] : numerator) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        assigned[cols[j]] = v[j];
        set[cols[j]] = true;
      }
      visit(b, mass * num / denominator);
      for (std::size_t c : cols) set[c] = false;
    }
  };
  visit(schema.blocks().size(), 1.0);
}

std::vector<std::size_t> resolve_spec(const FactorSchema& schema,
                                      const std::array<std::string, 2>& periods,
                                      const CounterfactualSpec& spec, std::size_t& structure) {
  auto period_of = [&](const std::string& label) -> std::size_t {
    if (label == periods[0]) return 0;
    if (label == periods[1]) return 1;
    throw ValidationError("spec uses unknown period '" + label + "'");
  };
  if (spec.block_periods.size() != schema.blocks().size())
    throw ValidationError("spec does not assign a period to every block");
  std::vector<std::size_t> out;
  for (std::size_t b = 0; b < schema.blocks().size(); ++b) {
    if (spec.block_periods[b].first != schema.blocks()[b].name)
      throw ValidationError("spec block '" + spec.block_periods[b].first +
                            "' does not match schema block '" + schema.blocks()[b].name + "'");
    out.push_back(period_of(spec.block_periods[b].second));
  }
  structure = period_of(spec.structure_period);
  return out;
}

void check_all_blocked(const FactorSchema& schema) {
  for (std::size_t c = 0; c < schema.columns().size(); ++c)
    if (!schema.block_of_column(c))
      throw ValidationError("column '" + schema.columns()[c].name + "' belongs to no block");
}

double draw_covariate(const CovariateLaw& law, Rng& rng) {
  switch (law.kind) {
    case CovariateLaw::Kind::normal: return law.a + law.b * standard_normal(rng);
    case CovariateLaw::Kind::uniform: return law.a + (law.b - law.a) * uniform01(rng);
    case CovariateLaw::Kind::bernoulli: return uniform01(rng) < law.a ? 1.0 : 0.0;
  }
  return 0.0;
}

std::string_view to_string(CovariateLaw::Kind kind) {
  switch (kind) {
    case CovariateLaw::Kind::normal: return "normal";
    case CovariateLaw::Kind::uniform: return "uniform";
    case CovariateLaw::Kind::bernoulli: return "bernoulli";
  }
  return "?";
}

CovariateLaw::Kind parse_covariate_kind(const std::string& text) {
  if (text == "normal") return CovariateLaw::Kind::normal;
  if (text == "uniform") return CovariateLaw::Kind::uniform;
  if (text == "bernoulli") return CovariateLaw::Kind::bernoulli;
  throw ValidationError("unknown covariate law '" + text + "'");
}

nlohmann::json law_to_json(const OutcomeLaw& law) {
  if (law.kind == OutcomeLaw::Kind::normal)
    return {{"kind", "normal"}, {"mean", law.mean}, {"sd", law.sd}};
  return {{"kind", "discrete"}, {"values", law.values}, {"probs", law.probs}};
}

OutcomeLaw law_from_json(const nlohmann::json& doc) {
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "normal") return OutcomeLaw::normal(doc.at("mean").get<double>(), doc.at("sd").get<double>());
  if (kind == "discrete")
    return OutcomeLaw::discrete(doc.at("values").get<Vec>(), doc.at("probs").get<Vec>());
  throw ValidationError("unknown outcome law '" + kind + "'");
}

// Discretized bell over an 8-point support, floored so every value has
// positive mass.
OutcomeLaw bell(double center, double spread) {
  Vec values, probs;
  double total = 0.0;
  for (int k = 0; k < 8; ++k) {
    values.push_back(7.2 + 0.2 * k);
    const double z = (k - center) / spread;
    probs.push_back(std::exp(-0.5 * z * z) + 0.03);
    total += probs.back();
  }
  for (double& p : probs) p /= total;
  return OutcomeLaw::discrete(std::move(values), std::move(probs));
}

}  // namespace

OutcomeLaw OutcomeLaw::discrete(std::vector<double> values, std::vector<double> probs) {
  OutcomeLaw law;
  law.kind = Kind::discrete;
  law.values = std::move(values);
  law.probs = std::move(probs);
  law.validate();
  return law;
}

OutcomeLaw OutcomeLaw::normal(double mean, double sd) {
  OutcomeLaw law;
  law.kind = Kind::normal;
  law.mean = mean;
  law.sd = sd;
  law.validate();
  return law;
}

void OutcomeLaw::validate() const {
  if (kind == Kind::normal) {
    if (!std::isfinite(mean) || !(sd > 0.0) || !std::isfinite(sd))
      throw ValidationError("normal outcome law needs a finite mean and positive sd");
    return;
  }
  if (values.empty() || values.size() != probs.size())
    throw ValidationError("discrete outcome law needs matching values and probabilities");
  double total = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k > 0 && !(values[k] > values[k - 1]))
      throw ValidationError("discrete outcome support must be increasing");
    if (!(probs[k] >= 0.0)) throw ValidationError("outcome probabilities must be nonnegative");
    total += probs[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("outcome probabilities must sum to 1");
}

double OutcomeLaw::cdf(double y) const {
  if (kind == Kind::normal) return 0.5 * std::erfc(-(y - mean) / (sd * std::sqrt(2.0)));
  double f = 0.0;
  for (std::size_t k = 0; k < values.size() && values[k] <= y; ++k) f += probs[k];
  return std::min(1.0, f);
}

double OutcomeLaw::draw(Rng& rng) const {
  if (kind == Kind::normal) return mean + sd * standard_normal(rng);
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    acc += probs[k];
    if (u < acc) return values[k];
  }
  return values.back();
}

void DiscreteDgp::validate() const {
  check_all_blocked(schema);
  if (cells.empty() || cells.size() > max_cells)
    throw ValidationError("discrete DGP needs between 1 and 16 cells");
  if (n == 0) throw ValidationError("discrete DGP sample size must be positive");
  std::set<Vec> seen;
  std::array<double, 2> total{};
  for (const auto& cell : cells) {
    if (cell.covariates.size() != schema.columns().size())
      throw ValidationError("cell covariates do not match the schema");
    for (std::size_t c = 0; c < cell.covariates.size(); ++c)
      if (schema.columns()[c].kind == ColumnKind::dummy && cell.covariates[c] != 0.0 &&
          cell.covariates[c] != 1.0)
        throw ValidationError("dummy column '" + schema.columns()[c].name + "' must be 0 or 1");
    if (!seen.insert(cell.covariates).second) throw ValidationError("duplicate DGP cell");
    for (std::size_t p = 0; p < 2; ++p) {
      if (!(cell.probability[p] >= 0.0)) throw ValidationError("cell probabilities must be nonnegative");
      total[p] += cell.probability[p];
      cell.outcome[p].validate();
    }
  }
  for (double t : total)
    if (std::abs(t - 1.0) > 1e-9) throw ValidationError("cell probabilities must sum to 1 per period");
}

void LinearQrDgp::validate() const {
  const std::size_t k = names.size();
  if (n == 0) throw ValidationError("linear quantile DGP sample size must be positive");
  for (const auto& p : periods) {
    if (p.covariates.size() != k || p.location.size() != k + 1 || p.scale.size() != k + 1)
      throw ValidationError("linear quantile DGP period does not match its covariate names");
    for (const auto& law : p.covariates) {
      if (law.kind == CovariateLaw::Kind::normal && !(law.b > 0.0))
        throw ValidationError("normal covariate needs a positive sd");
      if (law.kind == CovariateLaw::Kind::uniform && !(law.b > law.a))
        throw ValidationError("uniform covariate needs lower < upper");
      if (law.kind == CovariateLaw::Kind::bernoulli && !(law.a >= 0.0 && law.a <= 1.0))
        throw ValidationError("bernoulli covariate needs p in [0, 1]");
    }
  }
}

double LinearQrDgp::g(double u) const {
  return quantile == Quantile::uniform ? u : link_quantile(Link::probit, u);
}

Eigen::MatrixXd LinearQrDgp::coefficients(std::size_t period, std::span<const double> taus) const {
  const LinearQrPeriod& p = periods.at(period);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(taus.size()), static_cast<Eigen::Index>(p.location.size()));
  for (std::size_t j = 0; j < taus.size(); ++j)
    for (std::size_t c = 0; c < p.location.size(); ++c)
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = p.location[c] + p.scale[c] * g(taus[j]);
  return out;
}

Dataset generate(const DiscreteDgp& dgp, const std::array<std::string, 2>& periods) {
  dgp.validate();
  std::vector<Observation> rows;
  rows.reserve(2 * dgp.n);
  for (std::size_t p = 0; p < 2; ++p) {
    Rng rng = make_rng(dgp.seed, p + 1);
    for (std::size_t i = 0; i < dgp.n; ++i) {
      const double u = uniform01(rng);
      double acc = 0.0;
      std::size_t chosen = dgp.cells.size() - 1;
      for (std::size_t c = 0; c < dgp.cells.size(); ++c) {
        acc += dgp.cells[c].probability[p];
        if (u < acc) {
          chosen = c;
          break;
        }
      }
      while (!(dgp.cells[chosen].probability[p] > 0.0)) --chosen;
      const DiscreteCell& cell = dgp.cells[chosen];
      rows.push_back({cell.outcome[p].draw(rng), 1.0, periods[p], cell.covariates});
    }
  }
  return Dataset::from_rows(dgp.schema, periods, rows);
}

Dataset generate(const LinearQrDgp& dgp, const std::array<std::string, 2>& periods) {
  dgp.validate();
  const std::size_t k = dgp.names.size();
  std::vector<Column> columns;
  std::vector<Block> blocks;
  for (std::size_t c = 0; c < k; ++c) {
    const bool dummy = dgp.periods[0].covariates[c].kind == CovariateLaw::Kind::bernoulli &&
                       dgp.periods[1].covariates[c].kind == CovariateLaw::Kind::bernoulli;
    columns.push_back({dgp.names[c], dummy ? ColumnKind::dummy : ColumnKind::continuous});
    blocks.push_back({dgp.names[c], {c}});
  }
  FactorSchema schema(std::move(columns), std::move(blocks));

  std::vector<Observation> rows;
  rows.reserve(2 * dgp.n);
  std::vector<Vec> xs;
  std::vector<double> us;
  for (std::size_t p = 0; p < 2; ++p) {
    const LinearQrPeriod& law = dgp.periods[p];
    Rng rng = make_rng(dgp.seed, p + 1);
    for (std::size_t i = 0; i < dgp.n; ++i) {
      Vec x(k);
      double u;
      if (p == 1 && dgp.common_draws) {
        x = xs[i];
        u = us[i];
      } else {
        for (std::size_t c = 0; c < k; ++c) x[c] = draw_covariate(law.covariates[c], rng);
        u = uniform01(rng);
        if (p == 0 && dgp.common_draws) {
          xs.push_back(x);
          us.push_back(u);
        }
      }
      double loc = law.location[0], slope = law.scale[0];
      for (std::size_t c = 0; c < k; ++c) {
        loc += law.location[c + 1] * x[c];
        slope += law.scale[c + 1] * x[c];
      }
      if (slope < 0.0)
        throw ValidationError("linear quantile DGP is decreasing in U at a drawn covariate vector");
      rows.push_back({loc + slope * dgp.g(u), 1.0, periods[p], std::move(x)});
    }
  }
  return Dataset::from_rows(std::move(schema), periods, rows);
}

double ExactCounterfactual::cdf(double y) const {
  double f = 0.0;
  for (std::size_t i = 0; i < laws.size(); ++i) f += mass[i] * laws[i].cdf(y);
  return f;
}

std::vector<double> ExactCounterfactual::cdf(std::span<const double> ys) const {
  std::vector<double> out;
  out.reserve(ys.size());
  for (double y : ys) out.push_back(cdf(y));
  return out;
}

ExactCounterfactual exact_counterfactual(const DiscreteDgp& dgp,
                                         const std::array<std::string, 2>& periods,
                                         const CounterfactualSpec& spec) {
  dgp.validate();
  std::size_t structure = 0;
  const auto block_period = resolve_spec(dgp.schema, periods, spec, structure);
  std::array<CellTable, 2> tables;
  for (std::size_t p = 0; p < 2; ++p)
    for (const auto& cell : dgp.cells) {
      tables[p].cells.push_back(cell.covariates);
      tables[p].mass.push_back(cell.probability[p]);
    }
  ExactCounterfactual out;
  enumerate_law(dgp.schema, tables, block_period, [&](const Vec& x, double mass) {
    const auto it = std::find_if(dgp.cells.begin(), dgp.cells.end(),
                                 [&](const DiscreteCell& c) { return c.covariates == x; });
    if (it == dgp.cells.end())
      throw ValidationError("counterfactual covariate vector lies outside the DGP lattice");
    out.mass.push_back(mass);
    out.laws.push_back(it->outcome[structure]);
  });
  return out;
}

std::vector<double> plugin_counterfactual(const Dataset& data, const CounterfactualSpec& spec,
                                          std::span<const double> points) {
  const FactorSchema& schema = data.schema();
  check_all_blocked(schema);
  std::size_t structure = 0;
  const auto block_period = resolve_spec(schema, data.periods(), spec, structure);

  std::array<CellTable, 2> tables;
  for (std::size_t p = 0; p < 2; ++p) {
    const PeriodSample& s = data.sample(p);
    std::map<Vec, double> mass;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto row = s.row(i);
      mass[Vec(row.begin(), row.end())] += s.weight[i] / s.total_weight();
    }
    for (const auto& [x, m] : mass) {
      tables[p].cells.push_back(x);
      tables[p].mass.push_back(m);
    }
  }
  if (tables[0].cells.size() > DiscreteDgp::max_cells * 4 ||
      tables[1].cells.size() > DiscreteDgp::max_cells * 4)
    throw ValidationError("plug-in oracle needs discrete covariates");

  // Weighted empirical conditional CDFs of the structure period.
  const PeriodSample& st = data.sample(structure);
  std::map<Vec, std::vector<std::pair<double, double>>> by_cell;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const auto row = st.row(i);
    by_cell[Vec(row.begin(), row.end())].emplace_back(st.outcome[i], st.weight[i]);
  }

  std::vector<double> out(points.size(), 0.0);
  enumerate_law(schema, tables, block_period, [&](const Vec& x, double mass) {
    const auto it = by_cell.find(x);
    if (it == by_cell.end())
      throw ValidationError("counterfactual covariate vector has no rows in the structure period");
    double total = 0.0;
    for (const auto& [y, w] : it->second) total += w;
    for (std::size_t j = 0; j < points.size(); ++j) {
      double below = 0.0;
      for (const auto& [y, w] : it->second)
        if (y <= points[j]) below += w;
      out[j] += mass * below / total;
    }
  });
  return out;
}

DiscreteDgp saturated_dgp(std::size_t n, std::uint64_t seed) {
  DiscreteDgp dgp;
  dgp.schema = FactorSchema({{"a", ColumnKind::dummy}, {"b", ColumnKind::dummy}},
                            {{"a", {0}}, {"b", {1}}}, {{0, 1}});
  dgp.n = n;
  dgp.seed = seed;
  dgp.cells = {
      {{0, 0}, {0.35, 0.20}, {bell(2.0, 1.6), bell(2.4, 1.8)}},
      {{1, 0}, {0.15, 0.25}, {bell(3.5, 1.4), bell(3.8, 1.5)}},
      {{0, 1}, {0.20, 0.15}, {bell(4.0, 1.7), bell(4.1, 2.0)}},
      {{1, 1}, {0.30, 0.40}, {bell(5.0, 1.5), bell(5.6, 1.6)}},
  };
  return dgp;
}

DiscreteDgp default_discrete_dgp(std::size_t n, std::uint64_t seed) {
  DiscreteDgp dgp;
  dgp.schema = FactorSchema({{"asset_mid", ColumnKind::dummy},
                             {"asset_high", ColumnKind::dummy},
                             {"college", ColumnKind::dummy},
                             {"older", ColumnKind::dummy}},
                            {{"assets", {0, 1}}, {"college", {2}}, {"remaining", {3}}});
  dgp.n = n;
  dgp.seed = seed;
  const std::array<Vec, 3> asset_levels{Vec{0, 0}, Vec{1, 0}, Vec{0, 1}};
  for (std::size_t older = 0; older < 2; ++older)
    for (std::size_t college = 0; college < 2; ++college)
      for (std::size_t a = 0; a < 3; ++a) {
        DiscreteCell cell;
        cell.covariates = {asset_levels[a][0], asset_levels[a][1], double(college), double(older)};
        // Assets rise with education and age; both shift toward the top in
        // the comparison period.
        const double p_older[2] = {0.45, 0.55};
        const double p_college[2][2] = {{0.30, 0.40}, {0.35, 0.48}};  // [period][older]
        for (std::size_t p = 0; p < 2; ++p) {
          const double po = older ? p_older[p] : 1.0 - p_older[p];
          const double pc = college ? p_college[p][older] : 1.0 - p_college[p][older];
          double w[3] = {1.0, 0.6 + 0.5 * college + 0.2 * older, 0.25 + 0.6 * college + 0.3 * older};
          if (p == 1) w[2] *= 1.4;
          const double pa = w[a] / (w[0] + w[1] + w[2]);
          cell.probability[p] = po * pc * pa;
          const double mean = 7.6 + 0.3 * asset_levels[a][0] + 0.6 * asset_levels[a][1] +
                              0.25 * college + 0.1 * older + (p == 1 ? 0.05 + 0.05 * college : 0.0);
          const double sd = 0.42 + 0.04 * college + 0.03 * asset_levels[a][1] + 0.02 * p;
          cell.outcome[p] = OutcomeLaw::normal(mean, sd);
        }
        dgp.cells.push_back(std::move(cell));
      }
  return dgp;
}

DiscreteDgp null_dgp(std::size_t n, std::uint64_t seed) {
  DiscreteDgp dgp;
  dgp.schema = FactorSchema(
      {{"x1", ColumnKind::dummy}, {"x2", ColumnKind::dummy}, {"x3", ColumnKind::dummy}},
      {{"a", {0}}, {"b", {1}}, {"c", {2}}});
  dgp.n = n;
  dgp.seed = seed;
  const double p[3] = {0.4, 0.3, 0.55};
  for (int x3 = 0; x3 < 2; ++x3)
    for (int x2 = 0; x2 < 2; ++x2)
      for (int x1 = 0; x1 < 2; ++x1) {
        const double prob = (x1 ? p[0] : 1 - p[0]) * (x2 ? p[1] : 1 - p[1]) * (x3 ? p[2] : 1 - p[2]);
        const OutcomeLaw law = OutcomeLaw::normal(8.0 + 0.3 * x1 + 0.2 * x2 + 0.1 * x3, 0.5);
        dgp.cells.push_back({{double(x1), double(x2), double(x3)}, {prob, prob}, {law, law}});
      }
  return dgp;
}

LinearQrDgp location_shift_dgp(std::size_t n, std::uint64_t seed) {
  LinearQrDgp dgp;
  dgp.names = {"x1", "x2"};
  const std::vector<CovariateLaw> laws{{CovariateLaw::Kind::normal, 0.0, 1.0},
                                       {CovariateLaw::Kind::bernoulli, 0.4, 0.0}};
  dgp.periods[0] = {laws, {8.0, 0.3, 0.2}, {0.4, 0.0, 0.0}};
  dgp.periods[1] = {laws, {8.1, 0.35, 0.25}, {0.4, 0.0, 0.0}};
  dgp.quantile = LinearQrDgp::Quantile::normal;
  dgp.common_draws = true;
  dgp.n = n;
  dgp.seed = seed;
  return dgp;
}

LinearQrDgp heterogeneous_slope_dgp(std::size_t n, std::uint64_t seed) {
  LinearQrDgp dgp;
  dgp.names = {"x1", "x2"};
  const std::vector<CovariateLaw> laws{{CovariateLaw::Kind::uniform, 0.0, 2.0},
                                       {CovariateLaw::Kind::bernoulli, 0.5, 0.0}};
  dgp.periods[0] = {laws, {7.5, 0.2, 0.1}, {0.8, 0.4, 0.3}};
  dgp.periods[1] = {laws, {7.6, 0.25, 0.1}, {0.9, 0.5, 0.2}};
  dgp.quantile = LinearQrDgp::Quantile::uniform;
  dgp.n = n;
  dgp.seed = seed;
  return dgp;
}

nlohmann::json to_json(const DiscreteDgp& dgp) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : dgp.cells)
    cells.push_back({{"covariates", c.covariates},
                     {"probability", {c.probability[0], c.probability[1]}},
                     {"outcome", {law_to_json(c.outcome[0]), law_to_json(c.outcome[1])}}});
  return {{"kind", "discrete"}, {"schema", to_json(dgp.schema)}, {"cells", cells},
          {"n", dgp.n},         {"seed", dgp.seed}};
}

nlohmann::json to_json(const LinearQrDgp& dgp) {
  nlohmann::json periods = nlohmann::json::array();
  for (const auto& p : dgp.periods) {
    nlohmann::json laws = nlohmann::json::array();
    for (const auto& l : p.covariates)
      laws.push_back({{"kind", std::string(to_string(l.kind))}, {"a", l.a}, {"b", l.b}});
    periods.push_back({{"covariates", laws}, {"location", p.location}, {"scale", p.scale}});
  }
  return {{"kind", "linear_qr"},
          {"names", dgp.names},
          {"periods", periods},
          {"quantile", dgp.quantile == LinearQrDgp::Quantile::uniform ? "uniform" : "normal"},
          {"common_draws", dgp.common_draws},
          {"n", dgp.n},
          {"seed", dgp.seed}};
}

DiscreteDgp discrete_dgp_from_json(const nlohmann::json& doc) {
  try {
    DiscreteDgp dgp;
    dgp.schema = schema_from_json(doc.at("schema"));
    dgp.n = doc.value("n", dgp.n);
    dgp.seed = doc.value("seed", dgp.seed);
    for (const auto& c : doc.at("cells")) {
      DiscreteCell cell;
      cell.covariates = c.at("covariates").get<Vec>();
      const auto prob = c.at("probability").get<Vec>();
      if (prob.size() != 2 || c.at("outcome").size() != 2)
        throw ValidationError("each cell needs two probabilities and two outcome laws");
      cell.probability = {prob[0], prob[1]};
      cell.outcome = {law_from_json(c.at("outcome")[0]), law_from_json(c.at("outcome")[1])};
      dgp.cells.push_back(std::move(cell));
    }
    dgp.validate();
    return dgp;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed discrete DGP: ") + e.what());
  }
}

LinearQrDgp linear_qr_dgp_from_json(const nlohmann::json& doc) {
  try {
    LinearQrDgp dgp;
    dgp.names = doc.at("names").get<std::vector<std::string>>();
    if (doc.at("periods").size() != 2) throw ValidationError("linear quantile DGP needs two periods");
    for (std::size_t p = 0; p < 2; ++p) {
      const auto& d = doc.at("periods")[p];
      for (const auto& l : d.at("covariates"))
        dgp.periods[p].covariates.push_back({parse_covariate_kind(l.at("kind").get<std::string>()),
                                             l.value("a", 0.0), l.value("b", 1.0)});
      dgp.periods[p].location = d.at("location").get<Vec>();
      dgp.periods[p].scale = d.at("scale").get<Vec>();
    }
    const std::string q = doc.value("quantile", std::string("normal"));
    if (q == "uniform") dgp.quantile = LinearQrDgp::Quantile::uniform;
    else if (q == "normal") dgp.quantile = LinearQrDgp::Quantile::normal;
    else throw ValidationError("unknown quantile function '" + q + "'");
    dgp.common_draws = doc.value("common_draws", false);
    dgp.n = doc.value("n", dgp.n);
    dgp.seed = doc.value("seed", dgp.seed);
    dgp.validate();
    return dgp;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed linear quantile DGP: ") + e.what());
  }
}

}  // namespace cfdecomp
