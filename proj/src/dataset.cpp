#include "cfdecomp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "cfdecomp/csv.hpp"
#include "cfdecomp/error.hpp"

namespace cfdecomp {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::dummy ? "dummy" : "continuous";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "dummy") return ColumnKind::dummy;
  if (text == "continuous") return ColumnKind::continuous;
  throw ValidationError("unknown column kind '" + std::string(text) + "'");
}

FactorSchema::FactorSchema(std::vector<Column> columns, std::vector<Block> blocks,
                           std::vector<std::vector<std::size_t>> interactions, bool intercept)
    : columns_(std::move(columns)),
      blocks_(std::move(blocks)),
      interactions_(std::move(interactions)),
      intercept_(intercept) {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw ValidationError("schema column with empty name");
    if (c.name == "outcome" || c.name == "weight" || c.name == "period")
      throw ValidationError("schema column name '" + c.name + "' is reserved");
    if (!names.insert(c.name).second)
      throw ValidationError("duplicate schema column '" + c.name + "'");
  }
  std::set<std::string> block_names;
  std::vector<int> owner(columns_.size(), -1);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& block = blocks_[b];
    if (block.name.empty()) throw ValidationError("schema block with empty name");
    if (!block_names.insert(block.name).second)
      throw ValidationError("duplicate schema block '" + block.name + "'");
    if (block.columns.empty())
      throw ValidationError("block '" + block.name + "' has no columns");
    for (std::size_t c : block.columns) {
      if (c >= columns_.size())
        throw ValidationError("block '" + block.name + "' references an unknown column");
      if (owner[c] != -1)
        throw ValidationError("column '" + columns_[c].name + "' appears in more than one block");
      owner[c] = static_cast<int>(b);
    }
  }
  for (auto& term : interactions_) {
    std::sort(term.begin(), term.end());
    if (term.size() < 2 || std::adjacent_find(term.begin(), term.end()) != term.end())
      throw ValidationError("an interaction needs at least two distinct columns");
    for (std::size_t c : term) {
      if (c >= columns_.size() || owner[c] == -1)
        throw ValidationError("interactions may only use blocked columns");
    }
  }
}

std::size_t FactorSchema::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  throw ValidationError("unknown column '" + std::string(name) + "'");
}

std::size_t FactorSchema::block_index(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  throw ValidationError("unknown block '" + std::string(name) + "'");
}

std::optional<std::size_t> FactorSchema::block_of_column(std::size_t column) const {
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    if (std::find(blocks_[b].columns.begin(), blocks_[b].columns.end(), column) !=
        blocks_[b].columns.end())
      return b;
  return std::nullopt;
}

std::vector<std::string> FactorSchema::block_names() const {
  std::vector<std::string> out;
  for (const auto& b : blocks_) out.push_back(b.name);
  return out;
}

FactorSchema FactorSchema::reordered(const std::vector<std::string>& sequence) const {
  if (sequence.size() != blocks_.size())
    throw ValidationError("sequence must list every block exactly once");
  std::vector<Block> blocks;
  std::set<std::string> seen;
  for (const auto& name : sequence) {
    if (!seen.insert(name).second)
      throw ValidationError("block '" + name + "' repeated in sequence");
    blocks.push_back(blocks_[block_index(name)]);
  }
  return FactorSchema(columns_, std::move(blocks), interactions_, intercept_);
}

double PeriodSample::total_weight() const {
  double total = 0.0;
  for (double w : weight) total += w;
  return total;
}

void PeriodSample::push_back(double y, double w, std::span<const double> x) {
  outcome.push_back(y);
  weight.push_back(w);
  covariates.insert(covariates.end(), x.begin(), x.end());
}

Dataset::Dataset(FactorSchema schema, std::array<std::string, 2> periods,
                 std::array<PeriodSample, 2> samples)
    : schema_(std::move(schema)), periods_(std::move(periods)), samples_(std::move(samples)) {
  if (periods_[0] == periods_[1]) throw ValidationError("the two period labels must differ");
  const std::size_t width = schema_.columns().size();
  for (std::size_t p = 0; p < 2; ++p) {
    auto& s = samples_[p];
    const std::string& label = periods_[p];
    if (s.width != width)
      throw ValidationError("period " + label + ": covariate width does not match schema");
    if (s.weight.size() != s.size() || s.covariates.size() != s.size() * width)
      throw ValidationError("period " + label + ": inconsistent column lengths");
    if (s.size() == 0) throw ValidationError("period " + label + " has no observations");
    std::set<double> distinct;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s.outcome[i]))
        throw ValidationError("period " + label + ": non-finite outcome");
      if (!(s.weight[i] > 0.0) || !std::isfinite(s.weight[i]))
        throw ValidationError("period " + label + ": weights must be positive and finite");
      if (distinct.size() < 2) distinct.insert(s.outcome[i]);
      const auto x = s.row(i);
      for (std::size_t c = 0; c < width; ++c) {
        if (!std::isfinite(x[c]))
          throw ValidationError("period " + label + ": non-finite covariate");
        if (schema_.columns()[c].kind == ColumnKind::dummy && x[c] != 0.0 && x[c] != 1.0)
          throw ValidationError("period " + label + ": dummy column '" +
                                schema_.columns()[c].name + "' outside {0,1}");
      }
    }
    if (distinct.size() < 2)
      throw ValidationError("period " + label + " needs at least two distinct outcome values");
    if (!(s.total_weight() > 0.0))
      throw ValidationError("period " + label + " has zero total weight");
  }
}

Dataset Dataset::from_rows(FactorSchema schema, std::array<std::string, 2> periods,
                           const std::vector<Observation>& rows) {
  std::array<PeriodSample, 2> samples;
  for (auto& s : samples) s.width = schema.columns().size();
  for (const auto& r : rows) {
    std::size_t p;
    if (r.period == periods[0]) {
      p = 0;
    } else if (r.period == periods[1]) {
      p = 1;
    } else {
      throw ValidationError("observation with period '" + r.period +
                            "' outside the two analysis periods");
    }
    if (r.covariates.size() != schema.columns().size())
      throw ValidationError("observation covariate length does not match schema");
    samples[p].push_back(r.outcome, r.weight, r.covariates);
  }
  return Dataset(std::move(schema), std::move(periods), std::move(samples));
}

std::size_t Dataset::period_index(std::string_view label) const {
  if (label == periods_[0]) return 0;
  if (label == periods_[1]) return 1;
  throw ValidationError("unknown period '" + std::string(label) + "'");
}

std::vector<Observation> Dataset::rows() const {
  std::vector<Observation> out;
  out.reserve(size());
  for (std::size_t p = 0; p < 2; ++p) {
    const auto& s = samples_[p];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto x = s.row(i);
      out.push_back({s.outcome[i], s.weight[i], periods_[p], {x.begin(), x.end()}});
    }
  }
  return out;
}

Dataset Dataset::with_samples(std::array<PeriodSample, 2> samples) const {
  return Dataset(schema_, periods_, std::move(samples));
}

Dataset Dataset::with_schema(FactorSchema schema) const {
  if (schema.columns() != schema_.columns())
    throw ValidationError("replacement schema must keep the same columns");
  Dataset copy = *this;
  copy.schema_ = std::move(schema);
  return copy;
}

IngestResult ingest_csv(std::istream& in, const FactorSchema& schema,
                        const IngestOptions& options) {
  const auto records = csv::read(in);
  if (records.empty()) throw ParseError("missing header", 1);
  const auto& header = records.front();
  const std::size_t width = schema.columns().size();
  std::vector<std::string> expected = {"outcome", "weight", "period"};
  for (const auto& c : schema.columns()) expected.push_back(c.name);
  if (header.fields != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw ParseError("header does not match schema; expected '" + want + "'", header.row);
  }

  DropReport drops;
  std::vector<Observation> kept;
  std::vector<double> x(width);
  auto number = [](const csv::Record& rec, std::size_t field) -> std::optional<double> {
    const std::string& text = rec.fields[field];
    if (csv::is_missing(text)) return std::nullopt;
    auto v = csv::parse_double(text);
    if (!v) throw ParseError("field " + std::to_string(field + 1) + " is not a number: '" +
                                 text + "'",
                             rec.row);
    return v;
  };
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != expected.size())
      throw ParseError("expected " + std::to_string(expected.size()) + " fields, found " +
                           std::to_string(rec.fields.size()),
                       rec.row);
    const auto y = number(rec, 0);
    const auto w = number(rec, 1);
    bool schema_ok = !rec.fields[2].empty();
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = number(rec, 3 + c);
      if (!v || !std::isfinite(*v)) {
        schema_ok = false;
        continue;
      }
      if (schema.columns()[c].kind == ColumnKind::dummy && *v != 0.0 && *v != 1.0)
        schema_ok = false;
      x[c] = *v;
    }
    if (!y || !std::isfinite(*y)) {
      ++drops.missing_outcome;
    } else if (!w || !std::isfinite(*w) || !(*w > 0.0)) {
      ++drops.nonpositive_weight;
    } else if (!schema_ok) {
      ++drops.schema_violation;
    } else {
      kept.push_back({*y, *w, rec.fields[2], x});
    }
  }

  std::set<std::string> labels;
  for (const auto& o : kept) labels.insert(o.period);
  std::array<std::string, 2> periods;
  if (options.period_order) {
    periods = *options.period_order;
    for (const auto& label : labels)
      if (label != periods[0] && label != periods[1])
        throw ValidationError("unexpected period label '" + label + "'");
    for (const auto& label : periods)
      if (!labels.contains(label))
        throw ValidationError("period '" + label + "' has no valid observations");
  } else {
    if (labels.size() != 2)
      throw ValidationError("expected exactly 2 period labels after drops, found " +
                            std::to_string(labels.size()));
    periods = {*labels.begin(), *std::next(labels.begin())};
  }
  return {Dataset::from_rows(schema, periods, kept), drops};
}

IngestResult ingest_csv(const std::string& path, const FactorSchema& schema,
                        const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return ingest_csv(in, schema, options);
}

void write_csv(std::ostream& out, const Dataset& data) {
  std::vector<std::string> header = {"outcome", "weight", "period"};
  for (const auto& c : data.schema().columns()) header.push_back(c.name);
  csv::write_row(out, header);
  std::vector<std::string> fields;
  for (std::size_t p = 0; p < 2; ++p) {
    const auto& s = data.sample(p);
    for (std::size_t i = 0; i < s.size(); ++i) {
      fields.clear();
      fields.push_back(csv::format_double(s.outcome[i]));
      fields.push_back(csv::format_double(s.weight[i]));
      fields.push_back(data.periods()[p]);
      for (double v : s.row(i)) fields.push_back(csv::format_double(v));
      csv::write_row(out, fields);
    }
  }
}

void write_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_csv(out, data);
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

MeanSd weighted_mean_sd(std::span<const double> values, std::span<const double> weights,
                        SdConvention convention) {
  if (values.size() != weights.size())
    throw ValidationError("values and weights differ in length");
  if (values.size() < 2) throw ValidationError("standard deviation needs at least two values");
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ValidationError("total weight is zero");
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
  mean /= total;
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - mean;
    ss += weights[i] * d * d;
  }
  double var = ss / total;
  if (convention == SdConvention::sample) {
    const double n_eff = effective_sample_size(weights);
    if (!(n_eff > 1.0)) throw ValidationError("effective sample size too small");
    var *= n_eff / (n_eff - 1.0);
  }
  return {mean, std::sqrt(var)};
}

namespace {

std::vector<double> column_values(const Dataset& data, std::string_view column, std::size_t p) {
  const auto& s = data.sample(p);
  if (column == "outcome") return s.outcome;
  if (column == "weight") return s.weight;
  const std::size_t c = data.schema().column_index(column);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s.row(i)[c];
  return out;
}

}  // namespace

MeanSd weighted_mean_sd(const Dataset& data, std::string_view column, std::string_view period,
                        SdConvention convention) {
  const std::size_t p = data.period_index(period);
  const auto values = column_values(data, column, p);
  return weighted_mean_sd(values, data.sample(p).weight, convention);
}

DiffSe weighted_diff_se(const Dataset& data, std::string_view column) {
  std::array<MeanSd, 2> m;
  std::array<double, 2> n_eff{};
  for (std::size_t p = 0; p < 2; ++p) {
    const auto values = column_values(data, column, p);
    m[p] = weighted_mean_sd(values, data.sample(p).weight, SdConvention::population);
    n_eff[p] = effective_sample_size(data.sample(p).weight);
  }
  const double se = std::sqrt(m[0].sd * m[0].sd / n_eff[0] + m[1].sd * m[1].sd / n_eff[1]);
  return {m[1].mean - m[0].mean, se};
}

}  // namespace cfdecomp
