#include "cfdecomp/counterfactual.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cfdecomp/error.hpp"
#include "grouping.hpp"

namespace cfdecomp {

namespace {

constexpr double kSnap = 1e-10;
constexpr Eigen::Index kChunkRows = 4096;

double stage_probability(const CovariateBlockModel::Stage& stage, Link link,
                         std::span<const double> covariates, std::vector<double>& buf) {
  if (stage.fit.constant) return *stage.fit.constant;
  buf.resize(stage.design.width());
  stage.design.fill(covariates, buf);
  double eta = 0.0;
  for (std::size_t f = 0; f < buf.size(); ++f)
    eta += buf[f] * stage.fit.coefficients[static_cast<Eigen::Index>(f)];
  double p = link_cdf(link, eta);
  if (stage.fit.status == FitStatus::separated) {
    if (p < kSnap) p = 0.0;
    if (p > 1.0 - kSnap) p = 1.0;
  }
  return p;
}

bool fixed_differs(const std::vector<FixedFeature>& fixed, std::span<const double> covariates) {
  for (const auto& f : fixed) {
    double v = 1.0;
    for (std::size_t c : f.feature) v *= covariates[c];
    if (v != f.value) return true;
  }
  return false;
}


CovariateBlockModel fit_discrete_block(const Dataset& data, std::size_t b, const std::string& period,
                                       const std::vector<std::vector<double>>& values,
                                       const BlockModelOptions& options) {
  const FactorSchema& schema = data.schema();
  const PeriodSample& s = data.sample(period);
  const Block& block = schema.blocks()[b];
  std::vector<std::vector<double>> support = values;
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  std::vector<std::size_t> index(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    index[i] = static_cast<std::size_t>(
        std::lower_bound(support.begin(), support.end(), values[i]) - support.begin());

  const DesignSpec conditioning = DesignSpec::conditioning(schema, b);
  const Eigen::MatrixXd full = conditioning.matrix(s);
  GlmControl control = options.fit.control;

  std::vector<CovariateBlockModel::Stage> stages;
  for (std::size_t k = 0; k + 1 < support.size(); ++k) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (index[i] >= k) rows.push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), full.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = full.row(rows[r]);
    detail::ReducedDesign reduced = detail::reduce_constant_features(conditioning, sub);
    const Eigen::MatrixXd x = detail::keep_columns(sub, reduced.kept);
    const detail::RowGroups groups = detail::group_rows(x);
    Eigen::MatrixXd xg(static_cast<Eigen::Index>(groups.count()), x.cols());
    std::vector<double> hit(groups.count(), 0.0), total(groups.count(), 0.0);
    for (std::size_t g = 0; g < groups.count(); ++g)
      xg.row(static_cast<Eigen::Index>(g)) = x.row(static_cast<Eigen::Index>(groups.first[g]));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = static_cast<std::size_t>(rows[r]);
      const std::size_t g = groups.group_of[r];
      total[g] += s.weight[i];
      if (index[i] == k) hit[g] += s.weight[i];
    }
    std::vector<double> share(groups.count());
    for (std::size_t g = 0; g < groups.count(); ++g)
      share[g] = hit[g] == total[g] ? 1.0 : hit[g] / total[g];
    control.reference_count = static_cast<double>(rows.size());
    GlmFit fit = fit_binomial(xg, share, total, options.fit.link, control);
    stages.push_back({std::move(fit), std::move(reduced.design), std::move(reduced.fixed)});
  }
  return CovariateBlockModel(b, block.name, period, block.columns, std::move(support),
                             options.fit.link, std::move(stages));
}

}  // namespace

bool CounterfactualSpec::observed() const {
  return std::all_of(block_periods.begin(), block_periods.end(),
                     [&](const auto& bp) { return bp.second == structure_period; });
}

std::string CounterfactualSpec::label() const {
  std::string out = "(" + structure_period + ";";
  for (std::size_t b = 0; b < block_periods.size(); ++b)
    out += (b == 0 ? " " : ", ") + block_periods[b].second;
  return out + ")";
}

CovariateBlockModel::CovariateBlockModel(std::size_t block, std::string name, std::string period,
                                         std::vector<std::size_t> columns,
                                         std::vector<std::vector<double>> support, Link link,
                                         std::vector<Stage> stages)
    : block_(block),
      name_(std::move(name)),
      period_(std::move(period)),
      kind_(Kind::discrete_cells),
      columns_(std::move(columns)),
      support_(std::move(support)),
      link_(link),
      stages_(std::move(stages)) {
  if (support_.empty() || stages_.size() + 1 != support_.size())
    throw ValidationError("discrete block model needs one stage per support point but the last");
}

CovariateBlockModel::CovariateBlockModel(std::size_t block, std::string name, std::string period,
                                         std::size_t column, ConditionalOutcomeModel model)
    : block_(block),
      name_(std::move(name)),
      period_(std::move(period)),
      kind_(Kind::distribution_regression),
      columns_{column},
      link_(model.link()),
      dr_(std::move(model)) {
  for (double g : dr_.grid()) support_.push_back({g});
}

void CovariateBlockModel::probabilities(std::span<const double> covariates,
                                        std::span<double> out) const {
  if (out.size() != support_.size()) throw ValidationError("probability buffer has the wrong size");
  if (kind_ == Kind::distribution_regression) {
    const std::vector<double> cdf = dr_.cdf(covariates);
    double prev = 0.0;
    for (std::size_t j = 0; j < cdf.size(); ++j) {
      const double c = std::clamp(cdf[j], prev, 1.0);
      out[j] = c - prev;
      prev = c;
    }
    out.back() += 1.0 - prev;
    return;
  }
  thread_local std::vector<double> buf;
  double remaining = 1.0;
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const double h = stage_probability(stages_[k], link_, covariates, buf);
    out[k] = remaining * h;
    remaining *= 1.0 - h;
  }
  out.back() = remaining;
}

std::vector<double> CovariateBlockModel::probabilities(std::span<const double> covariates) const {
  std::vector<double> out(support_.size());
  probabilities(covariates, out);
  return out;
}

bool CovariateBlockModel::extrapolates(std::span<const double> covariates) const {
  if (kind_ == Kind::distribution_regression) return dr_.extrapolates(covariates);
  return std::any_of(stages_.begin(), stages_.end(),
                     [&](const Stage& s) { return fixed_differs(s.fixed, covariates); });
}

BlockModelSet fit_block_models(const Dataset& data, const std::vector<BlockKey>& needed,
                               const BlockModelOptions& options) {
  const FactorSchema& schema = data.schema();
  BlockModelSet out;
  for (const auto& key : needed) {
    if (out.contains(key)) continue;
    const auto& [b, period] = key;
    if (b >= schema.blocks().size()) throw ValidationError("block index out of range");
    const Block& block = schema.blocks()[b];
    const PeriodSample& s = data.sample(period);
    std::vector<std::vector<double>> values(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto row = s.row(i);
      for (std::size_t c : block.columns) values[i].push_back(row[c]);
    }
    std::vector<std::vector<double>> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const bool all_dummy = std::all_of(block.columns.begin(), block.columns.end(), [&](std::size_t c) {
      return schema.columns()[c].kind == ColumnKind::dummy;
    });
    if (all_dummy || distinct.size() <= options.max_categories) {
      out.emplace(key, fit_discrete_block(data, b, period, values, options));
      continue;
    }
    if (block.columns.size() != 1)
      throw ValidationError("block '" + block.name +
                            "' mixes several columns with continuous values; only single "
                            "continuous columns or discrete blocks can be integrated");
    const std::size_t column = block.columns.front();
    std::vector<double> v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = values[i][0];
    GridSpec grid{GridSpec::Kind::quantile_spaced, options.continuous_points, 0.0};
    ConditionalOutcomeModel dr =
        fit_threshold_family(v, s.covariates, s.width, s.weight, DesignSpec::conditioning(schema, b),
                             make_grid(v, grid), options.fit, period);
    out.emplace(key, CovariateBlockModel(b, block.name, period, column, std::move(dr)));
  }
  return out;
}

namespace {

std::size_t trailing_run_start(const CounterfactualSpec& spec) {
  std::size_t r = spec.block_periods.size();
  if (r == 0) return 0;
  const std::string& last = spec.block_periods.back().second;
  while (r > 0 && spec.block_periods[r - 1].second == last) --r;
  return r;
}

void check_spec(const FactorSchema& schema, const CounterfactualSpec& spec, const Dataset* data) {
  if (spec.block_periods.size() != schema.blocks().size())
    throw ValidationError("counterfactual spec must assign every block exactly once");
  for (std::size_t b = 0; b < schema.blocks().size(); ++b) {
    if (spec.block_periods[b].first != schema.blocks()[b].name)
      throw ValidationError("counterfactual spec block '" + spec.block_periods[b].first +
                            "' is out of schema order");
    if (data) data->period_index(spec.block_periods[b].second);
  }
  if (data) data->period_index(spec.structure_period);
}

}  // namespace

std::vector<BlockKey> required_block_models(const FactorSchema& schema,
                                            const CounterfactualSpec& spec) {
  check_spec(schema, spec, nullptr);
  std::vector<BlockKey> out;
  const std::size_t r = trailing_run_start(spec);
  for (std::size_t b = 0; b < r; ++b) out.emplace_back(b, spec.block_periods[b].second);
  return out;
}

CounterfactualDistribution counterfactual_cdf(const CounterfactualSpec& spec,
                                              const ConditionalOutcomeModel& outcome_model,
                                              const BlockModelSet& block_models,
                                              const Dataset& data,
                                              const CounterfactualOptions& options) {
  const FactorSchema& schema = data.schema();
  check_spec(schema, spec, &data);
  if (outcome_model.period() != spec.structure_period)
    throw ValidationError("outcome model period '" + outcome_model.period() +
                          "' does not match the structure period '" + spec.structure_period + "'");

  const std::size_t k = schema.blocks().size();
  const std::size_t r = trailing_run_start(spec);
  const std::string support_period = k == 0 ? spec.structure_period : spec.block_periods.back().second;
  std::vector<const CovariateBlockModel*> models(r);
  for (std::size_t b = 0; b < r; ++b) {
    auto it = block_models.find({b, spec.block_periods[b].second});
    if (it == block_models.end())
      throw ValidationError("no fitted model for block '" + schema.blocks()[b].name +
                            "' in period '" + spec.block_periods[b].second + "'");
    models[b] = &it->second;
  }

  // Evaluation rows: the support period's sample collapsed over identical
  // values of the blocks it supplies.
  const PeriodSample& s = data.sample(support_period);
  std::vector<std::size_t> key_columns;
  for (std::size_t b = r; b < k; ++b)
    for (std::size_t c : schema.blocks()[b].columns) key_columns.push_back(c);
  Eigen::MatrixXd keys(static_cast<Eigen::Index>(s.size()),
                       static_cast<Eigen::Index>(key_columns.size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < key_columns.size(); ++j)
      keys(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.row(i)[key_columns[j]];
  const detail::RowGroups groups = detail::group_rows(keys);
  std::vector<double> group_weight(groups.count(), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) group_weight[groups.group_of[i]] += s.weight[i];

  const std::size_t t = outcome_model.size();
  const auto d = static_cast<Eigen::Index>(outcome_model.design().width());
  Eigen::MatrixXd chunk(kChunkRows, d);
  Eigen::VectorXd chunk_w(kChunkRows);
  Eigen::Index filled = 0;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t));
  std::vector<double> design_buf(static_cast<std::size_t>(d));
  std::size_t leaves = 0;
  std::size_t pooled = 0;

  auto flush = [&] {
    if (filled == 0) return;
    const RowMatrix c = outcome_model.cdf_rows(chunk.topRows(filled));
    acc.noalias() += c.transpose() * chunk_w.head(filled);
    filled = 0;
  };
  auto emit = [&](std::span<const double> cov, double w) {
    if (++leaves > options.leaf_budget)
      throw ValidationError("counterfactual " + spec.label() + " exceeds the enumeration budget of " +
                            std::to_string(options.leaf_budget) + " covariate vectors");
    if (outcome_model.extrapolates(cov)) ++pooled;
    outcome_model.design().fill(cov, design_buf);
    for (Eigen::Index f = 0; f < d; ++f) chunk(filled, f) = design_buf[static_cast<std::size_t>(f)];
    chunk_w[filled++] = w;
    if (filled == kChunkRows) flush();
  };

  std::vector<std::vector<double>> prob_buf(r);
  for (std::size_t b = 0; b < r; ++b) prob_buf[b].resize(models[b]->support().size());
  std::vector<double> cov;
  // Depth-first over blocks r-1, ..., 0.
  auto expand = [&](auto&& self, std::size_t level, double w) -> void {
    if (level == 0) {
      emit(cov, w);
      return;
    }
    const std::size_t b = level - 1;
    const CovariateBlockModel& m = *models[b];
    if (m.extrapolates(cov)) ++pooled;
    // Each level owns its buffer, so the subtrees below leave it intact.
    std::vector<double>& probs = prob_buf[b];
    m.probabilities(cov, probs);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      if (probs[j] <= 0.0) continue;
      const auto& value = m.support()[j];
      for (std::size_t c = 0; c < value.size(); ++c) cov[m.columns()[c]] = value[c];
      self(self, b, w * probs[j]);
    }
  };

  double total = 0.0;
  for (std::size_t g = 0; g < groups.count(); ++g) {
    const auto row = s.row(groups.first[g]);
    cov.assign(row.begin(), row.end());
    total += group_weight[g];
    expand(expand, r, group_weight[g]);
  }
  flush();

  if (pooled > 0 && options.log_pooling)
    spdlog::warn("counterfactual {}: {} evaluations pooled over covariate values absent from the "
                 "estimation sample",
                 spec.label(), pooled);

  CounterfactualDistribution out;
  out.spec = spec;
  out.grid = outcome_model.grid();
  out.cdf.resize(t);
  for (std::size_t j = 0; j < t; ++j)
    out.cdf[j] = std::clamp(acc[static_cast<Eigen::Index>(j)] / total, 0.0, 1.0);
  rearrange(out.cdf);
  out.support_period = support_period;
  out.support_weight = total;
  out.leaves = leaves;
  out.pooled_evaluations = pooled;
  return out;
}

std::vector<CounterfactualSpec> chain_specs(const FactorSchema& schema,
                                            const std::array<std::string, 2>& periods,
                                            bool structure_first) {
  const std::string& base = periods[0];
  const std::string& comparison = periods[1];
  const std::size_t k = schema.blocks().size();
  auto make = [&](const std::string& structure, std::size_t swapped) {
    CounterfactualSpec spec{structure, {}};
    for (std::size_t b = 0; b < k; ++b)
      spec.block_periods.emplace_back(schema.blocks()[b].name, b < swapped ? base : comparison);
    return spec;
  };
  std::vector<CounterfactualSpec> chain;
  chain.push_back(make(comparison, 0));
  if (structure_first) {
    for (std::size_t m = 0; m <= k; ++m) chain.push_back(make(base, m));
  } else {
    for (std::size_t m = 1; m <= k; ++m) chain.push_back(make(comparison, m));
    chain.push_back(make(base, k));
  }
  return chain;
}

DecompositionChain decomposition_sequence(const Dataset& data, const DecompositionOptions& options) {
  FactorSchema schema =
      options.sequence.empty() ? data.schema() : data.schema().reordered(options.sequence);
  const Dataset d = options.sequence.empty() ? data : data.with_schema(schema);

  DecompositionChain chain;
  chain.schema = schema;
  const auto specs = chain_specs(schema, d.periods(), options.structure_first);

  std::map<std::string, ConditionalOutcomeModel> outcome_models;
  for (const auto& period : d.periods()) {
    auto model = fit_distribution_regression(d, period, options.grid, options.fit);
    chain.outcome_fits.thresholds += model.size();
    for (FitStatus st : model.status()) {
      if (st == FitStatus::degenerate) ++chain.outcome_fits.degenerate;
      if (st == FitStatus::separated) ++chain.outcome_fits.separated;
      if (st == FitStatus::not_converged) ++chain.outcome_fits.not_converged;
    }
    outcome_models.emplace(period, std::move(model));
  }

  std::vector<BlockKey> needed;
  for (const auto& spec : specs) {
    auto keys = required_block_models(schema, spec);
    needed.insert(needed.end(), keys.begin(), keys.end());
  }
  BlockModelOptions block_options = options.blocks;
  block_options.fit = options.fit;
  const BlockModelSet block_models = fit_block_models(d, needed, block_options);

  for (const auto& spec : specs)
    chain.steps.push_back(counterfactual_cdf(spec, outcome_models.at(spec.structure_period),
                                             block_models, d, options.evaluation));

  if (options.structure_first) chain.effects.push_back("structure");
  for (const auto& block : schema.blocks()) chain.effects.push_back(block.name);
  if (!options.structure_first) chain.effects.push_back("structure");
  return chain;
}

nlohmann::json to_json(const CounterfactualSpec& spec) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [block, period] : spec.block_periods)
    blocks.push_back({{"block", block}, {"period", period}});
  return {{"structure_period", spec.structure_period}, {"blocks", blocks}, {"label", spec.label()}};
}

nlohmann::json to_json(const CounterfactualDistribution& dist) {
  return {{"spec", to_json(dist.spec)},
          {"grid", dist.grid},
          {"cdf", dist.cdf},
          {"support_period", dist.support_period},
          {"support_weight", dist.support_weight}};
}

}  // namespace cfdecomp
