#include "cfdecomp/distreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "cfdecomp/error.hpp"
#include "grouping.hpp"

namespace cfdecomp {

namespace {

constexpr double kSnap = 1e-10;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

FitStatus parse_fit_status(const std::string& text) {
  for (FitStatus s : {FitStatus::converged, FitStatus::separated, FitStatus::degenerate,
                      FitStatus::not_converged})
    if (to_string(s) == text) return s;
  throw ValidationError("unknown fit status '" + text + "'");
}

bool matrices_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

std::vector<double> make_grid(std::span<const double> values, const GridSpec& spec) {
  if (values.empty()) throw ValidationError("cannot build a threshold grid from no values");
  if (!(spec.trim >= 0.0 && spec.trim < 0.5)) throw ValidationError("grid trim must be in [0, 0.5)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> grid;
  if (spec.kind == GridSpec::Kind::all_unique) {
    grid = sorted;
  } else {
    if (spec.points < 2) throw ValidationError("a quantile-spaced grid needs at least 2 points");
    const double n = static_cast<double>(sorted.size());
    grid.reserve(spec.points);
    for (std::size_t j = 0; j < spec.points; ++j) {
      const double p = spec.trim + (1.0 - 2.0 * spec.trim) * static_cast<double>(j) /
                                       static_cast<double>(spec.points - 1);
      const double k = std::max(1.0, std::ceil(n * p - 1e-9));
      grid.push_back(sorted[static_cast<std::size_t>(std::min(k, n)) - 1]);
    }
    grid.front() = sorted.front();
    grid.back() = sorted.back();
    std::sort(grid.begin(), grid.end());
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.size() < 2) throw ValidationError("threshold grid needs at least 2 distinct values");
  return grid;
}

void rearrange(std::span<double> cdf) {
  if (!std::is_sorted(cdf.begin(), cdf.end())) std::sort(cdf.begin(), cdf.end());
}

ConditionalOutcomeModel::ConditionalOutcomeModel(std::vector<double> grid, Link link,
                                                 DesignSpec design, Eigen::MatrixXd coefficients,
                                                 std::vector<FitStatus> status,
                                                 std::vector<double> constants, std::string period,
                                                 std::vector<FixedFeature> fixed)
    : grid_(std::move(grid)),
      link_(link),
      design_(std::move(design)),
      coefficients_(std::move(coefficients)),
      status_(std::move(status)),
      constants_(std::move(constants)),
      period_(std::move(period)),
      fixed_(std::move(fixed)) {
  const auto t = static_cast<Eigen::Index>(grid_.size());
  if (coefficients_.rows() != t || status_.size() != grid_.size() ||
      constants_.size() != grid_.size())
    throw ValidationError("outcome model needs one coefficient row per threshold");
  if (coefficients_.cols() != static_cast<Eigen::Index>(design_.width()))
    throw ValidationError("outcome model coefficients do not match its design");
  if (!std::is_sorted(grid_.begin(), grid_.end()) ||
      std::adjacent_find(grid_.begin(), grid_.end()) != grid_.end())
    throw ValidationError("threshold grid must be strictly increasing");
}

std::size_t ConditionalOutcomeModel::degenerate_count() const {
  return static_cast<std::size_t>(
      std::count(status_.begin(), status_.end(), FitStatus::degenerate));
}

bool ConditionalOutcomeModel::extrapolates(std::span<const double> covariates) const {
  for (const auto& f : fixed_) {
    double v = 1.0;
    for (std::size_t c : f.feature) v *= covariates[c];
    if (v != f.value) return true;
  }
  return false;
}

void ConditionalOutcomeModel::finalize_row(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!std::isnan(constants_[j])) {
      row[j] = constants_[j];
      continue;
    }
    double p = link_cdf(link_, row[j]);
    if (status_[j] == FitStatus::separated) {
      if (p < kSnap) p = 0.0;
      if (p > 1.0 - kSnap) p = 1.0;
    }
    row[j] = p;
  }
  rearrange(row);
}

std::vector<double> ConditionalOutcomeModel::cdf(std::span<const double> covariates) const {
  if (!design_.features().empty()) {
    std::size_t needed = 0;
    for (const auto& f : design_.features())
      for (std::size_t c : f) needed = std::max(needed, c + 1);
    for (const auto& f : fixed_)
      for (std::size_t c : f.feature) needed = std::max(needed, c + 1);
    if (covariates.size() < needed) throw ValidationError("covariate vector is shorter than the model design");
  }
  const std::vector<double> x = design_.row(covariates);
  std::vector<double> out(grid_.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    double eta = 0.0;
    for (std::size_t f = 0; f < x.size(); ++f)
      eta += x[f] * coefficients_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f));
    out[j] = eta;
  }
  finalize_row(out);
  return out;
}

RowMatrix ConditionalOutcomeModel::cdf_rows(const Eigen::MatrixXd& design_rows) const {
  if (design_rows.cols() != coefficients_.cols())
    throw ValidationError("design rows do not match the outcome model");
  RowMatrix out = design_rows * coefficients_.transpose();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    finalize_row(std::span<double>(out.row(i).data(), static_cast<std::size_t>(out.cols())));
  return out;
}

bool ConditionalOutcomeModel::operator==(const ConditionalOutcomeModel& other) const {
  auto same_constants = [&] {
    if (constants_.size() != other.constants_.size()) return false;
    for (std::size_t j = 0; j < constants_.size(); ++j) {
      const double a = constants_[j], b = other.constants_[j];
      if (!(a == b || (std::isnan(a) && std::isnan(b)))) return false;
    }
    return true;
  };
  return grid_ == other.grid_ && link_ == other.link_ && design_ == other.design_ &&
         matrices_equal(coefficients_, other.coefficients_) && status_ == other.status_ &&
         same_constants() && period_ == other.period_ && fixed_ == other.fixed_;
}

ConditionalOutcomeModel fit_threshold_family(std::span<const double> y,
                                             std::span<const double> covariates,
                                             std::size_t width, std::span<const double> weights,
                                             const DesignSpec& design, std::vector<double> grid,
                                             const ThresholdFitOptions& options,
                                             std::string period) {
  const std::size_t n = y.size();
  if (weights.size() != n || covariates.size() != n * width)
    throw ValidationError("outcome, covariate and weight lengths differ");
  if (n == 0) throw ValidationError("cannot fit distribution regression on an empty sample");

  Eigen::MatrixXd full(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(design.width()));
  std::vector<double> buf(design.width());
  for (std::size_t i = 0; i < n; ++i) {
    design.fill(covariates.subspan(i * width, width), buf);
    for (std::size_t f = 0; f < buf.size(); ++f)
      full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = buf[f];
  }
  detail::ReducedDesign reduced = detail::reduce_constant_features(design, full);
  const Eigen::MatrixXd x = detail::keep_columns(full, reduced.kept);
  const detail::RowGroups groups = detail::group_rows(x);
  const std::size_t g_count = groups.count();

  Eigen::MatrixXd xg(static_cast<Eigen::Index>(g_count), x.cols());
  for (std::size_t g = 0; g < g_count; ++g)
    xg.row(static_cast<Eigen::Index>(g)) = x.row(static_cast<Eigen::Index>(groups.first[g]));

  // Outcomes of each group sorted, so shares at increasing thresholds are a
  // running sum.
  std::vector<std::vector<std::pair<double, double>>> members(g_count);
  std::vector<double> group_weight(g_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    members[groups.group_of[i]].emplace_back(y[i], weights[i]);
    group_weight[groups.group_of[i]] += weights[i];
  }
  for (auto& m : members) std::sort(m.begin(), m.end());

  const auto t_count = grid.size();
  Eigen::MatrixXd coefs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t_count), x.cols());
  std::vector<FitStatus> status(t_count);
  std::vector<double> constants(t_count, kNaN);
  std::vector<std::size_t> cursor(g_count, 0);
  std::vector<double> below(g_count, 0.0);
  std::vector<double> share(g_count);

  GlmControl control = options.control;
  control.reference_count = static_cast<double>(n);
  std::optional<Eigen::VectorXd> warm;
  std::size_t informative = 0;

  for (std::size_t j = 0; j < t_count; ++j) {
    for (std::size_t g = 0; g < g_count; ++g) {
      const auto& m = members[g];
      while (cursor[g] < m.size() && m[cursor[g]].first <= grid[j]) below[g] += m[cursor[g]++].second;
      share[g] = cursor[g] == m.size() ? 1.0 : std::min(1.0, below[g] / group_weight[g]);
    }
    const GlmFit fit = fit_binomial(xg, share, group_weight, options.link, control,
                                    warm ? &*warm : nullptr);
    status[j] = fit.status;
    if (fit.constant) {
      constants[j] = *fit.constant;
      continue;
    }
    ++informative;
    coefs.row(static_cast<Eigen::Index>(j)) = fit.coefficients.transpose();
    if (fit.status == FitStatus::converged)
      warm = fit.coefficients;
    else
      warm.reset();
  }
  if (informative < 2)
    throw NumericalError("distribution regression has fewer than two non-degenerate thresholds");
  return ConditionalOutcomeModel(std::move(grid), options.link, std::move(reduced.design),
                                 std::move(coefs), std::move(status), std::move(constants),
                                 std::move(period), std::move(reduced.fixed));
}

ConditionalOutcomeModel fit_distribution_regression(const Dataset& data, std::string_view period,
                                                    const GridSpec& grid,
                                                    const ThresholdFitOptions& options) {
  const PeriodSample& s = data.sample(period);
  return fit_threshold_family(s.outcome, s.covariates, s.width, s.weight,
                              DesignSpec::outcome(data.schema()), make_grid(s.outcome, grid),
                              options, std::string(period));
}

std::vector<double> conditional_cdf(const ConditionalOutcomeModel& model,
                                    std::span<const double> covariates) {
  return model.cdf(covariates);
}

nlohmann::json to_json(const ConditionalOutcomeModel& model) {
  nlohmann::json doc;
  doc["period"] = model.period();
  doc["link"] = std::string(to_string(model.link()));
  doc["grid"] = model.grid();
  doc["features"] = model.design().features();
  nlohmann::json coefs = nlohmann::json::array();
  for (Eigen::Index j = 0; j < model.coefficients().rows(); ++j) {
    std::vector<double> row(model.coefficients().row(j).begin(), model.coefficients().row(j).end());
    coefs.push_back(row);
  }
  doc["coefficients"] = coefs;
  nlohmann::json status = nlohmann::json::array();
  nlohmann::json constants = nlohmann::json::array();
  for (std::size_t j = 0; j < model.size(); ++j) {
    status.push_back(std::string(to_string(model.status()[j])));
    const double c = model.constants()[j];
    constants.push_back(std::isnan(c) ? nlohmann::json(nullptr) : nlohmann::json(c));
  }
  doc["status"] = status;
  doc["constants"] = constants;
  nlohmann::json fixed = nlohmann::json::array();
  for (const auto& f : model.fixed_features())
    fixed.push_back({{"feature", f.feature}, {"value", f.value}});
  doc["fixed_features"] = fixed;
  return doc;
}

ConditionalOutcomeModel model_from_json(const nlohmann::json& doc) {
  try {
    auto grid = doc.at("grid").get<std::vector<double>>();
    DesignSpec design(doc.at("features").get<std::vector<DesignSpec::Feature>>());
    const auto& rows = doc.at("coefficients");
    Eigen::MatrixXd coefs(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(design.width()));
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const auto row = rows[j].get<std::vector<double>>();
      if (row.size() != design.width())
        throw ValidationError("coefficient row width does not match the design");
      for (std::size_t f = 0; f < row.size(); ++f)
        coefs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)) = row[f];
    }
    std::vector<FitStatus> status;
    for (const auto& s : doc.at("status")) status.push_back(parse_fit_status(s.get<std::string>()));
    std::vector<double> constants;
    for (const auto& c : doc.at("constants")) constants.push_back(c.is_null() ? kNaN : c.get<double>());
    std::vector<FixedFeature> fixed;
    for (const auto& f : doc.value("fixed_features", nlohmann::json::array()))
      fixed.push_back({f.at("feature").get<DesignSpec::Feature>(), f.at("value").get<double>()});
    return ConditionalOutcomeModel(std::move(grid), parse_link(doc.at("link").get<std::string>()),
                                   std::move(design), std::move(coefs), std::move(status),
                                   std::move(constants), doc.at("period").get<std::string>(),
                                   std::move(fixed));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed outcome model document: ") + e.what());
  }
}

}  // namespace cfdecomp
