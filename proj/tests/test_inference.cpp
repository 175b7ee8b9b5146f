#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cfdecomp/analysis.hpp"
#include "cfdecomp/dgp.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/inference.hpp"
#include "cfdecomp/rng.hpp"

using namespace cfdecomp;

namespace {

// The discrete DGP with only the college block kept: totals depend on the
// observed distributions alone, and one block keeps each rerun cheap.
Dataset college_only(std::size_t n, std::uint64_t seed) {
  const Dataset d = generate(default_discrete_dgp(n, seed), {"18", "22"});
  const FactorSchema& s = d.schema();
  return d.with_schema(FactorSchema(s.columns(), {{"college", {s.column_index("college")}}}));
}

AnalysisSpec small_spec(std::size_t points) {
  AnalysisSpec spec;
  spec.decomposition.grid = {GridSpec::Kind::quantile_spaced, points, 0.0};
  return spec;
}

double sd_of(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("configuration checks") {
  BootstrapConfig c;
  c.replications = 1;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c.replications = 2;
  c.coverage = 1.0;
  CHECK_THROWS_AS(validate(c), ValidationError);
  CHECK(parse_bootstrap_scheme(to_string(BootstrapScheme::exchangeable_weights)) == BootstrapScheme::exchangeable_weights);
  CHECK(parse_se_method("sd") == SeMethod::sd);
}

TEST_CASE("standard error summaries") {
  CHECK(robust_se(std::vector<double>(20, 3.0)) == 0.0);
  // One set of 500 normal draws gives the rescaled IQR a relative spread
  // of about 5%, so the ratio is averaged over independent sets.
  Rng rng = make_rng(12);
  double ratio = 0;
  for (int r = 0; r < 200; ++r) {
    std::vector<double> v(500);
    for (double& x : v) x = 2.0 * standard_normal(rng);
    ratio += robust_se(v) / sd_of(v) / 200;
  }
  CHECK(std::abs(ratio - 1.0) < 0.05);
  const std::vector<std::vector<double>> draws{{1, 5}, {2, 5}, {3, 5}};
  const auto sd = draw_se(draws, SeMethod::sd);
  CHECK(sd[0] == doctest::Approx(1.0));
  CHECK(sd[1] == 0.0);
  CHECK_THROWS(draw_se({{1.0}}, SeMethod::iqr));
}

TEST_CASE("band properties") {
  Rng rng = make_rng(4);
  std::vector<double> arg(30), est(30, 0.0);
  std::iota(arg.begin(), arg.end(), 0.0);
  std::vector<std::vector<double>> draws(400, std::vector<double>(30));
  for (auto& d : draws)
    for (std::size_t j = 0; j < 30; ++j) d[j] = (1.0 + 0.1 * static_cast<double>(j)) * standard_normal(rng);
  const BandedCurve u95 = uniform_band(arg, est, draws, 0.95);
  const BandedCurve p95 = pointwise_band(arg, est, draws, 0.95);
  const BandedCurve u50 = uniform_band(arg, est, draws, 0.5);
  for (std::size_t j = 0; j < 30; ++j) {
    CHECK(u95.lower[j] <= est[j]);
    CHECK(u95.upper[j] >= est[j]);
    CHECK(u95.upper[j] - u95.lower[j] >= p95.upper[j] - p95.lower[j] - 1e-12);
    CHECK(u50.upper[j] - u50.lower[j] < u95.upper[j] - u95.lower[j]);
    CHECK(std::abs(u95.upper[j] - est[j] - u95.critical[j] * u95.scale[j]) < 1e-12);
  }

  // Permuting the draws changes nothing.
  auto shuffled = draws;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[3], shuffled[200]);
  const BandedCurve again = uniform_band(arg, est, shuffled, 0.95);
  CHECK(again.upper == u95.upper);

  // Constant draws at one argument: the scale is floored, not zero.
  for (auto& d : draws) d[5] = 0.0;
  const BandedCurve floored = uniform_band(arg, est, draws, 0.95);
  CHECK(floored.scale[5] > 0.0);
  CHECK(std::isfinite(floored.critical[0]));
}

TEST_CASE("bootstrap pipeline is deterministic and counts replications") {
  const Dataset d = college_only(1000, 3);
  const AnalysisSpec spec = small_spec(30);
  BootstrapConfig c;
  c.replications = 2;
  c.seed = 99;
  const BootstrapDraws a = bootstrap_pipeline(d, spec, c);
  CHECK(a.report.size() == 2);
  CHECK(a.curves.size() == 2);
  const BootstrapDraws b = bootstrap_pipeline(d, spec, c);
  CHECK(a.report == b.report);
  CHECK(a.curves == b.curves);
  c.threads = 3;
  CHECK(bootstrap_pipeline(d, spec, c).report == a.report);
  c.seed = 100;
  CHECK(bootstrap_pipeline(d, spec, c).report != a.report);

  const AnalysisResult point = run_analysis(d, spec);
  const DecompositionReport se = summarize_se(point.report, a);
  CHECK(se.total_se.size() == point.report.total.size());
  CHECK(se.effect_se.size() == point.report.effect.size());
}

TEST_CASE("exchangeable weights with unit multipliers reproduce the point estimate") {
  const Dataset d = college_only(800, 5);
  Rng rng = make_rng(1);
  const Dataset same = bootstrap_sample(d, BootstrapScheme::exchangeable_weights, rng, true);
  CHECK(same == d);
  AnalysisSpec spec = small_spec(20);
  const AnalysisResult point = run_analysis(d, spec);
  spec.de_points = point.curves.points;
  BootstrapConfig c;
  c.replications = 2;
  c.scheme = BootstrapScheme::exchangeable_weights;
  c.unit_multipliers = true;
  const BootstrapDraws draws = bootstrap_pipeline(d, spec, c);
  CHECK(draws.report[0] == point.report.flatten());
  CHECK(draws.curves[1] == point.curves.flatten());

  // Ordinary multipliers are positive with mean one.
  Rng r2 = make_rng(2);
  const Dataset w = bootstrap_sample(d, BootstrapScheme::exchangeable_weights, r2);
  double ratio = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t i = 0; i < d.sample(p).size(); ++i) {
      CHECK(w.sample(p).weight[i] > 0.0);
      ratio += w.sample(p).weight[i] / d.sample(p).weight[i];
      ++n;
    }
  CHECK(std::abs(ratio / static_cast<double>(n) - 1.0) < 0.1);
}

TEST_CASE("bootstrap SE of the 90-10 total tracks its Monte Carlo SE") {
  // Meta-replications: fresh samples from the DGP give the Monte Carlo SE;
  // a bootstrap of each sample gives an SE estimate. The average bootstrap
  // SE must be within 15% of the Monte Carlo SE.
  const std::size_t meta = 200, reps = 50, n = 5000;
  const AnalysisSpec spec = small_spec(100);
  std::vector<double> totals, boot_se;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t m = 0; m < meta; ++m) {
    const Dataset d = college_only(n, 1000 + m);
    AnalysisSpec s = spec;
    const AnalysisResult point = run_analysis(d, s);
    s.de_points = point.curves.points;
    totals.push_back(point.report.total[1]);
    BootstrapConfig c;
    c.replications = reps;
    c.seed = 5000 + m;
    const BootstrapDraws draws = bootstrap_pipeline(d, s, c);
    std::vector<double> col;
    for (const auto& r : draws.report) col.push_back(r[1]);
    boot_se.push_back(sd_of(col));
  }
  const double mc = sd_of(totals);
  const double mean_boot = std::accumulate(boot_se.begin(), boot_se.end(), 0.0) / static_cast<double>(meta);
  MESSAGE("Monte Carlo SE " << mc << ", mean bootstrap SE " << mean_boot << ", "
          << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s");
  CHECK(std::abs(mean_boot / mc - 1.0) < 0.15);
}
