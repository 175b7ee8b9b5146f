#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/functionals.hpp"
#include "cfdecomp/rng.hpp"

using namespace cfdecomp;

namespace {

GridDistribution uniform_grid_cdf(std::size_t n) {
  std::vector<double> g(n + 1), f(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = f[i] = static_cast<double>(i) / static_cast<double>(n);
  return {g, f};
}

GridDistribution random_cdf(Rng& rng) {
  const std::size_t n = 2 + uniform_index(rng, 30);
  std::vector<double> g(n), f(n);
  double y = standard_normal(rng), c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y += 0.01 + uniform01(rng);
    g[i] = y;
    c += uniform01(rng) < 0.2 && i + 1 < n ? 0.0 : 0.01 + uniform01(rng);
    f[i] = c;
  }
  for (double& v : f) v /= c;
  return {g, f};
}

Dataset one_block_data(std::size_t n, std::uint64_t seed) {
  FactorSchema schema({{"d", ColumnKind::dummy}}, {{"D", {0}}});
  Rng rng = make_rng(seed);
  std::vector<Observation> rows;
  const char* labels[2] = {"18", "22"};
  for (int p = 0; p < 2; ++p)
    for (std::size_t i = 0; i < n; ++i) {
      const double d = uniform01(rng) < 0.3 + 0.3 * p ? 1.0 : 0.0;
      const double y = 7.0 + 0.25 * static_cast<double>(uniform_index(rng, 8 + 2 * p)) + 0.5 * d;
      rows.push_back({y, 0.5 + uniform01(rng), labels[p], {d}});
    }
  return Dataset::from_rows(schema, {"18", "22"}, rows);
}

}  // namespace

TEST_CASE("quantile conventions") {
  const GridDistribution two({0.0, 1.0}, {0.5, 1.0});
  CHECK(quantile(two, 0.3, QuantileMode::step) == 0.0);
  CHECK(quantile(two, 0.7, QuantileMode::step) == 1.0);
  const GridDistribution u = uniform_grid_cdf(100);
  CHECK(quantile(u, 0.75) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(cdf_at(u, 0.333) == doctest::Approx(0.333).epsilon(1e-12));
}

TEST_CASE("Galois inequalities on random grid CDFs") {
  Rng rng = make_rng(77);
  for (int r = 0; r < 1000; ++r) {
    const GridDistribution d = random_cdf(rng);
    for (int k = 0; k < 5; ++k) {
      const double tau = 0.001 + 0.998 * uniform01(rng);
      for (QuantileMode m : {QuantileMode::step, QuantileMode::linear})
        CHECK(cdf_at(d, quantile(d, tau, m), m) >= tau - 1e-12);
      const double y = d.grid.front() + (d.grid.back() - d.grid.front()) * uniform01(rng);
      for (QuantileMode m : {QuantileMode::step, QuantileMode::linear}) {
        const double f = cdf_at(d, y, m);
        if (f > 0.0 && f < 1.0) CHECK(quantile(d, f, m) <= y + 1e-12);
      }
    }
  }
}

TEST_CASE("moments") {
  const GridDistribution point({5.0}, {1.0});
  CHECK(moments(point).mean == 5.0);
  CHECK(moments(point).sd == 0.0);
  const GridDistribution sym({-1.0, 1.0}, {0.5, 1.0});
  CHECK(moments(sym).mean == doctest::Approx(0.0));
  CHECK(moments(sym).sd == doctest::Approx(1.0));

  Rng rng = make_rng(3);
  std::vector<double> v(5000), w(5000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = 8 + 0.6 * standard_normal(rng);
    w[i] = 0.5 + uniform01(rng);
  }
  const MeanSd direct = weighted_mean_sd(v, w);
  const Moments m = moments(GridDistribution::empirical(v, w));
  CHECK(std::abs(m.sd - direct.sd) < 1e-3);
  CHECK(std::abs(m.mean - direct.mean) < 1e-9);
}

TEST_CASE("Gini") {
  CHECK(gini(GridDistribution({5.0}, {1.0})) == doctest::Approx(0.0).epsilon(1e-15));
  Rng rng = make_rng(100);
  std::vector<double> v(100000), w(100000, 1.0);
  for (double& x : v) x = uniform01(rng);
  const GridDistribution d = GridDistribution::empirical(v, w);
  CHECK(std::abs(gini(d) - 1.0 / 3.0) < 0.01);
  GridDistribution scaled = d;
  for (double& g : scaled.grid) g *= 7.3;
  CHECK(std::abs(gini(scaled) - gini(d)) < 1e-10);
  CHECK(gini(d) >= 0.0);
  CHECK(gini(d) < 1.0);
}

TEST_CASE("inequality statistics") {
  std::vector<double> g, f;
  // Standard normal shifted to 10 so the Gini is defined.
  for (double z = -6; z <= 6.0000001; z += 0.001) {
    g.push_back(10 + z);
    f.push_back(0.5 * std::erfc(-z / std::sqrt(2.0)));
  }
  f.back() = 1.0;
  const GridDistribution normal(g, f);
  const InequalityStats s = inequality_stats(normal);
  CHECK(std::abs(s.iqr_90_10 - 2 * 1.2815515655446004) < 1e-4);
  CHECK(s.iqr_90_10 - s.iqr_90_50 - s.iqr_50_10 == 0.0);

  GridDistribution shifted = normal;
  for (double& y : shifted.grid) y += 3.25;
  const InequalityStats t = inequality_stats(shifted);
  CHECK(std::abs(t.iqr_90_10 - s.iqr_90_10) < 1e-12);
  CHECK(std::abs(t.iqr_75_25 - s.iqr_75_25) < 1e-12);
  CHECK(std::abs(t.iqr_95_5 - s.iqr_95_5) < 1e-12);
  CHECK(std::abs(t.sd - s.sd) < 1e-9);
  CHECK(std::abs(t.mean - s.mean - 3.25) < 1e-9);

  // Rearranging a monotone CDF changes nothing.
  GridDistribution again = normal;
  rearrange(again.cdf);
  CHECK(inequality_stats(again).values() == s.values());
  CHECK(statistic_names() == std::vector<std::string>{"SD", "90-10", "50-10", "90-50", "75-25", "95-5", "Gini"});
  CHECK(band_quantile_levels().size() == 85);
}

TEST_CASE("report effects match enumerated counterfactual statistics") {
  const Dataset d = one_block_data(3000, 14);
  DecompositionOptions o;
  o.grid = {GridSpec::Kind::all_unique, 0, 0.0};
  const DecompositionChain chain = decomposition_sequence(d, o);
  const DecompositionReport r = assemble_report(chain.steps, chain.effects);
  CHECK(r.statistics == statistic_names());
  REQUIRE(chain.steps.size() == 3);

  // (22; 18): sum_d p18(d) F22(y | d) from the rows.
  const auto& grid = chain.steps[1].grid;
  auto share = [&](std::size_t p, double dv) {
    const PeriodSample& s = d.sample(p);
    double m = 0, t = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      t += s.weight[i];
      if (s.row(i)[0] == dv) m += s.weight[i];
    }
    return m / t;
  };
  auto cell = [&](std::size_t p, double dv, double y) {
    const PeriodSample& s = d.sample(p);
    double m = 0, t = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.row(i)[0] != dv) continue;
      t += s.weight[i];
      if (s.outcome[i] <= y) m += s.weight[i];
    }
    return m / t;
  };
  std::vector<double> mid(grid.size()), top(grid.size()), bottom(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    mid[j] = share(0, 0) * cell(1, 0, grid[j]) + share(0, 1) * cell(1, 1, grid[j]);
    top[j] = share(1, 0) * cell(1, 0, grid[j]) + share(1, 1) * cell(1, 1, grid[j]);
    bottom[j] = share(0, 0) * cell(0, 0, grid[j]) + share(0, 1) * cell(0, 1, grid[j]);
  }
  const auto s_top = inequality_stats({grid, top}).values();
  const auto s_mid = inequality_stats({grid, mid}).values();
  const auto s_bot = inequality_stats({grid, bottom}).values();
  for (std::size_t k = 0; k < s_top.size(); ++k) {
    CHECK(std::abs(r.effect[k][0] - 100 * (s_top[k] - s_mid[k])) < 1e-8);
    CHECK(std::abs(r.effect[k][1] - 100 * (s_mid[k] - s_bot[k])) < 1e-8);
    CHECK(std::abs(r.total[k] - 100 * (s_top[k] - s_bot[k])) < 1e-8);
  }
}

TEST_CASE("identical periods give zero effects; short chains are rejected") {
  const GridDistribution a({1.0, 2.0, 3.0}, {0.2, 0.7, 1.0});
  const auto r = assemble_report(std::vector<GridDistribution>{a, a, a}, {"x", "y", "z"}, {"D", "structure"});
  for (const auto& row : r.effect)
    for (double e : row) CHECK(e == 0.0);
  CHECK_THROWS_AS(assemble_report(std::vector<GridDistribution>{a, a}, {"x", "y"}, {"structure"}), ValidationError);
}

TEST_CASE("QE and DE curves telescope") {
  const Dataset d = one_block_data(2000, 15);
  DecompositionOptions o;
  o.grid = {GridSpec::Kind::quantile_spaced, 25, 0.0};
  const DecompositionChain chain = decomposition_sequence(d, o);
  const auto levels = default_quantile_levels();
  const auto points = default_de_points(d);
  CHECK(points.size() == 101);
  const CurveBundle c = qe_de_curves(chain.steps, chain.effects, levels, points);
  REQUIRE(c.curves.back() == "observed");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    double sum = 0;
    for (std::size_t k = 0; k + 1 < c.curves.size(); ++k) sum += c.qe[k][j];
    CHECK(std::abs(sum - c.qe.back()[j]) < 1e-10);
  }
  for (std::size_t j = 0; j < points.size(); ++j) {
    double sum = 0;
    for (std::size_t k = 0; k + 1 < c.curves.size(); ++k) sum += c.de[k][j];
    CHECK(std::abs(sum - c.de.back()[j]) < 1e-10);
  }
}

TEST_CASE("price-index constants shift quantiles and leave interquantile changes") {
  const Dataset d = one_block_data(2500, 16);
  const double c18 = -std::log(1.165), c22 = -std::log(1.117);
  std::array<PeriodSample, 2> shifted{d.sample(0), d.sample(1)};
  for (double& y : shifted[0].outcome) y += c18;
  for (double& y : shifted[1].outcome) y += c22;
  const Dataset e = d.with_samples(shifted);
  DecompositionOptions o;
  o.grid = {GridSpec::Kind::all_unique, 0, 0.0};
  const auto a = decomposition_sequence(d, o);
  const auto b = decomposition_sequence(e, o);
  for (std::size_t p : {0u, 1u}) {
    const auto& sa = p == 0 ? a.steps.back() : a.steps.front();
    const auto& sb = p == 0 ? b.steps.back() : b.steps.front();
    const double c = p == 0 ? c18 : c22;
    for (double tau : {0.1, 0.5, 0.9})
      CHECK(std::abs(quantile(GridDistribution(sb), tau) - quantile(GridDistribution(sa), tau) - c) < 1e-12);
  }
  const auto ra = assemble_report(a.steps, a.effects), rb = assemble_report(b.steps, b.effects);
  // Interquantile rows: 90-10 through 95-5.
  for (std::size_t k = 1; k <= 5; ++k) CHECK(std::abs(ra.total[k] - rb.total[k]) < 1e-12);
}

TEST_CASE("variance channels") {
  Rng rng = make_rng(8);
  Eigen::MatrixXd x(500, 2);
  std::vector<double> w(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = standard_normal(rng);
    w[i] = 1.0 + uniform01(rng);
  }
  Eigen::MatrixXd flat(9, 2);
  for (Eigen::Index j = 0; j < 9; ++j) flat.row(j) << 0.5, 2.0;
  const VarianceChannels c = variance_channels(flat, x, w);
  CHECK(c.within == doctest::Approx(0.0));
  const MeanSd m = weighted_mean_sd(std::span<const double>(x.col(1).data(), 500), w);
  CHECK(c.between == doctest::Approx(4.0 * m.sd * m.sd).epsilon(1e-10));

  Eigen::MatrixXd constant = Eigen::MatrixXd::Ones(500, 2);
  Eigen::MatrixXd path(3, 2);
  path << 0, 1, 1, 2, 2, 3;
  CHECK(std::abs(variance_channels(path, constant, w).between) < 1e-12);
  CHECK_THROWS(variance_channels(path, Eigen::MatrixXd::Ones(5, 3), std::vector<double>(5, 1.0)));
}
