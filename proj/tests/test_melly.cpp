#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfdecomp/dgp.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/functionals.hpp"
#include "cfdecomp/melly.hpp"
#include "cfdecomp/quantreg.hpp"
#include "cfdecomp/rng.hpp"

using namespace cfdecomp;

namespace {

constexpr double kPi = 3.141592653589793;

double normal_quantile(double p) {
  // Bisection on erfc; accurate to 1e-12, enough for test oracles.
  double lo = -10, hi = 10;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct Linear {
  Eigen::MatrixXd x;
  std::vector<double> y, w;
};

// y = 1 + 2 x + sigma e with x ~ N(0, 1), e ~ N(0, 1).
Linear location_sample(std::size_t n, double sigma, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Linear s{Eigen::MatrixXd(n, 2), std::vector<double>(n), std::vector<double>(n, 1.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = standard_normal(rng);
    s.x(i, 0) = 1.0;
    s.x(i, 1) = x;
    s.y[i] = 1.0 + 2.0 * x + sigma * standard_normal(rng);
  }
  return s;
}

// Asymptotic SE of the slope at tau for the location sample.
double slope_se(double tau, double sigma, std::size_t n) {
  const double q = normal_quantile(tau);
  const double f = std::exp(-0.5 * q * q) / (sigma * std::sqrt(2 * kPi));
  return std::sqrt(tau * (1 - tau)) / f / std::sqrt(static_cast<double>(n));
}

double weighted_step_quantile(std::vector<std::pair<double, double>> vw, double level) {
  std::sort(vw.begin(), vw.end());
  double total = 0;
  for (const auto& p : vw) total += p.second;
  double c = 0;
  for (const auto& p : vw) {
    c += p.second;
    if (c >= level * total - 1e-12 * total) return p.first;
  }
  return vw.back().first;
}

}  // namespace

TEST_CASE("tau grid and cell widths") {
  const auto taus = default_tau_grid(99);
  REQUIRE(taus.size() == 99);
  CHECK(taus[49] == doctest::Approx(0.5));
  const auto widths = tau_cell_widths(taus);
  CHECK(std::accumulate(widths.begin(), widths.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(widths.front() == doctest::Approx(0.015));
}

TEST_CASE("median regression recovers the coefficients") {
  const std::size_t n = 50000;
  const Linear s = location_sample(n, 1.0, 3);
  const QrFit fit = fit_quantile_regression(s.x, s.y, s.w, 0.5);
  REQUIRE(fit.converged);
  // Var = tau(1-tau) / f(0)^2 (X'X)^-1 with X'X ~ n I.
  const double se = slope_se(0.5, 1.0, n);
  CHECK(std::abs(fit.coefficients(0) - 1.0) < 3 * se);
  CHECK(std::abs(fit.coefficients(1) - 2.0) < 3 * se);
}

TEST_CASE("quantile regression minimizes the weighted check loss") {
  const Linear s = location_sample(300, 0.5, 8);
  Rng rng = make_rng(9);
  std::vector<double> w(300);
  for (double& v : w) v = 0.2 + uniform01(rng);
  for (double tau : {0.1, 0.5, 0.83}) {
    const QrFit fit = fit_quantile_regression(s.x, s.y, w, tau);
    auto loss = [&](const Eigen::VectorXd& b) {
      double l = 0;
      for (std::size_t i = 0; i < 300; ++i) {
        const double r = s.y[i] - s.x.row(static_cast<Eigen::Index>(i)).dot(b);
        l += w[i] * r * (tau - (r < 0 ? 1.0 : 0.0));
      }
      return l;
    };
    const double best = loss(fit.coefficients);
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd b = fit.coefficients;
      b(0) += 0.01 * standard_normal(rng);
      b(1) += 0.01 * standard_normal(rng);
      CHECK(loss(b) >= best - 1e-7 * (1 + best));
    }
  }
}

TEST_CASE("location model slopes are flat in tau") {
  const std::size_t n = 20000;
  const Linear s = location_sample(n, 1.0, 21);
  const std::vector<double> deciles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const QrPath path = fit_qr_path(s.x, s.y, s.w, deciles);
  REQUIRE(path.coefficients.rows() == 9);
  // Three asymptotic SEs per decile keeps the joint false-alarm rate small.
  for (std::size_t j = 0; j < deciles.size(); ++j)
    CHECK(std::abs(path.coefficients(static_cast<Eigen::Index>(j), 1) - 2.0) < 3 * slope_se(deciles[j], 1.0, n));
}

TEST_CASE("intercept-only path pools its intercepts") {
  const Linear s = location_sample(2000, 1.0, 5);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2000, 1);
  const auto taus = default_tau_grid(19);
  const QrPath path = fit_qr_path(ones, s.y, s.w, taus);
  REQUIRE(path.coefficients.rows() == 19);
  const auto widths = tau_cell_widths(taus);
  std::vector<std::pair<double, double>> pooled;
  for (std::size_t j = 0; j < taus.size(); ++j) pooled.push_back({path.coefficients(static_cast<Eigen::Index>(j), 0), widths[j]});
  for (double level : {0.1, 0.25, 0.5, 0.77, 0.9})
    CHECK(unconditional_quantile(path, ones, s.w, level) == doctest::Approx(weighted_step_quantile(pooled, level)).epsilon(1e-12));
}

TEST_CASE("unconditional quantiles track the empirical quantiles") {
  const Dataset d = generate(heterogeneous_slope_dgp(20000, 4), {"a", "b"});
  const auto taus = default_tau_grid(99);
  const QrPath path = fit_qr_path(d, "a", taus);
  const PeriodSample& s = d.sample("a");
  const Eigen::MatrixXd x = path.design.matrix(s);
  const GridDistribution emp = GridDistribution::empirical(s.outcome, s.weight);
  double prev = -INFINITY;
  for (double level = 0.1; level < 0.91; level += 0.1) {
    const double q = unconditional_quantile(path, x, s.weight, level);
    CHECK(std::abs(q - quantile(emp, level, QuantileMode::step)) < 0.01);
    CHECK(q >= prev);
    prev = q;
  }
  const double c = crossing_frequency(path, x);
  CHECK(c >= 0.0);
  CHECK(c <= 1.0);
}

TEST_CASE("saturated design reproduces empirical quantiles") {
  // One dummy: the design is saturated, so each cell's path is its
  // conditional quantile function.
  Rng rng = make_rng(33);
  FactorSchema schema({{"d", ColumnKind::dummy}}, {{"D", {0}}});
  std::vector<Observation> rows;
  for (const char* p : {"a", "b"})
    for (int i = 0; i < 10000; ++i) {
      const double dv = uniform01(rng) < 0.4 ? 1.0 : 0.0;
      rows.push_back({8 + 0.5 * dv + (0.3 + 0.2 * dv) * standard_normal(rng), 1.0, p, {dv}});
    }
  const Dataset d = Dataset::from_rows(schema, {"a", "b"}, rows);
  const QrPath path = fit_qr_path(d, "b", default_tau_grid(199));
  const PeriodSample& s = d.sample("b");
  const GridDistribution emp = GridDistribution::empirical(s.outcome, s.weight);
  for (double level : {0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95})
    CHECK(std::abs(unconditional_quantile(path, path.design.matrix(s), s.weight, level) -
                   quantile(emp, level, QuantileMode::step)) < 0.02);
}

TEST_CASE("identical periods give zero effects") {
  const Dataset d = generate(heterogeneous_slope_dgp(3000, 6), {"a", "b"});
  const Dataset same = d.with_samples({d.sample(std::size_t{0}), d.sample(std::size_t{0})});
  const MellyReport r = melly_decompose(same, default_tau_grid(19));
  CHECK(r.table.effects == std::vector<std::string>{"coefficients", "characteristics", "residuals"});
  for (std::size_t k = 0; k < r.table.statistics.size(); ++k) {
    CHECK(r.table.total[k] == 0.0);
    for (double e : r.table.effect[k]) CHECK(e == 0.0);
  }
}

TEST_CASE("location shift leaves no residuals effect and effects telescope") {
  const Dataset d = generate(location_shift_dgp(5000, 2), {"a", "b"});
  const MellyReport r = melly_decompose(d, default_tau_grid(49));
  for (std::size_t k = 0; k < r.table.statistics.size(); ++k) {
    CHECK(std::abs(r.table.effect[k][2]) < 1e-6);
    const double sum = r.table.effect[k][0] + r.table.effect[k][1] + r.table.effect[k][2];
    CHECK(std::abs(sum - r.table.total[k]) < 1e-10);
  }
}

TEST_CASE("constructed coefficients") {
  QrPath a, b;
  a.taus = b.taus = {0.25, 0.5, 0.75};
  a.coefficients = Eigen::MatrixXd(3, 2);
  b.coefficients = Eigen::MatrixXd(3, 2);
  a.coefficients << 1, 0.1, 2, 0.2, 3, 0.4;
  b.coefficients << 5, 1, 6, 2, 8, 3;
  const Eigen::MatrixXd c = constructed_coefficients(a, b);
  CHECK(c(0, 0) == doctest::Approx(5.0));
  CHECK(c(2, 1) == doctest::Approx(2.2));
  QrPath other = b;
  other.taus = {0.2, 0.5, 0.8};
  CHECK_THROWS_AS(constructed_coefficients(a, other), ValidationError);
}
