#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cfdecomp/counterfactual.hpp"
#include "cfdecomp/csv.hpp"
#include "cfdecomp/dgp.hpp"
#include "cfdecomp/error.hpp"
#include "cfdecomp/melly.hpp"

using namespace cfdecomp;

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("generation is deterministic") {
  const DiscreteDgp dgp = default_discrete_dgp(2000, 7);
  CHECK(generate(dgp, {"a", "b"}) == generate(dgp, {"a", "b"}));
  DiscreteDgp other = dgp;
  other.seed = 8;
  CHECK_FALSE(generate(other, {"a", "b"}) == generate(dgp, {"a", "b"}));
  const LinearQrDgp lin = heterogeneous_slope_dgp(1000, 2);
  CHECK(generate(lin, {"a", "b"}) == generate(lin, {"a", "b"}));
  for (const Dataset& d : {generate(dgp, {"a", "b"}), generate(lin, {"a", "b"})})
    for (std::size_t p = 0; p < 2; ++p)
      for (double w : d.sample(p).weight) CHECK(w == 1.0);
}

TEST_CASE("cell frequencies converge to the cell probabilities") {
  const DiscreteDgp dgp = default_discrete_dgp(100000, 13);
  const Dataset d = generate(dgp, {"a", "b"});
  for (std::size_t p = 0; p < 2; ++p) {
    const PeriodSample& s = d.sample(p);
    for (const auto& cell : dgp.cells) {
      std::size_t count = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const auto row = s.row(i);
        if (std::equal(row.begin(), row.end(), cell.covariates.begin())) ++count;
      }
      CHECK(std::abs(static_cast<double>(count) / static_cast<double>(s.size()) - cell.probability[p]) < 0.005);
    }
  }
}

TEST_CASE("location DGP slopes are flat in tau") {
  LinearQrDgp dgp = location_shift_dgp(20000, 3);
  dgp.common_draws = false;
  const Dataset d = generate(dgp, {"a", "b"});
  const std::vector<double> taus{0.2, 0.35, 0.5, 0.65, 0.8};
  const QrPath path = fit_qr_path(d, "b", taus);
  const Eigen::MatrixXd truth = dgp.coefficients(1, taus);
  // Slope SE at tau: sqrt(tau (1 - tau)) / f(q_tau) / sqrt(n Var x), Var x = 1.
  for (std::size_t j = 0; j < taus.size(); ++j) {
    // Error density at its tau quantile, read off the true intercept path
    // (taus[2] is the median).
    const double z = truth(static_cast<Eigen::Index>(j), 0) - truth(2, 0);
    const double dens = std::exp(-0.5 * (z / 0.4) * (z / 0.4)) / (0.4 * std::sqrt(2 * 3.141592653589793));
    const double se = std::sqrt(taus[j] * (1 - taus[j])) / dens / std::sqrt(20000.0);
    CHECK(std::abs(path.coefficients(static_cast<Eigen::Index>(j), 1) - truth(static_cast<Eigen::Index>(j), 1)) < 3 * se);
  }
}

TEST_CASE("linear DGP validation") {
  LinearQrDgp dgp = heterogeneous_slope_dgp(100, 1);
  dgp.periods[0].scale[1] = -5.0;
  CHECK_THROWS_AS(generate(dgp, {"a", "b"}), ValidationError);
  const LinearQrDgp ok = heterogeneous_slope_dgp(100, 1);
  CHECK(linear_qr_dgp_from_json(to_json(ok)) == ok);
}

TEST_CASE("exact counterfactual reductions") {
  const DiscreteDgp dgp = default_discrete_dgp();
  const std::array<std::string, 2> periods{"a", "b"};
  const std::vector<double> ys{6.5, 7.5, 8.0, 8.5, 9.5};
  for (std::size_t p = 0; p < 2; ++p) {
    CounterfactualSpec spec{periods[p], {}};
    for (const auto& b : dgp.schema.blocks()) spec.block_periods.push_back({b.name, periods[p]});
    const ExactCounterfactual e = exact_counterfactual(dgp, periods, spec);
    for (double y : ys) {
      double total = 0;
      for (const auto& cell : dgp.cells) total += cell.probability[p] * cell.outcome[p].cdf(y);
      CHECK(std::abs(e.cdf(y) - total) < 1e-14);
    }
  }
  CounterfactualSpec bad{"a", {{"nope", "a"}}};
  CHECK_THROWS_AS(exact_counterfactual(dgp, periods, bad), ValidationError);
  CounterfactualSpec unknown{"c", {{"assets", "a"}, {"college", "a"}, {"remaining", "a"}}};
  CHECK_THROWS(exact_counterfactual(dgp, periods, unknown));
}

TEST_CASE("independence null: swapping one block changes nothing") {
  const DiscreteDgp dgp = null_dgp();
  const std::array<std::string, 2> periods{"a", "b"};
  std::vector<std::string> names = dgp.schema.block_names();
  CounterfactualSpec all_b{"b", {}}, swap_first{"b", {}};
  for (std::size_t k = 0; k < names.size(); ++k) {
    all_b.block_periods.push_back({names[k], "b"});
    swap_first.block_periods.push_back({names[k], k == 0 ? "a" : "b"});
  }
  const auto u = exact_counterfactual(dgp, periods, all_b);
  const auto s = exact_counterfactual(dgp, periods, swap_first);
  for (double y = 6.0; y < 10.0; y += 0.1) CHECK(std::abs(u.cdf(y) - s.cdf(y)) < 1e-14);
}

TEST_CASE("committed 2x2 fixture matches enumeration") {
  const std::string dir = FIXTURE_DIR;
  const DiscreteDgp dgp = discrete_dgp_from_json(read_json(dir + "/dgp_2x2.json"));
  CHECK(dgp.cells.size() == 4);
  const std::array<std::string, 2> periods{"base", "comparison"};
  std::map<std::string, CounterfactualSpec> specs;
  for (const auto& s : chain_specs(dgp.schema, periods)) specs.emplace(s.label(), s);
  std::ifstream in(dir + "/dgp_2x2_cdf.csv");
  const auto records = csv::read(in);
  REQUIRE(records.size() > 1);
  std::size_t checked = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    REQUIRE(specs.count(f[0]) == 1);
    const double y = *csv::parse_double(f[1]);
    const double expected = *csv::parse_double(f[2]);
    CHECK(std::abs(exact_counterfactual(dgp, periods, specs.at(f[0])).cdf(y) - expected) < 1e-12);
    ++checked;
  }
  CHECK(checked == 28);
}

TEST_CASE("plug-in enumeration agrees with the fitted saturated chain") {
  const DiscreteDgp dgp = saturated_dgp(20000, 11);
  const Dataset d = generate(dgp, {"a", "b"});
  DecompositionOptions o;
  o.grid = {GridSpec::Kind::all_unique, 0, 0.0};
  const DecompositionChain chain = decomposition_sequence(d, o);
  double plugin = 0, population = 0;
  for (const auto& step : chain.steps) {
    const auto p = plugin_counterfactual(d, step.spec, step.grid);
    const auto e = exact_counterfactual(dgp, d.periods(), step.spec).cdf(step.grid);
    for (std::size_t j = 0; j < p.size(); ++j) {
      plugin = std::max(plugin, std::abs(p[j] - step.cdf[j]));
      population = std::max(population, std::abs(e[j] - step.cdf[j]));
    }
  }
  CHECK(plugin < 1e-10);
  CHECK(population < 0.02);
}

TEST_CASE("DGP documents round-trip and are validated") {
  const DiscreteDgp dgp = saturated_dgp();
  CHECK(discrete_dgp_from_json(to_json(dgp)) == dgp);
  nlohmann::json doc = to_json(dgp);
  doc["cells"][0]["probability"][0] = 0.9;
  CHECK_THROWS_AS(discrete_dgp_from_json(doc), ValidationError);
  CHECK_THROWS_AS(OutcomeLaw::discrete({2.0, 1.0}, {0.5, 0.5}).validate(), ValidationError);
  CHECK(OutcomeLaw::normal(0.0, 1.0).cdf(0.0) == doctest::Approx(0.5));
}
