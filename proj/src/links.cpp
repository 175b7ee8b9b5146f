#include "cfdecomp/links.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

constexpr double kEtaLimit = 700.0;

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

std::string_view to_string(Link link) {
  switch (link) {
    case Link::logit: return "logit";
    case Link::probit: return "probit";
    case Link::cloglog: return "cloglog";
    case Link::cauchit: return "cauchit";
    case Link::linear_probability: return "linear_probability";
  }
  return "unknown";
}

Link parse_link(std::string_view text) {
  if (text == "logit") return Link::logit;
  if (text == "probit") return Link::probit;
  if (text == "cloglog") return Link::cloglog;
  if (text == "cauchit") return Link::cauchit;
  if (text == "linear_probability" || text == "lpm") return Link::linear_probability;
  throw ValidationError("unknown link '" + std::string(text) + "'");
}

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic expansion of the Mills ratio.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double link_cdf(Link link, double eta) {
  switch (link) {
    case Link::logit:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case Link::probit:
      return 0.5 * std::erfc(-eta / std::numbers::sqrt2);
    case Link::cloglog:
      return -std::expm1(-std::exp(std::min(eta, kEtaLimit)));
    case Link::cauchit:
      return std::atan2(1.0, -eta) / std::numbers::pi;
    case Link::linear_probability:
      return std::clamp(eta, 0.0, 1.0);
  }
  return 0.0;
}

double link_quantile(Link link, double p) {
  switch (link) {
    case Link::logit: return std::log(p / (1.0 - p));
    case Link::probit: return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    case Link::cloglog: return std::log(-std::log1p(-p));
    case Link::cauchit: return std::tan(std::numbers::pi * (p - 0.5));
    case Link::linear_probability: return p;
  }
  return 0.0;
}

LinkLogTerms link_log_terms(Link link, double eta) {
  eta = std::clamp(eta, -kEtaLimit, kEtaLimit);
  switch (link) {
    case Link::logit: {
      const double sp_pos = softplus(eta);
      const double sp_neg = softplus(-eta);
      return {-sp_neg, -sp_pos, -sp_pos - sp_neg};
    }
    case Link::probit:
      return {log_normal_cdf(eta), log_normal_cdf(-eta),
              -0.5 * eta * eta - 0.5 * std::log(2.0 * std::numbers::pi)};
    case Link::cloglog: {
      const double e = std::exp(eta);
      // For eta << 0, 1 - exp(-e) ~ e.
      const double log_cdf = eta < -20.0 ? eta - 0.5 * e : std::log(-std::expm1(-e));
      return {log_cdf, -e, eta - e};
    }
    case Link::cauchit:
      return {std::log(std::atan2(1.0, -eta) / std::numbers::pi),
              std::log(std::atan2(1.0, eta) / std::numbers::pi),
              -std::log(std::numbers::pi * (1.0 + eta * eta))};
    case Link::linear_probability:
      break;
  }
  throw ValidationError("log terms are undefined for the linear probability link");
}

}  // namespace cfdecomp
