#pragma once

#include <string_view>

namespace cfdecomp {

// Binary-response link: P(z = 1 | x) = F(x'b).
enum class Link { logit, probit, cloglog, cauchit, linear_probability };

std::string_view to_string(Link link);
Link parse_link(std::string_view text);

// F(eta) in [0, 1]; linear_probability clamps eta to [0, 1].
double link_cdf(Link link, double eta);

// F^{-1}(p) for p in (0, 1); identity for linear_probability.
double link_quantile(Link link, double p);

// Log-space quantities for the likelihood, stable in both tails.
struct LinkLogTerms {
  double log_cdf;   // log F(eta)
  double log_ccdf;  // log (1 - F(eta))
  double log_pdf;   // log F'(eta)
};

// Not defined for linear_probability.
LinkLogTerms link_log_terms(Link link, double eta);

// log Phi(x) for the standard normal, accurate far into the lower tail.
double log_normal_cdf(double x);

}  // namespace cfdecomp
