#pragma once

// Weighted maximum-likelihood binary regression.

#include <optional>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "cfdecomp/links.hpp"

namespace cfdecomp {

struct GlmControl {
  // Convergence: sup-norm of the score with weights rescaled to sum to
  // reference_count (the number of rows when reference_count is 0).
  double tol = 1e-8;
  int max_iter = 100;
  // Added to the information matrix, scaled by its largest diagonal entry,
  // when a Cholesky factorization fails.
  double ridge = 1e-8;
  double reference_count = 0.0;
};

enum class FitStatus {
  converged,
  separated,      // fitted probabilities reached 0 or 1; predictions are the limit
  degenerate,     // all responses equal; predictions are the constant response
  not_converged,
};

std::string_view to_string(FitStatus status);

struct GlmFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double loglik = 0.0;
  FitStatus status = FitStatus::not_converged;
  std::optional<double> constant;  // set for degenerate fits
};

// z in {0, 1}, w > 0.
GlmFit fit_binary(const Eigen::MatrixXd& x, std::span<const double> z, std::span<const double> w,
                  Link link, const GlmControl& control = {});

// Grouped form: `share` in [0, 1] is the weighted fraction of ones among the
// observations behind each row and `w` their total weight. Gives the same
// estimates as fitting the underlying binary rows. `start` warm-starts the
// iterations.
GlmFit fit_binomial(const Eigen::MatrixXd& x, std::span<const double> share,
                    std::span<const double> w, Link link, const GlmControl& control = {},
                    const Eigen::VectorXd* start = nullptr);

double predict_prob(const GlmFit& fit, std::span<const double> x, Link link);

}  // namespace cfdecomp
