#include "cfdecomp/binary_glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

constexpr double kSeparationEps = 1e-10;

void check_inputs(const Eigen::MatrixXd& x, std::span<const double> share,
                  std::span<const double> w) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (share.size() != n || w.size() != n)
    throw ValidationError("design rows, responses and weights differ in length");
  if (n == 0) throw ValidationError("cannot fit a binary regression on zero rows");
  if (!x.allFinite()) throw ValidationError("design matrix has non-finite entries");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i]))
      throw ValidationError("binary regression weights must be positive and finite");
    if (!(share[i] >= 0.0 && share[i] <= 1.0))
      throw ValidationError("binary responses must lie in [0, 1]");
  }
}

Eigen::VectorXd solve_spd(Eigen::MatrixXd h, const Eigen::VectorXd& g, double ridge) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd delta = llt.solve(g);
    if (delta.allFinite()) return delta;
  }
  const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
  h.diagonal().array() += ridge * scale;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
  Eigen::VectorXd delta = ldlt.solve(g);
  if (!delta.allFinite()) throw NumericalError("information matrix is singular");
  return delta;
}

std::optional<Eigen::Index> intercept_column(const Eigen::MatrixXd& x) {
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if ((x.col(c).array() == 1.0).all()) return c;
  return std::nullopt;
}

GlmFit fit_linear_probability(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                              const Eigen::VectorXd& wn, double ridge) {
  const Eigen::MatrixXd xtw = x.transpose() * wn.asDiagonal();
  GlmFit fit;
  fit.coefficients = solve_spd(xtw * x, xtw * z, ridge);
  const Eigen::VectorXd r = z - x * fit.coefficients;
  fit.loglik = -0.5 * (wn.array() * r.array().square()).sum();
  fit.converged = true;
  fit.iterations = 1;
  fit.status = FitStatus::converged;
  return fit;
}

}  // namespace

std::string_view to_string(FitStatus status) {
  switch (status) {
    case FitStatus::converged: return "converged";
    case FitStatus::separated: return "separated";
    case FitStatus::degenerate: return "degenerate";
    case FitStatus::not_converged: return "not_converged";
  }
  return "unknown";
}

GlmFit fit_binary(const Eigen::MatrixXd& x, std::span<const double> z, std::span<const double> w,
                  Link link, const GlmControl& control) {
  for (double v : z)
    if (v != 0.0 && v != 1.0) throw ValidationError("binary responses must be 0 or 1");
  return fit_binomial(x, z, w, link, control);
}

GlmFit fit_binomial(const Eigen::MatrixXd& x, std::span<const double> share,
                    std::span<const double> w, Link link, const GlmControl& control,
                    const Eigen::VectorXd* start) {
  check_inputs(x, share, w);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();

  double total = 0.0;
  for (double v : w) total += v;
  const double reference = control.reference_count > 0.0 ? control.reference_count
                                                          : static_cast<double>(n);
  Eigen::VectorXd wn(n), z(n);
  double ones = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    wn[i] = w[i] * reference / total;
    z[i] = share[i];
    ones += wn[i] * z[i];
  }

  const bool all_zero = std::all_of(share.begin(), share.end(), [](double v) { return v == 0.0; });
  const bool all_one = std::all_of(share.begin(), share.end(), [](double v) { return v == 1.0; });
  if (all_zero || all_one) {
    GlmFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(d);
    fit.status = FitStatus::degenerate;
    fit.constant = all_one ? 1.0 : 0.0;
    fit.loglik = 0.0;
    return fit;
  }

  if (link == Link::linear_probability) return fit_linear_probability(x, z, wn, control.ridge);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (start != nullptr && start->size() == d && start->allFinite()) {
    beta = *start;
  } else if (auto ic = intercept_column(x)) {
    const double mean = std::clamp(ones / wn.sum(), 1e-6, 1.0 - 1e-6);
    beta[*ic] = link_quantile(link, mean);
  }

  Eigen::VectorXd score_w(n), info_w(n);
  auto evaluate = [&](const Eigen::VectorXd& b, bool derivatives) {
    const Eigen::VectorXd eta = x * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const LinkLogTerms t = link_log_terms(link, eta[i]);
      if (z[i] > 0.0) ll += wn[i] * z[i] * t.log_cdf;
      if (z[i] < 1.0) ll += wn[i] * (1.0 - z[i]) * t.log_ccdf;
      if (derivatives) {
        const double a = std::exp(t.log_pdf - t.log_cdf);
        const double c = std::exp(t.log_pdf - t.log_ccdf);
        score_w[i] = wn[i] * (z[i] * a - (1.0 - z[i]) * c);
        info_w[i] = wn[i] * std::exp(2.0 * t.log_pdf - t.log_cdf - t.log_ccdf);
      }
    }
    return ll;
  };

  GlmFit fit;
  double ll = evaluate(beta, true);
  int iter = 0;
  while (true) {
    const Eigen::VectorXd grad = x.transpose() * score_w;
    if (grad.cwiseAbs().maxCoeff() < control.tol) {
      fit.converged = true;
      break;
    }
    if (iter >= control.max_iter) break;
    const Eigen::MatrixXd info = x.transpose() * (x.array().colwise() * info_w.array()).matrix();
    const Eigen::VectorXd delta = solve_spd(info, grad, control.ridge);
    double step = 1.0;
    Eigen::VectorXd candidate;
    double ll_new = -std::numeric_limits<double>::infinity();
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      candidate = beta + step * delta;
      ll_new = evaluate(candidate, false);
      if (std::isfinite(ll_new) && ll_new >= ll - 1e-12 * (1.0 + std::abs(ll))) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    ++iter;
    if (!improved) break;
    beta = candidate;
    ll = evaluate(beta, true);
  }

  fit.coefficients = beta;
  fit.iterations = iter;
  fit.loglik = ll;
  fit.status = fit.converged ? FitStatus::converged : FitStatus::not_converged;
  const Eigen::VectorXd eta = x * beta;
  // On small samples the score falls below tol before the probabilities
  // reach kSeparationEps, so the tolerance also marks a fit as separated.
  const double log_eps = std::log(std::max(kSeparationEps, control.tol));
  for (Eigen::Index i = 0; i < n; ++i) {
    const LinkLogTerms t = link_log_terms(link, eta[i]);
    if (t.log_cdf < log_eps || t.log_ccdf < log_eps) {
      fit.status = FitStatus::separated;
      break;
    }
  }
  if (fit.converged && !beta.allFinite()) fit.converged = false;
  return fit;
}

double predict_prob(const GlmFit& fit, std::span<const double> x, Link link) {
  if (fit.constant) return *fit.constant;
  if (static_cast<Eigen::Index>(x.size()) != fit.coefficients.size())
    throw ValidationError("covariate vector length does not match the fit");
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += x[j] * fit.coefficients[static_cast<Eigen::Index>(j)];
  return link_cdf(link, eta);
}

}  // namespace cfdecomp
