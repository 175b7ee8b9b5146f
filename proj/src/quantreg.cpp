#include "cfdecomp/quantreg.hpp"

#include <algorithm>
#include <cmath>

#include "cfdecomp/error.hpp"

namespace cfdecomp {

namespace {

// Largest step in [0, 1] keeping v + a * dv >= 0, scaled by `fraction`.
double step_length(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double fraction) {
  double a = 1.0 / fraction;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  return std::min(1.0, fraction * a);
}

Eigen::VectorXd solve_normal(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::MatrixXd ridged = m;
  ridged.diagonal().array() += 1e-10 * std::max(1.0, m.diagonal().maxCoeff());
  return ridged.ldlt().solve(rhs);
}

}  // namespace

QrFit fit_quantile_regression(const Eigen::MatrixXd& x, std::span<const double> y,
                              std::span<const double> w, double tau, const QrControl& control) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<std::size_t>(n) != y.size() || y.size() != w.size())
    throw ValidationError("design rows, outcomes and weights differ in length");
  if (n <= p) throw ValidationError("quantile regression needs more rows than columns");
  if (!x.allFinite()) throw ValidationError("design matrix has non-finite entries");

  // Dual LP: min c'a  s.t.  A a = b, 0 <= a <= 1, with A = Xw', c = -yw,
  // b = (1 - tau) Xw'1. The coefficients are minus the equality multipliers.
  Eigen::MatrixXd xw(n, p);
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w[static_cast<std::size_t>(i)] >= 0.0)) throw ValidationError("weights must be nonnegative");
    xw.row(i) = x.row(i) * w[static_cast<std::size_t>(i)];
    c[i] = -y[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
  }

  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, tau);
  Eigen::VectorXd dual = solve_normal(xw.transpose() * xw, xw.transpose() * c);
  const Eigen::VectorXd r = c - xw * dual;
  const double shift = 1e-2 * r.cwiseAbs().mean() + 1e-10;
  Eigen::VectorXd z = r.cwiseMax(0.0).array() + shift;
  Eigen::VectorXd v = (-r).cwiseMax(0.0).array() + shift;

  QrFit fit;
  const double beta = control.step_fraction;
  auto newton = [&](const Eigen::VectorXd& sigma1, const Eigen::VectorXd& sigma2,
                    const Eigen::VectorXd& q, const Eigen::MatrixXd& m, Eigen::VectorXd& da,
                    Eigen::VectorXd& ddual, Eigen::VectorXd& dz, Eigen::VectorXd& dv) {
    const Eigen::VectorXd rt = sigma1.cwiseQuotient(a) - sigma2.cwiseQuotient(s);
    ddual = solve_normal(m, -(xw.transpose() * rt.cwiseQuotient(q)));
    da = (xw * ddual + rt).cwiseQuotient(q);
    dz = (sigma1 - z.cwiseProduct(da)).cwiseQuotient(a);
    dv = (sigma2 + v.cwiseProduct(da)).cwiseQuotient(s);
  };

  for (int it = 0; it < control.max_iter; ++it) {
    const double gap = a.dot(z) + s.dot(v);
    fit.gap = gap;
    fit.iterations = it;
    if (gap <= control.tol * std::max(1.0, std::abs(c.dot(a)))) {
      fit.converged = true;
      break;
    }
    const Eigen::VectorXd q = z.cwiseQuotient(a) + v.cwiseQuotient(s);
    const Eigen::MatrixXd m =
        xw.transpose() * (xw.array().colwise() / q.array()).matrix();

    Eigen::VectorXd da, ddual, dz, dv;
    newton(-a.cwiseProduct(z), -s.cwiseProduct(v), q, m, da, ddual, dz, dv);
    double ap = std::min(step_length(a, da, beta), step_length(s, -da, beta));
    double ad = std::min(step_length(z, dz, beta), step_length(v, dv, beta));
    const double mu_aff = (a + ap * da).dot(z + ad * dz) + (s - ap * da).dot(v + ad * dv);
    const double sigma = std::pow(mu_aff / gap, 3.0);
    const double mu = sigma * gap / (2.0 * static_cast<double>(n));

    const Eigen::VectorXd sigma1 =
        (Eigen::VectorXd::Constant(n, mu) - a.cwiseProduct(z) - da.cwiseProduct(dz));
    const Eigen::VectorXd sigma2 =
        (Eigen::VectorXd::Constant(n, mu) - s.cwiseProduct(v) + da.cwiseProduct(dv));
    newton(sigma1, sigma2, q, m, da, ddual, dz, dv);
    ap = std::min(step_length(a, da, beta), step_length(s, -da, beta));
    ad = std::min(step_length(z, dz, beta), step_length(v, dv, beta));
    a += ap * da;
    s -= ap * da;
    dual += ad * ddual;
    z += ad * dz;
    v += ad * dv;
    fit.iterations = it + 1;
  }
  if (!fit.converged) {
    const double gap = a.dot(z) + s.dot(v);
    fit.gap = gap;
    fit.converged = gap <= control.tol * std::max(1.0, std::abs(c.dot(a)));
  }
  fit.coefficients = -dual;
  if (!fit.coefficients.allFinite()) fit.converged = false;
  return fit;
}

}  // namespace cfdecomp
