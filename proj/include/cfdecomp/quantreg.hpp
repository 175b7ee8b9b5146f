#pragma once

// Weighted linear quantile regression by a primal-dual interior-point
// method on the bounded dual LP (Frisch-Newton with Mehrotra correction).

#include <span>

#include <Eigen/Dense>

namespace cfdecomp {

struct QrControl {
  // Stop when the duality gap is at most tol * max(1, |objective|).
  double tol = 1e-7;
  int max_iter = 100;
  double step_fraction = 0.99995;
};

struct QrFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double gap = 0.0;
};

// Minimizes sum_i w_i * rho_tau(y_i - x_i'b).
QrFit fit_quantile_regression(const Eigen::MatrixXd& x, std::span<const double> y,
                              std::span<const double> w, double tau, const QrControl& control = {});

}  // namespace cfdecomp
