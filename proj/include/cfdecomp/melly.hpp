#pragma once

// Quantile-regression decomposition into coefficients, characteristics and
// residuals effects.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfdecomp/dataset.hpp"
#include "cfdecomp/design.hpp"
#include "cfdecomp/functionals.hpp"
#include "cfdecomp/quantreg.hpp"

namespace cfdecomp {

// tau_j = j / (points + 1), j = 1..points.
std::vector<double> default_tau_grid(std::size_t points = 99);

struct QrPath {
  std::vector<double> taus;
  Eigen::MatrixXd coefficients;  // one row per tau
  DesignSpec design;
  std::string period;
  // Grid points whose fit did not converge; their rows are interpolated
  // from the nearest converged neighbours.
  std::vector<std::size_t> interpolated;
};

QrPath fit_qr_path(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> w,
                   std::span<const double> taus, const QrControl& control = {});
QrPath fit_qr_path(const Dataset& data, std::string_view period, std::span<const double> taus,
                   const QrControl& control = {});

// Integration weights over the tau grid: cells bounded by midpoints between
// neighbouring levels, with 0 and 1 as the outer bounds.
std::vector<double> tau_cell_widths(std::span<const double> taus);

// Fitted values x_i'b(tau_j) pooled over rows and grid points with weights
// w_i * dtau_j.
GridDistribution pooled_distribution(const Eigen::MatrixXd& coefficients,
                                     std::span<const double> taus, const Eigen::MatrixXd& x,
                                     std::span<const double> w);

// Weighted quantile (left inverse) of the pooled fitted values.
double unconditional_quantile(const QrPath& path, const Eigen::MatrixXd& x,
                              std::span<const double> w, double level);

// Share of (row, adjacent tau pair) cases where the fitted conditional
// quantile decreases in tau.
double crossing_frequency(const QrPath& path, const Eigen::MatrixXd& x);

// b(0.5) of the comparison path plus the base path's deviation from its own
// median: bc(med) + bb(tau_j) - bb(med), med the grid point nearest 0.5.
Eigen::MatrixXd constructed_coefficients(const QrPath& base, const QrPath& comparison);

struct MellyReport {
  // Effects in table order: coefficients, characteristics, residuals.
  DecompositionReport table;
  double crossing_base = 0.0;
  double crossing_comparison = 0.0;
  std::size_t interpolated_base = 0;
  std::size_t interpolated_comparison = 0;
};

MellyReport melly_decompose(const QrPath& base, const QrPath& comparison,
                            const Eigen::MatrixXd& x_base, std::span<const double> w_base,
                            const Eigen::MatrixXd& x_comparison,
                            std::span<const double> w_comparison);

// Fits both paths on the outcome design of the dataset schema.
MellyReport melly_decompose(const Dataset& data, std::span<const double> taus,
                            const QrControl& control = {});

}  // namespace cfdecomp
