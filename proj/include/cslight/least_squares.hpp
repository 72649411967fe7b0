#pragma once

#include <functional>

#include <Eigen/Dense>

namespace cslight::fit {

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LsqOptions {
  int max_evaluations = 4000;
  double tolerance = 1e-12;
  double confidence = 0.95;
};

struct LsqResult {
  Eigen::VectorXd params;
  Eigen::VectorXd ci;          ///< half-widths at the requested confidence
  Eigen::MatrixXd covariance;  ///< s^2 (J^T J)^-1
  double initial_cost = 0.0;   ///< 0.5 |r(x0)|^2
  double final_cost = 0.0;
  double residual_variance = 0.0;  ///< |r|^2 / (m - p)
  int evaluations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt minimization of |r(x)|^2 with forward-difference Jacobian.
/// `scale` gives the typical magnitude of each parameter; the optimizer works in
/// scaled coordinates. Confidence half-widths use the Student t quantile with
/// m - p degrees of freedom and the central-difference Jacobian at the optimum.
LsqResult least_squares(const ResidualFunction& residual, const Eigen::VectorXd& x0, const Eigen::VectorXd& scale,
                        Eigen::Index residual_count, const LsqOptions& options = {});

/// Central-difference Jacobian of r at x with steps h.
Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residual, const Eigen::VectorXd& x, const Eigen::VectorXd& h);

/// Two-sided Student t quantile for the given confidence level.
double t_quantile(double confidence, double dof);

/// Covariance and confidence half-widths from a Jacobian and residual vector.
void linearized_uncertainty(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& residual, double confidence,
                            Eigen::MatrixXd& covariance, Eigen::VectorXd& ci, double& variance);

}  // namespace cslight::fit
