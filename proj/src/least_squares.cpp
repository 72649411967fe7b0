#include "cslight/least_squares.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

namespace cslight::fit {

namespace {

struct ScaledFunctor : Eigen::DenseFunctor<double> {
  const ResidualFunction* residual = nullptr;
  Eigen::VectorXd scale;
  int* evaluations = nullptr;

  ScaledFunctor(const ResidualFunction& r, Eigen::VectorXd s, Eigen::Index m, int* counter)
      : Eigen::DenseFunctor<double>(static_cast<int>(s.size()), static_cast<int>(m)),
        residual(&r),
        scale(std::move(s)),
        evaluations(counter) {}

  int operator()(const Eigen::VectorXd& u, Eigen::VectorXd& fvec) const {
    fvec = (*residual)(u.cwiseProduct(scale));
    if (evaluations) ++*evaluations;
    for (Eigen::Index i = 0; i < fvec.size(); ++i) {
      if (!std::isfinite(fvec[i])) fvec[i] = 1e150;
    }
    return 0;
  }
};

}  // namespace

double t_quantile(double confidence, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("no residual degrees of freedom");
  const boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 0.5 + 0.5 * confidence);
}

Eigen::MatrixXd numeric_jacobian(const ResidualFunction& residual, const Eigen::VectorXd& x, const Eigen::VectorXd& h) {
  const Eigen::VectorXd r0 = residual(x);
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += h[j];
    xm[j] -= h[j];
    jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h[j]);
  }
  return jac;
}

void linearized_uncertainty(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& residual, double confidence,
                            Eigen::MatrixXd& covariance, Eigen::VectorXd& ci, double& variance) {
  const auto m = jacobian.rows();
  const auto p = jacobian.cols();
  if (m <= p) throw std::invalid_argument("fit is underdetermined");
  variance = residual.squaredNorm() / static_cast<double>(m - p);
  const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
  covariance = variance * jtj.completeOrthogonalDecomposition().pseudoInverse();
  const double t = t_quantile(confidence, static_cast<double>(m - p));
  ci = covariance.diagonal().cwiseMax(0.0).cwiseSqrt() * t;
}

LsqResult least_squares(const ResidualFunction& residual, const Eigen::VectorXd& x0, const Eigen::VectorXd& scale,
                        Eigen::Index residual_count, const LsqOptions& options) {
  if (x0.size() != scale.size()) throw std::invalid_argument("parameter and scale sizes differ");
  if (residual_count <= x0.size()) throw std::invalid_argument("fewer residuals than parameters");
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (!(scale[i] > 0.0)) throw std::invalid_argument("parameter scales must be positive");
  }

  LsqResult out;
  ScaledFunctor base(residual, scale, residual_count, &out.evaluations);
  Eigen::NumericalDiff<ScaledFunctor> functor(base);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<ScaledFunctor>> lm(functor);
  lm.setMaxfev(options.max_evaluations);
  lm.setFtol(options.tolerance);
  lm.setXtol(options.tolerance);

  Eigen::VectorXd u = x0.cwiseQuotient(scale);
  out.initial_cost = 0.5 * residual(x0).squaredNorm();
  const auto status = lm.minimize(u);
  out.params = u.cwiseProduct(scale);

  const Eigen::VectorXd r = residual(out.params);
  out.final_cost = 0.5 * r.squaredNorm();
  out.converged = status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                  status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation && std::isfinite(out.final_cost) &&
                  out.final_cost <= out.initial_cost;

  Eigen::VectorXd h(scale.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = 1e-6 * std::max(std::abs(out.params[i]), scale[i]);
  const Eigen::MatrixXd jac = numeric_jacobian(residual, out.params, h);
  linearized_uncertainty(jac, r, options.confidence, out.covariance, out.ci, out.residual_variance);
  return out;
}

}  // namespace cslight::fit
