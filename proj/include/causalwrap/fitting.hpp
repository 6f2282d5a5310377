#pragma once

#include <Eigen/Dense>

namespace cw {

struct LinearFit {
    Eigen::VectorXd coef;  // aligned with design columns
    double intercept = 0.0;
};

// Least squares with a small ridge on the non-intercept block for rank
// deficiency rescue.
LinearFit fit_linear_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge = 1e-8);
Eigen::VectorXd linear_predict(const LinearFit& fit, const Eigen::MatrixXd& X);

struct LogisticFit {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Newton/IRLS, run to gradient norm <= tol with an iteration cap. A small
// ridge keeps the Hessian invertible under separation.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         double tol = 1e-8, int max_iter = 100, double ridge = 1e-8);
Eigen::VectorXd logistic_predict(const LogisticFit& fit, const Eigen::MatrixXd& X);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double normal_cdf(double z);
// Acklam's rational approximation refined with one Halley step.
double normal_quantile(double p);

}  // namespace cw
