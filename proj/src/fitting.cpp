#include "causalwrap/fitting.hpp"

#include <cmath>

#include "causalwrap/errors.hpp"

namespace cw {

namespace {

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A;
}

}  // namespace

LinearFit fit_linear_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge) {
    if (X.rows() != y.size()) throw ValidationError("fit_linear_ridge: row mismatch");
    if (X.rows() == 0) throw ValidationError("fit_linear_ridge: empty design");
    const Eigen::MatrixXd A = with_intercept(X);
    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() == A.cols()) {
        beta = qr.solve(y);
    } else {
        // Rank-deficient design: fall back to ridge-stabilized normal equations.
        Eigen::MatrixXd G = A.transpose() * A;
        for (int j = 1; j < G.cols(); ++j) G(j, j) += ridge;
        beta = G.ldlt().solve(A.transpose() * y);
    }
    LinearFit fit;
    fit.intercept = beta(0);
    fit.coef = beta.tail(X.cols());
    return fit;
}

Eigen::VectorXd linear_predict(const LinearFit& fit, const Eigen::MatrixXd& X) {
    return (X * fit.coef).array() + fit.intercept;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         double tol, int max_iter, double ridge) {
    if (X.rows() != y.size()) throw ValidationError("fit_logistic: row mismatch");
    if (X.rows() == 0) throw ValidationError("fit_logistic: empty design");
    for (int i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) throw ValidationError("fit_logistic: target not in {0,1}");
    }
    const Eigen::MatrixXd A = with_intercept(X);
    const int p = static_cast<int>(A.cols());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    LogisticFit fit;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd eta = A * beta;
        const Eigen::VectorXd mu = eta.unaryExpr([](double z) { return sigmoid(z); });
        Eigen::VectorXd grad = A.transpose() * (y - mu);
        for (int j = 1; j < p; ++j) grad(j) -= ridge * beta(j);
        fit.iterations = it;
        if (grad.norm() <= tol) {
            fit.converged = true;
            break;
        }
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
        for (int j = 1; j < p; ++j) H(j, j) += ridge;
        H.diagonal().array() += 1e-12;  // guard against all-saturated weights
        beta += H.ldlt().solve(grad);
        if (!beta.allFinite()) throw NumericError("fit_logistic: diverged");
    }
    if (!fit.converged) {
        const Eigen::VectorXd mu = (A * beta).unaryExpr([](double z) { return sigmoid(z); });
        Eigen::VectorXd grad = A.transpose() * (y - mu);
        for (int j = 1; j < p; ++j) grad(j) -= ridge * beta(j);
        fit.converged = grad.norm() <= tol;
        fit.iterations = max_iter;
    }
    fit.intercept = beta(0);
    fit.coef = beta.tail(X.cols());
    return fit;
}

Eigen::VectorXd logistic_predict(const LogisticFit& fit, const Eigen::MatrixXd& X) {
    Eigen::VectorXd eta = (X * fit.coef).array() + fit.intercept;
    return eta.unaryExpr([](double z) { return sigmoid(z); });
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("normal_quantile: p outside (0,1)");
    // Acklam coefficients.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley refinement.
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

}  // namespace cw
