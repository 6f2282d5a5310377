#pragma once

#include <Eigen/Dense>

namespace cw {

// Median heuristic: sigma^2 = median of pairwise squared distances, computed
// over an evenly strided subsample of at most subsample_cap points and floored
// at 1e-6 for degenerate input.
double median_heuristic(const Eigen::VectorXd& x, int subsample_cap = 1000);
double median_heuristic_rows(const Eigen::MatrixXd& rows, int subsample_cap = 1000);

struct KernelConfig {
    double sigma2_x = 1.0;
    double sigma2_y = 1.0;
};

Eigen::MatrixXd rbf_gram(const Eigen::VectorXd& x, double sigma2);
// K <- H K H with H = I - (1/m) 1 1^T.
void center_gram(Eigen::MatrixXd& K);

// Biased (V-statistic) estimator: tr(K H L H) / m^2 with Gaussian RBF grams.
// Bandwidths come from cfg and are treated as constants, so the value is
// smooth in x and y. Requires m >= 4.
double hsic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelConfig& cfg);
double hsic_with_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelConfig& cfg,
                      Eigen::VectorXd& grad_x, Eigen::VectorXd& grad_y);

}  // namespace cw
