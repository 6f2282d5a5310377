#include "causalwrap/hsic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "causalwrap/errors.hpp"

namespace cw {

namespace {

constexpr double kSigma2Floor = 1e-6;

std::vector<int> strided_subsample(int n, int cap) {
    std::vector<int> idx;
    if (n <= cap) {
        idx.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        return idx;
    }
    idx.resize(static_cast<std::size_t>(cap));
    for (int i = 0; i < cap; ++i) {
        idx[static_cast<std::size_t>(i)] = static_cast<int>(
            (static_cast<long long>(i) * n) / cap);
    }
    return idx;
}

double median_of(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

}  // namespace

double median_heuristic(const Eigen::VectorXd& x, int subsample_cap) {
    const auto idx = strided_subsample(static_cast<int>(x.size()), subsample_cap);
    std::vector<double> d2;
    d2.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            const double d = x(idx[i]) - x(idx[j]);
            d2.push_back(d * d);
        }
    }
    return std::max(median_of(d2), kSigma2Floor);
}

double median_heuristic_rows(const Eigen::MatrixXd& rows, int subsample_cap) {
    const auto idx = strided_subsample(static_cast<int>(rows.rows()), subsample_cap);
    std::vector<double> d2;
    d2.reserve(idx.size() * (idx.size() - 1) / 2);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) {
            d2.push_back((rows.row(idx[i]) - rows.row(idx[j])).squaredNorm());
        }
    }
    return std::max(median_of(d2), kSigma2Floor);
}

Eigen::MatrixXd rbf_gram(const Eigen::VectorXd& x, double sigma2) {
    const int m = static_cast<int>(x.size());
    Eigen::MatrixXd K(m, m);
    const double inv = -0.5 / sigma2;
    for (int i = 0; i < m; ++i) {
        K(i, i) = 1.0;
        for (int j = i + 1; j < m; ++j) {
            const double d = x(i) - x(j);
            const double v = std::exp(inv * d * d);
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

void center_gram(Eigen::MatrixXd& K) {
    const Eigen::VectorXd row_mean = K.rowwise().mean();
    const double grand = row_mean.mean();
    K.colwise() -= row_mean;
    K.rowwise() -= row_mean.transpose();
    K.array() += grand;
}

double hsic(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelConfig& cfg) {
    const int m = static_cast<int>(x.size());
    if (m != static_cast<int>(y.size())) throw ValidationError("hsic: length mismatch");
    if (m < 4) throw ValidationError("hsic: needs at least 4 samples");
    Eigen::MatrixXd K = rbf_gram(x, cfg.sigma2_x);
    Eigen::MatrixXd L = rbf_gram(y, cfg.sigma2_y);
    center_gram(K);
    return (K.array() * L.array()).sum() / (static_cast<double>(m) * m);
}

double hsic_with_grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const KernelConfig& cfg,
                      Eigen::VectorXd& grad_x, Eigen::VectorXd& grad_y) {
    const int m = static_cast<int>(x.size());
    if (m != static_cast<int>(y.size())) throw ValidationError("hsic: length mismatch");
    if (m < 4) throw ValidationError("hsic: needs at least 4 samples");
    const double m2 = static_cast<double>(m) * m;
    const Eigen::MatrixXd K = rbf_gram(x, cfg.sigma2_x);
    const Eigen::MatrixXd L = rbf_gram(y, cfg.sigma2_y);
    Eigen::MatrixXd Kc = K;
    Eigen::MatrixXd Lc = L;
    center_gram(Kc);
    center_gram(Lc);
    const double value = (Kc.array() * L.array()).sum() / m2;

    // d hsic / d x_p = -(2 / (m^2 sigma2_x)) sum_j (HLH)_pj K_pj (x_p - x_j).
    {
        const Eigen::MatrixXd A = Lc.array() * K.array();
        const Eigen::VectorXd row_sums = A.rowwise().sum();
        grad_x = (-2.0 / (m2 * cfg.sigma2_x)) *
                 (row_sums.array() * x.array() - (A * x).array());
    }
    {
        const Eigen::MatrixXd B = Kc.array() * L.array();
        const Eigen::VectorXd row_sums = B.rowwise().sum();
        grad_y = (-2.0 / (m2 * cfg.sigma2_y)) *
                 (row_sums.array() * y.array() - (B * y).array());
    }
    return value;
}

}  // namespace cw
