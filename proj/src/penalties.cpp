#include "causalwrap/penalties.hpp"

#include <algorithm>
#include <cmath>

#include "causalwrap/errors.hpp"
#include "causalwrap/fitting.hpp"

namespace cw {

namespace {

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& batch, const std::vector<int>& cols) {
    Eigen::MatrixXd out(batch.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = batch.col(cols[c]);
    return out;
}

}  // namespace

std::vector<EdgeModel> fit_edge_models(const Table& real, const CausalKnowledge& k) {
    const auto parents = k.trusted_parents(real.d());
    std::vector<EdgeModel> models;
    for (int j = 0; j < real.d(); ++j) {
        const auto& pa = parents[static_cast<std::size_t>(j)];
        if (pa.empty()) continue;
        EdgeModel m;
        m.target = j;
        m.parents = pa;
        const Eigen::MatrixXd X = gather_columns(real.rows, pa);
        const Eigen::VectorXd y = real.rows.col(j);
        if (real.schema[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
            m.logistic = true;
            const LogisticFit fit = fit_logistic(X, y);
            m.coef = fit.coef;
            m.intercept = fit.intercept;
        } else {
            const LinearFit fit = fit_linear_ridge(X, y);
            m.coef = fit.coef;
            m.intercept = fit.intercept;
        }
        models.push_back(std::move(m));
    }
    return models;
}

Eigen::MatrixXd residualize(const Eigen::MatrixXd& batch, const std::vector<EdgeModel>& models,
                            ResidualTape* tape) {
    Eigen::MatrixXd resid = batch;
    if (tape) tape->probs.assign(models.size(), Eigen::VectorXd());
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto& m = models[mi];
        if (m.target < 0 || m.target >= batch.cols()) {
            throw ValidationError("residualize: model target outside batch");
        }
        Eigen::VectorXd pred = Eigen::VectorXd::Constant(batch.rows(), m.intercept);
        for (std::size_t p = 0; p < m.parents.size(); ++p) {
            pred += m.coef(static_cast<Eigen::Index>(p)) * batch.col(m.parents[p]);
        }
        if (m.logistic) {
            pred = pred.unaryExpr([](double s) { return sigmoid(s); });
            if (tape) tape->probs[mi] = pred;
        }
        resid.col(m.target) -= pred;
    }
    if (tape) tape->residuals = resid;
    return resid;
}

void residual_col_backward(const std::vector<EdgeModel>& models, const ResidualTape& tape,
                           int col, const Eigen::VectorXd& g, Eigen::MatrixXd& d_batch) {
    d_batch.col(col) += g;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto& m = models[mi];
        if (m.target != col) continue;
        if (m.logistic) {
            // d sigmoid(s)/ds = p(1-p), applied rowwise before the chain to parents.
            const Eigen::VectorXd scaled =
                g.cwiseProduct(tape.probs[mi].cwiseProduct((1.0 - tape.probs[mi].array()).matrix()));
            for (std::size_t p = 0; p < m.parents.size(); ++p) {
                d_batch.col(m.parents[p]) -= m.coef(static_cast<Eigen::Index>(p)) * scaled;
            }
        } else {
            for (std::size_t p = 0; p < m.parents.size(); ++p) {
                d_batch.col(m.parents[p]) -= m.coef(static_cast<Eigen::Index>(p)) * g;
            }
        }
    }
}

Eigen::MatrixXd residualize_backward(const std::vector<EdgeModel>& models,
                                     const ResidualTape& tape, const Eigen::MatrixXd& d_resid) {
    Eigen::MatrixXd d_batch = Eigen::MatrixXd::Zero(d_resid.rows(), d_resid.cols());
    for (int col = 0; col < d_resid.cols(); ++col) {
        residual_col_backward(models, tape, col, d_resid.col(col), d_batch);
    }
    return d_batch;
}

std::vector<PairPenalty> ci_pairs(const Eigen::MatrixXd& residuals, const CausalKnowledge& k,
                                  const std::vector<int>& pair_indices,
                                  const std::vector<double>& resid_sigma2) {
    std::vector<PairPenalty> out;
    out.reserve(pair_indices.size());
    for (int idx : pair_indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= k.forbidden.size()) {
            throw ValidationError("ci_pairs: pair index out of range");
        }
        const auto [a, b] = k.forbidden[static_cast<std::size_t>(idx)];
        KernelConfig cfg;
        cfg.sigma2_x = resid_sigma2.empty() ? median_heuristic(residuals.col(a))
                                            : resid_sigma2[static_cast<std::size_t>(a)];
        cfg.sigma2_y = resid_sigma2.empty() ? median_heuristic(residuals.col(b))
                                            : resid_sigma2[static_cast<std::size_t>(b)];
        PairPenalty p;
        p.a = a;
        p.b = b;
        const double w = k.ci_weight(a, b);
        p.value = w * hsic_with_grad(residuals.col(a), residuals.col(b), cfg, p.grad_a, p.grad_b);
        p.grad_a *= w;
        p.grad_b *= w;
        out.push_back(std::move(p));
    }
    return out;
}

CiPenalty ci_penalty(const Eigen::MatrixXd& batch, const std::vector<EdgeModel>& models,
                     const CausalKnowledge& k, const std::vector<double>& resid_sigma2) {
    CiPenalty result;
    result.grad = Eigen::MatrixXd::Zero(batch.rows(), batch.cols());
    result.components.assign(k.forbidden.size(), 0.0);
    if (k.forbidden.empty()) return result;

    ResidualTape tape;
    residualize(batch, models, &tape);
    std::vector<int> all(k.forbidden.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    const auto pairs = ci_pairs(tape.residuals, k, all, resid_sigma2);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        result.components[i] = pairs[i].value;
        result.total += pairs[i].value;
        residual_col_backward(models, tape, pairs[i].a, pairs[i].grad_a, result.grad);
        residual_col_backward(models, tape, pairs[i].b, pairs[i].grad_b, result.grad);
    }
    return result;
}

MonoComponent mono_forward(const CorrectionMap& map, const Eigen::MatrixXd& base_batch,
                           const Eigen::MatrixXd& main_out, const MonotoneConstraint& m,
                           double delta) {
    if (!(delta > 0.0)) throw ValidationError("mono_forward: delta must be positive");
    Eigen::MatrixXd twin = base_batch;
    twin.col(m.i).array() += delta;
    MonoComponent c;
    c.twin_out = forward(map, twin, &c.twin_tape);
    const Eigen::ArrayXd gap =
        -static_cast<double>(m.sign) * (c.twin_out.col(m.j) - main_out.col(m.j)).array();
    c.active = (gap > 0.0).cast<double>();
    c.value = gap.max(0.0).mean();
    return c;
}

MonoPenalty mono_penalty(const CorrectionMap& map, const Eigen::MatrixXd& base_batch,
                         const CausalKnowledge& k, double delta) {
    MonoPenalty result;
    result.grads = zero_grads(map);
    ForwardTape main_tape;
    const Eigen::MatrixXd main_out = forward(map, base_batch, &main_tape);
    const double inv_m = 1.0 / static_cast<double>(base_batch.rows());
    Eigen::MatrixXd d_main = Eigen::MatrixXd::Zero(base_batch.rows(), base_batch.cols());
    for (const auto& m : k.monotone) {
        MonoComponent c = mono_forward(map, base_batch, main_out, m, delta);
        result.components.push_back(c.value);
        result.total += c.value;
        const Eigen::VectorXd slope = static_cast<double>(m.sign) * inv_m * c.active;
        d_main.col(m.j) += slope;
        Eigen::MatrixXd d_twin = Eigen::MatrixXd::Zero(base_batch.rows(), base_batch.cols());
        d_twin.col(m.j) = -slope;
        backward(map, c.twin_tape, d_twin, result.grads);
    }
    if (!k.monotone.empty()) backward(map, main_tape, d_main, result.grads);
    return result;
}

UtilitySurrogate utility_surrogate(const Eigen::MatrixXd& real_batch,
                                   const Eigen::MatrixXd& corrected_batch,
                                   const Eigen::MatrixXd& base_batch, double id_weight) {
    const Eigen::Index m = corrected_batch.rows();
    const Eigen::Index d = corrected_batch.cols();
    if (m < 2 || real_batch.rows() < 2) {
        throw ValidationError("utility_surrogate: need at least 2 rows per batch");
    }
    if (real_batch.cols() != d || base_batch.cols() != d || base_batch.rows() != m) {
        throw ValidationError("utility_surrogate: batch shape mismatch");
    }
    const double inv_m = 1.0 / static_cast<double>(m);

    const Eigen::VectorXd mu_r = real_batch.colwise().mean();
    const Eigen::VectorXd mu_c = corrected_batch.colwise().mean();
    const Eigen::VectorXd dmu = mu_c - mu_r;

    const Eigen::MatrixXd cc = corrected_batch.rowwise() - mu_c.transpose();
    const Eigen::MatrixXd rc = real_batch.rowwise() - mu_r.transpose();
    const Eigen::MatrixXd cov_c = inv_m * cc.transpose() * cc;
    const Eigen::MatrixXd cov_r = (1.0 / static_cast<double>(real_batch.rows())) * rc.transpose() * rc;
    const Eigen::MatrixXd dcov = cov_c - cov_r;

    const Eigen::MatrixXd id_diff = corrected_batch - base_batch;

    UtilitySurrogate u;
    u.moment_part = dmu.squaredNorm() + dcov.squaredNorm();
    u.id_part = id_weight * inv_m * id_diff.squaredNorm();
    u.value = u.moment_part + u.id_part;
    u.grad = Eigen::MatrixXd::Zero(m, d);
    u.grad.rowwise() += (2.0 * inv_m) * dmu.transpose();
    u.grad += (4.0 * inv_m) * cc * dcov;
    u.grad += (2.0 * id_weight * inv_m) * id_diff;
    return u;
}

}  // namespace cw
