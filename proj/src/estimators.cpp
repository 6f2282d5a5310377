#include "causalwrap/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "causalwrap/errors.hpp"

namespace cw {

namespace {

constexpr double kClipLo = 0.01;
constexpr double kClipHi = 0.99;

Eigen::MatrixXd gather(const Table& t, const std::vector<int>& cols) {
    Eigen::MatrixXd out(t.n(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] < 0 || cols[j] >= t.d()) {
            throw ValidationError("estimators: covariate index out of range");
        }
        out.col(static_cast<Eigen::Index>(j)) = t.rows.col(cols[j]);
    }
    return out;
}

void check_col(const Table& t, int col, const char* what) {
    if (col < 0 || col >= t.d()) {
        throw ValidationError(std::string("estimators: ") + what + " column out of range");
    }
}

void check_binary_treatment(const Eigen::VectorXd& tr) {
    bool any0 = false, any1 = false;
    for (int i = 0; i < tr.size(); ++i) {
        if (tr(i) == 0.0) any0 = true;
        else if (tr(i) == 1.0) any1 = true;
        else throw ValidationError("estimators: treatment column is not binary");
    }
    if (!any0 || !any1) throw ValidationError("estimators: treatment has no variation");
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

const char* estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::Or: return "or";
        case EstimatorKind::Ipw: return "ipw";
        case EstimatorKind::Aipw: return "aipw";
        case EstimatorKind::Tmle: return "tmle";
    }
    return "?";
}

PropensityResult fit_propensity(const Table& t, int t_col, const std::vector<int>& covariates) {
    check_col(t, t_col, "treatment");
    const Eigen::VectorXd tr = t.rows.col(t_col);
    check_binary_treatment(tr);

    PropensityResult r;
    if (covariates.empty()) {
        r.scores = Eigen::VectorXd::Constant(t.n(), tr.mean());
    } else {
        const Eigen::MatrixXd X = gather(t, covariates);
        const LogisticFit fit = fit_logistic(X, tr);
        r.converged = fit.converged;
        r.scores = logistic_predict(fit, X);
    }
    int clipped = 0;
    for (int i = 0; i < r.scores.size(); ++i) {
        if (r.scores(i) < kClipLo || r.scores(i) > kClipHi) ++clipped;
        r.scores(i) = std::clamp(r.scores(i), kClipLo, kClipHi);
    }
    r.clip_fraction = static_cast<double>(clipped) / static_cast<double>(t.n());
    return r;
}

OutcomeModels fit_outcome_models(const Table& t, int t_col, int y_col,
                                 const std::vector<int>& covariates) {
    check_col(t, t_col, "treatment");
    check_col(t, y_col, "outcome");
    const Eigen::VectorXd tr = t.rows.col(t_col);
    const Eigen::VectorXd y = t.rows.col(y_col);
    check_binary_treatment(tr);

    std::vector<int> rows0, rows1;
    for (int i = 0; i < t.n(); ++i) (tr(i) == 1.0 ? rows1 : rows0).push_back(i);
    if (rows0.size() < 2 || rows1.size() < 2) {
        throw ValidationError("estimators: a treatment arm has fewer than 2 rows");
    }

    const Eigen::MatrixXd X = gather(t, covariates);
    const auto arm_fit = [&](const std::vector<int>& rows) {
        Eigen::MatrixXd Xa(static_cast<Eigen::Index>(rows.size()), X.cols());
        Eigen::VectorXd ya(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            Xa.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
            ya(static_cast<Eigen::Index>(i)) = y(rows[i]);
        }
        return fit_linear_ridge(Xa, ya);
    };

    OutcomeModels m;
    m.arm0 = arm_fit(rows0);
    m.arm1 = arm_fit(rows1);
    m.mu0 = linear_predict(m.arm0, X);
    m.mu1 = linear_predict(m.arm1, X);
    return m;
}

double ate_or(const Table& t, int t_col, int y_col, const std::vector<int>& covariates) {
    check_col(t, t_col, "treatment");
    check_col(t, y_col, "outcome");
    Eigen::MatrixXd X(t.n(), static_cast<Eigen::Index>(covariates.size()) + 1);
    X.col(0) = t.rows.col(t_col);
    if (!covariates.empty()) X.rightCols(static_cast<Eigen::Index>(covariates.size())) = gather(t, covariates);
    const LinearFit fit = fit_linear_ridge(X, t.rows.col(y_col));
    return fit.coef(0);
}

double ate_ipw(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores) {
    check_col(t, t_col, "treatment");
    check_col(t, y_col, "outcome");
    if (scores.size() != t.n()) throw ValidationError("estimators: score length mismatch");
    const auto tr = t.rows.col(t_col).array();
    const auto y = t.rows.col(y_col).array();
    const auto e = scores.array();
    return (tr * y / e).mean() - ((1.0 - tr) * y / (1.0 - e)).mean();
}

double ate_aipw(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores,
                const OutcomeModels& models) {
    check_col(t, t_col, "treatment");
    check_col(t, y_col, "outcome");
    if (scores.size() != t.n()) throw ValidationError("estimators: score length mismatch");
    const auto tr = t.rows.col(t_col).array();
    const auto y = t.rows.col(y_col).array();
    const auto e = scores.array();
    const auto mu0 = models.mu0.array();
    const auto mu1 = models.mu1.array();
    return (mu1 - mu0 + tr * (y - mu1) / e - (1.0 - tr) * (y - mu0) / (1.0 - e)).mean();
}

TmleResult ate_tmle(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores,
                    const OutcomeModels& models) {
    check_col(t, t_col, "treatment");
    check_col(t, y_col, "outcome");
    if (scores.size() != t.n()) throw ValidationError("estimators: score length mismatch");

    TmleResult r;
    const Eigen::VectorXd y = t.rows.col(y_col);
    const double y_min = y.minCoeff();
    const double y_max = y.maxCoeff();
    if (y_max - y_min < 1e-12) {
        r.degenerate = true;
        return r;
    }
    const double span = y_max - y_min;
    const auto tr = t.rows.col(t_col).array();
    const auto e = scores.array();
    const Eigen::ArrayXd ys = (y.array() - y_min) / span;
    // Scaled predictions, bounded away from {0,1} so the logit is finite.
    constexpr double kQBound = 1e-6;
    const auto bound = [&](const Eigen::VectorXd& mu) {
        return ((mu.array() - y_min) / span).min(1.0 - kQBound).max(kQBound);
    };
    const Eigen::ArrayXd mu0s = bound(models.mu0);
    const Eigen::ArrayXd mu1s = bound(models.mu1);
    const Eigen::ArrayXd mu_t = tr * mu1s + (1.0 - tr) * mu0s;
    const Eigen::ArrayXd offset = mu_t.unaryExpr([](double p) { return logit(p); });
    const Eigen::ArrayXd h = tr / e - (1.0 - tr) / (1.0 - e);

    // Single-parameter logistic fluctuation with the outcome model as offset.
    double eps = 0.0;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
        const Eigen::ArrayXd p = (offset + eps * h).unaryExpr([](double z) { return sigmoid(z); });
        const double grad = (h * (ys - p)).sum();
        const double hess = -(h.square() * p * (1.0 - p)).sum();
        if (std::abs(hess) < 1e-12 || !std::isfinite(grad)) break;
        const double step = grad / hess;
        eps -= step;
        if (!std::isfinite(eps)) break;
        if (std::abs(step) < 1e-10) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        r.fallback = true;
        r.value = ate_aipw(t, t_col, y_col, scores, models);
        return r;
    }

    r.epsilon = eps;
    const Eigen::ArrayXd up1 = (mu1s.unaryExpr([](double p) { return logit(p); }) + eps / e)
                                   .unaryExpr([](double z) { return sigmoid(z); });
    const Eigen::ArrayXd up0 = (mu0s.unaryExpr([](double p) { return logit(p); }) - eps / (1.0 - e))
                                   .unaryExpr([](double z) { return sigmoid(z); });
    r.value = (up1 - up0).mean() * span;
    return r;
}

std::array<EffectEstimate, 4> ate_ensemble(const Table& t, int t_col, int y_col,
                                           const std::vector<int>& covariates) {
    const PropensityResult prop = fit_propensity(t, t_col, covariates);
    const OutcomeModels models = fit_outcome_models(t, t_col, y_col, covariates);

    std::array<EffectEstimate, 4> out;
    out[0].estimator = EstimatorKind::Or;
    out[0].value = ate_or(t, t_col, y_col, covariates);
    out[1].estimator = EstimatorKind::Ipw;
    out[1].value = ate_ipw(t, t_col, y_col, prop.scores);
    out[2].estimator = EstimatorKind::Aipw;
    out[2].value = ate_aipw(t, t_col, y_col, prop.scores, models);

    const TmleResult tmle = ate_tmle(t, t_col, y_col, prop.scores, models);
    out[3].estimator = EstimatorKind::Tmle;
    out[3].value = tmle.value;
    out[3].fallback = tmle.fallback;
    out[3].failed = tmle.degenerate;
    if (tmle.degenerate) out[3].note = "constant outcome";
    if (tmle.fallback) out[3].note = "fluctuation did not converge; aipw value";

    for (auto& e : out) {
        e.clip_fraction = prop.clip_fraction;
        if (!std::isfinite(e.value)) {
            e.failed = true;
            e.value = 0.0;
            e.note = "non-finite estimate";
        }
    }
    return out;
}

double cate_pehe(const Table& syn, int t_col, int y_col, const std::vector<int>& covariates,
                 const Table& truth, int ite_col) {
    if (ite_col < 0 || ite_col >= truth.d()) {
        throw ValidationError("estimators: unit-effect column out of range");
    }
    const OutcomeModels models = fit_outcome_models(syn, t_col, y_col, covariates);
    const Eigen::MatrixXd Xt = gather(truth, covariates);
    const Eigen::VectorXd tau_hat =
        linear_predict(models.arm1, Xt) - linear_predict(models.arm0, Xt);
    const Eigen::ArrayXd gap = tau_hat.array() - truth.rows.col(ite_col).array();
    return std::sqrt(gap.square().mean());
}

AgreementResult agreement_from_vectors(const std::array<double, 4>& real_ate,
                                       const std::array<double, 4>& syn_ate) {
    AgreementResult r;
    r.real_ate = real_ate;
    r.syn_ate = syn_ate;
    double num = 0.0, den = 0.0;
    for (std::size_t l = 0; l < 4; ++l) {
        num += std::abs(syn_ate[l] - real_ate[l]);
        den += std::abs(real_ate[l]);
    }
    num /= 4.0;
    den /= 4.0;
    if (den < 1e-8) {
        r.degenerate = true;
        return r;
    }
    r.value = std::clamp(1.0 - num / den, 0.0, 1.0);
    return r;
}

AgreementResult ate_agreement(const Table& real, const Table& syn, int t_col, int y_col,
                              const std::vector<int>& covariates) {
    if (schema_hash(real.schema) != schema_hash(syn.schema)) {
        throw ValidationError("estimators: real and synthetic schemas differ");
    }
    const auto on_real = ate_ensemble(real, t_col, y_col, covariates);
    const auto on_syn = ate_ensemble(syn, t_col, y_col, covariates);

    std::array<double, 4> rv{}, sv{};
    for (std::size_t l = 0; l < 4; ++l) {
        rv[l] = on_real[l].value;
        sv[l] = on_syn[l].value;
    }
    return agreement_from_vectors(rv, sv);
}

}  // namespace cw
