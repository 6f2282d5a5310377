#include "causalwrap/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "causalwrap/errors.hpp"
#include "causalwrap/hsic.hpp"

namespace cw {

namespace {

constexpr int kMmdCap = 2000;
constexpr int kJsdBins = 20;

void check_schema_match(const Table& a, const Table& b, const char* what) {
    if (schema_hash(a.schema) != schema_hash(b.schema)) {
        throw ValidationError(std::string(what) + ": schemas differ");
    }
}

Eigen::MatrixXd subsample_rows(const Table& t, int cap, std::uint64_t seed) {
    if (t.n() <= cap) return t.rows;
    Rng rng(seed);
    const auto idx = rng.sample_indices(t.n(), cap);
    Eigen::MatrixXd out(cap, t.d());
    for (int i = 0; i < cap; ++i) out.row(i) = t.rows.row(idx[static_cast<std::size_t>(i)]);
    return out;
}

double mean_rbf_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma2) {
    Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
    d2.colwise() += a.rowwise().squaredNorm();
    d2.rowwise() += b.rowwise().squaredNorm().transpose();
    return (d2.array().max(0.0) * (-0.5 / sigma2)).exp().mean();
}

// 0 * log(0 / m) is zero by continuity.
double kl_term(double p, double m) { return p > 0.0 ? p * std::log(p / m) : 0.0; }

double discrete_jsd(const std::vector<double>& p, const std::vector<double>& q) {
    double out = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double m = 0.5 * (p[k] + q[k]);
        if (m <= 0.0) continue;
        out += 0.5 * kl_term(p[k], m) + 0.5 * kl_term(q[k], m);
    }
    return out;
}

std::vector<double> binned_law(const Eigen::VectorXd& x, double lo, double width) {
    std::vector<double> counts(kJsdBins, 1.0);  // add-one smoothing
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        int b = width > 0.0 ? static_cast<int>((x(i) - lo) / width) : 0;
        b = std::clamp(b, 0, kJsdBins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const double total = static_cast<double>(x.size()) + kJsdBins;
    for (double& c : counts) c /= total;
    return counts;
}

}  // namespace

double mmd(const Table& real, const Table& syn, std::uint64_t seed) {
    check_schema_match(real, syn, "mmd");
    Eigen::MatrixXd a = subsample_rows(real, kMmdCap, seed);
    Eigen::MatrixXd b = subsample_rows(syn, kMmdCap, seed);

    // Pooled per-column standardization keeps the shared bandwidth meaningful
    // across differently scaled columns.
    const Eigen::Index d = a.cols();
    const double na = static_cast<double>(a.rows());
    const double nb = static_cast<double>(b.rows());
    for (Eigen::Index j = 0; j < d; ++j) {
        const double mean = (a.col(j).sum() + b.col(j).sum()) / (na + nb);
        const double ss = (a.col(j).array() - mean).square().sum() +
                          (b.col(j).array() - mean).square().sum();
        const double sd = std::sqrt(ss / std::max(na + nb - 1.0, 1.0));
        const double scale = sd > 1e-12 ? sd : 1.0;
        a.col(j) = (a.col(j).array() - mean) / scale;
        b.col(j) = (b.col(j).array() - mean) / scale;
    }

    Eigen::MatrixXd pooled(a.rows() + b.rows(), d);
    pooled.topRows(a.rows()) = a;
    pooled.bottomRows(b.rows()) = b;
    const double sigma2 = median_heuristic_rows(pooled);

    const double v = mean_rbf_cross(a, a, sigma2) + mean_rbf_cross(b, b, sigma2) -
                     2.0 * mean_rbf_cross(a, b, sigma2);
    return std::max(v, 0.0);
}

double jsd(const Table& real, const Table& syn) {
    check_schema_match(real, syn, "jsd");
    if (real.d() == 0) return 0.0;
    double total = 0.0;
    for (int j = 0; j < real.d(); ++j) {
        if (real.schema[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
            const double p = real.rows.col(j).mean();
            const double q = syn.rows.col(j).mean();
            total += discrete_jsd({p, 1.0 - p}, {q, 1.0 - q});
        } else {
            const double lo = std::min(real.rows.col(j).minCoeff(), syn.rows.col(j).minCoeff());
            const double hi = std::max(real.rows.col(j).maxCoeff(), syn.rows.col(j).maxCoeff());
            const double width = (hi - lo) / kJsdBins;
            total += discrete_jsd(binned_law(real.rows.col(j), lo, width),
                                  binned_law(syn.rows.col(j), lo, width));
        }
    }
    return total / real.d();
}

TstrResult tstr(const Table& real_test, const Table& syn_train, int label_col) {
    check_schema_match(real_test, syn_train, "tstr");
    if (label_col < 0 || label_col >= syn_train.d()) {
        throw ValidationError("tstr: label column out of range");
    }
    const auto check_labels = [&](const Table& t, const char* which) {
        for (int i = 0; i < t.n(); ++i) {
            const double v = t.rows(i, label_col);
            if (v != 0.0 && v != 1.0) {
                throw ValidationError(std::string("tstr: ") + which + " label is not binary");
            }
        }
    };
    check_labels(syn_train, "synthetic");
    check_labels(real_test, "real");

    const Eigen::VectorXd y_syn = syn_train.rows.col(label_col);
    const Eigen::VectorXd y_real = real_test.rows.col(label_col);

    TstrResult r;
    const double syn_mean = y_syn.mean();
    if (syn_mean == 0.0 || syn_mean == 1.0) {
        // One-class training data: the classifier degenerates to its prior.
        r.single_class = true;
        const double majority = syn_mean;
        r.accuracy = (y_real.array() == majority).cast<double>().mean();
        return r;
    }

    std::vector<int> feat;
    for (int j = 0; j < syn_train.d(); ++j) {
        if (j != label_col) feat.push_back(j);
    }
    const auto gather = [&](const Table& t) {
        Eigen::MatrixXd X(t.n(), static_cast<Eigen::Index>(feat.size()));
        for (std::size_t j = 0; j < feat.size(); ++j) {
            X.col(static_cast<Eigen::Index>(j)) = t.rows.col(feat[j]);
        }
        return X;
    };
    Eigen::MatrixXd Xs = gather(syn_train);
    Eigen::MatrixXd Xr = gather(real_test);

    // Standardize features by the training (synthetic) statistics.
    for (Eigen::Index j = 0; j < Xs.cols(); ++j) {
        const double mean = Xs.col(j).mean();
        const double ss = (Xs.col(j).array() - mean).square().sum();
        const double sd = std::sqrt(ss / std::max(static_cast<double>(Xs.rows() - 1), 1.0));
        const double scale = sd > 1e-12 ? sd : 1.0;
        Xs.col(j) = (Xs.col(j).array() - mean) / scale;
        Xr.col(j) = (Xr.col(j).array() - mean) / scale;
    }

    const LogisticFit fit = fit_logistic(Xs, y_syn);
    const Eigen::VectorXd p = logistic_predict(fit, Xr);
    int correct = 0;
    for (int i = 0; i < real_test.n(); ++i) {
        const double pred = p(i) > 0.5 ? 1.0 : 0.0;
        if (pred == y_real(i)) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(real_test.n());
    return r;
}

std::pair<Table, Table> train_test_split(const Table& t, double test_fraction,
                                         std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw ValidationError("train_test_split: fraction must be inside (0,1)");
    }
    const int n_test = std::max(1, static_cast<int>(std::lround(test_fraction * t.n())));
    if (n_test >= t.n()) throw ValidationError("train_test_split: too few rows");
    Rng rng(seed);
    std::vector<int> idx(static_cast<std::size_t>(t.n()));
    for (int i = 0; i < t.n(); ++i) idx[static_cast<std::size_t>(i)] = i;
    rng.shuffle(idx);

    Table train, test;
    train.schema = test.schema = t.schema;
    train.provenance = test.provenance = t.provenance;
    test.rows.resize(n_test, t.d());
    train.rows.resize(t.n() - n_test, t.d());
    for (int i = 0; i < n_test; ++i) test.rows.row(i) = t.rows.row(idx[static_cast<std::size_t>(i)]);
    for (int i = n_test; i < t.n(); ++i) {
        train.rows.row(i - n_test) = t.rows.row(idx[static_cast<std::size_t>(i)]);
    }
    return {std::move(train), std::move(test)};
}

CiPassResult ci_pass_rate(const Table& syn, const StandardizeStats& stats,
                          const CausalKnowledge& k, const std::vector<EdgeModel>& models) {
    CiPassResult r;
    if (k.forbidden.empty()) {
        r.empty = true;
        return r;
    }
    Eigen::MatrixXd rows = syn.rows;
    apply_standardize(rows, stats);
    const Eigen::MatrixXd resid = residualize(rows, models);

    const auto centered = [&](int col) {
        return (resid.col(col).array() - resid.col(col).mean()).matrix().eval();
    };
    int passed = 0;
    for (const auto& [a, b] : k.forbidden) {
        const Eigen::VectorXd xa = centered(a);
        const Eigen::VectorXd xb = centered(b);
        const double denom = std::sqrt(xa.squaredNorm() * xb.squaredNorm());
        // A constant residual cannot carry dependence.
        const double corr = denom > 1e-12 ? xa.dot(xb) / denom : 0.0;
        if (ci_pair_passes(corr)) ++passed;
    }
    r.rate = static_cast<double>(passed) / static_cast<double>(k.forbidden.size());
    return r;
}

namespace {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Real: return "real";
        case Provenance::BaseSynthetic: return "base";
        case Provenance::Corrected: return "corrected";
        case Provenance::Oracle: return "oracle";
    }
    return "?";
}

}  // namespace

nlohmann::json eval_report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["mmd"] = r.mmd;
    j["jsd"] = r.jsd;
    j["tstr"] = r.tstr;
    j["tstr_single_class"] = r.tstr_single_class;
    j["ci_pass"] = r.ci_pass;
    j["ci_empty"] = r.ci_empty;
    if (r.ate_error) j["ate_error"] = *r.ate_error;
    if (r.pehe) j["pehe"] = *r.pehe;
    if (r.ate_agreement) j["ate_agreement"] = *r.ate_agreement;
    j["agreement_degenerate"] = r.agreement_degenerate;
    j["seed"] = r.seed;
    j["real_provenance"] = r.real_provenance;
    j["syn_provenance"] = r.syn_provenance;
    return j;
}

EvalReport assemble_report(const Table& real, const Table& real_test, const Table& syn,
                           const StandardizeStats& stats, const CausalKnowledge& know,
                           const std::vector<EdgeModel>& models, const EvalSpec& spec) {
    if (real.n() == 0 || real_test.n() == 0 || syn.n() == 0) {
        throw ValidationError("assemble_report: empty table");
    }
    EvalReport r;
    r.seed = spec.seed;
    r.real_provenance = provenance_name(real.provenance);
    r.syn_provenance = provenance_name(syn.provenance);
    r.mmd = mmd(real, syn, spec.seed);
    r.jsd = jsd(real, syn);
    const TstrResult ts = tstr(real_test, syn, spec.label_col);
    r.tstr = ts.accuracy;
    r.tstr_single_class = ts.single_class;
    const CiPassResult ci = ci_pass_rate(syn, stats, know, models);
    r.ci_pass = ci.rate;
    r.ci_empty = ci.empty;

    if (spec.true_ate) {
        r.ate_error = std::abs(ate_or(syn, spec.t_col, spec.y_col, spec.covariates) - *spec.true_ate);
    }
    if (spec.truth_ite) {
        r.pehe = cate_pehe(syn, spec.t_col, spec.y_col, spec.covariates, *spec.truth_ite,
                           spec.ite_col);
    }
    if (spec.with_agreement) {
        const AgreementResult ag =
            ate_agreement(real, syn, spec.t_col, spec.y_col, spec.covariates);
        r.agreement_degenerate = ag.degenerate;
        r.ate_agreement = ag.degenerate ? 0.0 : ag.value;
    }
    return r;
}

}  // namespace cw
