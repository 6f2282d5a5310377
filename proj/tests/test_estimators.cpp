#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "causalwrap/errors.hpp"
#include "causalwrap/estimators.hpp"
#include "causalwrap/rng.hpp"

using namespace cw;

namespace {

const std::vector<int> kCovs = {2, 3, 4};
constexpr int kT = 0;
constexpr int kY = 1;
constexpr double kTrueAte = 2.0;

// Linear-Gaussian benchmark: three standard normal covariates, logistic
// treatment (or coin-flip when randomized), homogeneous effect 2.
Table lg_table(int n, std::uint64_t seed, double noise, bool randomized) {
    Rng rng(seed);
    Table t;
    t.schema = {{"t", ColumnKind::Binary},
                {"y", ColumnKind::Continuous},
                {"x0", ColumnKind::Continuous},
                {"x1", ColumnKind::Continuous},
                {"x2", ColumnKind::Continuous}};
    t.rows.resize(n, 5);
    for (int i = 0; i < n; ++i) {
        const double x0 = rng.normal();
        const double x1 = rng.normal();
        const double x2 = rng.normal();
        const double e = randomized ? 0.5 : sigmoid(0.8 * x0 - 0.4 * x1);
        const double tr = rng.bernoulli(e) ? 1.0 : 0.0;
        const double y = kTrueAte * tr + x0 + 0.5 * x1 - x2 + noise * rng.normal();
        t.rows.row(i) << tr, y, x0, x1, x2;
    }
    return t;
}

double sd(const Eigen::ArrayXd& v) {
    const double m = v.mean();
    return std::sqrt((v - m).square().sum() / static_cast<double>(v.size() - 1));
}

// Asymptotic standard errors from the estimators' influence functions.
double se_ipw(const Table& t, const Eigen::VectorXd& scores) {
    const auto tr = t.rows.col(kT).array();
    const auto y = t.rows.col(kY).array();
    const auto e = scores.array();
    const Eigen::ArrayXd inf = tr * y / e - (1.0 - tr) * y / (1.0 - e);
    return sd(inf) / std::sqrt(static_cast<double>(t.n()));
}

double se_aipw(const Table& t, const Eigen::VectorXd& scores, const OutcomeModels& m) {
    const auto tr = t.rows.col(kT).array();
    const auto y = t.rows.col(kY).array();
    const auto e = scores.array();
    const Eigen::ArrayXd inf = m.mu1.array() - m.mu0.array() +
                               tr * (y - m.mu1.array()) / e -
                               (1.0 - tr) * (y - m.mu0.array()) / (1.0 - e);
    return sd(inf) / std::sqrt(static_cast<double>(t.n()));
}

}  // namespace

TEST_CASE("propensity scores on randomized data stay near one half") {
    const Table t = lg_table(5000, 31, 1.0, true);
    const PropensityResult p = fit_propensity(t, kT, kCovs);
    CHECK(p.converged);
    CHECK(p.clip_fraction == 0.0);
    CHECK(std::abs(p.scores.mean() - 0.5) < 0.02);

    std::vector<double> dev(static_cast<std::size_t>(t.n()));
    for (int i = 0; i < t.n(); ++i) dev[static_cast<std::size_t>(i)] = std::abs(p.scores(i) - 0.5);
    std::sort(dev.begin(), dev.end());
    CHECK(dev[static_cast<std::size_t>(t.n() * 99 / 100)] < 0.05);  // bulk of the null scores
    CHECK(dev.back() < 0.08);
}

TEST_CASE("propensity clips separable scores and reports the fraction") {
    Rng rng(5);
    Table t;
    t.schema = {{"t", ColumnKind::Binary}, {"y", ColumnKind::Continuous}, {"x", ColumnKind::Continuous}};
    t.rows.resize(400, 3);
    for (int i = 0; i < 400; ++i) {
        const double x = rng.normal();
        t.rows.row(i) << (x > 0.0 ? 1.0 : 0.0), rng.normal(), x;
    }
    const PropensityResult p = fit_propensity(t, 0, {2});
    CHECK(p.scores.minCoeff() >= 0.01);
    CHECK(p.scores.maxCoeff() <= 0.99);
    CHECK(p.clip_fraction > 0.3);
}

TEST_CASE("propensity requires a binary varying treatment") {
    Table t;
    t.schema = {{"t", ColumnKind::Binary}, {"x", ColumnKind::Continuous}};
    t.rows.resize(10, 2);
    t.rows.col(0).setOnes();
    t.rows.col(1).setRandom();
    CHECK_THROWS_AS(fit_propensity(t, 0, {1}), ValidationError);

    t.rows(3, 0) = 0.5;
    CHECK_THROWS_AS(fit_propensity(t, 0, {1}), ValidationError);
    CHECK_THROWS_AS(fit_propensity(t, 7, {1}), ValidationError);

    SUBCASE("no covariates fall back to the treated fraction") {
        Table r;
        r.schema = t.schema;
        r.rows.resize(10, 2);
        for (int i = 0; i < 10; ++i) r.rows.row(i) << (i < 4 ? 1.0 : 0.0), 0.0;
        const PropensityResult p = fit_propensity(r, 0, {});
        CHECK(p.scores(0) == doctest::Approx(0.4).epsilon(1e-12));
    }
}

TEST_CASE("outcome regression recovers exact and null effects") {
    SUBCASE("y equal to the treatment gives effect one") {
        Table t;
        t.schema = {{"t", ColumnKind::Binary}, {"y", ColumnKind::Continuous}};
        t.rows.resize(100, 2);
        for (int i = 0; i < 100; ++i) {
            const double tr = i % 2 ? 1.0 : 0.0;
            t.rows.row(i) << tr, tr;
        }
        CHECK(std::abs(ate_or(t, 0, 1, {}) - 1.0) < 1e-10);
    }
    SUBCASE("independent outcome stays near zero at five thousand rows") {
        Rng rng(17);
        Table t;
        t.schema = {{"t", ColumnKind::Binary}, {"y", ColumnKind::Continuous}};
        t.rows.resize(5000, 2);
        for (int i = 0; i < 5000; ++i) {
            t.rows.row(i) << (rng.bernoulli(0.5) ? 1.0 : 0.0), rng.normal();
        }
        CHECK(std::abs(ate_or(t, 0, 1, {})) < 0.06);
    }
    SUBCASE("confounded linear model is recovered exactly without noise") {
        const Table t = lg_table(800, 23, 0.0, false);
        CHECK(ate_or(t, kT, kY, kCovs) == doctest::Approx(kTrueAte).epsilon(1e-9));
    }
    SUBCASE("a duplicated covariate column still yields a finite estimate") {
        Table t = lg_table(300, 29, 1.0, false);
        Table dup = t;
        dup.schema.push_back({"x0copy", ColumnKind::Continuous});
        dup.rows.conservativeResize(Eigen::NoChange, 6);
        dup.rows.col(5) = dup.rows.col(2);
        CHECK(std::isfinite(ate_or(dup, kT, kY, {2, 3, 4, 5})));
    }
}

TEST_CASE("ipw arithmetic identities") {
    Table t;
    t.schema = {{"t", ColumnKind::Binary}, {"y", ColumnKind::Continuous}};
    t.rows.resize(100, 2);
    for (int i = 0; i < 100; ++i) {
        const double tr = i % 2 ? 1.0 : 0.0;
        t.rows.row(i) << tr, tr;
    }
    const Eigen::VectorXd half = Eigen::VectorXd::Constant(100, 0.5);
    CHECK(ate_ipw(t, 0, 1, half) == 1.0);

    t.rows.col(1).setZero();
    CHECK(ate_ipw(t, 0, 1, half) == 0.0);

    CHECK_THROWS_AS(ate_ipw(t, 0, 1, Eigen::VectorXd::Constant(7, 0.5)), ValidationError);
}

TEST_CASE("aipw equals the plug-in when outcome models are perfect") {
    const Table t = lg_table(600, 41, 0.0, false);
    const OutcomeModels m = fit_outcome_models(t, kT, kY, kCovs);
    const Eigen::VectorXd odd_scores = Eigen::VectorXd::Constant(t.n(), 0.3);
    const double plug_in = (m.mu1 - m.mu0).mean();
    CHECK(ate_aipw(t, kT, kY, odd_scores, m) == doctest::Approx(plug_in).epsilon(1e-10));
    CHECK(plug_in == doctest::Approx(kTrueAte).epsilon(1e-9));

    SUBCASE("constant outcome gives a zero effect") {
        Table c = t;
        c.rows.col(kY).setConstant(3.5);
        const OutcomeModels mc = fit_outcome_models(c, kT, kY, kCovs);
        CHECK(std::abs(ate_aipw(c, kT, kY, odd_scores, mc)) < 1e-8);
    }
    SUBCASE("an arm with one row is rejected") {
        Table tiny;
        tiny.schema = t.schema;
        tiny.rows.resize(4, 5);
        tiny.rows.setZero();
        tiny.rows(0, kT) = 1.0;
        CHECK_THROWS_AS(fit_outcome_models(tiny, kT, kY, kCovs), ValidationError);
    }
}

TEST_CASE("aipw is doubly robust") {
    SUBCASE("correct propensity rescues arbitrary outcome models") {
        const Table t = lg_table(5000, 47, 1.0, false);
        const PropensityResult p = fit_propensity(t, kT, kCovs);
        OutcomeModels wrong;
        wrong.mu0 = Eigen::VectorXd::Constant(t.n(), 5.0) + t.rows.col(2);
        wrong.mu1 = Eigen::VectorXd::Constant(t.n(), -3.0);
        const double est = ate_aipw(t, kT, kY, p.scores, wrong);
        CHECK(std::abs(est - kTrueAte) <= 4.0 * se_aipw(t, p.scores, wrong));
    }
    SUBCASE("correct outcome models rescue a wrong constant propensity") {
        const Table t = lg_table(5000, 53, 1.0, false);
        const OutcomeModels m = fit_outcome_models(t, kT, kY, kCovs);
        const Eigen::VectorXd flat = Eigen::VectorXd::Constant(t.n(), 0.5);
        const double est = ate_aipw(t, kT, kY, flat, m);
        CHECK(std::abs(est - kTrueAte) <= 4.0 * se_aipw(t, flat, m));
    }
}

TEST_CASE("tmle identities and fallbacks") {
    SUBCASE("near-perfect outcome models leave the fluctuation at zero") {
        const Table t = lg_table(2000, 59, 0.0, false);
        const PropensityResult p = fit_propensity(t, kT, kCovs);
        const OutcomeModels m = fit_outcome_models(t, kT, kY, kCovs);
        const TmleResult r = ate_tmle(t, kT, kY, p.scores, m);
        CHECK(!r.fallback);
        CHECK(!r.degenerate);
        CHECK(std::abs(r.epsilon) < 1e-4);
        CHECK(r.value == doctest::Approx((m.mu1 - m.mu0).mean()).epsilon(1e-5));
    }
    SUBCASE("a constant outcome is degenerate") {
        Table t = lg_table(200, 61, 1.0, false);
        t.rows.col(kY).setConstant(-2.0);
        const OutcomeModels m = fit_outcome_models(t, kT, kY, kCovs);
        const Eigen::VectorXd flat = Eigen::VectorXd::Constant(t.n(), 0.5);
        const TmleResult r = ate_tmle(t, kT, kY, flat, m);
        CHECK(r.degenerate);
        CHECK(r.value == 0.0);
    }
}

TEST_CASE("every estimator lands within monte carlo error on the linear benchmark") {
    const int n = 5000;
    const int seeds = 10;
    std::array<double, 4> sum{};
    double se_sum_ipw = 0.0, se_sum_aipw = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const Table t = lg_table(n, 100 + static_cast<std::uint64_t>(s), 1.0, false);
        const PropensityResult p = fit_propensity(t, kT, kCovs);
        const OutcomeModels m = fit_outcome_models(t, kT, kY, kCovs);
        const double e_or = ate_or(t, kT, kY, kCovs);
        const double e_ipw = ate_ipw(t, kT, kY, p.scores);
        const double e_aipw = ate_aipw(t, kT, kY, p.scores, m);
        const TmleResult e_tmle = ate_tmle(t, kT, kY, p.scores, m);
        CHECK(!e_tmle.fallback);

        const double band_ipw = se_ipw(t, p.scores);
        const double band = se_aipw(t, p.scores, m);
        se_sum_ipw += band_ipw;
        se_sum_aipw += band;
        CHECK(std::abs(e_or - kTrueAte) <= 4.0 * band);
        CHECK(std::abs(e_ipw - kTrueAte) <= 4.0 * band_ipw);
        CHECK(std::abs(e_aipw - kTrueAte) <= 4.0 * band);
        CHECK(std::abs(e_tmle.value - kTrueAte) <= 4.0 * band);

        sum[0] += e_or;
        sum[1] += e_ipw;
        sum[2] += e_aipw;
        sum[3] += e_tmle.value;
    }
    const double root = std::sqrt(static_cast<double>(seeds));
    CHECK(std::abs(sum[0] / seeds - kTrueAte) <= 3.0 * (se_sum_aipw / seeds) / root);
    CHECK(std::abs(sum[1] / seeds - kTrueAte) <= 3.0 * (se_sum_ipw / seeds) / root);
    CHECK(std::abs(sum[2] / seeds - kTrueAte) <= 3.0 * (se_sum_aipw / seeds) / root);
    CHECK(std::abs(sum[3] / seeds - kTrueAte) <= 3.0 * (se_sum_aipw / seeds) / root);
}

TEST_CASE("cate model error reduces to the effect gap") {
    const auto with_ite = [](Table t, double ite) {
        t.schema.push_back({"ite", ColumnKind::Continuous});
        t.rows.conservativeResize(Eigen::NoChange, 6);
        t.rows.col(5).setConstant(ite);
        return t;
    };

    SUBCASE("an exact homogeneous model has zero gap") {
        const Table syn = lg_table(500, 67, 0.0, false);
        const Table truth = with_ite(lg_table(400, 68, 0.0, false), kTrueAte);
        CHECK(cate_pehe(syn, kT, kY, kCovs, truth, 5) < 1e-6);
    }
    SUBCASE("a one-unit offset gives gap one") {
        const Table syn = lg_table(500, 67, 0.0, false);
        const Table truth = with_ite(lg_table(400, 68, 0.0, false), kTrueAte - 1.0);
        CHECK(cate_pehe(syn, kT, kY, kCovs, truth, 5) == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("noisy homogeneous data keeps the gap near the effect error") {
        const Table syn = lg_table(5000, 71, 1.0, false);
        const Table truth = with_ite(lg_table(2000, 72, 1.0, false), kTrueAte);
        const OutcomeModels m = fit_outcome_models(syn, kT, kY, kCovs);
        Eigen::MatrixXd Xt(truth.n(), 3);
        for (int j = 0; j < 3; ++j) Xt.col(j) = truth.rows.col(kCovs[static_cast<std::size_t>(j)]);
        const double ate_err =
            std::abs((linear_predict(m.arm1, Xt) - linear_predict(m.arm0, Xt)).mean() - kTrueAte);
        const double pehe = cate_pehe(syn, kT, kY, kCovs, truth, 5);
        CHECK(pehe >= ate_err - 1e-9);
        CHECK(pehe <= ate_err + 0.05);
    }
    SUBCASE("a missing unit-effect column is rejected") {
        const Table syn = lg_table(100, 67, 0.0, false);
        CHECK_THROWS_AS(cate_pehe(syn, kT, kY, kCovs, syn, 9), ValidationError);
    }
}

TEST_CASE("agreement formula arithmetic") {
    const std::array<double, 4> flat1{0.1, 0.1, 0.1, 0.1};
    const std::array<double, 4> flat2{0.2, 0.2, 0.2, 0.2};
    CHECK(agreement_from_vectors(flat1, flat1).value == 1.0);
    CHECK(agreement_from_vectors(flat1, flat2).value == 0.0);

    const std::array<double, 4> real{0.2, 0.2, 0.2, 0.2};
    const std::array<double, 4> half{0.3, 0.1, 0.3, 0.1};
    CHECK(agreement_from_vectors(real, half).value == doctest::Approx(0.5).epsilon(1e-12));

    SUBCASE("scale invariance") {
        const std::array<double, 4> r2{0.4, 0.4, 0.4, 0.4};
        const std::array<double, 4> s2{0.6, 0.2, 0.6, 0.2};
        CHECK(agreement_from_vectors(real, half).value == agreement_from_vectors(r2, s2).value);
    }
    SUBCASE("near-zero reference effects are degenerate") {
        const std::array<double, 4> zero{1e-9, -1e-9, 0.0, 1e-9};
        const AgreementResult r = agreement_from_vectors(zero, flat1);
        CHECK(r.degenerate);
    }
    SUBCASE("clipping keeps the score inside the unit interval") {
        const std::array<double, 4> far{5.0, -5.0, 5.0, -5.0};
        const double v = agreement_from_vectors(flat1, far).value;
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == 0.0);
    }
}

TEST_CASE("agreement on tables") {
    const Table real = lg_table(1500, 83, 1.0, false);
    SUBCASE("identical tables agree perfectly") {
        const AgreementResult r = ate_agreement(real, real, kT, kY, kCovs);
        CHECK(!r.degenerate);
        CHECK(r.value == 1.0);
        for (std::size_t l = 0; l < 4; ++l) CHECK(r.real_ate[l] == r.syn_ate[l]);
    }
    SUBCASE("a zero outcome makes the reference degenerate") {
        Table zero = real;
        zero.rows.col(kY).setZero();
        const AgreementResult r = ate_agreement(zero, real, kT, kY, kCovs);
        CHECK(r.degenerate);
    }
    SUBCASE("schema mismatch is rejected") {
        Table other = real;
        other.schema[2].name = "z9";
        CHECK_THROWS_AS(ate_agreement(real, other, kT, kY, kCovs), ValidationError);
    }
}
