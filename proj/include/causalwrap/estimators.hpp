#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "causalwrap/fitting.hpp"
#include "causalwrap/table.hpp"

namespace cw {

enum class EstimatorKind { Or, Ipw, Aipw, Tmle };

const char* estimator_name(EstimatorKind k);

struct EffectEstimate {
    EstimatorKind estimator = EstimatorKind::Or;
    double value = 0.0;
    bool failed = false;      // value is not trustworthy (degenerate inputs)
    bool fallback = false;    // targeting did not converge, value is the AIPW rescue
    double clip_fraction = 0.0;
    std::string note;
};

struct PropensityResult {
    Eigen::VectorXd scores;   // clipped to [0.01, 0.99]
    double clip_fraction = 0.0;
    bool converged = true;
};

// Logistic treatment model on the given covariates.
PropensityResult fit_propensity(const Table& t, int t_col, const std::vector<int>& covariates);

// Per-arm linear outcome regressions with predictions for every row.
struct OutcomeModels {
    LinearFit arm0;
    LinearFit arm1;
    Eigen::VectorXd mu0;
    Eigen::VectorXd mu1;
};
OutcomeModels fit_outcome_models(const Table& t, int t_col, int y_col,
                                 const std::vector<int>& covariates);

// ATE as the treatment coefficient of one linear model y ~ [T, X].
double ate_or(const Table& t, int t_col, int y_col, const std::vector<int>& covariates);

// Horvitz-Thompson difference mean(TY/e) - mean((1-T)Y/(1-e)).
double ate_ipw(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores);

// Doubly robust augmentation of the outcome-model plug-in.
double ate_aipw(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores,
                const OutcomeModels& models);

struct TmleResult {
    double value = 0.0;
    bool fallback = false;    // fluctuation failed, AIPW value returned
    bool degenerate = false;  // constant outcome
    double epsilon = 0.0;
};
// One-step targeted update: logistic fluctuation of the min-max-scaled
// outcome model along the clever covariate T/e - (1-T)/(1-e).
TmleResult ate_tmle(const Table& t, int t_col, int y_col, const Eigen::VectorXd& scores,
                    const OutcomeModels& models);

// All four estimators with shared propensity and outcome models.
std::array<EffectEstimate, 4> ate_ensemble(const Table& t, int t_col, int y_col,
                                           const std::vector<int>& covariates);

// Root mean squared gap between the synthetic-data CATE model (per-arm linear
// regressions) and ground-truth unit effects evaluated on the truth rows.
double cate_pehe(const Table& syn, int t_col, int y_col, const std::vector<int>& covariates,
                 const Table& truth, int ite_col);

struct AgreementResult {
    double value = 0.0;       // clipped to [0,1]
    bool degenerate = false;  // real effects all about zero
    std::array<double, 4> real_ate{};
    std::array<double, 4> syn_ate{};
};
// 1 - mean |syn - real| over the ensemble, normalized by mean |real|.
AgreementResult agreement_from_vectors(const std::array<double, 4>& real_ate,
                                       const std::array<double, 4>& syn_ate);
AgreementResult ate_agreement(const Table& real, const Table& syn, int t_col, int y_col,
                              const std::vector<int>& covariates);

}  // namespace cw
