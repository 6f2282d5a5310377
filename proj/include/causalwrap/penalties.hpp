#pragma once

#include <Eigen/Dense>
#include <vector>

#include "causalwrap/correction_map.hpp"
#include "causalwrap/hsic.hpp"
#include "causalwrap/knowledge.hpp"
#include "causalwrap/table.hpp"

namespace cw {

// Per-column regression of a child on its trusted parents, fitted once on
// real data and frozen afterwards. Logistic for binary targets, ridge least
// squares otherwise.
struct EdgeModel {
    int target = -1;
    std::vector<int> parents;
    bool logistic = false;
    Eigen::VectorXd coef;
    double intercept = 0.0;
};

// One model per column with a nonempty trusted parent set.
std::vector<EdgeModel> fit_edge_models(const Table& real, const CausalKnowledge& k);

struct ResidualTape {
    Eigen::MatrixXd residuals;            // m x d
    std::vector<Eigen::VectorXd> probs;   // per model; filled for logistic models
};

// Residual of each column against its frozen edge model: raw column minus the
// model prediction (probability scale for logistic), identity when unmodeled.
// Differentiable in the batch; the models are constants.
Eigen::MatrixXd residualize(const Eigen::MatrixXd& batch, const std::vector<EdgeModel>& models,
                            ResidualTape* tape = nullptr);

// Adds the pullback of a gradient on residual column `col` into d_batch.
void residual_col_backward(const std::vector<EdgeModel>& models, const ResidualTape& tape,
                           int col, const Eigen::VectorXd& g, Eigen::MatrixXd& d_batch);

Eigen::MatrixXd residualize_backward(const std::vector<EdgeModel>& models,
                                     const ResidualTape& tape, const Eigen::MatrixXd& d_resid);

// One forbidden pair's dependence penalty: weighted HSIC of the two residual
// columns, with gradients wrt those columns.
struct PairPenalty {
    int a = -1;
    int b = -1;
    double value = 0.0;
    Eigen::VectorXd grad_a;
    Eigen::VectorXd grad_b;
};

// Evaluates the chosen forbidden pairs on precomputed residuals. When
// resid_sigma2 (one bandwidth per column) is empty, each column gets a fresh
// median-heuristic bandwidth.
std::vector<PairPenalty> ci_pairs(const Eigen::MatrixXd& residuals, const CausalKnowledge& k,
                                  const std::vector<int>& pair_indices,
                                  const std::vector<double>& resid_sigma2 = {});

// Whole-penalty convenience over every forbidden pair: residualizes, sums the
// weighted HSIC components, and pulls the gradient back to the batch.
struct CiPenalty {
    std::vector<double> components;  // aligned with k.forbidden
    double total = 0.0;
    Eigen::MatrixXd grad;            // m x d wrt batch
};
CiPenalty ci_penalty(const Eigen::MatrixXd& batch, const std::vector<EdgeModel>& models,
                     const CausalKnowledge& k, const std::vector<double>& resid_sigma2 = {});

// Twin evaluation of one monotonicity constraint: perturb the driver column
// by delta, push both versions through the map, hinge on sign violations of
// the response column. Gradients flow through both forwards.
struct MonoComponent {
    double value = 0.0;
    Eigen::VectorXd active;   // per-row hinge indicator
    Eigen::MatrixXd twin_out;
    ForwardTape twin_tape;
};
MonoComponent mono_forward(const CorrectionMap& map, const Eigen::MatrixXd& base_batch,
                           const Eigen::MatrixXd& main_out, const MonotoneConstraint& m,
                           double delta);

// All monotone constraints with unit scales: component values plus parameter
// gradients through both the main and twin forwards.
struct MonoPenalty {
    std::vector<double> components;
    double total = 0.0;
    ParamGrads grads;
};
MonoPenalty mono_penalty(const CorrectionMap& map, const Eigen::MatrixXd& base_batch,
                         const CausalKnowledge& k, double delta);

// Moment-matching utility surrogate: squared mean gap plus squared Frobenius
// covariance gap (population covariance) plus a mean squared identity
// deviation from the uncorrected batch.
struct UtilitySurrogate {
    double value = 0.0;
    double moment_part = 0.0;
    double id_part = 0.0;
    Eigen::MatrixXd grad;  // wrt the corrected batch
};
UtilitySurrogate utility_surrogate(const Eigen::MatrixXd& real_batch,
                                   const Eigen::MatrixXd& corrected_batch,
                                   const Eigen::MatrixXd& base_batch, double id_weight);

}  // namespace cw
