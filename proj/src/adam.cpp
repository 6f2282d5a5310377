#include "causalwrap/adam.hpp"

#include <cmath>

#include "causalwrap/errors.hpp"

namespace cw {

AdamState init_adam(const CorrectionMap& map) {
    AdamState s;
    for (std::size_t l = 0; l < map.W.size(); ++l) {
        s.mW.push_back(Eigen::MatrixXd::Zero(map.W[l].rows(), map.W[l].cols()));
        s.vW.push_back(Eigen::MatrixXd::Zero(map.W[l].rows(), map.W[l].cols()));
        s.mb.push_back(Eigen::VectorXd::Zero(map.b[l].size()));
        s.vb.push_back(Eigen::VectorXd::Zero(map.b[l].size()));
    }
    return s;
}

void adam_step(CorrectionMap& map, AdamState& state, const ParamGrads& grads,
               const AdamConfig& cfg) {
    if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t l = 0; l < map.W.size(); ++l) {
        state.mW[l] = cfg.beta1 * state.mW[l] + (1.0 - cfg.beta1) * grads.dW[l];
        state.vW[l] = cfg.beta2 * state.vW[l].array() + (1.0 - cfg.beta2) * grads.dW[l].array().square();
        map.W[l].array() -= cfg.lr * (state.mW[l].array() / bc1) /
                            ((state.vW[l].array() / bc2).sqrt() + cfg.eps);
        state.mb[l] = cfg.beta1 * state.mb[l] + (1.0 - cfg.beta1) * grads.db[l];
        state.vb[l] = cfg.beta2 * state.vb[l].array() + (1.0 - cfg.beta2) * grads.db[l].array().square();
        map.b[l].array() -= cfg.lr * (state.mb[l].array() / bc1) /
                            ((state.vb[l].array() / bc2).sqrt() + cfg.eps);
    }
}

}  // namespace cw
