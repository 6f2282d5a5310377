#pragma once

#include "causalwrap/correction_map.hpp"

namespace cw {

struct AdamConfig {
    double lr = 5e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> mW, vW;
    std::vector<Eigen::VectorXd> mb, vb;
    long t = 0;  // completed steps
};

AdamState init_adam(const CorrectionMap& map);

// One bias-corrected update. Throws NumericError on non-finite gradients;
// zero gradients leave parameters unchanged while still advancing t.
void adam_step(CorrectionMap& map, AdamState& state, const ParamGrads& grads,
               const AdamConfig& cfg);

}  // namespace cw
