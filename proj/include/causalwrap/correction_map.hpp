#pragma once

#include <Eigen/Dense>
#include <vector>

#include "causalwrap/rng.hpp"

namespace cw {

// Residual correction network y = x + N(x): tanh MLP with a zero-initialized
// output layer, so a freshly initialized map is exactly the identity.
struct CorrectionMap {
    std::vector<Eigen::MatrixXd> W;  // hidden layers then the output layer
    std::vector<Eigen::VectorXd> b;

    int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
    int layers() const { return static_cast<int>(W.size()); }
    std::vector<int> hidden_sizes() const;
    long parameter_count() const;
};

// Hidden weights scaled-uniform in +-1/sqrt(fan_in); all biases and the
// output layer zero.
CorrectionMap init_correction_map(int d, const std::vector<int>& hidden, Rng& rng);

struct ForwardTape {
    Eigen::MatrixXd input;                     // m x d
    std::vector<Eigen::MatrixXd> activations;  // tanh outputs per hidden layer
};

// tape is optional; pass one to enable backward().
Eigen::MatrixXd forward(const CorrectionMap& map, const Eigen::MatrixXd& batch,
                        ForwardTape* tape = nullptr);

struct ParamGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    void add(const ParamGrads& other);
    bool all_finite() const;
};

ParamGrads zero_grads(const CorrectionMap& map);

// Exact reverse pass. Returns the gradient wrt the input batch (the residual
// path contributes d_out unchanged) and accumulates parameter gradients.
Eigen::MatrixXd backward(const CorrectionMap& map, const ForwardTape& tape,
                         const Eigen::MatrixXd& d_out, ParamGrads& grads);

}  // namespace cw
