#include "causalwrap/correction_map.hpp"

#include <cmath>

#include "causalwrap/errors.hpp"

namespace cw {

std::vector<int> CorrectionMap::hidden_sizes() const {
    std::vector<int> h;
    for (std::size_t l = 0; l + 1 < W.size(); ++l) h.push_back(static_cast<int>(W[l].rows()));
    return h;
}

long CorrectionMap::parameter_count() const {
    long n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
}

CorrectionMap init_correction_map(int d, const std::vector<int>& hidden, Rng& rng) {
    if (d <= 0) throw ValidationError("init_correction_map: dimension must be positive");
    if (hidden.empty()) throw ValidationError("init_correction_map: needs at least one hidden layer");
    CorrectionMap map;
    int fan_in = d;
    for (int h : hidden) {
        if (h <= 0) throw ValidationError("init_correction_map: hidden width must be positive");
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd W(h, fan_in);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < fan_in; ++j) W(i, j) = rng.uniform(-scale, scale);
        }
        map.W.push_back(std::move(W));
        map.b.push_back(Eigen::VectorXd::Zero(h));
        fan_in = h;
    }
    map.W.push_back(Eigen::MatrixXd::Zero(d, fan_in));
    map.b.push_back(Eigen::VectorXd::Zero(d));
    return map;
}

Eigen::MatrixXd forward(const CorrectionMap& map, const Eigen::MatrixXd& batch, ForwardTape* tape) {
    if (static_cast<int>(batch.cols()) != map.input_dim()) {
        throw ValidationError("forward: batch width does not match map dimension");
    }
    if (tape) {
        tape->input = batch;
        tape->activations.clear();
    }
    Eigen::MatrixXd h = batch;
    const int n_hidden = map.layers() - 1;
    for (int l = 0; l < n_hidden; ++l) {
        h = ((h * map.W[static_cast<std::size_t>(l)].transpose()).rowwise() +
             map.b[static_cast<std::size_t>(l)].transpose())
                .array()
                .tanh();
        if (tape) tape->activations.push_back(h);
    }
    const auto& Wf = map.W.back();
    const auto& bf = map.b.back();
    return batch + ((h * Wf.transpose()).rowwise() + bf.transpose()).matrix();
}

void ParamGrads::add(const ParamGrads& other) {
    for (std::size_t l = 0; l < dW.size(); ++l) {
        dW[l] += other.dW[l];
        db[l] += other.db[l];
    }
}

bool ParamGrads::all_finite() const {
    for (std::size_t l = 0; l < dW.size(); ++l) {
        if (!dW[l].allFinite() || !db[l].allFinite()) return false;
    }
    return true;
}

ParamGrads zero_grads(const CorrectionMap& map) {
    ParamGrads g;
    for (std::size_t l = 0; l < map.W.size(); ++l) {
        g.dW.push_back(Eigen::MatrixXd::Zero(map.W[l].rows(), map.W[l].cols()));
        g.db.push_back(Eigen::VectorXd::Zero(map.b[l].size()));
    }
    return g;
}

Eigen::MatrixXd backward(const CorrectionMap& map, const ForwardTape& tape,
                         const Eigen::MatrixXd& d_out, ParamGrads& grads) {
    const int n_hidden = map.layers() - 1;
    if (static_cast<int>(tape.activations.size()) != n_hidden) {
        throw ValidationError("backward: tape does not match map architecture");
    }
    // Output layer.
    const Eigen::MatrixXd& a_last = tape.activations.back();
    grads.dW.back() += d_out.transpose() * a_last;
    grads.db.back() += d_out.colwise().sum().transpose();
    Eigen::MatrixXd d_h = d_out * map.W.back();

    for (int l = n_hidden - 1; l >= 0; --l) {
        const Eigen::MatrixXd& a = tape.activations[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd d_z = d_h.array() * (1.0 - a.array().square());
        const Eigen::MatrixXd& below =
            l == 0 ? tape.input : tape.activations[static_cast<std::size_t>(l - 1)];
        grads.dW[static_cast<std::size_t>(l)] += d_z.transpose() * below;
        grads.db[static_cast<std::size_t>(l)] += d_z.colwise().sum().transpose();
        d_h = d_z * map.W[static_cast<std::size_t>(l)];
    }
    return d_out + d_h;  // residual path plus network path
}

}  // namespace cw
