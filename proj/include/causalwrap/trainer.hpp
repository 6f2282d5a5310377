#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "causalwrap/adam.hpp"
#include "causalwrap/base_gen.hpp"
#include "causalwrap/correction_map.hpp"
#include "causalwrap/knowledge.hpp"
#include "causalwrap/penalties.hpp"
#include "causalwrap/table.hpp"

namespace cw {

struct AlmConfig {
    double lambda0 = 1.0;
    double rho = 1.5;
    double lr = 5e-2;
    int k_outer = 20;
    int t_inner = 200;
    int batch_size = 256;
    double delta = 0.5;
    double id_weight = 0.1;
    double alpha = 1.0;  // scales every dependence component
    double beta = 1.0;   // scales every monotonicity component
    std::uint64_t seed = 0;
    std::optional<double> fixed_lambda;  // linear-penalty ablation: no duals, no growth
    std::vector<int> hidden = {64, 64};
    int pair_cap = 32;
    double lambda_cap = 1e4;
};

void validate_alm_config(const AlmConfig& cfg);
nlohmann::json alm_config_to_json(const AlmConfig& cfg);
AlmConfig alm_config_from_json(const nlohmann::json& j);

// One multiplier per constraint component, in component order: forbidden
// pairs first, then monotone constraints.
struct DualState {
    std::vector<double> mu;
    std::vector<double> last_omega;  // most recent measurement per component
    double lambda = 1.0;
};

// mu_c += lambda * last_omega_c for every component, then grow lambda.
void dual_update(DualState& duals, double rho, double lambda_cap);

struct TrainLogEntry {
    std::string kind;  // "step" after an inner update, "outer" after a dual update
    int step = 0;      // global inner step counter
    int outer = 0;     // 1-based outer iteration
    double lambda = 0.0;
    double utility = 0.0;
    double loss = 0.0;
    std::vector<double> omega;
    std::vector<double> mu;
};

struct TrainingLog {
    std::vector<std::string> component_names;
    std::vector<TrainLogEntry> entries;

    nlohmann::json entry_json(const TrainLogEntry& e) const;
    void write_jsonl(const std::string& path) const;
};

// Everything needed to continue training bit-exactly or to generate later.
struct Checkpoint {
    CorrectionMap map;
    AdamState adam;
    DualState duals;
    int outer_done = 0;
    std::string rng_state;
    std::vector<ColumnSchema> schema;
    StandardizeStats stats;
    std::vector<double> real_binary_mean;  // per column; 0 for continuous
    nlohmann::json knowledge;              // column-name form
    nlohmann::json config;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Called after each dual update with the outer index and the current map.
using OuterHook = std::function<void(int, const CorrectionMap&)>;

struct TrainResult {
    CorrectionMap map;
    AdamState adam;
    DualState duals;
    TrainingLog log;
    std::vector<EdgeModel> edge_models;
    std::string rng_state;
    int outer_done = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Augmented-Lagrangian loop: K_outer rounds of T_inner Adam steps on
// utility + sum_c(mu_c Omega_c + lambda/2 Omega_c^2), dual updates on a
// fresh 4x evaluation batch, then lambda growth. real must already be
// standardized; base draws are standardized with the same stats.
TrainResult train(const Table& real, const StandardizeStats& stats, const BaseSampler& base,
                  const CausalKnowledge& know, const AlmConfig& cfg,
                  const Checkpoint* resume = nullptr, const OuterHook& hook = {});

Checkpoint make_checkpoint(const TrainResult& r, const Table& real, const StandardizeStats& stats,
                           const CausalKnowledge& know, const AlmConfig& cfg);

// Pushes base samples through the trained map and back to data space.
// Binary columns: a base column already on {0,1} with mean within 0.02 of
// the real mean passes through; anything else is clamped to [0,1],
// mean-shifted to the real marginal, and Bernoulli-sampled.
Table generate(const Checkpoint& ckpt, const BaseSampler& base, int n, Rng& rng);

}  // namespace cw
