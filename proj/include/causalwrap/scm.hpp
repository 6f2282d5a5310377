#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "json.hpp"

#include "causalwrap/base_gen.hpp"
#include "causalwrap/rng.hpp"
#include "causalwrap/table.hpp"

namespace cw {

// Simulation families: LG linear-Gaussian, NLA nonlinear additive (tanh
// parents plus a small quadratic coupling), MT mixed-type (NLA continuous
// nodes plus logistic-link binary nodes).
enum class ScmFamily { LG, NLA, MT };

ScmFamily scm_family_from_name(const std::string& name);
std::string scm_family_name(ScmFamily family);

struct ScmNode {
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<int> parents;   // node ids, topologically earlier
    std::vector<double> coef;   // aligned with parents
};

struct Scm {
    ScmFamily family = ScmFamily::LG;
    int d = 0;
    std::vector<int> topo_order;  // topo_order[k] = node id in sampling position k
    std::vector<ScmNode> nodes;   // indexed by node id (= table column)
    double noise_sigma = 1.0;
    double quad_weight = 0.0;     // NLA/MT continuous mechanisms

    std::vector<std::pair<int, int>> edges() const;
    bool has_edge(int a, int b) const;
    std::vector<ColumnSchema> schema() const;  // x1..xd
    // Deterministic part of a node's mechanism (probability scale for binary).
    double mechanism_mean(int node, const Eigen::VectorXd& values) const;
};

struct RandomScmConfig {
    ScmFamily family = ScmFamily::LG;
    int d = 10;
    double expected_degree = 2.0;
};

// Uniform random topological order; each order-respecting pair becomes an
// edge with probability expected_degree/(d-1); coefficient magnitudes uniform
// in [0.5, 1.5] with random sign. MT marks floor(d/2) nodes binary.
Scm random_scm(const RandomScmConfig& cfg, Rng& rng);

struct Intervention {
    int node = -1;
    double value = 0.0;
};

// Ancestral sampling in topological order; intervened nodes are pinned to the
// given value with their mechanism severed.
Table ancestral_sample(const Scm& scm, int n, Rng& rng,
                       const std::vector<Intervention>& interventions = {},
                       Provenance provenance = Provenance::Real);

struct TreatmentOutcome {
    int t = -1;
    int y = -1;
};

// Outcome is the last node in topological order; treatment is its ancestor
// that appears earliest in the order. Errors when the sink has no ancestors.
TreatmentOutcome choose_treatment_outcome(const Scm& scm);

// Monte-Carlo interventional contrast E[y | do(t=v1)] - E[y | do(t=v0)].
double ground_truth_ate(const Scm& scm, int t, int y, int n_mc, Rng& rng,
                        double v1 = 1.0, double v0 = 0.0);

// Observational draw plus the per-row interventional contrast computed by
// replaying each row's exogenous noise under do(t=1) and do(t=0).
struct IteSample {
    Table table;
    Eigen::VectorXd tau;
};
IteSample sample_with_ite(const Scm& scm, int t, int y, int n, Rng& rng);

// Full-knowledge reference generator: draws straight from the true model.
std::unique_ptr<BaseSampler> oracle_sampler(const Scm& scm);

nlohmann::json scm_to_json(const Scm& scm);
Scm scm_from_json(const nlohmann::json& j);

}  // namespace cw
