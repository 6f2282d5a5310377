#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "causalwrap/estimators.hpp"
#include "causalwrap/knowledge.hpp"
#include "causalwrap/penalties.hpp"
#include "causalwrap/rng.hpp"
#include "causalwrap/table.hpp"

namespace cw {

// Biased squared maximum mean discrepancy with a multivariate RBF kernel.
// Both tables are subsampled to at most 2,000 rows (seeded, identical streams
// so equal tables keep a zero discrepancy), standardized by pooled stats, and
// the bandwidth is the pooled median heuristic. Never negative.
double mmd(const Table& real, const Table& syn, std::uint64_t seed = 0);

// Mean per-column Jensen-Shannon divergence, natural log. Binary columns
// compare Bernoulli laws exactly; continuous columns use 20 equal-width bins
// over the pooled range with add-one smoothing.
double jsd(const Table& real, const Table& syn);

struct TstrResult {
    double accuracy = 0.0;
    bool single_class = false;  // synthetic labels had one class; majority rule
};
// Train-on-synthetic test-on-real: logistic classifier on the synthetic
// table's non-label columns (standardized by synthetic stats), accuracy on
// the held-out real rows.
TstrResult tstr(const Table& real_test, const Table& syn_train, int label_col);

// Deterministic 80/20-style split by shuffled row indices.
std::pair<Table, Table> train_test_split(const Table& t, double test_fraction,
                                         std::uint64_t seed);

inline bool ci_pair_passes(double corr) { return std::abs(corr) < 0.08; }

struct CiPassResult {
    double rate = 1.0;
    bool empty = false;  // no forbidden pairs to check
};
// Fraction of forbidden pairs whose residuals (under the frozen edge models,
// in the standardized space the models were fit in) have absolute Pearson
// correlation under the strict 0.08 threshold.
CiPassResult ci_pass_rate(const Table& syn, const StandardizeStats& stats,
                          const CausalKnowledge& k, const std::vector<EdgeModel>& models);

struct EvalReport {
    double mmd = 0.0;
    double jsd = 0.0;
    double tstr = 0.0;
    bool tstr_single_class = false;
    double ci_pass = 1.0;
    bool ci_empty = false;
    std::optional<double> ate_error;
    std::optional<double> pehe;
    std::optional<double> ate_agreement;
    bool agreement_degenerate = false;
    std::uint64_t seed = 0;
    std::string real_provenance;
    std::string syn_provenance;
};

nlohmann::json eval_report_to_json(const EvalReport& r);

struct EvalSpec {
    int t_col = 0;
    int y_col = 0;
    int label_col = 0;
    std::vector<int> covariates;
    std::optional<double> true_ate;      // enables ate_error (tier-1 style)
    const Table* truth_ite = nullptr;    // enables pehe
    int ite_col = -1;
    bool with_agreement = false;         // tier-3 style
    std::uint64_t seed = 0;
};

// One evaluation cell: distributional metrics against the full real table,
// TSTR against the held-out split, structural and causal metrics as the spec
// enables them.
EvalReport assemble_report(const Table& real, const Table& real_test, const Table& syn,
                           const StandardizeStats& stats, const CausalKnowledge& know,
                           const std::vector<EdgeModel>& models, const EvalSpec& spec);

}  // namespace cw
