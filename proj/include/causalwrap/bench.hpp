#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "causalwrap/knowledge.hpp"
#include "causalwrap/penalties.hpp"
#include "causalwrap/scm.hpp"
#include "causalwrap/trainer.hpp"

namespace cw {

inline constexpr const char* kToolVersion = "0.1.0";

// One simulation-benchmark run: every SCM family crossed with every base
// generator and seed, plus a per-family oracle arm.
struct BenchConfig {
    std::vector<ScmFamily> families{ScmFamily::LG, ScmFamily::NLA, ScmFamily::MT};
    std::vector<std::string> bases{"bootstrap:0.5", "copula"};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int d = 10;
    int n_train = 5000;
    int m_synth = 5000;
    int n_test = 1000;
    int n_mc_ate = 100000;
    double reveal_fraction = 0.5;
    int n_mono = 2;
    double corrupt_fraction = 0.0;
    // Per-cell seed is derived, the seed field here is ignored. The default
    // learning rate is lowered for the built-in bases: they sit much closer
    // to the real law than a heavyweight generator, so the optimizer's own
    // stationary noise at 5e-2 would swamp the discrepancy being corrected.
    AlmConfig alm = [] { AlmConfig a; a.lr = 5e-3; return a; }();
    int jobs = 1;
};

void validate_bench_config(const BenchConfig& cfg);
nlohmann::json bench_config_to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const nlohmann::json& j);

// Improvement column: (e_cw - e_base) / e_base * 100 on seed-averaged errors.
double delta_pct(double e_base, double e_cw);

// Fraction of the oracle gap closed, (e_base - e_cw) / (e_base - e_oracle).
// Empty when the oracle gives no headroom (e_oracle >= e_base) or when the
// headroom (e_base - e_oracle) / e_base is below 5% (unstable ratio).
std::optional<double> gap_closed(double e_base, double e_cw, double e_oracle);

// Raw constraint violation probed on one standardized batch: summed residual
// dependence over forbidden pairs plus, when a map is given, the monotone
// hinge of the map on that batch. map == nullptr scores the batch as-is.
struct ViolationProbe {
    double ci = 0.0;
    double mono = 0.0;
    double total = 0.0;
};
ViolationProbe violation_probe(const CorrectionMap* map, const Eigen::MatrixXd& std_batch,
                               const CausalKnowledge& know,
                               const std::vector<EdgeModel>& models, double delta,
                               const std::vector<double>& resid_sigma2 = {});

// Median-heuristic bandwidth per residual column; freeze these to make
// probes comparable across arms and settings.
std::vector<double> residual_bandwidths(const Eigen::MatrixXd& std_batch,
                                        const std::vector<EdgeModel>& models);

struct CellMetrics {
    std::string family;
    std::string base;     // "-" for the oracle arm
    std::string arm;      // "base", "cw", "oracle"
    std::string setting;  // ablation sweep point, empty for the benchmark
    std::uint64_t seed = 0;
    double ate_error = 0.0;
    double mmd = 0.0;
    double jsd = 0.0;
    double tstr = 0.0;
    double ci_pass = 0.0;
    double violation = 0.0;
    bool failed = false;
    std::string note;
};

std::string cells_to_csv(const std::vector<CellMetrics>& cells);

struct BenchResult {
    std::vector<CellMetrics> cells;  // deterministic enumeration order
    std::string aggregate_csv;
    std::string cells_csv;
    std::string plot_csv;  // long form for figures
    nlohmann::json manifest;
};

BenchResult run_benchmark(const BenchConfig& cfg);

enum class AblationKind { ConstraintType, KnowledgeFraction, WrongEdges, AlmVsFixed, E0 };

AblationKind ablation_kind_from_name(const std::string& name);
std::string ablation_kind_name(AblationKind kind);

// Single-family (linear-Gaussian) sweep against the first configured base.
struct AblationResult {
    std::vector<CellMetrics> cells;
    std::string aggregate_csv;
    std::string cells_csv;
    std::string plot_csv;
    nlohmann::json manifest;
};

AblationResult run_ablation(AblationKind kind, const BenchConfig& cfg);

}  // namespace cw
