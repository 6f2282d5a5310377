#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "doctest.h"

#include "causalwrap/bench.hpp"
#include "causalwrap/correction_map.hpp"
#include "causalwrap/errors.hpp"
#include "causalwrap/penalties.hpp"
#include "causalwrap/rng.hpp"
#include "causalwrap/table.hpp"

using namespace cw;

namespace {

// Shrunk everything: the point is exercising the plumbing, not the science.
BenchConfig tiny_config() {
    BenchConfig cfg;
    cfg.families = {ScmFamily::LG};
    cfg.bases = {"bootstrap:0.5"};
    cfg.seeds = {1};
    cfg.d = 5;
    cfg.n_train = 240;
    cfg.m_synth = 200;
    cfg.n_test = 60;
    cfg.n_mc_ate = 2000;
    cfg.alm.k_outer = 1;
    cfg.alm.t_inner = 8;
    cfg.alm.batch_size = 64;
    cfg.alm.hidden = {16};
    return cfg;
}

const CellMetrics* find_cell(const std::vector<CellMetrics>& cells, const std::string& arm,
                             const std::string& setting) {
    for (const auto& c : cells) {
        if (c.arm == arm && c.setting == setting) return &c;
    }
    return nullptr;
}

int count_lines(const std::string& s) {
    return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("gap closed follows the caption formula and its blank rules") {
    // (e_base - e_cw) / (e_base - e_oracle)
    auto g = gap_closed(1.0, 0.9, 0.5);
    REQUIRE(g.has_value());
    CHECK(*g == doctest::Approx(0.2).epsilon(1e-12));

    g = gap_closed(0.3, 0.12, 0.06);
    REQUIRE(g.has_value());
    CHECK(*g == doctest::Approx((0.3 - 0.12) / (0.3 - 0.06)).epsilon(1e-12));

    // no headroom: oracle at or above base
    CHECK_FALSE(gap_closed(1.0, 0.5, 1.0).has_value());
    CHECK_FALSE(gap_closed(1.0, 0.5, 1.2).has_value());

    // headroom under 5% of base is blanked as unstable
    CHECK_FALSE(gap_closed(1.0, 0.97, 0.96).has_value());
    // exactly 5% is kept; the wrapper may overshoot the oracle (ratio > 1)
    g = gap_closed(1.0, 0.9, 0.95);
    REQUIRE(g.has_value());
    CHECK(*g == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("delta pct is the relative error change in percent") {
    CHECK(delta_pct(0.2, 0.1) == doctest::Approx(-50.0));
    CHECK(delta_pct(0.1, 0.2) == doctest::Approx(100.0));
    CHECK(delta_pct(0.5, 0.5) == doctest::Approx(0.0));
    CHECK(std::isnan(delta_pct(0.0, 0.1)));
    CHECK(std::isnan(delta_pct(-1.0, 0.1)));
}

TEST_CASE("bench config survives a json round trip") {
    BenchConfig cfg = tiny_config();
    cfg.families = {ScmFamily::MT, ScmFamily::NLA};
    cfg.bases = {"copula", "bootstrap:0.25"};
    cfg.seeds = {7, 9};
    cfg.reveal_fraction = 0.75;
    cfg.n_mono = 3;
    cfg.corrupt_fraction = 0.1;
    cfg.jobs = 2;
    cfg.alm.lr = 0.007;
    cfg.alm.fixed_lambda = 2.5;

    const BenchConfig back = bench_config_from_json(bench_config_to_json(cfg));
    CHECK(back.families == cfg.families);
    CHECK(back.bases == cfg.bases);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.d == cfg.d);
    CHECK(back.n_train == cfg.n_train);
    CHECK(back.m_synth == cfg.m_synth);
    CHECK(back.n_test == cfg.n_test);
    CHECK(back.n_mc_ate == cfg.n_mc_ate);
    CHECK(back.reveal_fraction == cfg.reveal_fraction);
    CHECK(back.n_mono == cfg.n_mono);
    CHECK(back.corrupt_fraction == cfg.corrupt_fraction);
    CHECK(back.jobs == cfg.jobs);
    CHECK(back.alm.lr == cfg.alm.lr);
    REQUIRE(back.alm.fixed_lambda.has_value());
    CHECK(*back.alm.fixed_lambda == 2.5);
}

TEST_CASE("bench config rejects unknown fields and bad values") {
    nlohmann::json j = bench_config_to_json(tiny_config());
    j["bogus"] = 1;
    CHECK_THROWS_AS(bench_config_from_json(j), ValidationError);

    j = bench_config_to_json(tiny_config());
    j["d"] = 2;
    CHECK_THROWS_AS(bench_config_from_json(j), ValidationError);

    j = bench_config_to_json(tiny_config());
    j["bases"] = std::vector<std::string>{"ctgan"};
    CHECK_THROWS_AS(bench_config_from_json(j), ValidationError);

    BenchConfig cfg = tiny_config();
    cfg.seeds.clear();
    CHECK_THROWS_AS(validate_bench_config(cfg), ValidationError);
    cfg = tiny_config();
    cfg.reveal_fraction = 1.5;
    CHECK_THROWS_AS(validate_bench_config(cfg), ValidationError);
}

TEST_CASE("violation probe scores residual dependence and map slopes") {
    // two standardized columns, the second a noisy copy of the first
    Rng rng(404);
    const int n = 400;
    Table real;
    real.schema = {{"a", ColumnKind::Continuous}, {"b", ColumnKind::Continuous}};
    real.rows.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        const double a = rng.normal();
        real.rows(i, 0) = a;
        real.rows(i, 1) = a + 0.2 * rng.normal();
    }
    CausalKnowledge know;
    know.forbidden = {{0, 1}};
    const std::vector<EdgeModel> models = fit_edge_models(real, know);  // no trusted parents

    const ViolationProbe dep = violation_probe(nullptr, real.rows, know, models, 0.5);
    CHECK(dep.mono == 0.0);
    CHECK(dep.ci > 0.0);
    CHECK(dep.total == dep.ci);

    // independent columns score far lower
    Table indep = real;
    for (int i = 0; i < n; ++i) indep.rows(i, 1) = rng.normal();
    const ViolationProbe ind = violation_probe(nullptr, indep.rows, know, models, 0.5);
    CHECK(ind.ci < 0.2 * dep.ci);

    // identity map adds no monotone hinge
    CausalKnowledge mono_know;
    mono_know.forbidden = {{0, 1}};
    mono_know.monotone = {{0, 1, {}, 1}};
    Rng mrng(7);
    const CorrectionMap identity = init_correction_map(2, {8}, mrng);
    const ViolationProbe id_probe =
        violation_probe(&identity, real.rows, mono_know, models, 0.5);
    CHECK(id_probe.mono == 0.0);

    // a map that pushes column 1 down as column 0 grows violates the
    // increasing constraint
    CorrectionMap bad = identity;
    bad.W[0].setZero();
    bad.W[0](0, 0) = 1.0;   // hidden unit reads column 0
    bad.W[1].setZero();
    bad.W[1](1, 0) = -2.0;  // output column 1 moves against it
    const ViolationProbe bad_probe =
        violation_probe(&bad, real.rows, mono_know, models, 0.5);
    CHECK(bad_probe.mono > 0.0);
    CHECK(bad_probe.total == doctest::Approx(bad_probe.ci + bad_probe.mono));

    const auto bw = residual_bandwidths(real.rows, models);
    REQUIRE(bw.size() == 2);
    CHECK(bw[0] > 0.0);
    CHECK(bw[1] > 0.0);
}

TEST_CASE("cell csv escapes embedded delimiters") {
    CellMetrics m;
    m.family = "LG";
    m.base = "bootstrap:0.5";
    m.arm = "cw";
    m.setting = "alpha=1;beta=0";
    m.seed = 3;
    m.note = "failed, said \"why\"";
    m.failed = true;
    const std::string csv = cells_to_csv({m});
    CHECK(csv.find("\"failed, said \"\"why\"\"\"") != std::string::npos);
    CHECK(csv.rfind("family,base,arm,seed,setting,", 0) == 0);
}

TEST_CASE("benchmark runs are deterministic across repeats and thread counts") {
    BenchConfig cfg = tiny_config();
    const BenchResult r1 = run_benchmark(cfg);
    const BenchResult r2 = run_benchmark(cfg);
    CHECK(r1.aggregate_csv == r2.aggregate_csv);
    CHECK(r1.cells_csv == r2.cells_csv);
    CHECK(r1.plot_csv == r2.plot_csv);

    cfg.jobs = 3;
    const BenchResult r3 = run_benchmark(cfg);
    CHECK(r3.aggregate_csv == r1.aggregate_csv);
    CHECK(r3.cells_csv == r1.cells_csv);
    CHECK(r3.plot_csv == r1.plot_csv);

    // one family, one base, one seed: oracle + base + cw cells
    REQUIRE(r1.cells.size() == 3);
    for (const auto& c : r1.cells) {
        CHECK_FALSE(c.failed);
        CHECK(std::isfinite(c.ate_error));
        CHECK(std::isfinite(c.mmd));
    }
    // header, LG row, Overall row
    CHECK(count_lines(r1.aggregate_csv) == 3);
    CHECK(r1.aggregate_csv.find("\nLG,bootstrap:0.5,") != std::string::npos);
    CHECK(r1.aggregate_csv.find("\nOverall,bootstrap:0.5,") != std::string::npos);
    CHECK(r1.manifest.at("kind").get<std::string>() == "benchmark");
    CHECK(r1.manifest.contains("config"));
}

TEST_CASE("equal ablation settings from different sweeps give equal cells") {
    BenchConfig cfg = tiny_config();
    // corrupt sweep pins reveal at 0.5, so its corrupt=0 point is the same
    // configuration as the reveal sweep's 0.5 point
    const AblationResult wrong = run_ablation(AblationKind::WrongEdges, cfg);
    const AblationResult frac = run_ablation(AblationKind::KnowledgeFraction, cfg);

    for (const char* arm : {"base", "cw"}) {
        const CellMetrics* a = find_cell(wrong.cells, arm, "corrupt=0");
        const CellMetrics* b = find_cell(frac.cells, arm, "reveal=0.5");
        REQUIRE(a != nullptr);
        REQUIRE(b != nullptr);
        CHECK(a->ate_error == b->ate_error);
        CHECK(a->mmd == b->mmd);
        CHECK(a->jsd == b->jsd);
        CHECK(a->tstr == b->tstr);
        CHECK(a->ci_pass == b->ci_pass);
        CHECK(a->violation == b->violation);
    }

    // 4 sweep points x 1 seed x {base, cw}
    CHECK(wrong.cells.size() == 8);
    CHECK(count_lines(wrong.aggregate_csv) == 5);
    CHECK(wrong.plot_csv.find("ablation_wrong_edges_ate_error,corrupt=0.3,cw,") !=
          std::string::npos);
    CHECK(wrong.manifest.at("kind").get<std::string>() == "ablation:wrong_edges");
}

TEST_CASE("dropping forbidden pairs from training keeps the eval yardstick") {
    BenchConfig cfg = tiny_config();
    const AblationResult res = run_ablation(AblationKind::E0, cfg);
    CHECK(res.cells.size() == 4);
    const CellMetrics* full = find_cell(res.cells, "cw", "e0=full");
    const CellMetrics* empty = find_cell(res.cells, "cw", "e0=empty");
    REQUIRE(full != nullptr);
    REQUIRE(empty != nullptr);
    CHECK_FALSE(full->failed);
    CHECK_FALSE(empty->failed);
    // both rows still score ci_pass/violation against the full forbidden set
    CHECK(std::isfinite(empty->ci_pass));
    CHECK(std::isfinite(empty->violation));
    CHECK(empty->violation > 0.0);
    // the two settings share the same seed-derived base arm
    const CellMetrics* b_full = find_cell(res.cells, "base", "e0=full");
    const CellMetrics* b_empty = find_cell(res.cells, "base", "e0=empty");
    REQUIRE(b_full != nullptr);
    REQUIRE(b_empty != nullptr);
    CHECK(b_full->mmd == b_empty->mmd);
    CHECK(b_full->ate_error == b_empty->ate_error);
}
