#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"

#include "causalwrap/base_gen.hpp"
#include "causalwrap/errors.hpp"
#include "causalwrap/trainer.hpp"

using namespace cw;

namespace {

Table make_real(int n, std::uint64_t seed) {
    Rng rng(seed);
    Table t;
    t.schema = {{"x0", ColumnKind::Continuous},
                {"x1", ColumnKind::Continuous},
                {"x2", ColumnKind::Binary}};
    t.rows.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        const double x0 = rng.normal();
        const double x1 = 2.0 * x0 + 0.5 * rng.normal();
        const double x2 = rng.bernoulli(1.0 / (1.0 + std::exp(-x0))) ? 1.0 : 0.0;
        t.rows.row(i) << x0, x1, x2;
    }
    return t;
}

CausalKnowledge make_know() {
    CausalKnowledge k;
    k.trusted = {{0, 1}};
    k.forbidden = {{0, 2}};
    k.monotone = {{0, 1, {}, 1}};
    return k;
}

AlmConfig small_cfg() {
    AlmConfig cfg;
    cfg.hidden = {8};
    cfg.k_outer = 2;
    cfg.t_inner = 3;
    cfg.batch_size = 16;
    cfg.pair_cap = 4;
    cfg.seed = 7;
    return cfg;
}

struct Fixture {
    Table raw;
    Table real;  // standardized copy
    StandardizeStats stats;
    CausalKnowledge know;
    std::unique_ptr<BaseSampler> base;
};

Fixture make_fixture(int n = 300) {
    Fixture f;
    f.raw = make_real(n, 11);
    f.real = f.raw;
    f.stats = standardize(f.real);
    f.know = make_know();
    f.base = noisy_bootstrap(f.raw, 0.25);
    return f;
}

double map_max_diff(const CorrectionMap& a, const CorrectionMap& b) {
    REQUIRE(a.W.size() == b.W.size());
    double worst = 0.0;
    for (std::size_t l = 0; l < a.W.size(); ++l) {
        worst = std::max(worst, (a.W[l] - b.W[l]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (a.b[l] - b.b[l]).cwiseAbs().maxCoeff());
    }
    return worst;
}

// Deterministic rows, no rng consumption; binary column behaviour is set by
// the mode so each branch of the generate() marginal rule can be exercised.
class PatternSampler final : public BaseSampler {
public:
    enum class Mode { MatchedBinary, ShiftedBinary, OutOfRange };

    PatternSampler(std::vector<ColumnSchema> schema, Mode mode) : mode_(mode) {
        schema_ = std::move(schema);
        spec_ = "test:pattern";
    }

    Table draw(int n, Rng&) const override {
        Table t;
        t.schema = schema_;
        t.provenance = Provenance::BaseSynthetic;
        t.rows.resize(n, static_cast<Eigen::Index>(schema_.size()));
        for (int i = 0; i < n; ++i) {
            t.rows(i, 0) = std::sin(0.7 * i);
            t.rows(i, 1) = std::cos(0.3 * i);
            switch (mode_) {
                case Mode::MatchedBinary: t.rows(i, 2) = i % 2; break;
                case Mode::ShiftedBinary: t.rows(i, 2) = i % 4 == 0 ? 1.0 : 0.0; break;
                case Mode::OutOfRange: t.rows(i, 2) = 1.3; break;
            }
        }
        return t;
    }

private:
    Mode mode_;
};

// Clean bootstrap rows for the first ok draws, NaN afterwards.
class NanSampler final : public BaseSampler {
public:
    NanSampler(const Table& pool, int ok) : pool_(pool), ok_(ok) {
        schema_ = pool.schema;
        spec_ = "test:nan";
    }

    Table draw(int n, Rng& rng) const override {
        Table t;
        t.schema = schema_;
        t.provenance = Provenance::BaseSynthetic;
        t.rows.resize(n, pool_.rows.cols());
        if (++calls_ > ok_) {
            t.rows.setConstant(std::numeric_limits<double>::quiet_NaN());
            return t;
        }
        for (int i = 0; i < n; ++i) {
            t.rows.row(i) = pool_.rows.row(static_cast<Eigen::Index>(
                rng.uniform_int(static_cast<std::uint64_t>(pool_.rows.rows()))));
        }
        return t;
    }

private:
    Table pool_;
    int ok_;
    mutable int calls_ = 0;
};

}  // namespace

TEST_CASE("dual update adds lambda-scaled measurements then grows lambda") {
    DualState d;
    d.mu = {0.0, 1.0};
    d.last_omega = {0.2, 0.05};
    d.lambda = 1.0;
    dual_update(d, 1.5, 1e4);
    CHECK(d.mu[0] == 0.2);
    CHECK(d.mu[1] == 1.05);
    CHECK(d.lambda == 1.5);

    d.lambda = 9000.0;
    dual_update(d, 1.5, 1e4);
    CHECK(d.lambda == 1e4);
    CHECK(d.mu[0] == doctest::Approx(0.2 + 9000.0 * 0.2));
}

TEST_CASE("config validation rejects out-of-range values") {
    CHECK_NOTHROW(validate_alm_config(AlmConfig{}));

    AlmConfig zero_outer;
    zero_outer.k_outer = 0;
    CHECK_NOTHROW(validate_alm_config(zero_outer));

    const auto bad = [](auto&& mutate) {
        AlmConfig c;
        mutate(c);
        CHECK_THROWS_AS(validate_alm_config(c), ValidationError);
    };
    bad([](AlmConfig& c) { c.lambda0 = 0.0; });
    bad([](AlmConfig& c) { c.rho = 0.9; });
    bad([](AlmConfig& c) { c.k_outer = -1; });
    bad([](AlmConfig& c) { c.t_inner = 0; });
    bad([](AlmConfig& c) { c.batch_size = 3; });
    bad([](AlmConfig& c) { c.lr = 0.0; });
    bad([](AlmConfig& c) { c.delta = 0.0; });
    bad([](AlmConfig& c) { c.id_weight = -0.1; });
    bad([](AlmConfig& c) { c.alpha = -1.0; });
    bad([](AlmConfig& c) { c.beta = -1.0; });
    bad([](AlmConfig& c) { c.pair_cap = 0; });
    bad([](AlmConfig& c) { c.lambda_cap = 0.0; });
    bad([](AlmConfig& c) { c.fixed_lambda = 0.0; });
    bad([](AlmConfig& c) { c.hidden.clear(); });
    bad([](AlmConfig& c) { c.hidden = {32, 0}; });
}

TEST_CASE("config json round trips every field") {
    AlmConfig cfg;
    cfg.lambda0 = 0.5;
    cfg.rho = 2.0;
    cfg.lr = 1e-3;
    cfg.k_outer = 7;
    cfg.t_inner = 11;
    cfg.batch_size = 64;
    cfg.delta = 0.25;
    cfg.id_weight = 0.05;
    cfg.alpha = 0.0;
    cfg.beta = 2.0;
    cfg.seed = 1234567890123ULL;
    cfg.hidden = {16, 8, 4};
    cfg.pair_cap = 5;
    cfg.lambda_cap = 500.0;

    nlohmann::json j = alm_config_to_json(cfg);
    CHECK(!j.contains("fixed_lambda"));
    const AlmConfig back = alm_config_from_json(j);
    CHECK(back.lambda0 == cfg.lambda0);
    CHECK(back.rho == cfg.rho);
    CHECK(back.lr == cfg.lr);
    CHECK(back.k_outer == cfg.k_outer);
    CHECK(back.t_inner == cfg.t_inner);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.delta == cfg.delta);
    CHECK(back.id_weight == cfg.id_weight);
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.beta == cfg.beta);
    CHECK(back.seed == cfg.seed);
    CHECK(!back.fixed_lambda);
    CHECK(back.hidden == cfg.hidden);
    CHECK(back.pair_cap == cfg.pair_cap);
    CHECK(back.lambda_cap == cfg.lambda_cap);

    cfg.fixed_lambda = 2.5;
    const AlmConfig fixed = alm_config_from_json(alm_config_to_json(cfg));
    REQUIRE(fixed.fixed_lambda.has_value());
    CHECK(*fixed.fixed_lambda == 2.5);

    nlohmann::json extra = alm_config_to_json(cfg);
    extra["typo"] = 1;
    CHECK_THROWS_AS(alm_config_from_json(extra), ValidationError);

    nlohmann::json partial = {{"k_outer", 3}, {"seed", 9}};
    const AlmConfig sparse = alm_config_from_json(partial);
    CHECK(sparse.k_outer == 3);
    CHECK(sparse.seed == 9);
    CHECK(sparse.batch_size == AlmConfig{}.batch_size);
}

TEST_CASE("zero outer iterations leaves the map an exact identity") {
    Fixture f = make_fixture();
    AlmConfig cfg = small_cfg();
    cfg.k_outer = 0;

    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);
    CHECK(!r.aborted);
    CHECK(r.outer_done == 0);
    CHECK(r.log.entries.empty());
    CHECK(r.duals.lambda == cfg.lambda0);

    const Eigen::MatrixXd probe = f.real.rows.topRows(20);
    const Eigen::MatrixXd out = forward(r.map, probe);
    CHECK((out - probe).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("same seed reproduces training bitwise") {
    Fixture f = make_fixture();
    const AlmConfig cfg = small_cfg();
    const TrainResult a = train(f.real, f.stats, *f.base, f.know, cfg);
    const TrainResult b = train(f.real, f.stats, *f.base, f.know, cfg);

    CHECK(!a.aborted);
    CHECK(map_max_diff(a.map, b.map) == 0.0);
    CHECK(a.rng_state == b.rng_state);
    CHECK(a.duals.mu == b.duals.mu);
    CHECK(a.duals.last_omega == b.duals.last_omega);
    REQUIRE(a.log.entries.size() == b.log.entries.size());
    for (std::size_t i = 0; i < a.log.entries.size(); ++i) {
        CHECK(a.log.entry_json(a.log.entries[i]) == b.log.entry_json(b.log.entries[i]));
    }
}

TEST_CASE("training emits one entry per step plus one per outer") {
    Fixture f = make_fixture();
    const AlmConfig cfg = small_cfg();
    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);

    CHECK(!r.aborted);
    CHECK(r.outer_done == cfg.k_outer);
    REQUIRE(r.log.component_names ==
            std::vector<std::string>{"ci:x0->x2", "mono:x0->x1"});
    REQUIRE(static_cast<int>(r.log.entries.size()) == cfg.k_outer * (cfg.t_inner + 1));

    REQUIRE(r.edge_models.size() == 1);
    CHECK(r.edge_models[0].target == 1);
    CHECK(!r.edge_models[0].logistic);

    std::size_t pos = 0;
    int gstep = 0;
    for (int k = 1; k <= cfg.k_outer; ++k) {
        for (int t = 1; t <= cfg.t_inner; ++t) {
            const auto& e = r.log.entries[pos++];
            CHECK(e.kind == "step");
            CHECK(e.step == ++gstep);
            CHECK(e.outer == k);
            CHECK(std::isfinite(e.loss));
            CHECK(std::isfinite(e.utility));
        }
        const auto& o = r.log.entries[pos++];
        CHECK(o.kind == "outer");
        CHECK(o.outer == k);
    }
}

TEST_CASE("lambda follows the geometric schedule and multipliers never shrink") {
    Fixture f = make_fixture();
    AlmConfig cfg = small_cfg();
    cfg.k_outer = 3;
    cfg.t_inner = 2;
    cfg.lambda0 = 1.0;
    cfg.rho = 2.0;

    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);
    REQUIRE(!r.aborted);
    CHECK(r.duals.lambda == 8.0);

    std::vector<double> prev_mu(r.duals.mu.size(), -1.0);
    for (const auto& e : r.log.entries) {
        const double during = std::pow(cfg.rho, e.outer - 1);
        if (e.kind == "step") {
            CHECK(e.lambda == during);
        } else {
            CHECK(e.lambda == 2.0 * during);
            for (std::size_t c = 0; c < e.mu.size(); ++c) {
                CHECK(e.mu[c] >= prev_mu[c]);
                CHECK(e.omega[c] >= 0.0);
                prev_mu[c] = e.mu[c];
            }
        }
    }
}

TEST_CASE("fixed lambda mode keeps multipliers at zero") {
    Fixture f = make_fixture();
    AlmConfig cfg = small_cfg();
    cfg.fixed_lambda = 3.0;

    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);
    REQUIRE(!r.aborted);
    CHECK(r.duals.lambda == 3.0);
    for (double m : r.duals.mu) CHECK(m == 0.0);
    for (const auto& e : r.log.entries) {
        CHECK(e.lambda == 3.0);
        for (double m : e.mu) CHECK(m == 0.0);
    }
}

TEST_CASE("resume from a checkpoint matches uninterrupted training bitwise") {
    Fixture f = make_fixture();
    AlmConfig cfg4 = small_cfg();
    cfg4.k_outer = 4;
    const TrainResult fresh = train(f.real, f.stats, *f.base, f.know, cfg4);
    REQUIRE(!fresh.aborted);

    AlmConfig cfg2 = cfg4;
    cfg2.k_outer = 2;
    const TrainResult half = train(f.real, f.stats, *f.base, f.know, cfg2);
    const Checkpoint ck =
        checkpoint_from_json(checkpoint_to_json(make_checkpoint(half, f.real, f.stats, f.know, cfg2)));

    const TrainResult resumed = train(f.real, f.stats, *f.base, f.know, cfg4, &ck);
    REQUIRE(!resumed.aborted);
    CHECK(resumed.outer_done == 4);
    CHECK(map_max_diff(resumed.map, fresh.map) == 0.0);
    CHECK(resumed.duals.mu == fresh.duals.mu);
    CHECK(resumed.duals.last_omega == fresh.duals.last_omega);
    CHECK(resumed.duals.lambda == fresh.duals.lambda);
    CHECK(resumed.rng_state == fresh.rng_state);
    CHECK(resumed.adam.t == fresh.adam.t);

    REQUIRE(!resumed.log.entries.empty());
    CHECK(resumed.log.entries.front().outer == 3);
    CHECK(resumed.log.entries.front().step == 2 * cfg4.t_inner + 1);

    SUBCASE("resume refuses a different schema") {
        Checkpoint wrong = ck;
        wrong.schema[0].name = "other";
        CHECK_THROWS_AS(train(f.real, f.stats, *f.base, f.know, cfg4, &wrong), ValidationError);
    }
    SUBCASE("resume refuses a different constraint count") {
        CausalKnowledge fewer = f.know;
        fewer.monotone.clear();
        CHECK_THROWS_AS(train(f.real, f.stats, *f.base, fewer, cfg4, &ck), ValidationError);
    }
}

TEST_CASE("checkpoint json and file io round trip bitwise") {
    Fixture f = make_fixture();
    const AlmConfig cfg = small_cfg();
    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);
    const Checkpoint ck = make_checkpoint(r, f.real, f.stats, f.know, cfg);

    const std::string path = "ck_roundtrip_test.json";
    save_checkpoint(ck, path);
    const Checkpoint back = load_checkpoint(path);
    std::remove(path.c_str());

    CHECK(map_max_diff(back.map, ck.map) == 0.0);
    CHECK(back.adam.t == ck.adam.t);
    for (std::size_t l = 0; l < ck.adam.mW.size(); ++l) {
        CHECK((back.adam.mW[l] - ck.adam.mW[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.adam.vW[l] - ck.adam.vW[l]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(back.duals.mu == ck.duals.mu);
    CHECK(back.duals.last_omega == ck.duals.last_omega);
    CHECK(back.duals.lambda == ck.duals.lambda);
    CHECK(back.outer_done == ck.outer_done);
    CHECK(back.rng_state == ck.rng_state);
    CHECK((back.stats.mean - ck.stats.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.stats.std - ck.stats.std).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.stats.scaled == ck.stats.scaled);
    CHECK(back.real_binary_mean == ck.real_binary_mean);
    CHECK(back.knowledge == ck.knowledge);
    CHECK(back.config == ck.config);

    SUBCASE("tampered schema is rejected by the stored hash") {
        nlohmann::json j = checkpoint_to_json(ck);
        j["schema"][0]["name"] = "tampered";
        CHECK_THROWS_AS(checkpoint_from_json(j), ValidationError);
    }
    SUBCASE("missing and malformed files raise io errors") {
        CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.json"), IoError);
        const std::string bad = "ck_garbage_test.json";
        std::ofstream(bad) << "not json {";
        CHECK_THROWS_AS(load_checkpoint(bad), IoError);
        std::remove(bad.c_str());
    }
}

TEST_CASE("nan draws abort training onto the last finished outer iteration") {
    Fixture f = make_fixture();
    AlmConfig cfg = small_cfg();
    cfg.k_outer = 3;
    cfg.t_inner = 3;
    // 4 draws per outer (3 inner + 1 eval): poison everything after outer 1.
    const NanSampler nan_base(f.raw, 4);

    CorrectionMap at_one;
    const auto hook = [&](int k, const CorrectionMap& m) {
        if (k == 1) at_one = m;
    };
    const TrainResult r = train(f.real, f.stats, nan_base, f.know, cfg, nullptr, hook);

    CHECK(r.aborted);
    CHECK(!r.abort_reason.empty());
    CHECK(r.outer_done == 1);
    REQUIRE(!at_one.W.empty());
    CHECK(map_max_diff(r.map, at_one) == 0.0);
}

TEST_CASE("empty knowledge trains on the surrogate alone") {
    Fixture f = make_fixture();
    AlmConfig cfg = small_cfg();
    cfg.k_outer = 1;
    const CausalKnowledge none;

    const TrainResult r = train(f.real, f.stats, *f.base, none, cfg);
    CHECK(!r.aborted);
    CHECK(r.log.component_names.empty());
    CHECK(r.edge_models.empty());
    CHECK(r.duals.mu.empty());
    for (const auto& e : r.log.entries) CHECK(std::isfinite(e.loss));
}

TEST_CASE("training log writes parseable jsonl") {
    Fixture f = make_fixture();
    const AlmConfig cfg = small_cfg();
    const TrainResult r = train(f.real, f.stats, *f.base, f.know, cfg);

    const std::string path = "train_log_test.jsonl";
    r.log.write_jsonl(path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK((j.at("kind") == "step" || j.at("kind") == "outer"));
        CHECK(j.at("omega").contains("ci:x0->x2"));
        CHECK(j.at("mu").contains("mono:x0->x1"));
        ++lines;
    }
    in.close();
    std::remove(path.c_str());
    CHECK(lines == r.log.entries.size());
}

TEST_CASE("generate round trips continuous columns through an identity map") {
    Table raw = make_real(200, 21);
    raw.schema[2] = {"x2", ColumnKind::Continuous};  // make every column continuous
    for (int i = 0; i < raw.n(); ++i) raw.rows(i, 2) += 0.25 * std::sin(i);
    Table real = raw;
    const StandardizeStats stats = standardize(real);
    const auto base = noisy_bootstrap(raw, 0.1);

    AlmConfig cfg = small_cfg();
    cfg.k_outer = 0;
    const TrainResult r = train(real, stats, *base, CausalKnowledge{}, cfg);
    const Checkpoint ck = make_checkpoint(r, real, stats, CausalKnowledge{}, cfg);

    Rng gen_rng(5);
    const Table out = generate(ck, *base, 100, gen_rng);
    CHECK(out.provenance == Provenance::Corrected);
    CHECK(out.n() == 100);

    Rng same(5);
    const Table expected = base->draw(100, same);
    CHECK((out.rows - expected.rows).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(generate(ck, *base, 0, gen_rng), ValidationError);
}

TEST_CASE("generate binary handling follows the marginal match rule") {
    Fixture f = make_fixture(400);
    // Make the real binary marginal exactly one half.
    for (int i = 0; i < f.raw.n(); ++i) f.raw.rows(i, 2) = i % 2;
    f.real = f.raw;
    f.stats = standardize(f.real);

    AlmConfig cfg = small_cfg();
    cfg.k_outer = 0;
    const auto ident = [&](const BaseSampler& base) {
        const TrainResult r = train(f.real, f.stats, base, CausalKnowledge{}, cfg);
        return make_checkpoint(r, f.real, f.stats, CausalKnowledge{}, cfg);
    };

    SUBCASE("a matching binary base column passes through untouched") {
        const PatternSampler base(f.real.schema, PatternSampler::Mode::MatchedBinary);
        const Checkpoint ck = ident(base);
        Rng rng(3);
        const Table out = generate(ck, base, 500, rng);
        for (int i = 0; i < out.n(); ++i) CHECK(out.rows(i, 2) == static_cast<double>(i % 2));
    }

    SUBCASE("a shifted binary marginal is recalibrated by bernoulli resampling") {
        const PatternSampler base(f.real.schema, PatternSampler::Mode::ShiftedBinary);
        const Checkpoint ck = ident(base);
        Rng rng(3);
        const int n = 4000;
        const Table out = generate(ck, base, n, rng);
        // Base probabilities {1,0,0,0} shift by +0.25 and clamp to {1,.25,.25,.25}.
        const double expected = 0.4375;
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK((out.rows(i, 2) == 0.0 || out.rows(i, 2) == 1.0));
            mean += out.rows(i, 2);
        }
        mean /= n;
        const double se = std::sqrt(expected * (1.0 - expected) / n);
        CHECK(std::abs(mean - expected) <= 3.0 * se);
    }

    SUBCASE("out-of-range binary outputs are clamped before resampling") {
        const PatternSampler base(f.real.schema, PatternSampler::Mode::OutOfRange);
        const Checkpoint ck = ident(base);
        Rng rng(3);
        const int n = 4000;
        const Table out = generate(ck, base, n, rng);
        double mean = 0.0;
        for (int i = 0; i < n; ++i) {
            CHECK((out.rows(i, 2) == 0.0 || out.rows(i, 2) == 1.0));
            mean += out.rows(i, 2);
        }
        mean /= n;
        const double se = std::sqrt(0.5 * 0.5 / n);
        CHECK(std::abs(mean - 0.5) <= 3.0 * se);
    }

    SUBCASE("generate refuses a schema that differs from the checkpoint") {
        const PatternSampler base(f.real.schema, PatternSampler::Mode::MatchedBinary);
        const Checkpoint ck = ident(base);
        auto renamed = f.real.schema;
        renamed[1].name = "different";
        const PatternSampler other(renamed, PatternSampler::Mode::MatchedBinary);
        Rng rng(3);
        CHECK_THROWS_AS(generate(ck, other, 10, rng), ValidationError);
    }
}
