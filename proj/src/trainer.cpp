#include "causalwrap/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "causalwrap/errors.hpp"
#include "causalwrap/log.hpp"

namespace cw {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto data = j.at("data").get<std::vector<double>>();
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ValidationError("checkpoint: matrix size mismatch");
    }
    Eigen::MatrixXd m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

std::vector<std::string> component_names(const CausalKnowledge& know,
                                         const std::vector<ColumnSchema>& schema) {
    std::vector<std::string> names;
    for (const auto& [a, b] : know.forbidden) {
        names.push_back("ci:" + schema[static_cast<std::size_t>(a)].name + "->" +
                        schema[static_cast<std::size_t>(b)].name);
    }
    for (const auto& m : know.monotone) {
        names.push_back("mono:" + schema[static_cast<std::size_t>(m.i)].name + "->" +
                        schema[static_cast<std::size_t>(m.j)].name);
    }
    return names;
}

Eigen::MatrixXd sample_real_batch(const Table& real, int m, Rng& rng) {
    Eigen::MatrixXd out(m, real.d());
    if (real.n() >= m) {
        const auto idx = rng.sample_indices(real.n(), m);
        for (int i = 0; i < m; ++i) out.row(i) = real.rows.row(idx[static_cast<std::size_t>(i)]);
    } else {
        for (int i = 0; i < m; ++i) {
            out.row(i) = real.rows.row(static_cast<Eigen::Index>(
                rng.uniform_int(static_cast<std::uint64_t>(real.n()))));
        }
    }
    return out;
}

Eigen::MatrixXd standardized_base(const BaseSampler& base, int m, const StandardizeStats& stats,
                                  Rng& rng) {
    Table t = base.draw(m, rng);
    apply_standardize(t.rows, stats);
    return std::move(t.rows);
}

std::vector<int> choose_pairs(int n_ci, int cap, Rng& rng) {
    if (n_ci <= cap) {
        std::vector<int> all(static_cast<std::size_t>(n_ci));
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    return rng.sample_indices(n_ci, cap);
}

struct Snapshot {
    CorrectionMap map;
    AdamState adam;
    DualState duals;
    std::string rng_state;
    int outer_done = 0;
};

}  // namespace

void validate_alm_config(const AlmConfig& cfg) {
    if (!(cfg.lambda0 > 0.0)) throw ValidationError("config: lambda0 must be positive");
    if (!(cfg.rho >= 1.0)) throw ValidationError("config: rho must be at least 1");
    if (cfg.k_outer < 0) throw ValidationError("config: k_outer must be nonnegative");
    if (cfg.t_inner < 1) throw ValidationError("config: t_inner must be positive");
    if (cfg.batch_size < 4) throw ValidationError("config: batch_size must be at least 4");
    if (!(cfg.lr > 0.0)) throw ValidationError("config: lr must be positive");
    if (!(cfg.delta > 0.0)) throw ValidationError("config: delta must be positive");
    if (cfg.id_weight < 0.0) throw ValidationError("config: id_weight must be nonnegative");
    if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw ValidationError("config: alpha/beta must be nonnegative");
    if (cfg.pair_cap < 1) throw ValidationError("config: pair_cap must be positive");
    if (!(cfg.lambda_cap > 0.0)) throw ValidationError("config: lambda_cap must be positive");
    if (cfg.fixed_lambda && !(*cfg.fixed_lambda > 0.0)) {
        throw ValidationError("config: fixed_lambda must be positive");
    }
    if (cfg.hidden.empty()) throw ValidationError("config: need at least one hidden layer");
    for (int h : cfg.hidden) {
        if (h < 1) throw ValidationError("config: hidden widths must be positive");
    }
}

nlohmann::json alm_config_to_json(const AlmConfig& cfg) {
    nlohmann::json j;
    j["lambda0"] = cfg.lambda0;
    j["rho"] = cfg.rho;
    j["lr"] = cfg.lr;
    j["k_outer"] = cfg.k_outer;
    j["t_inner"] = cfg.t_inner;
    j["batch_size"] = cfg.batch_size;
    j["delta"] = cfg.delta;
    j["id_weight"] = cfg.id_weight;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["seed"] = cfg.seed;
    if (cfg.fixed_lambda) j["fixed_lambda"] = *cfg.fixed_lambda;
    j["hidden"] = cfg.hidden;
    j["pair_cap"] = cfg.pair_cap;
    j["lambda_cap"] = cfg.lambda_cap;
    return j;
}

AlmConfig alm_config_from_json(const nlohmann::json& j) {
    AlmConfig cfg;
    const auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lambda0", cfg.lambda0);
    get("rho", cfg.rho);
    get("lr", cfg.lr);
    get("k_outer", cfg.k_outer);
    get("t_inner", cfg.t_inner);
    get("batch_size", cfg.batch_size);
    get("delta", cfg.delta);
    get("id_weight", cfg.id_weight);
    get("alpha", cfg.alpha);
    get("beta", cfg.beta);
    get("seed", cfg.seed);
    if (j.contains("fixed_lambda") && !j.at("fixed_lambda").is_null()) {
        cfg.fixed_lambda = j.at("fixed_lambda").get<double>();
    }
    get("hidden", cfg.hidden);
    get("pair_cap", cfg.pair_cap);
    get("lambda_cap", cfg.lambda_cap);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        static const char* known[] = {"lambda0", "rho", "lr", "k_outer", "t_inner",
                                      "batch_size", "delta", "id_weight", "alpha", "beta",
                                      "seed", "fixed_lambda", "hidden", "pair_cap", "lambda_cap"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&key](const char* k) { return key == k; }) == std::end(known)) {
            throw ValidationError("config: unknown field '" + key + "'");
        }
    }
    validate_alm_config(cfg);
    return cfg;
}

void dual_update(DualState& duals, double rho, double lambda_cap) {
    for (std::size_t c = 0; c < duals.mu.size(); ++c) {
        duals.mu[c] += duals.lambda * duals.last_omega[c];
    }
    duals.lambda = std::min(rho * duals.lambda, lambda_cap);
}

nlohmann::json TrainingLog::entry_json(const TrainLogEntry& e) const {
    nlohmann::json j;
    j["kind"] = e.kind;
    j["step"] = e.step;
    j["outer"] = e.outer;
    j["lambda"] = e.lambda;
    if (e.kind == "step") {
        j["utility"] = e.utility;
        j["loss"] = e.loss;
    }
    nlohmann::json omega = nlohmann::json::object();
    nlohmann::json mu = nlohmann::json::object();
    for (std::size_t c = 0; c < component_names.size(); ++c) {
        omega[component_names[c]] = e.omega[c];
        mu[component_names[c]] = e.mu[c];
    }
    j["omega"] = omega;
    j["mu"] = mu;
    return j;
}

void TrainingLog::write_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("training log: cannot write '" + path + "'");
    for (const auto& e : entries) out << entry_json(e).dump() << "\n";
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
    nlohmann::json j;
    j["version"] = 1;
    j["schema_hash"] = schema_hash(c.schema);
    nlohmann::json schema = nlohmann::json::array();
    for (const auto& col : c.schema) {
        schema.push_back({{"name", col.name},
                          {"kind", col.kind == ColumnKind::Binary ? "binary" : "continuous"}});
    }
    j["schema"] = schema;

    nlohmann::json map;
    map["W"] = nlohmann::json::array();
    map["b"] = nlohmann::json::array();
    for (const auto& W : c.map.W) map["W"].push_back(matrix_to_json(W));
    for (const auto& b : c.map.b) map["b"].push_back(vector_to_json(b));
    j["map"] = map;

    nlohmann::json adam;
    adam["t"] = c.adam.t;
    adam["mW"] = nlohmann::json::array();
    adam["vW"] = nlohmann::json::array();
    adam["mb"] = nlohmann::json::array();
    adam["vb"] = nlohmann::json::array();
    for (const auto& m : c.adam.mW) adam["mW"].push_back(matrix_to_json(m));
    for (const auto& m : c.adam.vW) adam["vW"].push_back(matrix_to_json(m));
    for (const auto& v : c.adam.mb) adam["mb"].push_back(vector_to_json(v));
    for (const auto& v : c.adam.vb) adam["vb"].push_back(vector_to_json(v));
    j["adam"] = adam;

    j["duals"] = {{"mu", c.duals.mu}, {"last_omega", c.duals.last_omega}, {"lambda", c.duals.lambda}};
    j["outer_done"] = c.outer_done;
    j["rng_state"] = c.rng_state;
    j["stats"] = {{"mean", vector_to_json(c.stats.mean)},
                  {"std", vector_to_json(c.stats.std)},
                  {"scaled", c.stats.scaled}};
    j["real_binary_mean"] = c.real_binary_mean;
    j["knowledge"] = c.knowledge;
    j["config"] = c.config;
    return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != 1) throw ValidationError("checkpoint: unsupported version");
    Checkpoint c;
    for (const auto& col : j.at("schema")) {
        c.schema.push_back({col.at("name").get<std::string>(),
                            col.at("kind").get<std::string>() == "binary" ? ColumnKind::Binary
                                                                          : ColumnKind::Continuous});
    }
    if (j.at("schema_hash").get<std::uint64_t>() != schema_hash(c.schema)) {
        throw ValidationError("checkpoint: schema hash does not match stored schema");
    }
    for (const auto& W : j.at("map").at("W")) c.map.W.push_back(matrix_from_json(W));
    for (const auto& b : j.at("map").at("b")) c.map.b.push_back(vector_from_json(b));
    const auto& adam = j.at("adam");
    c.adam.t = adam.at("t").get<long>();
    for (const auto& m : adam.at("mW")) c.adam.mW.push_back(matrix_from_json(m));
    for (const auto& m : adam.at("vW")) c.adam.vW.push_back(matrix_from_json(m));
    for (const auto& v : adam.at("mb")) c.adam.mb.push_back(vector_from_json(v));
    for (const auto& v : adam.at("vb")) c.adam.vb.push_back(vector_from_json(v));
    c.duals.mu = j.at("duals").at("mu").get<std::vector<double>>();
    c.duals.last_omega = j.at("duals").at("last_omega").get<std::vector<double>>();
    c.duals.lambda = j.at("duals").at("lambda").get<double>();
    c.outer_done = j.at("outer_done").get<int>();
    c.rng_state = j.at("rng_state").get<std::string>();
    c.stats.mean = vector_from_json(j.at("stats").at("mean"));
    c.stats.std = vector_from_json(j.at("stats").at("std"));
    c.stats.scaled = j.at("stats").at("scaled").get<std::vector<bool>>();
    c.real_binary_mean = j.at("real_binary_mean").get<std::vector<double>>();
    c.knowledge = j.at("knowledge");
    c.config = j.at("config");
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
    out << checkpoint_to_json(c).dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint: parse failure in '" + path + "': " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint: malformed '" + path + "': " + e.what());
    }
}

TrainResult train(const Table& real, const StandardizeStats& stats, const BaseSampler& base,
                  const CausalKnowledge& know, const AlmConfig& cfg, const Checkpoint* resume,
                  const OuterHook& hook) {
    validate_alm_config(cfg);
    validate_knowledge(know, real.d());
    if (base.schema().size() != real.schema.size()) {
        throw ValidationError("train: base sampler schema width differs from real data");
    }
    for (std::size_t j = 0; j < real.schema.size(); ++j) {
        if (base.schema()[j].name != real.schema[j].name) {
            throw ValidationError("train: base sampler schema does not match real data");
        }
    }
    if (know.empty()) {
        log::warn("knowledge is empty; training reduces to the utility surrogate alone");
    }

    const int d = real.d();
    const int n_ci = static_cast<int>(know.forbidden.size());
    const int n_mono = static_cast<int>(know.monotone.size());
    const int n_comp = n_ci + n_mono;
    const bool fixed = cfg.fixed_lambda.has_value();
    const bool use_ci = cfg.alpha > 0.0 && n_ci > 0;
    const bool use_mono = cfg.beta > 0.0 && n_mono > 0;

    TrainResult result;
    result.edge_models = fit_edge_models(real, know);
    result.log.component_names = component_names(know, real.schema);

    Rng rng(cfg.seed);
    CorrectionMap map;
    AdamState adam;
    DualState duals;
    int start_outer = 0;
    if (resume) {
        if (schema_hash(resume->schema) != schema_hash(real.schema)) {
            throw ValidationError("train: resume checkpoint was built for a different schema");
        }
        if (static_cast<int>(resume->duals.mu.size()) != n_comp) {
            throw ValidationError("train: resume checkpoint constraint count differs");
        }
        map = resume->map;
        adam = resume->adam;
        duals = resume->duals;
        rng.set_state(resume->rng_state);
        start_outer = resume->outer_done;
    } else {
        map = init_correction_map(d, cfg.hidden, rng);
        adam = init_adam(map);
        duals.mu.assign(static_cast<std::size_t>(n_comp), 0.0);
        duals.last_omega.assign(static_cast<std::size_t>(n_comp), 0.0);
        duals.lambda = fixed ? *cfg.fixed_lambda : cfg.lambda0;
    }

    AdamConfig adam_cfg;
    adam_cfg.lr = cfg.lr;

    Snapshot snap{map, adam, duals, rng.state(), start_outer};
    const auto restore = [&](const std::string& reason) {
        log::error("training aborted: " + reason + "; rolling back to the last finished outer iteration");
        result.map = snap.map;
        result.adam = snap.adam;
        result.duals = snap.duals;
        result.rng_state = snap.rng_state;
        result.outer_done = snap.outer_done;
        result.aborted = true;
        result.abort_reason = reason;
    };

    const double inv_m = 1.0 / static_cast<double>(cfg.batch_size);
    int gstep = start_outer * cfg.t_inner;

    for (int k = start_outer + 1; k <= cfg.k_outer; ++k) {
        std::vector<double> sigma2;  // per-column residual bandwidths, frozen within outer k
        for (int t = 1; t <= cfg.t_inner; ++t) {
            try {
                const Eigen::MatrixXd real_b = sample_real_batch(real, cfg.batch_size, rng);
                const Eigen::MatrixXd base_b = standardized_base(base, cfg.batch_size, stats, rng);
                ForwardTape tape;
                const Eigen::MatrixXd corrected = forward(map, base_b, &tape);
                if (!corrected.allFinite()) throw NumericError("non-finite corrected batch");

                const UtilitySurrogate util =
                    utility_surrogate(real_b, corrected, base_b, cfg.id_weight);
                Eigen::MatrixXd d_out = util.grad;
                double loss = util.value;
                ParamGrads grads = zero_grads(map);

                if (use_ci) {
                    ResidualTape rtape;
                    residualize(corrected, result.edge_models, &rtape);
                    if (t == 1) {
                        sigma2.resize(static_cast<std::size_t>(d));
                        for (int j = 0; j < d; ++j) {
                            sigma2[static_cast<std::size_t>(j)] = median_heuristic(rtape.residuals.col(j));
                        }
                    }
                    const auto idx = choose_pairs(n_ci, cfg.pair_cap, rng);
                    const auto pairs = ci_pairs(rtape.residuals, know, idx, sigma2);
                    for (std::size_t i = 0; i < pairs.size(); ++i) {
                        const int comp = idx[i];
                        const double v = cfg.alpha * pairs[i].value;
                        duals.last_omega[static_cast<std::size_t>(comp)] = v;
                        const double coeff =
                            fixed ? duals.lambda : duals.mu[static_cast<std::size_t>(comp)] + duals.lambda * v;
                        loss += fixed ? duals.lambda * v
                                      : duals.mu[static_cast<std::size_t>(comp)] * v + 0.5 * duals.lambda * v * v;
                        const double scale = coeff * cfg.alpha;
                        residual_col_backward(result.edge_models, rtape, pairs[i].a,
                                              scale * pairs[i].grad_a, d_out);
                        residual_col_backward(result.edge_models, rtape, pairs[i].b,
                                              scale * pairs[i].grad_b, d_out);
                    }
                }

                if (use_mono) {
                    for (int c = 0; c < n_mono; ++c) {
                        const auto& mc = know.monotone[static_cast<std::size_t>(c)];
                        const MonoComponent mono = mono_forward(map, base_b, corrected, mc, cfg.delta);
                        const int comp = n_ci + c;
                        const double v = cfg.beta * mono.value;
                        duals.last_omega[static_cast<std::size_t>(comp)] = v;
                        const double coeff =
                            fixed ? duals.lambda : duals.mu[static_cast<std::size_t>(comp)] + duals.lambda * v;
                        loss += fixed ? duals.lambda * v
                                      : duals.mu[static_cast<std::size_t>(comp)] * v + 0.5 * duals.lambda * v * v;
                        const Eigen::VectorXd slope =
                            (coeff * cfg.beta * static_cast<double>(mc.sign) * inv_m) * mono.active;
                        d_out.col(mc.j) += slope;
                        Eigen::MatrixXd d_twin = Eigen::MatrixXd::Zero(cfg.batch_size, d);
                        d_twin.col(mc.j) = -slope;
                        backward(map, mono.twin_tape, d_twin, grads);
                    }
                }

                if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
                backward(map, tape, d_out, grads);
                adam_step(map, adam, grads, adam_cfg);

                ++gstep;
                TrainLogEntry e;
                e.kind = "step";
                e.step = gstep;
                e.outer = k;
                e.lambda = duals.lambda;
                e.utility = util.value;
                e.loss = loss;
                e.omega = duals.last_omega;
                e.mu = duals.mu;
                result.log.entries.push_back(std::move(e));
            } catch (const NumericError& err) {
                restore(err.what());
                return result;
            }
        }

        try {
            const Eigen::MatrixXd eval_b = standardized_base(base, 4 * cfg.batch_size, stats, rng);
            const Eigen::MatrixXd corrected = forward(map, eval_b);
            if (!corrected.allFinite()) throw NumericError("non-finite corrected batch");
            if (use_ci) {
                const Eigen::MatrixXd resid = residualize(corrected, result.edge_models);
                const auto idx = choose_pairs(n_ci, cfg.pair_cap, rng);
                const auto pairs = ci_pairs(resid, know, idx, sigma2);
                for (std::size_t i = 0; i < pairs.size(); ++i) {
                    duals.last_omega[static_cast<std::size_t>(idx[i])] = cfg.alpha * pairs[i].value;
                }
            }
            if (use_mono) {
                for (int c = 0; c < n_mono; ++c) {
                    const auto& mc = know.monotone[static_cast<std::size_t>(c)];
                    const MonoComponent mono = mono_forward(map, eval_b, corrected, mc, cfg.delta);
                    duals.last_omega[static_cast<std::size_t>(n_ci + c)] = cfg.beta * mono.value;
                }
            }
            for (double v : duals.last_omega) {
                if (!std::isfinite(v)) throw NumericError("non-finite constraint measurement");
            }
        } catch (const NumericError& err) {
            restore(err.what());
            return result;
        }

        if (!fixed) dual_update(duals, cfg.rho, cfg.lambda_cap);

        TrainLogEntry e;
        e.kind = "outer";
        e.step = gstep;
        e.outer = k;
        e.lambda = duals.lambda;
        e.omega = duals.last_omega;
        e.mu = duals.mu;
        result.log.entries.push_back(std::move(e));

        snap = Snapshot{map, adam, duals, rng.state(), k};
        if (hook) hook(k, map);
    }

    result.map = std::move(map);
    result.adam = std::move(adam);
    result.duals = std::move(duals);
    result.rng_state = rng.state();
    result.outer_done = std::max(start_outer, cfg.k_outer);
    return result;
}

Checkpoint make_checkpoint(const TrainResult& r, const Table& real, const StandardizeStats& stats,
                           const CausalKnowledge& know, const AlmConfig& cfg) {
    Checkpoint c;
    c.map = r.map;
    c.adam = r.adam;
    c.duals = r.duals;
    c.outer_done = r.outer_done;
    c.rng_state = r.rng_state;
    c.schema = real.schema;
    c.stats = stats;
    c.real_binary_mean.assign(real.schema.size(), 0.0);
    for (int j = 0; j < real.d(); ++j) {
        if (real.schema[static_cast<std::size_t>(j)].kind == ColumnKind::Binary) {
            c.real_binary_mean[static_cast<std::size_t>(j)] = real.rows.col(j).mean();
        }
    }
    c.knowledge = knowledge_to_json(know, real.schema);
    c.config = alm_config_to_json(cfg);
    return c;
}

Table generate(const Checkpoint& ckpt, const BaseSampler& base, int n, Rng& rng) {
    if (n <= 0) throw ValidationError("generate: n must be positive");
    if (schema_hash(base.schema()) != schema_hash(ckpt.schema)) {
        throw ValidationError("generate: base sampler schema does not match the checkpoint");
    }
    const Table raw = base.draw(n, rng);
    Eigen::MatrixXd std_rows = raw.rows;
    apply_standardize(std_rows, ckpt.stats);
    Eigen::MatrixXd out = forward(ckpt.map, std_rows);
    invert_standardize(out, ckpt.stats);

    Table t;
    t.schema = ckpt.schema;
    t.provenance = Provenance::Corrected;
    t.rows = out;
    for (int j = 0; j < t.rows.cols(); ++j) {
        if (ckpt.schema[static_cast<std::size_t>(j)].kind != ColumnKind::Binary) continue;
        const double target = ckpt.real_binary_mean[static_cast<std::size_t>(j)];
        const auto base_col = raw.rows.col(j).array();
        const bool base_is_binary = ((base_col == 0.0) || (base_col == 1.0)).all();
        if (base_is_binary && std::abs(base_col.mean() - target) <= 0.02) {
            t.rows.col(j) = raw.rows.col(j);
            continue;
        }
        Eigen::ArrayXd p = out.col(j).array().min(1.0).max(0.0);
        p += target - p.mean();
        p = p.min(1.0).max(0.0);
        for (int i = 0; i < t.rows.rows(); ++i) {
            t.rows(i, j) = rng.uniform() < p(i) ? 1.0 : 0.0;
        }
    }
    return t;
}

}  // namespace cw
