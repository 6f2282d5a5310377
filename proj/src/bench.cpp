#include "causalwrap/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "causalwrap/base_gen.hpp"
#include "causalwrap/errors.hpp"
#include "causalwrap/estimators.hpp"
#include "causalwrap/hsic.hpp"
#include "causalwrap/log.hpp"
#include "causalwrap/metrics.hpp"

namespace cw {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr int kProbeRows = 1024;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void run_tasks(int n_tasks, int jobs, const std::function<void(int)>& fn) {
    jobs = std::clamp(jobs, 1, n_tasks);
    if (jobs <= 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Everything shared by the arms of one (family, seed, knowledge) cell.
struct CellContext {
    std::string canon;  // semantic identity; equal configs hash to equal streams
    std::string family_name;
    std::uint64_t seed = 0;
    Scm scm;
    int t = -1;
    int y = -1;
    double true_ate = 0.0;
    Table real;
    Table real_test;
    Table std_real;
    StandardizeStats stats;
    CausalKnowledge know_train;
    CausalKnowledge know_eval;
    std::vector<EdgeModel> models;
    std::vector<double> probe_sigma2;
    std::vector<int> covariates;
    double y_threshold = 0.0;
    bool y_binary = false;
};

std::string context_canon(const BenchConfig& cfg, ScmFamily family, std::uint64_t seed,
                          double reveal, double corrupt) {
    return scm_family_name(family) + "|" + std::to_string(cfg.d) + "|" + std::to_string(seed) +
           "|" + std::to_string(cfg.n_train) + "|" + std::to_string(cfg.n_test) + "|" +
           std::to_string(cfg.n_mc_ate) + "|" + num(reveal) + "|" +
           std::to_string(cfg.n_mono) + "|" + num(corrupt);
}

CellContext build_context(const BenchConfig& cfg, ScmFamily family, std::uint64_t seed,
                          double reveal, double corrupt) {
    CellContext ctx;
    ctx.family_name = scm_family_name(family);
    ctx.seed = seed;
    ctx.canon = context_canon(cfg, family, seed, reveal, corrupt);

    const std::string scm_key =
        ctx.family_name + "|" + std::to_string(cfg.d) + "|" + std::to_string(seed);
    bool found = false;
    for (int attempt = 0; attempt < 100 && !found; ++attempt) {
        Rng scm_rng(fnv1a("scm|" + scm_key + "|" + std::to_string(attempt)));
        RandomScmConfig scfg;
        scfg.family = family;
        scfg.d = cfg.d;
        ctx.scm = random_scm(scfg, scm_rng);
        try {
            const TreatmentOutcome to = choose_treatment_outcome(ctx.scm);
            ctx.t = to.t;
            ctx.y = to.y;
            found = true;
        } catch (const ValidationError&) {
            // Sink without ancestors: redraw deterministically.
        }
    }
    if (!found) throw ValidationError("bench: no usable simulation for " + scm_key);

    Rng truth_rng(fnv1a("truth|" + scm_key + "|" + std::to_string(cfg.n_mc_ate)));
    ctx.true_ate = ground_truth_ate(ctx.scm, ctx.t, ctx.y, cfg.n_mc_ate, truth_rng);

    Rng data_rng(fnv1a("data|" + scm_key + "|" + std::to_string(cfg.n_train)));
    ctx.real = ancestral_sample(ctx.scm, cfg.n_train, data_rng);
    Rng test_rng(fnv1a("test|" + scm_key + "|" + std::to_string(cfg.n_test)));
    ctx.real_test = ancestral_sample(ctx.scm, cfg.n_test, test_rng);

    Rng know_rng(fnv1a("know|" + ctx.canon));
    ctx.know_train = derive_knowledge_from_scm(ctx.scm, reveal, cfg.n_mono, corrupt, know_rng);
    ctx.know_eval = ctx.know_train;

    ctx.std_real = ctx.real;
    ctx.stats = standardize(ctx.std_real);
    ctx.models = fit_edge_models(ctx.std_real, ctx.know_eval);
    const int probe_n = std::min(kProbeRows, ctx.std_real.n());
    ctx.probe_sigma2 =
        residual_bandwidths(ctx.std_real.rows.topRows(probe_n), ctx.models);

    // Back-door adjustment set: pre-treatment variables only. Conditioning on
    // descendants of the treatment would block the very effect being measured.
    std::vector<bool> descendant(static_cast<std::size_t>(cfg.d), false);
    descendant[static_cast<std::size_t>(ctx.t)] = true;
    for (const int node : ctx.scm.topo_order) {
        if (descendant[static_cast<std::size_t>(node)]) continue;
        for (const int p : ctx.scm.nodes[static_cast<std::size_t>(node)].parents) {
            if (descendant[static_cast<std::size_t>(p)]) {
                descendant[static_cast<std::size_t>(node)] = true;
                break;
            }
        }
    }
    for (int j = 0; j < ctx.real.d(); ++j) {
        if (j != ctx.t && j != ctx.y && !descendant[static_cast<std::size_t>(j)]) {
            ctx.covariates.push_back(j);
        }
    }
    ctx.y_binary = ctx.real.schema[static_cast<std::size_t>(ctx.y)].kind == ColumnKind::Binary;
    std::vector<double> ys(ctx.real.rows.col(ctx.y).data(),
                           ctx.real.rows.col(ctx.y).data() + ctx.real.n());
    std::nth_element(ys.begin(), ys.begin() + ys.size() / 2, ys.end());
    ctx.y_threshold = ys[ys.size() / 2];
    return ctx;
}

// Label view for the classifier metric: the sink column becomes the label
// (thresholded at the real-train median when continuous) and is removed from
// the feature set so it cannot leak.
std::pair<Table, Table> classifier_views(const CellContext& ctx, const Table& syn) {
    const auto view = [&](const Table& t) {
        Table out;
        out.provenance = t.provenance;
        out.schema.push_back({"label", ColumnKind::Binary});
        for (int j = 0; j < t.d(); ++j) {
            if (j != ctx.y) out.schema.push_back(t.schema[static_cast<std::size_t>(j)]);
        }
        out.rows.resize(t.n(), t.d());
        for (int i = 0; i < t.n(); ++i) {
            const double y = t.rows(i, ctx.y);
            out.rows(i, 0) = ctx.y_binary ? y : (y > ctx.y_threshold ? 1.0 : 0.0);
            int col = 1;
            for (int j = 0; j < t.d(); ++j) {
                if (j != ctx.y) out.rows(i, col++) = t.rows(i, j);
            }
        }
        return out;
    };
    return {view(ctx.real_test), view(syn)};
}

CellMetrics eval_arm(const BenchConfig& cfg, const CellContext& ctx, const std::string& base,
                     const std::string& arm, const std::string& setting, const Table& syn,
                     const CorrectionMap* map, const BaseSampler* sampler) {
    CellMetrics m;
    m.family = ctx.family_name;
    m.base = base;
    m.arm = arm;
    m.setting = setting;
    m.seed = ctx.seed;
    m.ate_error = std::abs(ate_or(syn, ctx.t, ctx.y, ctx.covariates) - ctx.true_ate);
    m.mmd = mmd(ctx.real, syn, fnv1a("mmd|" + ctx.canon));
    m.jsd = jsd(ctx.real, syn);
    const auto [real_view, syn_view] = classifier_views(ctx, syn);
    m.tstr = tstr(real_view, syn_view, 0).accuracy;
    m.ci_pass = ci_pass_rate(syn, ctx.stats, ctx.know_eval, ctx.models).rate;

    if (map != nullptr && sampler != nullptr) {
        // Fixed standardized base probe so settings and arms stay comparable.
        Rng probe_rng(fnv1a("probe|" + ctx.canon + "|" + sampler->spec()));
        Table probe = sampler->draw(std::min(kProbeRows, cfg.m_synth), probe_rng);
        apply_standardize(probe.rows, ctx.stats);
        m.violation = violation_probe(map, probe.rows, ctx.know_eval, ctx.models,
                                      cfg.alm.delta, ctx.probe_sigma2)
                          .total;
    } else {
        Eigen::MatrixXd probe = syn.rows.topRows(std::min(kProbeRows, syn.n()));
        apply_standardize(probe, ctx.stats);
        m.violation =
            violation_probe(nullptr, probe, ctx.know_eval, ctx.models, cfg.alm.delta,
                            ctx.probe_sigma2)
                .total;
    }
    return m;
}

CellMetrics failed_cell(const CellContext& ctx, const std::string& base, const std::string& arm,
                        const std::string& setting, const std::string& why) {
    CellMetrics m;
    m.family = ctx.family_name;
    m.base = base;
    m.arm = arm;
    m.setting = setting;
    m.seed = ctx.seed;
    m.ate_error = m.mmd = m.jsd = m.tstr = m.ci_pass = m.violation = kNan;
    m.failed = true;
    m.note = why;
    return m;
}

std::string alm_digest(const AlmConfig& alm) {
    AlmConfig c = alm;
    c.seed = 0;  // the per-cell seed is derived from this digest
    return alm_config_to_json(c).dump();
}

CellMetrics run_cw_arm(const BenchConfig& cfg, const CellContext& ctx, const AlmConfig& alm_in,
                       const std::string& base_spec, const std::string& setting) {
    try {
        const auto sampler = make_base_sampler(base_spec, ctx.real);
        AlmConfig alm = alm_in;
        alm.seed = fnv1a("train|" + ctx.canon + "|" + base_spec + "|" + alm_digest(alm_in));
        const TrainResult r =
            train(ctx.std_real, ctx.stats, *sampler, ctx.know_train, alm);
        if (r.aborted) {
            return failed_cell(ctx, base_spec, "cw", setting,
                               "training aborted: " + r.abort_reason);
        }
        const Checkpoint ckpt = make_checkpoint(r, ctx.std_real, ctx.stats, ctx.know_train, alm);
        Rng gen_rng(fnv1a("generate|" + ctx.canon + "|" + base_spec));
        const Table syn = generate(ckpt, *sampler, cfg.m_synth, gen_rng);
        return eval_arm(cfg, ctx, base_spec, "cw", setting, syn, &r.map, sampler.get());
    } catch (const std::exception& e) {
        return failed_cell(ctx, base_spec, "cw", setting, e.what());
    }
}

CellMetrics run_base_arm(const BenchConfig& cfg, const CellContext& ctx,
                         const std::string& base_spec, const std::string& setting) {
    try {
        const auto sampler = make_base_sampler(base_spec, ctx.real);
        Rng rng(fnv1a("draw|" + ctx.canon + "|" + base_spec + "|base"));
        const Table syn = sampler->draw(cfg.m_synth, rng);
        return eval_arm(cfg, ctx, base_spec, "base", setting, syn, nullptr, nullptr);
    } catch (const std::exception& e) {
        return failed_cell(ctx, base_spec, "base", setting, e.what());
    }
}

CellMetrics run_oracle_arm(const BenchConfig& cfg, const CellContext& ctx) {
    try {
        Rng rng(fnv1a("draw|" + ctx.canon + "|oracle"));
        const Table syn = oracle_sampler(ctx.scm)->draw(cfg.m_synth, rng);
        return eval_arm(cfg, ctx, "-", "oracle", "", syn, nullptr, nullptr);
    } catch (const std::exception& e) {
        return failed_cell(ctx, "-", "oracle", "", e.what());
    }
}

struct ArmMean {
    double ate = kNan;
    double mmd = kNan;
    double jsd = kNan;
    double tstr = kNan;
    double ci = kNan;
    double violation = kNan;
    int count = 0;
};

ArmMean arm_mean(const std::vector<CellMetrics>& cells, const std::string& family,
                 const std::string& base, const std::string& arm, const std::string& setting) {
    ArmMean m;
    double ate = 0, mmd_s = 0, jsd_s = 0, tstr_s = 0, ci = 0, vio = 0;
    for (const auto& c : cells) {
        if (c.failed || c.family != family || c.base != base || c.arm != arm ||
            c.setting != setting) {
            continue;
        }
        ate += c.ate_error;
        mmd_s += c.mmd;
        jsd_s += c.jsd;
        tstr_s += c.tstr;
        ci += c.ci_pass;
        vio += c.violation;
        ++m.count;
    }
    if (m.count == 0) return m;
    const double n = m.count;
    m.ate = ate / n;
    m.mmd = mmd_s / n;
    m.jsd = jsd_s / n;
    m.tstr = tstr_s / n;
    m.ci = ci / n;
    m.violation = vio / n;
    return m;
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (const double x : v) s += x;
    return v.empty() ? kNan : s / static_cast<double>(v.size());
}

nlohmann::json make_manifest(const std::string& kind, const BenchConfig& cfg) {
    nlohmann::json j;
    j["kind"] = kind;
    j["tool_version"] = kToolVersion;
    j["config"] = bench_config_to_json(cfg);
    j["seeds"] = cfg.seeds;
    j["scm_reference"] = "streams derived by fnv1a over the config cell keys";
    j["timestamp"] = iso_timestamp();
    return j;
}

}  // namespace

void validate_bench_config(const BenchConfig& cfg) {
    if (cfg.families.empty()) throw ValidationError("bench: no families");
    if (cfg.bases.empty()) throw ValidationError("bench: no base generators");
    if (cfg.seeds.empty()) throw ValidationError("bench: no seeds");
    if (cfg.d < 3) throw ValidationError("bench: d must be at least 3");
    if (cfg.n_train < 50) throw ValidationError("bench: n_train must be at least 50");
    if (cfg.m_synth < 4) throw ValidationError("bench: m_synth must be at least 4");
    if (cfg.n_test < 10) throw ValidationError("bench: n_test must be at least 10");
    if (cfg.n_mc_ate < 100) throw ValidationError("bench: n_mc_ate must be at least 100");
    if (cfg.reveal_fraction < 0.0 || cfg.reveal_fraction > 1.0) {
        throw ValidationError("bench: reveal_fraction must lie in [0,1]");
    }
    if (cfg.corrupt_fraction < 0.0 || cfg.corrupt_fraction > 1.0) {
        throw ValidationError("bench: corrupt_fraction must lie in [0,1]");
    }
    if (cfg.n_mono < 0) throw ValidationError("bench: n_mono must be nonnegative");
    if (cfg.jobs < 1) throw ValidationError("bench: jobs must be positive");
    validate_alm_config(cfg.alm);
    for (const auto& b : cfg.bases) {
        if (b != "copula" && b.rfind("bootstrap:", 0) != 0 && b.rfind("file:", 0) != 0) {
            throw ValidationError("bench: unknown base spec '" + b + "'");
        }
    }
}

nlohmann::json bench_config_to_json(const BenchConfig& cfg) {
    nlohmann::json j;
    std::vector<std::string> fams;
    for (const auto f : cfg.families) fams.push_back(scm_family_name(f));
    j["families"] = fams;
    j["bases"] = cfg.bases;
    j["seeds"] = cfg.seeds;
    j["d"] = cfg.d;
    j["n_train"] = cfg.n_train;
    j["m_synth"] = cfg.m_synth;
    j["n_test"] = cfg.n_test;
    j["n_mc_ate"] = cfg.n_mc_ate;
    j["reveal_fraction"] = cfg.reveal_fraction;
    j["n_mono"] = cfg.n_mono;
    j["corrupt_fraction"] = cfg.corrupt_fraction;
    j["alm"] = alm_config_to_json(cfg.alm);
    j["jobs"] = cfg.jobs;
    return j;
}

BenchConfig bench_config_from_json(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "families", "bases",  "seeds",           "d",      "n_train",
        "m_synth",  "n_test", "n_mc_ate",        "reveal_fraction",
        "n_mono",   "corrupt_fraction", "alm",   "jobs"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("bench config: unknown field '" + key + "'");
        }
    }
    BenchConfig cfg;
    if (j.contains("families")) {
        cfg.families.clear();
        for (const auto& f : j.at("families")) {
            cfg.families.push_back(scm_family_from_name(f.get<std::string>()));
        }
    }
    if (j.contains("bases")) cfg.bases = j.at("bases").get<std::vector<std::string>>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("d")) cfg.d = j.at("d").get<int>();
    if (j.contains("n_train")) cfg.n_train = j.at("n_train").get<int>();
    if (j.contains("m_synth")) cfg.m_synth = j.at("m_synth").get<int>();
    if (j.contains("n_test")) cfg.n_test = j.at("n_test").get<int>();
    if (j.contains("n_mc_ate")) cfg.n_mc_ate = j.at("n_mc_ate").get<int>();
    if (j.contains("reveal_fraction")) cfg.reveal_fraction = j.at("reveal_fraction").get<double>();
    if (j.contains("n_mono")) cfg.n_mono = j.at("n_mono").get<int>();
    if (j.contains("corrupt_fraction")) {
        cfg.corrupt_fraction = j.at("corrupt_fraction").get<double>();
    }
    if (j.contains("alm")) cfg.alm = alm_config_from_json(j.at("alm"));
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    validate_bench_config(cfg);
    return cfg;
}

double delta_pct(double e_base, double e_cw) {
    if (!(e_base > 0.0)) return kNan;
    return (e_cw - e_base) / e_base * 100.0;
}

std::optional<double> gap_closed(double e_base, double e_cw, double e_oracle) {
    if (!(e_oracle < e_base)) return std::nullopt;
    if ((e_base - e_oracle) / e_base < 0.05) return std::nullopt;
    return (e_base - e_cw) / (e_base - e_oracle);
}

std::vector<double> residual_bandwidths(const Eigen::MatrixXd& std_batch,
                                        const std::vector<EdgeModel>& models) {
    const Eigen::MatrixXd resid = residualize(std_batch, models);
    std::vector<double> sigma2(static_cast<std::size_t>(resid.cols()));
    for (Eigen::Index j = 0; j < resid.cols(); ++j) {
        sigma2[static_cast<std::size_t>(j)] = median_heuristic(resid.col(j));
    }
    return sigma2;
}

ViolationProbe violation_probe(const CorrectionMap* map, const Eigen::MatrixXd& std_batch,
                               const CausalKnowledge& know,
                               const std::vector<EdgeModel>& models, double delta,
                               const std::vector<double>& resid_sigma2) {
    ViolationProbe out;
    const Eigen::MatrixXd scored = map != nullptr ? forward(*map, std_batch) : std_batch;
    if (!know.forbidden.empty()) {
        out.ci = ci_penalty(scored, models, know, resid_sigma2).total;
    }
    if (map != nullptr && !know.monotone.empty()) {
        out.mono = mono_penalty(*map, std_batch, know, delta).total;
    }
    out.total = out.ci + out.mono;
    return out;
}

std::string cells_to_csv(const std::vector<CellMetrics>& cells) {
    std::string out =
        "family,base,arm,seed,setting,ate_error,mmd,jsd,tstr,ci_pass,violation,failed,note\n";
    for (const auto& c : cells) {
        out += c.family + "," + csv_field(c.base) + "," + c.arm + "," + std::to_string(c.seed) +
               "," + csv_field(c.setting) + "," + csv_num(c.ate_error) + "," + csv_num(c.mmd) +
               "," + csv_num(c.jsd) + "," + csv_num(c.tstr) + "," + csv_num(c.ci_pass) + "," +
               csv_num(c.violation) + "," + (c.failed ? "1" : "0") + "," + csv_field(c.note) +
               "\n";
    }
    return out;
}

BenchResult run_benchmark(const BenchConfig& cfg) {
    validate_bench_config(cfg);
    const int n_ctx = static_cast<int>(cfg.families.size() * cfg.seeds.size());
    std::vector<CellContext> ctxs(static_cast<std::size_t>(n_ctx));
    run_tasks(n_ctx, cfg.jobs, [&](int i) {
        const auto family = cfg.families[static_cast<std::size_t>(i) / cfg.seeds.size()];
        const auto seed = cfg.seeds[static_cast<std::size_t>(i) % cfg.seeds.size()];
        ctxs[static_cast<std::size_t>(i)] =
            build_context(cfg, family, seed, cfg.reveal_fraction, cfg.corrupt_fraction);
        log::info("bench: prepared " + ctxs[static_cast<std::size_t>(i)].canon);
    });

    struct Unit {
        int ctx = 0;
        int base = -1;  // -1 oracle
        bool cw = false;
    };
    std::vector<Unit> units;
    for (int c = 0; c < n_ctx; ++c) {
        units.push_back({c, -1, false});
        for (int b = 0; b < static_cast<int>(cfg.bases.size()); ++b) {
            units.push_back({c, b, false});
            units.push_back({c, b, true});
        }
    }
    std::vector<CellMetrics> cells(units.size());
    run_tasks(static_cast<int>(units.size()), cfg.jobs, [&](int i) {
        const Unit& u = units[static_cast<std::size_t>(i)];
        const CellContext& ctx = ctxs[static_cast<std::size_t>(u.ctx)];
        if (u.base < 0) {
            cells[static_cast<std::size_t>(i)] = run_oracle_arm(cfg, ctx);
        } else if (u.cw) {
            cells[static_cast<std::size_t>(i)] =
                run_cw_arm(cfg, ctx, cfg.alm, cfg.bases[static_cast<std::size_t>(u.base)], "");
        } else {
            cells[static_cast<std::size_t>(i)] =
                run_base_arm(cfg, ctx, cfg.bases[static_cast<std::size_t>(u.base)], "");
        }
        const CellMetrics& m = cells[static_cast<std::size_t>(i)];
        log::info("bench: " + m.family + "/" + m.base + "/" + m.arm + " seed " +
                  std::to_string(m.seed) + (m.failed ? " FAILED " + m.note : " done"));
    });

    BenchResult res;
    res.cells = std::move(cells);
    res.cells_csv = cells_to_csv(res.cells);

    std::string agg =
        "family,base,e_base,e_cw,e_oracle,delta_pct,gap_closed,"
        "mmd_base,mmd_cw,jsd_base,jsd_cw,tstr_base,tstr_cw,ci_base,ci_cw,ci_oracle\n";
    std::string plot = "figure,x,series,value\n";
    const auto plot_row = [&](const std::string& fig, const std::string& x,
                              const std::string& series, double v) {
        plot += fig + "," + x + "," + series + "," + csv_num(v) + "\n";
    };

    std::vector<std::string> fam_names;
    for (const auto f : cfg.families) fam_names.push_back(scm_family_name(f));

    for (const auto& base : cfg.bases) {
        // Per-family means feeding both the family rows and the Overall row.
        std::vector<double> eb, ec, eo, mb, mc, jb, jc, tb, tc, cb, cc, co;
        for (const auto& fam : fam_names) {
            const ArmMean b = arm_mean(res.cells, fam, base, "base", "");
            const ArmMean w = arm_mean(res.cells, fam, base, "cw", "");
            const ArmMean o = arm_mean(res.cells, fam, "-", "oracle", "");
            eb.push_back(b.ate);
            ec.push_back(w.ate);
            eo.push_back(o.ate);
            mb.push_back(b.mmd);
            mc.push_back(w.mmd);
            jb.push_back(b.jsd);
            jc.push_back(w.jsd);
            tb.push_back(b.tstr);
            tc.push_back(w.tstr);
            cb.push_back(b.ci);
            cc.push_back(w.ci);
            co.push_back(o.ci);
        }
        const auto emit = [&](const std::string& fam, double b_ate, double c_ate, double o_ate,
                              double b_mmd, double c_mmd, double b_jsd, double c_jsd,
                              double b_tstr, double c_tstr, double b_ci, double c_ci,
                              double o_ci) {
            const auto gap = gap_closed(b_ate, c_ate, o_ate);
            agg += fam + "," + csv_field(base) + "," + csv_num(b_ate) + "," + csv_num(c_ate) +
                   "," + csv_num(o_ate) + "," + csv_num(delta_pct(b_ate, c_ate)) + "," +
                   (gap ? csv_num(*gap) : std::string("--")) + "," + csv_num(b_mmd) + "," +
                   csv_num(c_mmd) + "," + csv_num(b_jsd) + "," + csv_num(c_jsd) + "," +
                   csv_num(b_tstr) + "," + csv_num(c_tstr) + "," + csv_num(b_ci) + "," +
                   csv_num(c_ci) + "," + csv_num(o_ci) + "\n";
            plot_row("tier1_ate", fam, base + "|base", b_ate);
            plot_row("tier1_ate", fam, base + "|cw", c_ate);
            plot_row("tier1_ate", fam, "oracle", o_ate);
            plot_row("tier1_mmd", fam, base + "|base", b_mmd);
            plot_row("tier1_mmd", fam, base + "|cw", c_mmd);
            plot_row("tier1_ci_pass", fam, base + "|base", b_ci);
            plot_row("tier1_ci_pass", fam, base + "|cw", c_ci);
            plot_row("tier1_tstr", fam, base + "|base", b_tstr);
            plot_row("tier1_tstr", fam, base + "|cw", c_tstr);
        };
        for (std::size_t f = 0; f < fam_names.size(); ++f) {
            emit(fam_names[f], eb[f], ec[f], eo[f], mb[f], mc[f], jb[f], jc[f], tb[f], tc[f],
                 cb[f], cc[f], co[f]);
        }
        emit("Overall", mean_of(eb), mean_of(ec), mean_of(eo), mean_of(mb), mean_of(mc),
             mean_of(jb), mean_of(jc), mean_of(tb), mean_of(tc), mean_of(cb), mean_of(cc),
             mean_of(co));
    }
    res.aggregate_csv = std::move(agg);
    res.plot_csv = std::move(plot);
    res.manifest = make_manifest("benchmark", cfg);
    return res;
}

AblationKind ablation_kind_from_name(const std::string& name) {
    if (name == "constraint_type") return AblationKind::ConstraintType;
    if (name == "knowledge_fraction") return AblationKind::KnowledgeFraction;
    if (name == "wrong_edges") return AblationKind::WrongEdges;
    if (name == "alm_vs_fixed") return AblationKind::AlmVsFixed;
    if (name == "e0") return AblationKind::E0;
    throw ValidationError("bench: unknown ablation '" + name + "'");
}

std::string ablation_kind_name(AblationKind kind) {
    switch (kind) {
        case AblationKind::ConstraintType: return "constraint_type";
        case AblationKind::KnowledgeFraction: return "knowledge_fraction";
        case AblationKind::WrongEdges: return "wrong_edges";
        case AblationKind::AlmVsFixed: return "alm_vs_fixed";
        case AblationKind::E0: return "e0";
    }
    throw ValidationError("bench: unknown ablation kind");
}

AblationResult run_ablation(AblationKind kind, const BenchConfig& cfg) {
    validate_bench_config(cfg);
    const std::string base = cfg.bases.front();

    // Sweep points: each one owns a knowledge derivation and a trainer setup.
    struct Setting {
        std::string name;
        double reveal;
        double corrupt;
        AlmConfig alm;
        bool drop_forbidden = false;
    };
    std::vector<Setting> settings;
    const auto mk = [&](const std::string& name) {
        Setting s;
        s.name = name;
        s.reveal = cfg.reveal_fraction;
        s.corrupt = cfg.corrupt_fraction;
        s.alm = cfg.alm;
        return s;
    };
    switch (kind) {
        case AblationKind::ConstraintType:
            for (const auto& [a, b] : std::vector<std::pair<double, double>>{
                     {0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
                Setting s = mk("alpha=" + csv_num(a) + ";beta=" + csv_num(b));
                s.alm.alpha = a;
                s.alm.beta = b;
                settings.push_back(s);
            }
            break;
        case AblationKind::KnowledgeFraction:
            for (const double r : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                Setting s = mk("reveal=" + csv_num(r));
                s.reveal = r;
                settings.push_back(s);
            }
            break;
        case AblationKind::WrongEdges:
            for (const double c : {0.0, 0.1, 0.3, 0.5}) {
                Setting s = mk("corrupt=" + csv_num(c));
                s.reveal = 0.5;  // paper protocol: corruption studied at half reveal
                s.corrupt = c;
                settings.push_back(s);
            }
            break;
        case AblationKind::AlmVsFixed: {
            Setting alm_s = mk("alm");
            alm_s.alm.fixed_lambda.reset();
            settings.push_back(alm_s);
            for (const double l : {0.1, 1.0, 10.0}) {
                Setting s = mk("fixed:" + csv_num(l));
                s.alm.fixed_lambda = l;
                settings.push_back(s);
            }
            break;
        }
        case AblationKind::E0: {
            settings.push_back(mk("e0=full"));
            Setting empty = mk("e0=empty");
            empty.drop_forbidden = true;
            settings.push_back(empty);
            break;
        }
    }

    // Contexts per (setting, seed); settings sharing a knowledge derivation
    // hash to identical streams, so equal configurations give equal cells.
    const int n_settings = static_cast<int>(settings.size());
    const int n_seeds = static_cast<int>(cfg.seeds.size());
    std::vector<CellContext> ctxs(static_cast<std::size_t>(n_settings * n_seeds));
    run_tasks(n_settings * n_seeds, cfg.jobs, [&](int i) {
        const Setting& s = settings[static_cast<std::size_t>(i / n_seeds)];
        const auto seed = cfg.seeds[static_cast<std::size_t>(i % n_seeds)];
        CellContext ctx = build_context(cfg, ScmFamily::LG, seed, s.reveal, s.corrupt);
        if (s.drop_forbidden) ctx.know_train.forbidden.clear();
        ctxs[static_cast<std::size_t>(i)] = std::move(ctx);
    });

    std::vector<CellMetrics> cells(static_cast<std::size_t>(n_settings * n_seeds * 2));
    run_tasks(n_settings * n_seeds * 2, cfg.jobs, [&](int i) {
        const int pair = i / 2;
        const Setting& s = settings[static_cast<std::size_t>(pair / n_seeds)];
        const CellContext& ctx = ctxs[static_cast<std::size_t>(pair)];
        CellMetrics m = (i % 2 == 0) ? run_base_arm(cfg, ctx, base, s.name)
                                     : run_cw_arm(cfg, ctx, s.alm, base, s.name);
        cells[static_cast<std::size_t>(i)] = std::move(m);
        log::info("ablate: " + s.name + " seed " + std::to_string(ctx.seed) + " " +
                  (i % 2 == 0 ? "base" : "cw") + " done");
    });

    AblationResult res;
    res.cells = std::move(cells);
    res.cells_csv = cells_to_csv(res.cells);

    std::string agg =
        "setting,e_base,e_cw,delta_pct,mmd_base,mmd_cw,jsd_base,jsd_cw,"
        "tstr_base,tstr_cw,ci_base,ci_cw,violation_base,violation_cw\n";
    std::string plot = "figure,x,series,value\n";
    const std::string fig = "ablation_" + ablation_kind_name(kind);
    for (const auto& s : settings) {
        const ArmMean b = arm_mean(res.cells, "LG", base, "base", s.name);
        const ArmMean w = arm_mean(res.cells, "LG", base, "cw", s.name);
        agg += csv_field(s.name) + "," + csv_num(b.ate) + "," + csv_num(w.ate) + "," +
               csv_num(delta_pct(b.ate, w.ate)) + "," + csv_num(b.mmd) + "," + csv_num(w.mmd) +
               "," + csv_num(b.jsd) + "," + csv_num(w.jsd) + "," + csv_num(b.tstr) + "," +
               csv_num(w.tstr) + "," + csv_num(b.ci) + "," + csv_num(w.ci) + "," +
               csv_num(b.violation) + "," + csv_num(w.violation) + "\n";
        for (const auto& [metric, bv, wv] :
             std::vector<std::tuple<std::string, double, double>>{
                 {"ate_error", b.ate, w.ate},
                 {"mmd", b.mmd, w.mmd},
                 {"ci_pass", b.ci, w.ci},
                 {"violation", b.violation, w.violation}}) {
            plot += fig + "_" + metric + "," + csv_field(s.name) + ",base," + csv_num(bv) + "\n";
            plot += fig + "_" + metric + "," + csv_field(s.name) + ",cw," + csv_num(wv) + "\n";
        }
    }
    res.aggregate_csv = std::move(agg);
    res.plot_csv = std::move(plot);
    res.manifest = make_manifest("ablation:" + ablation_kind_name(kind), cfg);
    return res;
}

}  // namespace cw
