#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "causalwrap/base_gen.hpp"
#include "causalwrap/bench.hpp"
#include "causalwrap/errors.hpp"
#include "causalwrap/knowledge.hpp"
#include "causalwrap/log.hpp"
#include "causalwrap/metrics.hpp"
#include "causalwrap/scm.hpp"
#include "causalwrap/table.hpp"
#include "causalwrap/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cw;

namespace {

const char* provenance_label(Provenance p) {
    switch (p) {
        case Provenance::Real: return "real";
        case Provenance::BaseSynthetic: return "base";
        case Provenance::Corrected: return "corrected";
        case Provenance::Oracle: return "oracle";
    }
    return "?";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("malformed json in '" + path + "': " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + path + "'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::string iso_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Every command leaves a manifest; the config block plus the code version
// determines every numeric output byte on a given platform.
void write_manifest(const std::string& out_dir, const std::string& kind, const json& config,
                    const std::vector<std::uint64_t>& seeds, const std::string& data_reference) {
    json m;
    m["kind"] = kind;
    m["tool_version"] = kToolVersion;
    m["timestamp"] = iso_now();
    m["seeds"] = seeds;
    m["data_reference"] = data_reference;
    m["config"] = config;
    write_text_file(out_dir + "/manifest.json", m.dump(2) + "\n");
}

// Loads a manifest written by `kind` and returns its config block.
json config_from_manifest(const std::string& path, const std::string& kind) {
    const json m = read_json_file(path);
    if (!m.contains("kind") || !m.contains("config")) {
        throw ValidationError("manifest '" + path + "' lacks kind/config fields");
    }
    if (m.at("kind").get<std::string>() != kind) {
        throw ValidationError("manifest '" + path + "' was written by '" +
                              m.at("kind").get<std::string>() + "', not '" + kind + "'");
    }
    return m.at("config");
}

// Redraws until the sink has an ancestor so a treatment exists (~10% of
// random DAGs fail at the default density); the attempt index keeps the
// retry deterministic.
Scm draw_usable_scm(ScmFamily family, int d, std::uint64_t seed) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));
        RandomScmConfig rc;
        rc.family = family;
        rc.d = d;
        Scm scm = random_scm(rc, rng);
        try {
            choose_treatment_outcome(scm);
            return scm;
        } catch (const ValidationError&) {
        }
    }
    throw NumericError("no usable DAG after 100 draws");
}

// Classifier view for the train-on-synthetic metric: binary label first,
// then every column except the raw outcome (kept out to avoid leaking the
// label back in).
Table label_view(const Table& t, int y_col, bool y_binary, double threshold) {
    Table out;
    out.provenance = t.provenance;
    out.schema.push_back({"label", ColumnKind::Binary});
    for (int j = 0; j < t.d(); ++j) {
        if (j != y_col) out.schema.push_back(t.schema[static_cast<std::size_t>(j)]);
    }
    out.rows.resize(t.n(), t.d());
    for (int i = 0; i < t.n(); ++i) {
        const double y = t.rows(i, y_col);
        out.rows(i, 0) = y_binary ? y : (y > threshold ? 1.0 : 0.0);
        int c = 1;
        for (int j = 0; j < t.d(); ++j) {
            if (j != y_col) out.rows(i, c++) = t.rows(i, j);
        }
    }
    return out;
}

// Back-door covariates: non-descendants of the treatment (adjusting for
// mediators would block part of the effect).
std::vector<int> backdoor_covariates(int d, int t_col, int y_col,
                                     const std::vector<int>& topo_order,
                                     const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> parents(static_cast<std::size_t>(d));
    for (const auto& [a, b] : edges) parents[static_cast<std::size_t>(b)].push_back(a);
    std::vector<bool> descendant(static_cast<std::size_t>(d), false);
    descendant[static_cast<std::size_t>(t_col)] = true;
    for (const int node : topo_order) {
        if (descendant[static_cast<std::size_t>(node)]) continue;
        for (const int p : parents[static_cast<std::size_t>(node)]) {
            if (descendant[static_cast<std::size_t>(p)]) {
                descendant[static_cast<std::size_t>(node)] = true;
                break;
            }
        }
    }
    std::vector<int> cov;
    for (int j = 0; j < d; ++j) {
        if (j != t_col && j != y_col && !descendant[static_cast<std::size_t>(j)]) cov.push_back(j);
    }
    return cov;
}

struct SimulateArgs {
    std::string family = "LG";
    int d = 10;
    int n = 5000;
    int n_mc = 100000;
    std::uint64_t seed = 0;
    std::string out;
    std::string from_manifest;
};

int cmd_simulate(SimulateArgs a) {
    if (!a.from_manifest.empty()) {
        const json c = config_from_manifest(a.from_manifest, "simulate");
        a.family = c.at("family").get<std::string>();
        a.d = c.at("d").get<int>();
        a.n = c.at("n").get<int>();
        a.n_mc = c.at("n_mc").get<int>();
        a.seed = c.at("seed").get<std::uint64_t>();
    }
    const ScmFamily family = scm_family_from_name(a.family);
    if (a.d < 3) throw ValidationError("simulate: d must be at least 3");
    if (a.n < 1) throw ValidationError("simulate: n must be positive");
    if (a.n_mc < 100) throw ValidationError("simulate: n_mc must be at least 100");
    ensure_dir(a.out);

    const Scm scm = draw_usable_scm(family, a.d, a.seed);
    const auto [t, y] = choose_treatment_outcome(scm);
    Rng data_rng(a.seed + 1);
    const Table train = ancestral_sample(scm, a.n, data_rng, {}, Provenance::Real);
    Rng mc_rng(a.seed + 2);
    const double ate = ground_truth_ate(scm, t, y, a.n_mc, mc_rng);

    write_text_file(a.out + "/scm.json", scm_to_json(scm).dump(2) + "\n");
    write_csv(train, a.out + "/train.csv");

    json truth;
    truth["ate"] = ate;
    truth["t"] = t;
    truth["y"] = y;
    truth["t_name"] = scm.schema()[static_cast<std::size_t>(t)].name;
    truth["y_name"] = scm.schema()[static_cast<std::size_t>(y)].name;
    truth["n_mc"] = a.n_mc;
    truth["topo_order"] = scm.topo_order;
    json edges = json::array();
    for (const auto& [ea, eb] : scm.edges()) edges.push_back({ea, eb});
    truth["edges"] = edges;
    write_text_file(a.out + "/truth.json", truth.dump(2) + "\n");

    json config;
    config["family"] = a.family;
    config["d"] = a.d;
    config["n"] = a.n;
    config["n_mc"] = a.n_mc;
    config["seed"] = a.seed;
    write_manifest(a.out, "simulate", config, {a.seed}, a.out + "/scm.json");
    log::info("simulate: wrote scm.json, train.csv, truth.json to " + a.out);
    return 0;
}

struct WrapArgs {
    std::string train;
    std::string knowledge;
    std::string base = "copula";
    std::string config;
    std::string resume;
    std::optional<std::uint64_t> seed;
    std::optional<double> fixed_lambda;
    std::string out;
    std::string from_manifest;
};

int cmd_wrap(WrapArgs a) {
    json alm_json;
    if (!a.from_manifest.empty()) {
        const json c = config_from_manifest(a.from_manifest, "wrap");
        a.train = c.at("train").get<std::string>();
        a.knowledge = c.value("knowledge", std::string());
        a.base = c.at("base").get<std::string>();
        a.resume = c.value("resume", std::string());
        alm_json = c.at("alm");
    } else if (!a.config.empty()) {
        alm_json = read_json_file(a.config);
    }
    if (a.train.empty()) throw ValidationError("wrap: --train is required");

    AlmConfig cfg = alm_json.is_null() ? AlmConfig{} : alm_config_from_json(alm_json);
    if (a.seed) cfg.seed = *a.seed;
    if (a.fixed_lambda) cfg.fixed_lambda = *a.fixed_lambda;
    validate_alm_config(cfg);

    const Table real = read_csv(a.train);
    CausalKnowledge know;
    if (!a.knowledge.empty()) know = parse_knowledge(a.knowledge, real.schema);
    Table std_real = real;
    const StandardizeStats stats = standardize(std_real);
    const auto base = make_base_sampler(a.base, real, /*relaxed_binary=*/true);

    std::optional<Checkpoint> resume;
    if (!a.resume.empty()) resume = load_checkpoint(a.resume);

    ensure_dir(a.out);
    const TrainResult res =
        train(std_real, stats, *base, know, cfg, resume ? &*resume : nullptr);
    const Checkpoint ckpt = make_checkpoint(res, std_real, stats, know, cfg);
    save_checkpoint(ckpt, a.out + "/checkpoint.json");
    res.log.write_jsonl(a.out + "/training_log.jsonl");

    json config;
    config["train"] = a.train;
    if (!a.knowledge.empty()) config["knowledge"] = a.knowledge;
    config["base"] = a.base;
    if (!a.resume.empty()) config["resume"] = a.resume;
    config["alm"] = alm_config_to_json(cfg);
    write_manifest(a.out, "wrap", config, {cfg.seed}, a.train);

    if (res.aborted) {
        log::error("wrap: training aborted (" + res.abort_reason +
                   "); checkpoint holds the last finished outer iteration");
        return 3;
    }
    log::info("wrap: finished " + std::to_string(res.outer_done) +
              " outer iterations; checkpoint at " + a.out + "/checkpoint.json");
    return 0;
}

struct GenerateArgs {
    std::string checkpoint;
    std::string base;
    std::string train;
    int n = 5000;
    std::uint64_t seed = 0;
    std::string out;
    std::string from_manifest;
};

int cmd_generate(GenerateArgs a) {
    if (!a.from_manifest.empty()) {
        const json c = config_from_manifest(a.from_manifest, "generate");
        a.checkpoint = c.at("checkpoint").get<std::string>();
        a.base = c.at("base").get<std::string>();
        a.train = c.value("train", std::string());
        a.n = c.at("n").get<int>();
        a.seed = c.at("seed").get<std::uint64_t>();
    }
    if (a.checkpoint.empty()) throw ValidationError("generate: --checkpoint is required");
    if (a.base.empty()) throw ValidationError("generate: --base is required");
    if (a.n < 1) throw ValidationError("generate: n must be positive");
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);

    Table real;
    if (!a.train.empty()) {
        real = read_csv(a.train);
    } else if (a.base.rfind("file:", 0) == 0) {
        real.schema = ckpt.schema;  // schema reference only; file bases ignore rows
        real.rows.resize(0, static_cast<int>(ckpt.schema.size()));
    } else {
        throw ValidationError("generate: base spec '" + a.base + "' needs --train to refit");
    }
    const auto base = make_base_sampler(a.base, real, /*relaxed_binary=*/true);

    Rng rng(a.seed);
    const Table corrected = generate(ckpt, *base, a.n, rng);
    ensure_dir(a.out);
    write_csv(corrected, a.out + "/corrected.csv");

    json config;
    config["checkpoint"] = a.checkpoint;
    config["base"] = a.base;
    if (!a.train.empty()) config["train"] = a.train;
    config["n"] = a.n;
    config["seed"] = a.seed;
    write_manifest(a.out, "generate", config, {a.seed}, a.checkpoint);
    log::info("generate: wrote " + std::to_string(corrected.n()) + " rows to " + a.out +
              "/corrected.csv");
    return 0;
}

struct EvaluateArgs {
    std::string real;
    std::string syn;
    std::string knowledge;
    std::string truth;
    std::uint64_t seed = 0;
    std::string out;
    std::string from_manifest;
};

int cmd_evaluate(EvaluateArgs a) {
    if (!a.from_manifest.empty()) {
        const json c = config_from_manifest(a.from_manifest, "evaluate");
        a.real = c.at("real").get<std::string>();
        a.syn = c.at("syn").get<std::string>();
        a.knowledge = c.value("knowledge", std::string());
        a.truth = c.value("truth", std::string());
        a.seed = c.at("seed").get<std::uint64_t>();
    }
    if (a.real.empty() || a.syn.empty()) {
        throw ValidationError("evaluate: --real and --syn are required");
    }
    const Table real = read_csv(a.real);
    const Table syn = read_csv(a.syn, /*relaxed_binary=*/true);
    CausalKnowledge know;
    if (!a.knowledge.empty()) know = parse_knowledge(a.knowledge, real.schema);

    Table std_real = real;
    const StandardizeStats stats = standardize(std_real);
    const std::vector<EdgeModel> models = fit_edge_models(std_real, know);

    // outcome defaults to the last column (the simulator's sink convention)
    int t_col = -1;
    int y_col = real.d() - 1;
    std::optional<double> true_ate;
    std::vector<int> covariates;
    if (!a.truth.empty()) {
        const json truth = read_json_file(a.truth);
        t_col = truth.at("t").get<int>();
        y_col = truth.at("y").get<int>();
        true_ate = truth.at("ate").get<double>();
        if (t_col < 0 || t_col >= real.d() || y_col < 0 || y_col >= real.d()) {
            throw ValidationError("evaluate: truth t/y out of range for the data");
        }
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : truth.at("edges")) {
            edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
        }
        covariates = backdoor_covariates(real.d(), t_col, y_col,
                                         truth.at("topo_order").get<std::vector<int>>(), edges);
    }

    const Table real_test = train_test_split(real, 0.2, a.seed).second;

    EvalReport r;
    r.seed = a.seed;
    r.real_provenance = provenance_label(real.provenance);
    r.syn_provenance = provenance_label(syn.provenance);
    r.mmd = mmd(real, syn, a.seed);
    r.jsd = jsd(real, syn);

    const bool y_binary = real.schema[static_cast<std::size_t>(y_col)].kind == ColumnKind::Binary;
    double threshold = 0.0;
    if (!y_binary) {
        std::vector<double> ys(real.rows.col(y_col).data(),
                               real.rows.col(y_col).data() + real.n());
        std::nth_element(ys.begin(), ys.begin() + ys.size() / 2, ys.end());
        threshold = ys[ys.size() / 2];
    }
    const TstrResult ts = tstr(label_view(real_test, y_col, y_binary, threshold),
                               label_view(syn, y_col, y_binary, threshold), 0);
    r.tstr = ts.accuracy;
    r.tstr_single_class = ts.single_class;

    const CiPassResult ci = ci_pass_rate(syn, stats, know, models);
    r.ci_pass = ci.rate;
    r.ci_empty = ci.empty;

    if (true_ate) {
        r.ate_error = std::abs(ate_or(syn, t_col, y_col, covariates) - *true_ate);
        // The ensemble behind the agreement score needs a propensity model,
        // so it only applies to binary treatments.
        if (real.schema[static_cast<std::size_t>(t_col)].kind == ColumnKind::Binary) {
            const AgreementResult ag = ate_agreement(real, syn, t_col, y_col, covariates);
            r.agreement_degenerate = ag.degenerate;
            r.ate_agreement = ag.degenerate ? 0.0 : ag.value;
        }
    }

    ensure_dir(a.out);
    write_text_file(a.out + "/report.json", eval_report_to_json(r).dump(2) + "\n");

    json config;
    config["real"] = a.real;
    config["syn"] = a.syn;
    if (!a.knowledge.empty()) config["knowledge"] = a.knowledge;
    if (!a.truth.empty()) config["truth"] = a.truth;
    config["seed"] = a.seed;
    write_manifest(a.out, "evaluate", config, {a.seed}, a.real);
    log::info("evaluate: wrote report to " + a.out + "/report.json");
    return 0;
}

// Long-form plot rows become one CSV per figure, each with x,series,value.
void emit_plot_files(const std::string& plot_csv, const std::string& out_dir) {
    ensure_dir(out_dir + "/plots");
    std::map<std::string, std::string> per_figure;
    std::size_t pos = plot_csv.find('\n');  // skip the header line
    while (pos != std::string::npos && pos + 1 < plot_csv.size()) {
        const std::size_t end = plot_csv.find('\n', pos + 1);
        const std::string line = plot_csv.substr(pos + 1, end - pos - 1);
        pos = end;
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        auto& body = per_figure[line.substr(0, comma)];
        if (body.empty()) body = "x,series,value\n";
        body += line.substr(comma + 1) + "\n";
    }
    for (const auto& [figure, body] : per_figure) {
        write_text_file(out_dir + "/plots/" + figure + ".csv", body);
    }
}

struct BenchArgs {
    std::string config;
    std::string kind;  // ablate only
    int jobs = 1;
    bool emit_plot_data = false;
    std::string out;
    std::string from_manifest;
};

int cmd_benchmark(BenchArgs a) {
    BenchConfig cfg;
    if (!a.from_manifest.empty()) {
        cfg = bench_config_from_json(config_from_manifest(a.from_manifest, "benchmark"));
    } else if (!a.config.empty()) {
        cfg = bench_config_from_json(read_json_file(a.config));
    }
    cfg.jobs = a.jobs;
    const BenchResult res = run_benchmark(cfg);
    ensure_dir(a.out);
    write_text_file(a.out + "/aggregate.csv", res.aggregate_csv);
    write_text_file(a.out + "/cells.csv", res.cells_csv);
    write_text_file(a.out + "/manifest.json", res.manifest.dump(2) + "\n");
    if (a.emit_plot_data) emit_plot_files(res.plot_csv, a.out);
    int failed = 0;
    for (const auto& c : res.cells) failed += c.failed ? 1 : 0;
    if (failed > 0) {
        log::warn("benchmark: " + std::to_string(failed) + " of " +
                  std::to_string(res.cells.size()) + " cells failed; see cells.csv notes");
    }
    log::info("benchmark: wrote aggregate.csv, cells.csv to " + a.out);
    return 0;
}

int cmd_ablate(BenchArgs a) {
    BenchConfig cfg;
    AblationKind kind;
    if (!a.from_manifest.empty()) {
        const json m = read_json_file(a.from_manifest);
        const std::string k = m.value("kind", std::string());
        if (k.rfind("ablation:", 0) != 0) {
            throw ValidationError("manifest '" + a.from_manifest + "' is not an ablation run");
        }
        kind = ablation_kind_from_name(k.substr(9));
        cfg = bench_config_from_json(m.at("config"));
    } else {
        if (a.kind.empty()) throw ValidationError("ablate: --kind is required");
        kind = ablation_kind_from_name(a.kind);
        if (!a.config.empty()) cfg = bench_config_from_json(read_json_file(a.config));
    }
    cfg.jobs = a.jobs;
    const AblationResult res = run_ablation(kind, cfg);
    ensure_dir(a.out);
    write_text_file(a.out + "/aggregate.csv", res.aggregate_csv);
    write_text_file(a.out + "/cells.csv", res.cells_csv);
    write_text_file(a.out + "/manifest.json", res.manifest.dump(2) + "\n");
    if (a.emit_plot_data) emit_plot_files(res.plot_csv, a.out);
    log::info("ablate: wrote aggregate.csv, cells.csv to " + a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-hoc causal correction for black-box tabular generators"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "draw an SCM, training data, and ground truth");
    c_sim->add_option("--family", sim.family, "SCM family: LG, NLA, or MT");
    c_sim->add_option("--d", sim.d, "number of columns");
    c_sim->add_option("--n", sim.n, "training rows");
    c_sim->add_option("--n-mc", sim.n_mc, "Monte-Carlo draws per interventional arm");
    c_sim->add_option("--seed", sim.seed, "stream seed");
    c_sim->add_option("--out", sim.out, "output directory")->required();
    c_sim->add_option("--from-manifest", sim.from_manifest, "re-run a recorded configuration");

    WrapArgs wrap;
    CLI::App* c_wrap = app.add_subcommand("wrap", "fit the correction map on real data");
    c_wrap->add_option("--train", wrap.train, "real training CSV");
    c_wrap->add_option("--knowledge", wrap.knowledge, "knowledge statements file");
    c_wrap->add_option("--base", wrap.base, "base sampler: copula, bootstrap:<noise>, file:<csv>");
    c_wrap->add_option("--config", wrap.config, "trainer config JSON");
    c_wrap->add_option("--resume", wrap.resume, "checkpoint to continue from");
    std::uint64_t wrap_seed = 0;
    CLI::Option* wrap_seed_opt = c_wrap->add_option("--seed", wrap_seed, "training seed");
    double wrap_fixed = 0.0;
    CLI::Option* wrap_fixed_opt =
        c_wrap->add_option("--fixed-lambda", wrap_fixed, "disable dual updates, pin the penalty");
    c_wrap->add_option("--out", wrap.out, "output directory")->required();
    c_wrap->add_option("--from-manifest", wrap.from_manifest, "re-run a recorded configuration");

    GenerateArgs gen;
    CLI::App* c_gen = app.add_subcommand("generate", "push base samples through a checkpoint");
    c_gen->add_option("--checkpoint", gen.checkpoint, "trained checkpoint JSON");
    c_gen->add_option("--base", gen.base, "base sampler spec");
    c_gen->add_option("--train", gen.train, "real CSV used to refit copula/bootstrap bases");
    c_gen->add_option("--n", gen.n, "rows to generate");
    c_gen->add_option("--seed", gen.seed, "draw seed");
    c_gen->add_option("--out", gen.out, "output directory")->required();
    c_gen->add_option("--from-manifest", gen.from_manifest, "re-run a recorded configuration");

    EvaluateArgs ev;
    CLI::App* c_ev = app.add_subcommand("evaluate", "score synthetic data against real data");
    c_ev->add_option("--real", ev.real, "real CSV");
    c_ev->add_option("--syn", ev.syn, "synthetic CSV");
    c_ev->add_option("--knowledge", ev.knowledge, "knowledge statements file");
    c_ev->add_option("--truth", ev.truth, "simulator truth JSON (enables effect-error columns)");
    c_ev->add_option("--seed", ev.seed, "subsampling seed");
    c_ev->add_option("--out", ev.out, "output directory")->required();
    c_ev->add_option("--from-manifest", ev.from_manifest, "re-run a recorded configuration");

    BenchArgs bench;
    CLI::App* c_bench = app.add_subcommand("benchmark", "three-arm matrix over families and bases");
    c_bench->add_option("--config", bench.config, "benchmark config JSON");
    c_bench->add_option("--jobs", bench.jobs, "parallel cells");
    c_bench->add_flag("--emit-plot-data", bench.emit_plot_data, "write per-figure CSVs");
    c_bench->add_option("--out", bench.out, "output directory")->required();
    c_bench->add_option("--from-manifest", bench.from_manifest, "re-run a recorded configuration");

    BenchArgs abl;
    CLI::App* c_abl = app.add_subcommand("ablate", "one-axis sweeps on the linear-Gaussian family");
    c_abl->add_option("--kind", abl.kind,
                      "constraint_type, knowledge_fraction, wrong_edges, alm_vs_fixed, or e0");
    c_abl->add_option("--config", abl.config, "benchmark config JSON");
    c_abl->add_option("--jobs", abl.jobs, "parallel cells");
    c_abl->add_flag("--emit-plot-data", abl.emit_plot_data, "write per-figure CSVs");
    c_abl->add_option("--out", abl.out, "output directory")->required();
    c_abl->add_option("--from-manifest", abl.from_manifest, "re-run a recorded configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(sim);
        if (c_wrap->parsed()) {
            if (*wrap_seed_opt) wrap.seed = wrap_seed;
            if (*wrap_fixed_opt) wrap.fixed_lambda = wrap_fixed;
            return cmd_wrap(wrap);
        }
        if (c_gen->parsed()) return cmd_generate(gen);
        if (c_ev->parsed()) return cmd_evaluate(ev);
        if (c_bench->parsed()) return cmd_benchmark(bench);
        if (c_abl->parsed()) return cmd_ablate(abl);
    } catch (const ValidationError& e) {
        log::error(e.what());
        return 2;
    } catch (const IoError& e) {
        log::error(e.what());
        return 4;
    } catch (const NumericError& e) {
        log::error(e.what());
        return 3;
    } catch (const json::exception& e) {
        log::error(std::string("json: ") + e.what());
        return 2;
    } catch (const std::exception& e) {
        log::error(e.what());
        return 3;
    }
    return 0;
}
