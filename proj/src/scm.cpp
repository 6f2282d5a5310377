#include "causalwrap/scm.hpp"

#include <algorithm>
#include <cmath>

#include "causalwrap/errors.hpp"
#include "causalwrap/fitting.hpp"

namespace cw {

namespace {

constexpr double kNlaQuadWeight = 0.1;

// Exogenous draws for one row: a normal per continuous node, a uniform per
// binary node, drawn in topological order so streams are reproducible.
Eigen::VectorXd draw_noise_row(const Scm& scm, Rng& rng) {
    Eigen::VectorXd noise(scm.d);
    for (int k = 0; k < scm.d; ++k) {
        const int node = scm.topo_order[static_cast<std::size_t>(k)];
        noise(node) = scm.nodes[static_cast<std::size_t>(node)].kind == ColumnKind::Binary
                          ? rng.uniform()
                          : rng.normal();
    }
    return noise;
}

void propagate_row(const Scm& scm, const Eigen::VectorXd& noise,
                   const std::vector<Intervention>& interventions, Eigen::VectorXd& values) {
    for (int k = 0; k < scm.d; ++k) {
        const int node = scm.topo_order[static_cast<std::size_t>(k)];
        bool pinned = false;
        for (const auto& iv : interventions) {
            if (iv.node == node) {
                values(node) = iv.value;
                pinned = true;
                break;
            }
        }
        if (pinned) continue;
        const auto& nd = scm.nodes[static_cast<std::size_t>(node)];
        if (nd.kind == ColumnKind::Binary) {
            values(node) = noise(node) < scm.mechanism_mean(node, values) ? 1.0 : 0.0;
        } else {
            values(node) = scm.mechanism_mean(node, values) + scm.noise_sigma * noise(node);
        }
    }
}

std::vector<bool> ancestor_mask(const Scm& scm, int target) {
    std::vector<bool> mask(static_cast<std::size_t>(scm.d), false);
    // Parents precede children in topo order, so one reverse sweep suffices.
    std::vector<int> stack = {target};
    while (!stack.empty()) {
        const int node = stack.back();
        stack.pop_back();
        for (int p : scm.nodes[static_cast<std::size_t>(node)].parents) {
            if (!mask[static_cast<std::size_t>(p)]) {
                mask[static_cast<std::size_t>(p)] = true;
                stack.push_back(p);
            }
        }
    }
    return mask;
}

}  // namespace

ScmFamily scm_family_from_name(const std::string& name) {
    if (name == "LG") return ScmFamily::LG;
    if (name == "NLA") return ScmFamily::NLA;
    if (name == "MT") return ScmFamily::MT;
    throw ValidationError("scm: unknown family '" + name + "'");
}

std::string scm_family_name(ScmFamily family) {
    switch (family) {
        case ScmFamily::LG: return "LG";
        case ScmFamily::NLA: return "NLA";
        case ScmFamily::MT: return "MT";
    }
    return "LG";
}

std::vector<std::pair<int, int>> Scm::edges() const {
    std::vector<std::pair<int, int>> e;
    for (int j = 0; j < d; ++j) {
        for (int p : nodes[static_cast<std::size_t>(j)].parents) e.emplace_back(p, j);
    }
    std::sort(e.begin(), e.end());
    return e;
}

bool Scm::has_edge(int a, int b) const {
    const auto& ps = nodes[static_cast<std::size_t>(b)].parents;
    return std::find(ps.begin(), ps.end(), a) != ps.end();
}

std::vector<ColumnSchema> Scm::schema() const {
    std::vector<ColumnSchema> s;
    for (int j = 0; j < d; ++j) {
        s.push_back({"x" + std::to_string(j + 1), nodes[static_cast<std::size_t>(j)].kind});
    }
    return s;
}

double Scm::mechanism_mean(int node, const Eigen::VectorXd& values) const {
    const auto& nd = nodes[static_cast<std::size_t>(node)];
    if (nd.kind == ColumnKind::Binary) {
        double score = 0.0;
        for (std::size_t p = 0; p < nd.parents.size(); ++p) {
            score += nd.coef[p] * values(nd.parents[p]);
        }
        return sigmoid(score);
    }
    if (family == ScmFamily::LG) {
        double s = 0.0;
        for (std::size_t p = 0; p < nd.parents.size(); ++p) {
            s += nd.coef[p] * values(nd.parents[p]);
        }
        return s;
    }
    double s = 0.0, lin = 0.0;
    for (std::size_t p = 0; p < nd.parents.size(); ++p) {
        s += nd.coef[p] * std::tanh(values(nd.parents[p]));
        lin += values(nd.parents[p]);
    }
    if (!nd.parents.empty()) s += quad_weight * lin * lin;
    return s;
}

Scm random_scm(const RandomScmConfig& cfg, Rng& rng) {
    if (cfg.d < 2) throw ValidationError("random_scm: need at least 2 nodes");
    if (cfg.expected_degree < 0.0 || cfg.expected_degree > cfg.d - 1) {
        throw ValidationError("random_scm: expected_degree outside [0, d-1]");
    }
    Scm scm;
    scm.family = cfg.family;
    scm.d = cfg.d;
    scm.noise_sigma = 1.0;
    scm.quad_weight = cfg.family == ScmFamily::LG ? 0.0 : kNlaQuadWeight;
    scm.topo_order.resize(static_cast<std::size_t>(cfg.d));
    for (int i = 0; i < cfg.d; ++i) scm.topo_order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(scm.topo_order);
    scm.nodes.assign(static_cast<std::size_t>(cfg.d), ScmNode{});

    if (cfg.family == ScmFamily::MT) {
        const auto binary_nodes = rng.sample_indices(cfg.d, cfg.d / 2);
        for (int b : binary_nodes) {
            scm.nodes[static_cast<std::size_t>(b)].kind = ColumnKind::Binary;
        }
    }

    const double p_edge = cfg.expected_degree / static_cast<double>(cfg.d - 1);
    for (int k1 = 0; k1 < cfg.d; ++k1) {
        for (int k2 = k1 + 1; k2 < cfg.d; ++k2) {
            if (!rng.bernoulli(p_edge)) continue;
            const int parent = scm.topo_order[static_cast<std::size_t>(k1)];
            const int child = scm.topo_order[static_cast<std::size_t>(k2)];
            auto& nd = scm.nodes[static_cast<std::size_t>(child)];
            nd.parents.push_back(parent);
            const double mag = rng.uniform(0.5, 1.5);
            nd.coef.push_back(rng.bernoulli(0.5) ? mag : -mag);
        }
    }
    return scm;
}

Table ancestral_sample(const Scm& scm, int n, Rng& rng,
                       const std::vector<Intervention>& interventions, Provenance provenance) {
    if (n <= 0) throw ValidationError("ancestral_sample: n must be positive");
    for (const auto& iv : interventions) {
        if (iv.node < 0 || iv.node >= scm.d) throw ValidationError("ancestral_sample: bad intervention node");
    }
    Table t;
    t.schema = scm.schema();
    t.provenance = provenance;
    t.rows.resize(n, scm.d);
    Eigen::VectorXd values(scm.d);
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd noise = draw_noise_row(scm, rng);
        propagate_row(scm, noise, interventions, values);
        t.rows.row(i) = values;
    }
    return t;
}

TreatmentOutcome choose_treatment_outcome(const Scm& scm) {
    TreatmentOutcome to;
    to.y = scm.topo_order.back();
    const auto mask = ancestor_mask(scm, to.y);
    for (int k = 0; k < scm.d; ++k) {
        const int node = scm.topo_order[static_cast<std::size_t>(k)];
        if (mask[static_cast<std::size_t>(node)]) {
            to.t = node;
            return to;
        }
    }
    throw ValidationError("choose_treatment_outcome: outcome has no ancestors (no causal path)");
}

double ground_truth_ate(const Scm& scm, int t, int y, int n_mc, Rng& rng, double v1, double v0) {
    if (n_mc <= 0) throw ValidationError("ground_truth_ate: n_mc must be positive");
    Eigen::VectorXd values(scm.d);
    double sum1 = 0.0, sum0 = 0.0;
    const std::vector<Intervention> do1 = {{t, v1}};
    const std::vector<Intervention> do0 = {{t, v0}};
    for (int i = 0; i < n_mc; ++i) {
        propagate_row(scm, draw_noise_row(scm, rng), do1, values);
        sum1 += values(y);
    }
    for (int i = 0; i < n_mc; ++i) {
        propagate_row(scm, draw_noise_row(scm, rng), do0, values);
        sum0 += values(y);
    }
    return (sum1 - sum0) / static_cast<double>(n_mc);
}

IteSample sample_with_ite(const Scm& scm, int t, int y, int n, Rng& rng) {
    IteSample out;
    out.table.schema = scm.schema();
    out.table.provenance = Provenance::Real;
    out.table.rows.resize(n, scm.d);
    out.tau.resize(n);
    Eigen::VectorXd values(scm.d), v1(scm.d), v0(scm.d);
    const std::vector<Intervention> none;
    const std::vector<Intervention> do1 = {{t, 1.0}};
    const std::vector<Intervention> do0 = {{t, 0.0}};
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd noise = draw_noise_row(scm, rng);
        propagate_row(scm, noise, none, values);
        propagate_row(scm, noise, do1, v1);
        propagate_row(scm, noise, do0, v0);
        out.table.rows.row(i) = values;
        out.tau(i) = v1(y) - v0(y);
    }
    return out;
}

namespace {

class OracleScmSampler final : public BaseSampler {
public:
    explicit OracleScmSampler(Scm scm) : scm_(std::move(scm)) {
        schema_ = scm_.schema();
        spec_ = "oracle:" + scm_family_name(scm_.family);
    }
    Table draw(int n, Rng& rng) const override {
        return ancestral_sample(scm_, n, rng, {}, Provenance::Oracle);
    }

private:
    Scm scm_;
};

}  // namespace

std::unique_ptr<BaseSampler> oracle_sampler(const Scm& scm) {
    return std::make_unique<OracleScmSampler>(scm);
}

nlohmann::json scm_to_json(const Scm& scm) {
    nlohmann::json j;
    j["version"] = 1;
    j["family"] = scm_family_name(scm.family);
    j["d"] = scm.d;
    j["noise_sigma"] = scm.noise_sigma;
    j["quad_weight"] = scm.quad_weight;
    j["topo_order"] = scm.topo_order;
    auto& nodes = j["nodes"];
    nodes = nlohmann::json::array();
    for (const auto& nd : scm.nodes) {
        nlohmann::json n;
        n["kind"] = nd.kind == ColumnKind::Binary ? "binary" : "continuous";
        n["parents"] = nd.parents;
        n["coef"] = nd.coef;
        nodes.push_back(n);
    }
    return j;
}

Scm scm_from_json(const nlohmann::json& j) {
    Scm scm;
    scm.family = scm_family_from_name(j.at("family").get<std::string>());
    scm.d = j.at("d").get<int>();
    scm.noise_sigma = j.at("noise_sigma").get<double>();
    scm.quad_weight = j.at("quad_weight").get<double>();
    scm.topo_order = j.at("topo_order").get<std::vector<int>>();
    for (const auto& n : j.at("nodes")) {
        ScmNode nd;
        nd.kind = n.at("kind").get<std::string>() == "binary" ? ColumnKind::Binary
                                                              : ColumnKind::Continuous;
        nd.parents = n.at("parents").get<std::vector<int>>();
        nd.coef = n.at("coef").get<std::vector<double>>();
        scm.nodes.push_back(std::move(nd));
    }
    if (static_cast<int>(scm.nodes.size()) != scm.d ||
        static_cast<int>(scm.topo_order.size()) != scm.d) {
        throw ValidationError("scm_from_json: inconsistent dimensions");
    }
    return scm;
}

}  // namespace cw
