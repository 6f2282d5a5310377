#include "causalwrap/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "causalwrap/errors.hpp"

namespace cw {

namespace {

bool is_acyclic(int d, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> indeg(static_cast<std::size_t>(d), 0);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(d));
    for (const auto& [a, b] : edges) {
        out[static_cast<std::size_t>(a)].push_back(b);
        ++indeg[static_cast<std::size_t>(b)];
    }
    std::vector<int> queue;
    for (int v = 0; v < d; ++v) {
        if (indeg[static_cast<std::size_t>(v)] == 0) queue.push_back(v);
    }
    int seen = 0;
    while (!queue.empty()) {
        const int v = queue.back();
        queue.pop_back();
        ++seen;
        for (int w : out[static_cast<std::size_t>(v)]) {
            if (--indeg[static_cast<std::size_t>(w)] == 0) queue.push_back(w);
        }
    }
    return seen == d;
}

void sort_unique(std::vector<std::pair<int, int>>& pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

int resolve_column(const std::string& name, const std::vector<ColumnSchema>& schema, int line_no) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].name == name) return static_cast<int>(j);
    }
    throw ValidationError("knowledge: line " + std::to_string(line_no) + ": unknown column '" +
                          name + "'");
}

[[noreturn]] void line_error(int line_no, const std::string& msg) {
    throw ValidationError("knowledge: line " + std::to_string(line_no) + ": " + msg);
}

// "<col> -> <col> [key=value ...]" with whitespace-separated tokens.
struct EdgeLine {
    int a = -1;
    int b = -1;
    std::vector<std::pair<std::string, std::string>> options;
};

EdgeLine parse_edge_line(const std::string& body, const std::vector<ColumnSchema>& schema,
                         int line_no) {
    const auto toks = split_ws(body);
    if (toks.size() < 3 || toks[1] != "->") {
        line_error(line_no, "expected '<col> -> <col>'");
    }
    EdgeLine e;
    e.a = resolve_column(toks[0], schema, line_no);
    e.b = resolve_column(toks[2], schema, line_no);
    for (std::size_t t = 3; t < toks.size(); ++t) {
        const auto eq = toks[t].find('=');
        if (eq == std::string::npos) line_error(line_no, "expected key=value, got '" + toks[t] + "'");
        e.options.emplace_back(toks[t].substr(0, eq), toks[t].substr(eq + 1));
    }
    return e;
}

double parse_positive(const std::string& s, int line_no) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        line_error(line_no, "bad number '" + s + "'");
    }
    if (used != s.size() || !(v > 0.0)) line_error(line_no, "weight must be a positive number");
    return v;
}

std::string column_name(int j, const std::vector<ColumnSchema>& schema) {
    return schema[static_cast<std::size_t>(j)].name;
}

}  // namespace

bool operator==(const MonotoneConstraint& a, const MonotoneConstraint& b) {
    return a.i == b.i && a.j == b.j && a.conditioning == b.conditioning && a.sign == b.sign;
}

bool operator==(const CausalKnowledge& a, const CausalKnowledge& b) {
    return a.trusted == b.trusted && a.forbidden == b.forbidden && a.monotone == b.monotone &&
           a.ci_weights == b.ci_weights;
}

double CausalKnowledge::ci_weight(int a, int b) const {
    const auto it = ci_weights.find({a, b});
    return it == ci_weights.end() ? 1.0 : it->second;
}

std::vector<std::vector<int>> CausalKnowledge::trusted_parents(int d) const {
    std::vector<std::vector<int>> pa(static_cast<std::size_t>(d));
    for (const auto& [i, j] : trusted) pa[static_cast<std::size_t>(j)].push_back(i);
    for (auto& p : pa) std::sort(p.begin(), p.end());
    return pa;
}

void validate_knowledge(const CausalKnowledge& k, int d) {
    const auto check_pair = [d](const std::pair<int, int>& e, const char* kind) {
        if (e.first < 0 || e.first >= d || e.second < 0 || e.second >= d) {
            throw ValidationError(std::string("knowledge: ") + kind + " edge index out of range");
        }
        if (e.first == e.second) {
            throw ValidationError(std::string("knowledge: self-loop in ") + kind + " edges");
        }
    };
    for (const auto& e : k.trusted) check_pair(e, "trusted");
    for (const auto& e : k.forbidden) check_pair(e, "forbidden");

    std::set<std::pair<int, int>> tset(k.trusted.begin(), k.trusted.end());
    for (const auto& e : k.forbidden) {
        if (tset.count(e)) {
            throw ValidationError("knowledge: edge both trusted and forbidden");
        }
    }
    if (!is_acyclic(d, k.trusted)) {
        throw ValidationError("knowledge: trusted edges contain a cycle");
    }

    std::set<std::pair<int, int>> mono_pairs;
    for (const auto& m : k.monotone) {
        if (m.i < 0 || m.i >= d || m.j < 0 || m.j >= d || m.i == m.j) {
            throw ValidationError("knowledge: malformed monotone pair");
        }
        if (m.sign != 1 && m.sign != -1) {
            throw ValidationError("knowledge: monotone sign must be +1 or -1");
        }
        for (int s : m.conditioning) {
            if (s < 0 || s >= d) throw ValidationError("knowledge: monotone conditioning index out of range");
            if (s == m.i || s == m.j) {
                throw ValidationError("knowledge: monotone conditioning set overlaps the pair");
            }
        }
        if (!mono_pairs.insert({m.i, m.j}).second) {
            throw ValidationError("knowledge: duplicate monotone constraint");
        }
    }

    std::set<std::pair<int, int>> fset(k.forbidden.begin(), k.forbidden.end());
    for (const auto& [pair, w] : k.ci_weights) {
        if (!fset.count(pair)) {
            throw ValidationError("knowledge: weight attached to a pair that is not forbidden");
        }
        if (!(w > 0.0)) throw ValidationError("knowledge: weights must be positive");
    }
}

CausalKnowledge parse_knowledge_text(const std::string& text,
                                     const std::vector<ColumnSchema>& schema) {
    CausalKnowledge k;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) line_error(line_no, "expected '<section>: ...'");
        const std::string section = trim(line.substr(0, colon));
        const std::string body = trim(line.substr(colon + 1));

        if (section == "trusted") {
            const auto e = parse_edge_line(body, schema, line_no);
            if (!e.options.empty()) line_error(line_no, "trusted edges take no options");
            k.trusted.emplace_back(e.a, e.b);
        } else if (section == "forbidden") {
            const auto e = parse_edge_line(body, schema, line_no);
            k.forbidden.emplace_back(e.a, e.b);
            for (const auto& [key, val] : e.options) {
                if (key != "weight") line_error(line_no, "unknown option '" + key + "'");
                k.ci_weights[{e.a, e.b}] = parse_positive(val, line_no);
            }
        } else if (section == "monotone") {
            const auto e = parse_edge_line(body, schema, line_no);
            MonotoneConstraint m;
            m.i = e.a;
            m.j = e.b;
            bool have_sign = false;
            for (const auto& [key, val] : e.options) {
                if (key == "sign") {
                    if (val != "+" && val != "-") line_error(line_no, "sign must be + or -");
                    m.sign = val == "+" ? 1 : -1;
                    have_sign = true;
                } else if (key == "given") {
                    for (const auto& name : split_on(val, ',')) {
                        if (!name.empty()) m.conditioning.push_back(resolve_column(name, schema, line_no));
                    }
                } else {
                    line_error(line_no, "unknown option '" + key + "'");
                }
            }
            if (!have_sign) line_error(line_no, "monotone constraint needs sign=+ or sign=-");
            std::sort(m.conditioning.begin(), m.conditioning.end());
            k.monotone.push_back(std::move(m));
        } else if (section == "temporal") {
            const auto groups = split_on(body, '<');
            if (groups.size() < 2) line_error(line_no, "temporal ordering needs at least two tiers");
            std::vector<std::vector<int>> tiers;
            for (const auto& g : groups) {
                std::vector<int> tier;
                for (const auto& name : split_on(g, ',')) {
                    if (!name.empty()) tier.push_back(resolve_column(name, schema, line_no));
                }
                if (tier.empty()) line_error(line_no, "empty temporal tier");
                tiers.push_back(std::move(tier));
            }
            // Later tiers cannot cause earlier ones.
            for (std::size_t early = 0; early < tiers.size(); ++early) {
                for (std::size_t late = early + 1; late < tiers.size(); ++late) {
                    for (int u : tiers[early]) {
                        for (int v : tiers[late]) k.forbidden.emplace_back(v, u);
                    }
                }
            }
        } else {
            line_error(line_no, "unknown section '" + section + "'");
        }
    }
    sort_unique(k.trusted);
    sort_unique(k.forbidden);
    validate_knowledge(k, static_cast<int>(schema.size()));
    return k;
}

CausalKnowledge parse_knowledge(const std::string& path, const std::vector<ColumnSchema>& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("knowledge: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_knowledge_text(buf.str(), schema);
}

nlohmann::json knowledge_to_json(const CausalKnowledge& k,
                                 const std::vector<ColumnSchema>& schema) {
    nlohmann::json j;
    j["trusted"] = nlohmann::json::array();
    for (const auto& [a, b] : k.trusted) {
        j["trusted"].push_back({column_name(a, schema), column_name(b, schema)});
    }
    j["forbidden"] = nlohmann::json::array();
    for (const auto& [a, b] : k.forbidden) {
        j["forbidden"].push_back({column_name(a, schema), column_name(b, schema)});
    }
    j["weights"] = nlohmann::json::array();
    for (const auto& [pair, w] : k.ci_weights) {
        j["weights"].push_back({column_name(pair.first, schema), column_name(pair.second, schema), w});
    }
    j["monotone"] = nlohmann::json::array();
    for (const auto& m : k.monotone) {
        nlohmann::json e;
        e["driver"] = column_name(m.i, schema);
        e["response"] = column_name(m.j, schema);
        e["sign"] = m.sign;
        e["given"] = nlohmann::json::array();
        for (int s : m.conditioning) e["given"].push_back(column_name(s, schema));
        j["monotone"].push_back(e);
    }
    return j;
}

CausalKnowledge knowledge_from_json(const nlohmann::json& j,
                                    const std::vector<ColumnSchema>& schema) {
    const auto resolve = [&schema](const std::string& name) {
        return resolve_column(name, schema, 0);
    };
    CausalKnowledge k;
    for (const auto& e : j.at("trusted")) {
        k.trusted.emplace_back(resolve(e.at(0).get<std::string>()), resolve(e.at(1).get<std::string>()));
    }
    for (const auto& e : j.at("forbidden")) {
        k.forbidden.emplace_back(resolve(e.at(0).get<std::string>()), resolve(e.at(1).get<std::string>()));
    }
    if (j.contains("weights")) {
        for (const auto& e : j.at("weights")) {
            k.ci_weights[{resolve(e.at(0).get<std::string>()), resolve(e.at(1).get<std::string>())}] =
                e.at(2).get<double>();
        }
    }
    for (const auto& e : j.at("monotone")) {
        MonotoneConstraint m;
        m.i = resolve(e.at("driver").get<std::string>());
        m.j = resolve(e.at("response").get<std::string>());
        m.sign = e.at("sign").get<int>();
        for (const auto& s : e.at("given")) m.conditioning.push_back(resolve(s.get<std::string>()));
        std::sort(m.conditioning.begin(), m.conditioning.end());
        k.monotone.push_back(std::move(m));
    }
    sort_unique(k.trusted);
    sort_unique(k.forbidden);
    validate_knowledge(k, static_cast<int>(schema.size()));
    return k;
}

CausalKnowledge derive_knowledge_from_scm(const Scm& scm, double reveal_fraction, int n_mono,
                                          double corrupt_fraction, Rng& rng) {
    if (reveal_fraction < 0.0 || reveal_fraction > 1.0) {
        throw ValidationError("derive_knowledge: reveal_fraction outside [0,1]");
    }
    if (corrupt_fraction < 0.0 || corrupt_fraction > 1.0) {
        throw ValidationError("derive_knowledge: corrupt_fraction outside [0,1]");
    }
    if (n_mono < 0) throw ValidationError("derive_knowledge: n_mono must be nonnegative");

    const auto true_edges = scm.edges();
    std::set<std::pair<int, int>> true_set(true_edges.begin(), true_edges.end());
    CausalKnowledge k;

    const int n_reveal = static_cast<int>(
        std::ceil(reveal_fraction * static_cast<double>(true_edges.size())));
    for (int idx : rng.sample_indices(static_cast<int>(true_edges.size()), n_reveal)) {
        k.trusted.push_back(true_edges[static_cast<std::size_t>(idx)]);
    }
    std::sort(k.trusted.begin(), k.trusted.end());

    const long n_corrupt = std::llround(corrupt_fraction * static_cast<double>(k.trusted.size()));
    if (n_corrupt > 0) {
        const auto slots = rng.sample_indices(static_cast<int>(k.trusted.size()),
                                              static_cast<int>(n_corrupt));
        for (int slot : slots) {
            bool placed = false;
            for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
                const int a = rng.uniform_int(scm.d);
                int b = rng.uniform_int(scm.d - 1);
                if (b >= a) ++b;
                const std::pair<int, int> cand{a, b};
                if (true_set.count(cand)) continue;
                if (std::find(k.trusted.begin(), k.trusted.end(), cand) != k.trusted.end()) continue;
                auto tentative = k.trusted;
                tentative[static_cast<std::size_t>(slot)] = cand;
                if (!is_acyclic(scm.d, tentative)) continue;
                k.trusted = std::move(tentative);
                placed = true;
            }
            if (!placed) throw ValidationError("derive_knowledge: corruption target unsatisfiable");
        }
        std::sort(k.trusted.begin(), k.trusted.end());
    }

    // Forbid every non-edge ordered pair touching a root of the true DAG,
    // except pairs the (possibly corrupted) trusted set now claims.
    std::vector<bool> is_root(static_cast<std::size_t>(scm.d), false);
    for (int v = 0; v < scm.d; ++v) {
        is_root[static_cast<std::size_t>(v)] = scm.nodes[static_cast<std::size_t>(v)].parents.empty();
    }
    std::set<std::pair<int, int>> trusted_set(k.trusted.begin(), k.trusted.end());
    for (int a = 0; a < scm.d; ++a) {
        for (int b = 0; b < scm.d; ++b) {
            if (a == b) continue;
            if (!is_root[static_cast<std::size_t>(a)] && !is_root[static_cast<std::size_t>(b)]) continue;
            const std::pair<int, int> pair{a, b};
            if (true_set.count(pair) || trusted_set.count(pair)) continue;
            k.forbidden.push_back(pair);
        }
    }

    if (n_mono > 0 && !true_edges.empty()) {
        // Monotone effect per true edge: mean finite-difference slope of the
        // child mechanism in the parent, over oracle samples (exact
        // coefficient for the linear family).
        std::vector<std::pair<double, std::pair<int, int>>> effects;
        Table oracle;
        if (scm.family != ScmFamily::LG) oracle = ancestral_sample(scm, 10000, rng);
        for (const auto& [i, j] : true_edges) {
            const auto& nd = scm.nodes[static_cast<std::size_t>(j)];
            double effect = 0.0;
            if (scm.family == ScmFamily::LG) {
                for (std::size_t p = 0; p < nd.parents.size(); ++p) {
                    if (nd.parents[p] == i) effect = nd.coef[p];
                }
            } else {
                const double delta = 0.5;
                Eigen::VectorXd row(scm.d);
                for (int r = 0; r < oracle.n(); ++r) {
                    row = oracle.rows.row(r);
                    const double base = scm.mechanism_mean(j, row);
                    row(i) += delta;
                    effect += (scm.mechanism_mean(j, row) - base) / delta;
                }
                effect /= static_cast<double>(oracle.n());
            }
            effects.push_back({effect, {i, j}});
        }
        std::sort(effects.begin(), effects.end(), [](const auto& x, const auto& y) {
            if (std::abs(x.first) != std::abs(y.first)) return std::abs(x.first) > std::abs(y.first);
            return x.second < y.second;
        });
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n_mono), effects.size());
        for (std::size_t e = 0; e < take; ++e) {
            const auto [effect, edge] = effects[e];
            MonotoneConstraint m;
            m.i = edge.first;
            m.j = edge.second;
            m.sign = effect >= 0.0 ? 1 : -1;
            for (int p : scm.nodes[static_cast<std::size_t>(edge.second)].parents) {
                if (p != edge.first) m.conditioning.push_back(p);
            }
            std::sort(m.conditioning.begin(), m.conditioning.end());
            k.monotone.push_back(std::move(m));
        }
    }

    validate_knowledge(k, scm.d);
    return k;
}

}  // namespace cw
