#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "causalwrap/rng.hpp"
#include "causalwrap/scm.hpp"
#include "causalwrap/table.hpp"

namespace cw {

// Monotonicity statement: column j responds monotonically (direction `sign`)
// to column i, holding the conditioning set fixed.
struct MonotoneConstraint {
    int i = -1;
    int j = -1;
    std::vector<int> conditioning;  // sorted, never contains i or j
    int sign = 1;                   // +1 increasing, -1 decreasing
};

bool operator==(const MonotoneConstraint& a, const MonotoneConstraint& b);

// Partial causal knowledge: trusted edges, forbidden edges, monotone
// directions, plus optional per-forbidden-pair weights (default 1).
struct CausalKnowledge {
    std::vector<std::pair<int, int>> trusted;    // sorted, unique
    std::vector<std::pair<int, int>> forbidden;  // sorted, unique
    std::vector<MonotoneConstraint> monotone;
    std::map<std::pair<int, int>, double> ci_weights;

    double ci_weight(int a, int b) const;
    // Pa+(j) for every column j, induced by the trusted edges.
    std::vector<std::vector<int>> trusted_parents(int d) const;
    bool empty() const { return trusted.empty() && forbidden.empty() && monotone.empty(); }
};

bool operator==(const CausalKnowledge& a, const CausalKnowledge& b);

// Enforces: indices in range, no self-loops, trusted/forbidden disjoint,
// trusted edges acyclic, monotone entries well formed and unique per (i,j).
void validate_knowledge(const CausalKnowledge& k, int d);

// Text format (one statement per line, '#' comments):
//   trusted: <col> -> <col>
//   forbidden: <col> -> <col> [weight=<positive>]
//   monotone: <col> -> <col> sign=<+|-> [given=<col>,<col>,...]
//   temporal: <col>,... < <col>,... [< ...]
// Temporal orderings expand into forbidden edges from later to earlier tiers.
CausalKnowledge parse_knowledge_text(const std::string& text,
                                     const std::vector<ColumnSchema>& schema);
CausalKnowledge parse_knowledge(const std::string& path,
                                const std::vector<ColumnSchema>& schema);

nlohmann::json knowledge_to_json(const CausalKnowledge& k,
                                 const std::vector<ColumnSchema>& schema);
CausalKnowledge knowledge_from_json(const nlohmann::json& j,
                                    const std::vector<ColumnSchema>& schema);

// Synthesizes knowledge from a simulated ground-truth DAG: reveals a fraction
// of the true edges (optionally corrupting some into acyclicity-preserving
// non-edges), forbids every non-edge pair touching a root node, and emits the
// n_mono largest-magnitude monotone effects measured on oracle samples.
CausalKnowledge derive_knowledge_from_scm(const Scm& scm, double reveal_fraction, int n_mono,
                                          double corrupt_fraction, Rng& rng);

}  // namespace cw
