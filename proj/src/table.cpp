#include "causalwrap/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "causalwrap/errors.hpp"
#include "causalwrap/log.hpp"

namespace cw {

namespace {

constexpr double kDegenerateStd = 1e-12;

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(*begin))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(*(end - 1)))) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

const char* kind_name(ColumnKind k) {
    return k == ColumnKind::Binary ? "binary" : "continuous";
}

ColumnKind kind_from_name(const std::string& s) {
    if (s == "binary") return ColumnKind::Binary;
    if (s == "continuous") return ColumnKind::Continuous;
    throw ValidationError("schema: unknown column kind '" + s + "'");
}

}  // namespace

int Table::column_index(const std::string& name) const {
    for (int j = 0; j < d(); ++j) {
        if (schema[static_cast<std::size_t>(j)].name == name) return j;
    }
    return -1;
}

ValidationReport validate_table(const Table& t, bool relaxed_binary) {
    if (t.rows.rows() == 0) throw ValidationError("table: zero rows");
    if (t.rows.cols() == 0) throw ValidationError("table: zero columns");
    if (t.schema.size() != static_cast<std::size_t>(t.rows.cols())) {
        throw ValidationError("table: schema width does not match data width");
    }
    ValidationReport report;
    report.columns.resize(t.schema.size());
    for (int j = 0; j < t.d(); ++j) {
        const auto col = t.rows.col(j);
        bool all01 = true;
        for (int i = 0; i < t.n(); ++i) {
            const double v = col(i);
            if (!std::isfinite(v)) {
                throw ValidationError("table: non-finite value in column '" +
                                      t.schema[static_cast<std::size_t>(j)].name + "'");
            }
            if (v != 0.0 && v != 1.0) all01 = false;
        }
        auto& cv = report.columns[static_cast<std::size_t>(j)];
        cv.inferred = all01 ? ColumnKind::Binary : ColumnKind::Continuous;
        cv.constant = (col.maxCoeff() - col.minCoeff()) == 0.0;
        if (t.schema[static_cast<std::size_t>(j)].kind == ColumnKind::Binary && !all01) {
            const bool relaxed_ok = relaxed_binary && t.provenance == Provenance::BaseSynthetic;
            if (!relaxed_ok) {
                throw ValidationError("table: binary column '" +
                                      t.schema[static_cast<std::size_t>(j)].name +
                                      "' holds values outside {0,1}");
            }
        }
    }
    return report;
}

StandardizeStats compute_standardize_stats(const Table& t, bool pass_through_degenerate) {
    const int d = t.d();
    StandardizeStats s;
    s.mean = Eigen::VectorXd::Zero(d);
    s.std = Eigen::VectorXd::Ones(d);
    s.scaled.assign(static_cast<std::size_t>(d), false);
    for (int j = 0; j < d; ++j) {
        if (t.schema[static_cast<std::size_t>(j)].kind != ColumnKind::Continuous) continue;
        const auto col = t.rows.col(j);
        const double mean = col.mean();
        double sd = 0.0;
        if (t.n() > 1) {
            sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(t.n() - 1));
        }
        if (sd < kDegenerateStd) {
            if (!pass_through_degenerate) {
                throw ValidationError("standardize: degenerate continuous column '" +
                                      t.schema[static_cast<std::size_t>(j)].name + "'");
            }
            continue;
        }
        s.mean(j) = mean;
        s.std(j) = sd;
        s.scaled[static_cast<std::size_t>(j)] = true;
    }
    return s;
}

void apply_standardize(Eigen::MatrixXd& rows, const StandardizeStats& s) {
    for (int j = 0; j < rows.cols(); ++j) {
        if (!s.scaled[static_cast<std::size_t>(j)]) continue;
        rows.col(j) = (rows.col(j).array() - s.mean(j)) / s.std(j);
    }
}

void invert_standardize(Eigen::MatrixXd& rows, const StandardizeStats& s) {
    for (int j = 0; j < rows.cols(); ++j) {
        if (!s.scaled[static_cast<std::size_t>(j)]) continue;
        rows.col(j) = rows.col(j).array() * s.std(j) + s.mean(j);
    }
}

StandardizeStats standardize(Table& t, bool pass_through_degenerate) {
    auto stats = compute_standardize_stats(t, pass_through_degenerate);
    apply_standardize(t.rows, stats);
    return stats;
}

Table read_csv(const std::string& path, bool relaxed_binary) {
    std::ifstream in(path);
    if (!in) throw IoError("read_csv: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("read_csv: empty file '" + path + "'");
    const auto header = split_line(line);
    const std::size_t width = header.size();

    std::vector<std::vector<std::string>> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = split_line(line);
        if (row.size() != width) {
            throw ValidationError("read_csv: ragged row " + std::to_string(cells.size() + 2) +
                                  " in '" + path + "'");
        }
        cells.push_back(std::move(row));
    }
    if (cells.empty()) throw ValidationError("read_csv: no data rows in '" + path + "'");
    const int n = static_cast<int>(cells.size());

    // A column is numeric iff every cell parses as a double; anything else is
    // a text column and expands to indicator columns.
    std::vector<bool> numeric(width, true);
    std::vector<std::vector<double>> parsed(width, std::vector<double>(static_cast<std::size_t>(n)));
    for (std::size_t j = 0; j < width; ++j) {
        for (int i = 0; i < n; ++i) {
            if (!parse_double(cells[static_cast<std::size_t>(i)][j], parsed[j][static_cast<std::size_t>(i)])) {
                numeric[j] = false;
                break;
            }
        }
    }

    std::vector<ColumnSchema> schema;
    std::vector<std::vector<double>> out_cols;
    for (std::size_t j = 0; j < width; ++j) {
        const std::string name = trim(header[j]);
        if (name.empty()) throw ValidationError("read_csv: empty column name in header");
        if (numeric[j]) {
            schema.push_back({name, ColumnKind::Continuous});
            out_cols.push_back(std::move(parsed[j]));
            continue;
        }
        std::set<std::string> values;
        for (int i = 0; i < n; ++i) values.insert(trim(cells[static_cast<std::size_t>(i)][j]));
        for (const auto& v : values) {
            schema.push_back({name + "=" + v, ColumnKind::Binary});
            std::vector<double> col(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                col[static_cast<std::size_t>(i)] = trim(cells[static_cast<std::size_t>(i)][j]) == v ? 1.0 : 0.0;
            }
            out_cols.push_back(std::move(col));
        }
    }

    Table t;
    t.schema = schema;
    t.rows.resize(n, static_cast<int>(out_cols.size()));
    for (std::size_t j = 0; j < out_cols.size(); ++j) {
        for (int i = 0; i < n; ++i) t.rows(i, static_cast<int>(j)) = out_cols[j][static_cast<std::size_t>(i)];
    }
    if (relaxed_binary) t.provenance = Provenance::BaseSynthetic;
    const auto report = validate_table(t, relaxed_binary);
    for (int j = 0; j < t.d(); ++j) {
        t.schema[static_cast<std::size_t>(j)].kind = report.columns[static_cast<std::size_t>(j)].inferred;
    }
    return t;
}

void write_csv(const Table& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_csv: cannot open '" + path + "'");
    for (int j = 0; j < t.d(); ++j) {
        const auto& name = t.schema[static_cast<std::size_t>(j)].name;
        if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos) {
            throw ValidationError("write_csv: column name '" + name + "' contains a delimiter");
        }
        out << (j ? "," : "") << name;
    }
    out << '\n';
    char buf[64];
    for (int i = 0; i < t.n(); ++i) {
        for (int j = 0; j < t.d(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.16e", t.rows(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("write_csv: write failed for '" + path + "'");
}

void write_csv_decoded(const Table& t, const std::string& path) {
    // Group indicator columns "base=value" back into one text column per base.
    struct Group {
        std::vector<int> cols;
        std::vector<std::string> values;
    };
    std::vector<std::pair<std::string, Group>> groups;  // insertion ordered
    std::vector<int> plain;
    std::map<std::string, std::size_t> group_of;
    for (int j = 0; j < t.d(); ++j) {
        const auto& name = t.schema[static_cast<std::size_t>(j)].name;
        const auto pos = name.find('=');
        if (pos == std::string::npos || t.schema[static_cast<std::size_t>(j)].kind != ColumnKind::Binary) {
            plain.push_back(j);
            continue;
        }
        const std::string base = name.substr(0, pos);
        auto it = group_of.find(base);
        if (it == group_of.end()) {
            group_of[base] = groups.size();
            groups.push_back({base, {}});
            it = group_of.find(base);
        }
        groups[it->second].second.cols.push_back(j);
        groups[it->second].second.values.push_back(name.substr(pos + 1));
    }

    std::ofstream out(path);
    if (!out) throw IoError("write_csv_decoded: cannot open '" + path + "'");
    bool first = true;
    for (int j : plain) {
        out << (first ? "" : ",") << t.schema[static_cast<std::size_t>(j)].name;
        first = false;
    }
    for (const auto& [base, g] : groups) {
        out << (first ? "" : ",") << base;
        first = false;
    }
    out << '\n';
    char buf[64];
    for (int i = 0; i < t.n(); ++i) {
        first = true;
        for (int j : plain) {
            std::snprintf(buf, sizeof(buf), "%.16e", t.rows(i, j));
            out << (first ? "" : ",") << buf;
            first = false;
        }
        for (const auto& [base, g] : groups) {
            int best = 0;
            for (std::size_t c = 1; c < g.cols.size(); ++c) {
                if (t.rows(i, g.cols[c]) > t.rows(i, g.cols[static_cast<std::size_t>(best)])) {
                    best = static_cast<int>(c);
                }
            }
            out << (first ? "" : ",") << g.values[static_cast<std::size_t>(best)];
            first = false;
        }
        out << '\n';
    }
}

void write_schema_json(const Table& t, const StandardizeStats* stats, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    auto& cols = j["columns"];
    cols = nlohmann::json::array();
    for (int c = 0; c < t.d(); ++c) {
        nlohmann::json col;
        col["name"] = t.schema[static_cast<std::size_t>(c)].name;
        col["kind"] = kind_name(t.schema[static_cast<std::size_t>(c)].kind);
        if (stats && stats->scaled[static_cast<std::size_t>(c)]) {
            col["mean"] = stats->mean(c);
            col["std"] = stats->std(c);
        }
        cols.push_back(col);
    }
    std::ofstream out(path);
    if (!out) throw IoError("write_schema_json: cannot open '" + path + "'");
    out << j.dump(2) << '\n';
}

void apply_schema_json(Table& t, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("apply_schema_json: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("apply_schema_json: malformed JSON: ") + e.what());
    }
    const auto& cols = j.at("columns");
    if (static_cast<int>(cols.size()) != t.d()) {
        throw ValidationError("apply_schema_json: sidecar width " + std::to_string(cols.size()) +
                              " does not match table width " + std::to_string(t.d()));
    }
    for (int c = 0; c < t.d(); ++c) {
        const auto& col = cols[static_cast<std::size_t>(c)];
        const std::string name = col.at("name").get<std::string>();
        if (name != t.schema[static_cast<std::size_t>(c)].name) {
            throw ValidationError("apply_schema_json: column " + std::to_string(c) + " is '" +
                                  t.schema[static_cast<std::size_t>(c)].name + "' but sidecar says '" + name + "'");
        }
        t.schema[static_cast<std::size_t>(c)].kind = kind_from_name(col.at("kind").get<std::string>());
    }
}

std::uint64_t schema_hash(const std::vector<ColumnSchema>& schema) {
    // FNV-1a over "name:kind;" for each column.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& col : schema) {
        mix(col.name);
        mix(":");
        mix(kind_name(col.kind));
        mix(";");
    }
    return h;
}

}  // namespace cw
