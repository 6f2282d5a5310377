#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace cw {

enum class ColumnKind { Continuous, Binary };
enum class Provenance { Real, BaseSynthetic, Corrected, Oracle };

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
};

struct Table {
    std::vector<ColumnSchema> schema;
    Eigen::MatrixXd rows;  // n x d
    Provenance provenance = Provenance::Real;

    int n() const { return static_cast<int>(rows.rows()); }
    int d() const { return static_cast<int>(rows.cols()); }
    int column_index(const std::string& name) const;
};

struct ColumnValidation {
    ColumnKind inferred = ColumnKind::Continuous;
    bool constant = false;
};

struct ValidationReport {
    std::vector<ColumnValidation> columns;
};

// Kind inference (binary iff every observed value is 0 or 1) plus degeneracy
// flags. Throws on zero rows, non-finite entries, schema/width mismatch, and
// on declared-binary columns holding other values unless relaxed_binary
// (relaxed values are only legal for BaseSynthetic tables).
ValidationReport validate_table(const Table& t, bool relaxed_binary = false);

struct StandardizeStats {
    Eigen::VectorXd mean;       // 0 where not scaled
    Eigen::VectorXd std;        // 1 where not scaled
    std::vector<bool> scaled;   // continuous, non-degenerate columns
};

// Continuous columns map to mean 0 / std 1 using the sample std (n-1
// denominator); binary columns pass through. Degenerate continuous columns
// throw unless pass_through_degenerate.
StandardizeStats compute_standardize_stats(const Table& t, bool pass_through_degenerate = false);
void apply_standardize(Eigen::MatrixXd& rows, const StandardizeStats& s);
void invert_standardize(Eigen::MatrixXd& rows, const StandardizeStats& s);
StandardizeStats standardize(Table& t, bool pass_through_degenerate = false);

// CSV with a header row. Values are written as full-precision scientific
// notation (17 significant digits) so a write/read round trip is lossless.
// Text columns one-hot expand at ingestion into indicator columns named
// "col=value" (values sorted); write_csv_decoded folds them back via argmax.
Table read_csv(const std::string& path, bool relaxed_binary = false);
void write_csv(const Table& t, const std::string& path);
void write_csv_decoded(const Table& t, const std::string& path);

// JSON sidecar carrying column kinds and optional standardization stats so
// downstream tools can de-standardize corrected samples.
void write_schema_json(const Table& t, const StandardizeStats* stats, const std::string& path);
void apply_schema_json(Table& t, const std::string& path);

std::uint64_t schema_hash(const std::vector<ColumnSchema>& schema);

}  // namespace cw
