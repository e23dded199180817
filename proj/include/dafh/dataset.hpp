#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dafh/core.hpp"

namespace dafh {

enum class ColumnKind { numeric, categorical };

// One encoded feature column. A numeric input column maps to one output
// column; a categorical input column with m categories maps to m one-hot
// columns (category order is sorted, so encoding is deterministic).
struct FeatureColumn {
    std::string source;    // original column name
    std::string category;  // empty for numeric columns
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;     // z-score stats, filled from training rows only
    double stdev = 1.0;

    std::string name() const {
        return category.empty() ? source : source + "=" + category;
    }
};

struct Schema {
    std::vector<FeatureColumn> columns;
    std::string label_name;
    std::vector<std::string> sensitive_names;
    bool standardized = false;

    std::size_t dim() const { return columns.size(); }

    // Hash of the column layout (sources, categories, kinds) plus label and
    // sensitive names. Standardization stats are deliberately excluded so a
    // model can be checked against data that still awaits the same transform.
    std::uint64_t fingerprint() const;
};

struct Dataset {
    Matrix features;   // n x d, sensitive attributes excluded
    std::vector<int> labels;  // values in {+1, -1}
    std::vector<std::vector<std::string>> sensitive;  // column-major, one vector per name
    Schema schema;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }

    bool has_sensitive(const std::string& name) const;
    const std::vector<std::string>& sensitive_column(const std::string& name) const;

    Dataset select(const std::vector<std::size_t>& idx) const;
};

struct SplitSpec {
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    std::uint64_t repeat_index = 0;
};

// Two binary sensitive attributes and a label, all uniform on {+1,-1};
// each feature is the matching attribute shifted by delta*s1*s2*y plus
// Gaussian noise of the given sigma. Bit-reproducible for a fixed seed.
Dataset gen_synthetic(std::size_t n, double delta, double sigma, std::uint64_t seed);

// Raw CSV contents before any encoding.
struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180-style parser: quoted fields, embedded commas/quotes/newlines,
// UTF-8 passthrough. Missing-value tokens: "", "?", "NA".
RawTable parse_csv_text(std::string_view text);
RawTable parse_csv(const std::string& path);

bool is_missing_token(std::string_view value);

// Builds a Dataset from a raw table: sensitive columns are moved out of the
// feature set, categoricals are one-hot encoded, numerics kept raw pending
// standardize(). Rows with missing values are dropped (count reported via
// dropped_rows when non-null).
Dataset encode_table(const RawTable& raw, const std::string& label_name,
                     const std::vector<std::string>& sensitive_names,
                     std::size_t* dropped_rows = nullptr);

// Re-encode with an existing schema (evaluation path: test data must go
// through the exact transform the model was trained with, including the
// stored z-score stats).
Dataset encode_with_schema(const RawTable& raw, const Schema& schema,
                           std::size_t* dropped_rows = nullptr);

Dataset load_csv(const std::string& path, const std::string& label_name,
                 const std::vector<std::string>& sensitive_names,
                 std::size_t* dropped_rows = nullptr);

// Z-scores every numeric column using train statistics (population std;
// columns with train std below 1e-12 are centered only) and applies the same
// affine map to every dataset in `others`. One-hot columns pass through.
std::pair<Dataset, std::vector<Dataset>> standardize(Dataset train, std::vector<Dataset> others);

// Seeded uniform permutation; first ceil(train_fraction*n) rows to train.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec);

// Writes feature columns, then sensitive columns, then the label.
// For synthetic data this yields the x1,x2,s1,s2,y layout.
void write_csv(const Dataset& data, const std::string& path);

// Test helper: recovers the original category of `source` from an encoded row.
std::string decode_category(const Schema& schema, const double* row, const std::string& source);

}  // namespace dafh
