#include "dafh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "dafh/rng.hpp"

namespace dafh {

namespace {

bool parse_number(const std::string& s, double* out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    if (out) *out = v;
    return true;
}

std::string trimmed(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return j;
    }
    throw data_error("missing column: " + name);
}

// label mapping: {0,1} -> {-1,+1}; {-1,+1} kept; otherwise two distinct
// strings, first in sorted order maps to -1
int map_label(const std::string& value, const std::vector<std::string>& sorted_values) {
    double a = 0, b = 0;
    if (sorted_values.size() == 2 && parse_number(sorted_values[0], &a) &&
        parse_number(sorted_values[1], &b)) {
        const double lo = std::min(a, b), hi = std::max(a, b);
        double v = 0;
        parse_number(value, &v);
        if (lo == 0.0 && hi == 1.0) return v == 1.0 ? +1 : -1;
        if (lo == -1.0 && hi == 1.0) return v == 1.0 ? +1 : -1;
        return v == lo ? -1 : +1;
    }
    return value == sorted_values[0] ? -1 : +1;
}

}  // namespace

std::uint64_t Schema::fingerprint() const {
    std::uint64_t h = fnv1a64("dafh-schema-v1");
    for (const auto& c : columns) {
        h = fnv1a64(c.source, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(c.category, h);
        h = fnv1a64(c.kind == ColumnKind::numeric ? "\x1f" "n;" : "\x1f" "c;", h);
    }
    h = fnv1a64("label=", h);
    h = fnv1a64(label_name, h);
    for (const auto& s : sensitive_names) {
        h = fnv1a64(";s=", h);
        h = fnv1a64(s, h);
    }
    return h;
}

bool Dataset::has_sensitive(const std::string& name) const {
    for (const auto& n : schema.sensitive_names) {
        if (n == name) return true;
    }
    return false;
}

const std::vector<std::string>& Dataset::sensitive_column(const std::string& name) const {
    for (std::size_t j = 0; j < schema.sensitive_names.size(); ++j) {
        if (schema.sensitive_names[j] == name) return sensitive[j];
    }
    throw data_error("missing sensitive column: " + name);
}

Dataset Dataset::select(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.schema = schema;
    out.features = Matrix(idx.size(), features.cols);
    out.labels.resize(idx.size());
    out.sensitive.resize(sensitive.size());
    for (auto& col : out.sensitive) col.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t i = idx[r];
        std::copy(features.row(i), features.row(i) + features.cols, out.features.row(r));
        out.labels[r] = labels[i];
        for (std::size_t j = 0; j < sensitive.size(); ++j) {
            out.sensitive[j].push_back(sensitive[j][i]);
        }
    }
    return out;
}

Dataset gen_synthetic(std::size_t n, double delta, double sigma, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_synthetic: n must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("gen_synthetic: sigma must be > 0");

    Dataset out;
    out.features = Matrix(n, 2);
    out.labels.resize(n);
    out.sensitive.assign(2, {});
    out.sensitive[0].reserve(n);
    out.sensitive[1].reserve(n);

    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        // draw order per sample: s1, s2, y, then the two feature noises
        const int s1 = rng.next_sign();
        const int s2 = rng.next_sign();
        const int y = rng.next_sign();
        const double shift = delta * s1 * s2 * y;
        out.features.at(i, 0) = s1 + shift + sigma * rng.next_gaussian();
        out.features.at(i, 1) = s2 + shift + sigma * rng.next_gaussian();
        out.labels[i] = y;
        out.sensitive[0].push_back(s1 > 0 ? "1" : "-1");
        out.sensitive[1].push_back(s2 > 0 ? "1" : "-1");
    }

    out.schema.columns = {
        {"x1", "", ColumnKind::numeric, 0.0, 1.0},
        {"x2", "", ColumnKind::numeric, 0.0, 1.0},
    };
    out.schema.label_name = "y";
    out.schema.sensitive_names = {"s1", "s2"};
    return out;
}

RawTable parse_csv_text(std::string_view text) {
    RawTable table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any_field = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        any_field = false;
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty()) {
            table.header = std::move(record);
        } else {
            table.rows.push_back(std::move(record));
        }
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                any_field = true;
                break;
            case ',':
                end_field();
                any_field = true;  // a comma implies a following (possibly empty) field
                break;
            case '\r':
                break;
            case '\n':
                if (!field.empty() || !record.empty() || any_field) end_record();
                break;
            default:
                field.push_back(c);
                break;
        }
    }
    if (!field.empty() || !record.empty() || any_field) end_record();

    if (in_quotes) throw data_error("malformed CSV: unterminated quoted field");
    if (table.header.empty()) throw data_error("empty CSV file");
    for (auto& h : table.header) h = trimmed(h);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw data_error("malformed CSV: row with " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(table.header.size()));
        }
    }
    return table;
}

RawTable parse_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv_text(ss.str());
}

bool is_missing_token(std::string_view value) {
    return value.empty() || value == "?" || value == "NA";
}

namespace {

struct ColumnPlan {
    std::size_t raw_index;
    std::string name;
    ColumnKind kind;
    std::vector<std::string> categories;  // sorted, for categoricals
};

Dataset encode_rows(const RawTable& raw, const Schema& schema,
                    const std::vector<ColumnPlan>& plan, std::size_t label_idx,
                    const std::vector<std::size_t>& sensitive_idx,
                    const std::vector<std::string>& sorted_label_values,
                    std::size_t* dropped_rows) {
    // keep rows with no missing value in any used column
    std::vector<std::size_t> keep;
    keep.reserve(raw.rows.size());
    for (std::size_t i = 0; i < raw.rows.size(); ++i) {
        const auto& row = raw.rows[i];
        bool ok = !is_missing_token(trimmed(row[label_idx]));
        for (const auto& p : plan) {
            if (!ok) break;
            ok = !is_missing_token(trimmed(row[p.raw_index]));
        }
        for (const auto j : sensitive_idx) {
            if (!ok) break;
            ok = !is_missing_token(trimmed(row[j]));
        }
        if (ok) keep.push_back(i);
    }
    const std::size_t dropped = raw.rows.size() - keep.size();
    if (dropped_rows) *dropped_rows = dropped;
    if (dropped > 0) {
        std::fprintf(stderr, "note: dropped %zu rows with missing values\n", dropped);
    }
    if (keep.empty()) throw data_error("no usable rows after dropping missing values");

    Dataset out;
    out.schema = schema;
    out.features = Matrix(keep.size(), schema.dim());
    out.labels.resize(keep.size());
    out.sensitive.assign(sensitive_idx.size(), {});
    for (auto& col : out.sensitive) col.reserve(keep.size());

    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto& row = raw.rows[keep[r]];
        std::size_t j = 0;
        for (const auto& p : plan) {
            const std::string value = trimmed(row[p.raw_index]);
            if (p.kind == ColumnKind::numeric) {
                double v = 0;
                if (!parse_number(value, &v)) {
                    throw data_error("non-numeric value '" + value + "' in numeric column " + p.name);
                }
                const auto& col = schema.columns[j];
                out.features.at(r, j) = schema.standardized
                        ? (col.stdev > 0.0 ? (v - col.mean) / col.stdev : v - col.mean)
                        : v;
                ++j;
            } else {
                // unseen categories encode as an all-zero block
                for (const auto& cat : p.categories) {
                    out.features.at(r, j++) = (value == cat) ? 1.0 : 0.0;
                }
            }
        }
        const std::string label_value = trimmed(row[label_idx]);
        bool known = false;
        for (const auto& v : sorted_label_values) known = known || v == label_value;
        if (!known) throw data_error("unexpected label value '" + label_value + "'");
        out.labels[r] = map_label(label_value, sorted_label_values);
        for (std::size_t s = 0; s < sensitive_idx.size(); ++s) {
            out.sensitive[s].push_back(trimmed(row[sensitive_idx[s]]));
        }
    }
    return out;
}

std::vector<std::string> label_values_of(const RawTable& raw, std::size_t label_idx) {
    std::set<std::string> values;
    for (const auto& row : raw.rows) {
        const std::string v = trimmed(row[label_idx]);
        if (!is_missing_token(v)) values.insert(v);
    }
    if (values.size() != 2) {
        throw data_error("label not binary: column has " + std::to_string(values.size()) +
                         " distinct values");
    }
    return {values.begin(), values.end()};
}

}  // namespace

Dataset encode_table(const RawTable& raw, const std::string& label_name,
                     const std::vector<std::string>& sensitive_names,
                     std::size_t* dropped_rows) {
    if (raw.rows.empty()) throw data_error("CSV has no data rows");
    const std::size_t label_idx = column_index(raw.header, label_name);
    std::vector<std::size_t> sensitive_idx;
    for (const auto& name : sensitive_names) {
        sensitive_idx.push_back(column_index(raw.header, name));
    }

    std::vector<ColumnPlan> plan;
    for (std::size_t j = 0; j < raw.header.size(); ++j) {
        if (j == label_idx) continue;
        if (std::find(sensitive_idx.begin(), sensitive_idx.end(), j) != sensitive_idx.end()) continue;
        ColumnPlan p{j, raw.header[j], ColumnKind::numeric, {}};
        std::set<std::string> values;
        for (const auto& row : raw.rows) {
            const std::string v = trimmed(row[j]);
            if (is_missing_token(v)) continue;
            if (!parse_number(v, nullptr)) p.kind = ColumnKind::categorical;
            values.insert(v);
        }
        if (p.kind == ColumnKind::categorical) {
            p.categories.assign(values.begin(), values.end());
            if (p.categories.empty()) throw data_error("column " + p.name + " has no usable values");
        }
        plan.push_back(std::move(p));
    }

    Schema schema;
    schema.label_name = label_name;
    schema.sensitive_names = sensitive_names;
    for (const auto& p : plan) {
        if (p.kind == ColumnKind::numeric) {
            schema.columns.push_back({p.name, "", ColumnKind::numeric, 0.0, 1.0});
        } else {
            for (const auto& cat : p.categories) {
                schema.columns.push_back({p.name, cat, ColumnKind::categorical, 0.0, 1.0});
            }
        }
    }

    return encode_rows(raw, schema, plan, label_idx, sensitive_idx,
                       label_values_of(raw, label_idx), dropped_rows);
}

Dataset encode_with_schema(const RawTable& raw, const Schema& schema, std::size_t* dropped_rows) {
    if (raw.rows.empty()) throw data_error("CSV has no data rows");
    const std::size_t label_idx = column_index(raw.header, schema.label_name);
    std::vector<std::size_t> sensitive_idx;
    for (const auto& name : schema.sensitive_names) {
        sensitive_idx.push_back(column_index(raw.header, name));
    }

    // rebuild the per-source plan from the stored columns
    std::vector<ColumnPlan> plan;
    for (const auto& col : schema.columns) {
        if (plan.empty() || plan.back().name != col.source) {
            plan.push_back({column_index(raw.header, col.source), col.source, col.kind, {}});
        }
        if (col.kind == ColumnKind::categorical) plan.back().categories.push_back(col.category);
    }

    return encode_rows(raw, schema, plan, label_idx, sensitive_idx,
                       label_values_of(raw, label_idx), dropped_rows);
}

Dataset load_csv(const std::string& path, const std::string& label_name,
                 const std::vector<std::string>& sensitive_names, std::size_t* dropped_rows) {
    return encode_table(parse_csv(path), label_name, sensitive_names, dropped_rows);
}

std::pair<Dataset, std::vector<Dataset>> standardize(Dataset train, std::vector<Dataset> others) {
    if (train.size() == 0) throw std::invalid_argument("standardize: empty training set");
    const std::uint64_t fp = train.schema.fingerprint();
    for (const auto& o : others) {
        if (o.schema.fingerprint() != fp) throw std::invalid_argument("standardize: schema mismatch");
    }

    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    for (std::size_t j = 0; j < d; ++j) {
        auto& col = train.schema.columns[j];
        if (col.kind != ColumnKind::numeric) continue;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += train.features.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = train.features.at(i, j) - mean;
            var += c * c;
        }
        // population std; near-constant columns are centered only
        const double sd = std::sqrt(var / static_cast<double>(n));
        col.mean = mean;
        col.stdev = sd < 1e-12 ? 0.0 : sd;
    }

    auto apply = [&](Dataset& ds) {
        for (std::size_t j = 0; j < d; ++j) {
            const auto& col = train.schema.columns[j];
            if (col.kind != ColumnKind::numeric) continue;
            for (std::size_t i = 0; i < ds.size(); ++i) {
                double& v = ds.features.at(i, j);
                v = col.stdev > 0.0 ? (v - col.mean) / col.stdev : v - col.mean;
            }
        }
        ds.schema = train.schema;
        ds.schema.standardized = true;
    };

    apply(train);
    train.schema.standardized = true;
    for (auto& o : others) apply(o);
    return {std::move(train), std::move(others)};
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitSpec& spec) {
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie in (0,1)");
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(spec.seed, spec.repeat_index);
    rng.shuffle(idx);

    const auto train_n = static_cast<std::size_t>(
            std::ceil(spec.train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_n));
    std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(train_n), idx.end());
    return {data.select(train_idx), data.select(test_idx)};
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);

    std::string header;
    for (const auto& c : data.schema.columns) {
        header += c.name();
        header += ',';
    }
    for (const auto& s : data.schema.sensitive_names) {
        header += s;
        header += ',';
    }
    header += data.schema.label_name;
    out << header << '\n';

    char buf[64];
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::string line;
        for (std::size_t j = 0; j < data.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.features.at(i, j));
            line += buf;
            line += ',';
        }
        for (std::size_t s = 0; s < data.sensitive.size(); ++s) {
            line += data.sensitive[s][i];
            line += ',';
        }
        line += data.labels[i] > 0 ? "1" : "-1";
        out << line << '\n';
    }
    if (!out) throw data_error("write failed: " + path);
}

std::string decode_category(const Schema& schema, const double* row, const std::string& source) {
    for (std::size_t j = 0; j < schema.columns.size(); ++j) {
        const auto& c = schema.columns[j];
        if (c.source == source && c.kind == ColumnKind::categorical && row[j] == 1.0) {
            return c.category;
        }
    }
    return {};
}

}  // namespace dafh
