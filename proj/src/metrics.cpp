#include "dafh/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include "dafh/rng.hpp"

namespace dafh {

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

std::string format_metric(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string EvalReport::csv_header() {
    return "prob_fwh,accuracy,violations,max_gain,min_envy,delta_disparity,min_group_size,"
           "group_sizes,flags";
}

std::string EvalReport::to_csv_row() const {
    std::string sizes;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
        if (g) sizes += ' ';
        sizes += std::to_string(group_sizes[g]);
    }
    std::string flag_text;
    for (std::size_t f = 0; f < flags.size(); ++f) {
        if (f) flag_text += ' ';
        flag_text += flags[f];
    }
    std::string row;
    row += format_metric(prob_fwh);
    row += ',';
    row += format_metric(accuracy);
    row += ',';
    row += format_metric(violations);
    row += ',';
    row += format_metric(max_gain);
    row += ',';
    row += format_metric(min_envy);
    row += ',';
    row += format_metric(delta_disparity);
    row += ',';
    row += std::to_string(min_group_size);
    row += ',';
    row += sizes;
    row += ',';
    row += flag_text;
    return row;
}

double prob_fwh(const LossTable& table) {
    const std::size_t models = table.hard.cols;
    std::size_t satisfied = 0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        const double* loss = table.hard.row(i);
        const double own = loss[table.assignments[i] + 1];
        bool ok = true;
        for (std::size_t m = 0; m < models && ok; ++m) ok = own <= loss[m];
        satisfied += ok ? 1 : 0;
    }
    return static_cast<double>(satisfied) / static_cast<double>(table.n());
}

std::size_t violations(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("violations: group count mismatch");
    const Matrix risks = group_risks(table, /*skip_empty=*/true);
    std::size_t count = 0;
    for (std::size_t g = 0; g < k; ++g) {
        if (table.group_sizes[g] == 0) continue;
        const double own = risks.at(g, g + 1);
        if (own > risks.at(g, 0)) ++count;  // rationality
        for (std::size_t j = 0; j < k; ++j) {
            if (j != g && own > risks.at(g, j + 1)) ++count;  // envy-freeness
        }
    }
    return count;
}

double max_gain(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("max_gain: group count mismatch");
    const Matrix risks = group_risks(table, /*skip_empty=*/true);
    double best = nan_value;
    for (std::size_t g = 0; g < k; ++g) {
        if (table.group_sizes[g] == 0) continue;
        const double gain = risks.at(g, 0) - risks.at(g, g + 1);
        if (std::isnan(best) || gain > best) best = gain;
    }
    return best;
}

double min_envy(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("min_envy: group count mismatch");
    const Matrix risks = group_risks(table, /*skip_empty=*/true);
    double best = nan_value;
    for (std::size_t g = 0; g < k; ++g) {
        if (table.group_sizes[g] == 0) continue;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == g) continue;
            const double envy = risks.at(g, j + 1) - risks.at(g, g + 1);
            if (std::isnan(best) || envy > best) best = envy;
        }
    }
    return best;
}

double delta_disparity(const LossTable& table, const std::vector<std::string>& group_values) {
    if (group_values.size() != table.n()) {
        throw std::invalid_argument("delta_disparity: value count mismatch");
    }
    std::map<std::string, std::array<double, 3>> acc;  // correct_assigned, correct_pooled, count
    for (std::size_t i = 0; i < table.n(); ++i) {
        auto& a = acc[group_values[i]];
        a[0] += 1.0 - table.hard.at(i, table.assignments[i] + 1);
        a[1] += 1.0 - table.hard.at(i, 0);
        a[2] += 1.0;
    }
    double lo_a = 1.0, hi_a = 0.0, lo_p = 1.0, hi_p = 0.0;
    for (const auto& [value, a] : acc) {
        const double assigned = a[0] / a[2];
        const double pooled = a[1] / a[2];
        lo_a = std::min(lo_a, assigned);
        hi_a = std::max(hi_a, assigned);
        lo_p = std::min(lo_p, pooled);
        hi_p = std::max(hi_p, pooled);
    }
    const double disparity_assigned = std::max(0.0, hi_a - lo_a);
    const double disparity_pooled = std::max(0.0, hi_p - lo_p);
    return disparity_assigned - disparity_pooled;
}

Matrix composition(const std::vector<std::size_t>& assignment, std::size_t k,
                   const Dataset& data, const std::vector<std::string>& attributes,
                   std::vector<std::string>* cell_names) {
    if (assignment.size() != data.size()) {
        throw std::invalid_argument("composition: assignment size mismatch");
    }
    if (attributes.empty()) throw std::invalid_argument("composition: no attributes");

    // per-attribute transformed values and their sorted ranges
    std::vector<std::vector<std::string>> values(attributes.size());
    std::vector<std::vector<std::string>> ranges(attributes.size());
    for (std::size_t a = 0; a < attributes.size(); ++a) {
        const auto& col = data.sensitive_column(attributes[a]);
        const bool bin_age = attributes[a] == "age" || attributes[a] == "Age";
        values[a].reserve(data.size());
        std::set<std::string> range;
        for (const auto& v : col) {
            values[a].push_back(bin_age ? age_bin_label(v) : v);
            range.insert(values[a].back());
        }
        ranges[a].assign(range.begin(), range.end());
    }

    std::size_t cells = 1;
    for (const auto& r : ranges) cells *= r.size();

    // cell index: first attribute is the major axis
    std::map<std::string, std::size_t> cell_of;
    {
        std::vector<std::size_t> strides(attributes.size(), 1);
        for (std::size_t a = attributes.size(); a-- > 1;) {
            strides[a - 1] = strides[a] * ranges[a].size();
        }
        std::vector<std::size_t> pos(attributes.size(), 0);
        for (std::size_t c = 0; c < cells; ++c) {
            std::size_t rem = c;
            std::string name;
            for (std::size_t a = 0; a < attributes.size(); ++a) {
                const std::size_t p = rem / strides[a];
                rem %= strides[a];
                if (a) name += '|';
                name += attributes[a] + "=" + ranges[a][p];
            }
            cell_of[name] = c;
            if (cell_names) cell_names->push_back(name);
        }
    }

    Matrix out(k, cells);
    std::vector<double> totals(k, 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::string name;
        for (std::size_t a = 0; a < attributes.size(); ++a) {
            if (a) name += '|';
            name += attributes[a] + "=" + values[a][i];
        }
        out.at(assignment[i], cell_of.at(name)) += 1.0;
        totals[assignment[i]] += 1.0;
    }
    for (std::size_t g = 0; g < k; ++g) {
        if (totals[g] == 0.0) continue;
        for (std::size_t c = 0; c < cells; ++c) out.at(g, c) /= totals[g];
    }
    return out;
}

EvalReport evaluate(const ModelBundle& bundle, const Dataset& data,
                    const std::string& disparity_by,
                    const std::vector<std::string>& composition_by) {
    const LossTable table = build_loss_table(bundle, data);
    const std::size_t k = bundle.k();

    EvalReport report;
    report.group_sizes = table.group_sizes;
    report.min_group_size = table.min_group_size();
    report.accuracy = assigned_accuracy(table);

    const bool no_partition = k < 2;
    if (no_partition) {
        report.flags.push_back("no_partition");
        report.prob_fwh = nan_value;
        report.violations = nan_value;
        report.max_gain = nan_value;
        report.min_envy = nan_value;
    } else {
        for (std::size_t g = 0; g < k; ++g) {
            if (table.group_sizes[g] == 0) {
                report.flags.push_back("empty_group:" + std::to_string(g));
            }
        }
        report.prob_fwh = prob_fwh(table);
        report.violations = static_cast<double>(violations(table, k));
        report.max_gain = max_gain(table, k);
        report.min_envy = min_envy(table, k);
    }

    if (disparity_by.empty()) {
        report.delta_disparity = nan_value;
    } else if (!data.has_sensitive(disparity_by)) {
        throw data_error("delta disparity needs sensitive column: " + disparity_by);
    } else {
        report.delta_disparity = delta_disparity(table, data.sensitive_column(disparity_by));
    }

    if (!composition_by.empty()) {
        report.composition = composition(table.assignments, k, data, composition_by,
                                         &report.composition_cells);
    }
    return report;
}

GapResult generalization_gap(const ModelBundle& system, const PopulationSampler& population,
                             std::size_t pool_n, std::size_t trial_n, std::size_t trials,
                             std::uint64_t seed) {
    if (pool_n == 0 || trial_n == 0 || trials == 0) {
        throw std::invalid_argument("generalization_gap: counts must be positive");
    }
    GapResult result;
    {
        const Dataset pool = population(pool_n, derive_seed(seed, 0));
        const LossTable table = build_loss_table(system, pool);
        result.reference_min_group = table.min_group_size();
        if (result.reference_min_group == 0) {
            throw data_error("generalization_gap: empty group in the reference pool");
        }
        result.reference_objective = exact_objective(table, system.k());
    }
    result.samples.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        const Dataset trial = population(trial_n, derive_seed(seed, t + 1));
        const LossTable table = build_loss_table(system, trial);
        GapSample s;
        s.min_group = table.min_group_size();
        if (s.min_group == 0) {
            s.flagged = true;
            s.gap = nan_value;
        } else {
            s.gap = std::fabs(result.reference_objective - exact_objective(table, system.k()));
        }
        result.samples.push_back(s);
    }
    return result;
}

double concentration_bound(std::size_t k, double epsilon, std::size_t min_group) {
    const double kk = static_cast<double>(k);
    return 1.0 - 2.0 * kk * (kk + 1.0) *
                         std::exp(-2.0 * epsilon * epsilon *
                                  static_cast<double>(min_group) / 9.0);
}

double discrepancy_estimate(const Matrix& sample_a, const Matrix& sample_b,
                            const std::vector<LogisticModel>& hypothesis_grid) {
    if (sample_a.rows == 0 || sample_b.rows == 0) {
        throw std::invalid_argument("discrepancy: empty sample set");
    }
    if (hypothesis_grid.empty()) throw std::invalid_argument("discrepancy: empty grid");

    // cache hard predictions per hypothesis per sample set
    auto predict_all = [](const Matrix& x, const std::vector<LogisticModel>& grid) {
        Matrix preds(grid.size(), x.rows);
        for (std::size_t h = 0; h < grid.size(); ++h) {
            for (std::size_t i = 0; i < x.rows; ++i) {
                double t = grid[h].bias;
                const double* row = x.row(i);
                for (std::size_t j = 0; j < grid[h].weights.size(); ++j) {
                    t += grid[h].weights[j] * row[j];
                }
                preds.at(h, i) = t >= 0.0 ? 1.0 : -1.0;
            }
        }
        return preds;
    };
    const Matrix pa = predict_all(sample_a, hypothesis_grid);
    const Matrix pb = predict_all(sample_b, hypothesis_grid);

    double best = 0.0;
    for (std::size_t h = 0; h < hypothesis_grid.size(); ++h) {
        for (std::size_t g = 0; g < hypothesis_grid.size(); ++g) {
            double da = 0.0, db = 0.0;
            for (std::size_t i = 0; i < sample_a.rows; ++i) {
                da += pa.at(h, i) != pa.at(g, i) ? 1.0 : 0.0;
            }
            for (std::size_t i = 0; i < sample_b.rows; ++i) {
                db += pb.at(h, i) != pb.at(g, i) ? 1.0 : 0.0;
            }
            da /= static_cast<double>(sample_a.rows);
            db /= static_cast<double>(sample_b.rows);
            best = std::max(best, std::fabs(da - db));
        }
    }
    return best;
}

}  // namespace dafh
