#include "dafh/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>

#include "dafh/kernels.hpp"
#include "dafh/rng.hpp"
#include "dafh/training.hpp"

namespace dafh {

namespace {

bool parse_number(const std::string& s, double* out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') return false;
    if (out) *out = v;
    return true;
}

std::string combo_key(std::size_t row,
                      const std::vector<const std::vector<std::string>*>& cols) {
    std::string key;
    for (const auto* col : cols) {
        key += (*col)[row];
        key += '\x1f';
    }
    return key;
}

bool coin_flip(const ManualRule& rule, const std::string& race, const std::string& sex,
               const std::string& age) {
    std::uint64_t h = fnv1a64("manual-coin");
    h = fnv1a64(race, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(sex, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(age, h);
    std::uint64_t sm = h ^ rule.coin_seed;
    return (splitmix64(sm) & 1) != 0;
}

std::size_t manual_assign(const ManualRule& rule, const std::string& race,
                          const std::string& sex, const std::string& age_raw) {
    const std::string age = age_bin_label(age_raw);
    const bool nonwhite = race != rule.white_value;
    const bool under45 = age == "Less than 25" || age == "25 - 45";
    if (nonwhite && sex == rule.male_value && under45) return 0;
    if (nonwhite && sex == rule.female_value && age == "25 - 45") return 1;
    return coin_flip(rule, race, sex, age) ? 1 : 0;
}

}  // namespace

const char* to_string(PartitionSource source) {
    switch (source) {
        case PartitionSource::attribute: return "attribute";
        case PartitionSource::kmeans: return "kmeans";
        case PartitionSource::intersection: return "intersection";
        case PartitionSource::manual: return "manual";
        case PartitionSource::learned: return "learned";
        case PartitionSource::single: return "single";
    }
    return "single";
}

PartitionSource partition_source_from_string(const std::string& s) {
    if (s == "attribute") return PartitionSource::attribute;
    if (s == "kmeans") return PartitionSource::kmeans;
    if (s == "intersection") return PartitionSource::intersection;
    if (s == "manual") return PartitionSource::manual;
    if (s == "learned") return PartitionSource::learned;
    if (s == "single") return PartitionSource::single;
    throw data_error("unknown partition source: " + s);
}

std::string age_bin_label(const std::string& raw) {
    double v = 0.0;
    if (!parse_number(raw, &v)) return raw;
    if (v < 25.0) return "Less than 25";
    if (v <= 45.0) return "25 - 45";
    return "Greater than 45";
}

std::size_t Partition::assign(const Dataset& data, std::size_t row) const {
    if (std::holds_alternative<SingleGroupRule>(rule)) return 0;

    if (const auto* attr = std::get_if<AttributeRule>(&rule)) {
        const auto& col = data.sensitive_column(attr->attribute);
        std::string value = col[row];
        if (attr->threshold.has_value()) {
            double v = 0.0;
            if (!parse_number(value, &v)) {
                throw data_error("attribute " + attr->attribute + ": non-numeric value '" +
                                 value + "' under a threshold rule");
            }
            value = v < *attr->threshold ? "lt" : "ge";
        }
        const auto it = attr->value_to_group.find(value);
        if (it == attr->value_to_group.end()) {
            throw data_error("attribute " + attr->attribute + ": unseen value '" + value + "'");
        }
        return it->second;
    }

    if (const auto* km = std::get_if<KMeansRule>(&rule)) {
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < km->centroids.rows; ++c) {
            double d2 = 0.0;
            const double* cen = km->centroids.row(c);
            const double* x = data.features.row(row);
            for (std::size_t j = 0; j < km->centroids.cols; ++j) {
                const double diff = x[j] - cen[j];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = c;
            }
        }
        return best;
    }

    if (const auto* inter = std::get_if<IntersectionRule>(&rule)) {
        std::vector<const std::vector<std::string>*> cols;
        cols.reserve(inter->attributes.size());
        for (const auto& a : inter->attributes) cols.push_back(&data.sensitive_column(a));
        const auto it = inter->combo_to_group.find(combo_key(row, cols));
        return it == inter->combo_to_group.end() ? inter->fallback_group : it->second;
    }

    const auto& manual = std::get<ManualRule>(rule);
    return manual_assign(manual, data.sensitive_column(manual.race_column)[row],
                         data.sensitive_column(manual.sex_column)[row],
                         data.sensitive_column(manual.age_column)[row]);
}

void write_partition_csv(const Partition& partition, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << "index,group\n";
    for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
        out << i << ',' << partition.assignment[i] << '\n';
    }
}

Partition trivial_partition(const Dataset& data, const std::string& attribute,
                            std::optional<double> binarize_threshold) {
    const auto& col = data.sensitive_column(attribute);

    AttributeRule rule;
    rule.attribute = attribute;
    rule.threshold = binarize_threshold;
    if (binarize_threshold.has_value()) {
        rule.value_to_group = {{"lt", 0}, {"ge", 1}};
    } else {
        std::set<std::string> values(col.begin(), col.end());
        if (values.size() != 2) {
            throw data_error("attribute " + attribute + " has " +
                             std::to_string(values.size()) +
                             " values; a binarize rule is required for a 2-group partition");
        }
        std::size_t g = 0;
        for (const auto& v : values) rule.value_to_group[v] = g++;
    }

    Partition part;
    part.k = 2;
    part.source = PartitionSource::attribute;
    part.rule = rule;
    part.assignment.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) part.assignment[i] = part.assign(data, i);
    return part;
}

std::pair<Partition, KMeansState> kmeans_partition(const Dataset& data, std::size_t k,
                                                   std::uint64_t seed, std::size_t max_iters,
                                                   double tol) {
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (n < k) throw std::invalid_argument("kmeans: need at least k samples");

    const Matrix& x = data.features;
    Rng rng(seed);

    // k-means++ seeding
    Matrix centroids(k, d);
    std::vector<double> dist2(n, 0.0);
    {
        const std::size_t first = static_cast<std::size_t>(rng.next_below(n));
        std::copy(x.row(first), x.row(first) + d, centroids.row(0));
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x.at(i, j) - centroids.at(0, j);
                acc += diff * diff;
            }
            dist2[i] = acc;
        }
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (const double v : dist2) total += v;
            std::size_t pick = 0;
            if (total > 0.0) {
                const double r = rng.next_double() * total;
                double run = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    run += dist2[i];
                    if (run >= r) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<std::size_t>(rng.next_below(n));
            }
            std::copy(x.row(pick), x.row(pick) + d, centroids.row(c));
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = x.at(i, j) - centroids.at(c, j);
                    acc += diff * diff;
                }
                dist2[i] = std::min(dist2[i], acc);
            }
        }
    }

    KMeansState state;
    std::vector<std::size_t> assign;
    std::vector<std::size_t> empty;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        const double inertia = kern::kmeans_assign(x, centroids, assign);
        state.inertia_history.push_back(inertia);
        state.inertia = inertia;
        state.iterations_run = iter + 1;

        const Matrix previous = centroids;
        kern::kmeans_update(x, assign, centroids, empty);

        if (!empty.empty()) {
            // re-seed each empty cluster from the point farthest from its
            // current centroid; such a move can only reduce the objective
            std::vector<bool> used(n, false);
            for (const std::size_t c : empty) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (used[i]) continue;
                    double acc = 0.0;
                    const double* cen = centroids.row(assign[i]);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double diff = x.at(i, j) - cen[j];
                        acc += diff * diff;
                    }
                    if (acc > far_d) {
                        far_d = acc;
                        far = i;
                    }
                }
                used[far] = true;
                std::copy(x.row(far), x.row(far) + d, centroids.row(c));
            }
            continue;  // keep iterating after a re-seed
        }

        double shift2 = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = centroids.at(c, j) - previous.at(c, j);
                acc += diff * diff;
            }
            shift2 = std::max(shift2, acc);
        }
        if (std::sqrt(shift2) < tol) break;
    }

    // final assignment against the converged centroids
    state.inertia = kern::kmeans_assign(x, centroids, assign);
    state.centroids = centroids;

    Partition part;
    part.k = k;
    part.source = PartitionSource::kmeans;
    part.rule = KMeansRule{centroids};
    part.assignment = std::move(assign);
    return {std::move(part), std::move(state)};
}

Partition intersection_partition(const Dataset& data,
                                 const std::vector<std::string>& attributes,
                                 std::size_t cell_cap) {
    if (attributes.empty()) throw std::invalid_argument("intersection: empty attribute list");

    std::vector<const std::vector<std::string>*> cols;
    std::size_t cell_product = 1;
    for (const auto& a : attributes) {
        cols.push_back(&data.sensitive_column(a));
        std::set<std::string> values(cols.back()->begin(), cols.back()->end());
        cell_product *= values.size();
        if (cell_product > cell_cap) {
            throw data_error("intersection: cross-product exceeds cap of " +
                             std::to_string(cell_cap) + " cells");
        }
    }

    // occupied combinations only, groups in sorted combination order
    std::set<std::string> combos;
    for (std::size_t i = 0; i < data.size(); ++i) combos.insert(combo_key(i, cols));

    IntersectionRule rule;
    rule.attributes = attributes;
    std::size_t g = 0;
    for (const auto& c : combos) rule.combo_to_group[c] = g++;

    Partition part;
    part.k = combos.size();
    part.source = PartitionSource::intersection;
    part.rule = rule;
    part.assignment.resize(data.size());
    std::vector<std::size_t> counts(part.k, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        part.assignment[i] = std::get<IntersectionRule>(part.rule).combo_to_group.at(
                combo_key(i, cols));
        ++counts[part.assignment[i]];
    }
    std::get<IntersectionRule>(part.rule).fallback_group = static_cast<std::size_t>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
    return part;
}

Partition manual_arrest_partition(const Dataset& data, const ManualRule& rule) {
    // fail fast if a required column is absent
    (void)data.sensitive_column(rule.race_column);
    (void)data.sensitive_column(rule.sex_column);
    (void)data.sensitive_column(rule.age_column);

    Partition part;
    part.k = 2;
    part.source = PartitionSource::manual;
    part.rule = rule;
    part.assignment.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) part.assignment[i] = part.assign(data, i);
    return part;
}

PartitionedSystem train_on_partition(const Dataset& train, const Partition& partition, double lr,
                                     std::size_t epochs, std::size_t batch_size,
                                     std::uint64_t seed, double l2) {
    if (partition.assignment.size() != train.size()) {
        throw std::invalid_argument("train_on_partition: partition size mismatch");
    }

    std::vector<std::vector<std::size_t>> groups(partition.k);
    for (std::size_t i = 0; i < train.size(); ++i) {
        groups[partition.assignment[i]].push_back(i);
    }
    for (std::size_t g = 0; g < partition.k; ++g) {
        if (groups[g].empty()) {
            throw data_error("empty training group " + std::to_string(g));
        }
    }

    PartitionedSystem sys;
    sys.partition = partition;
    std::vector<std::size_t> all(train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    sys.pooled = fit_logistic(train.features, train.labels, all, lr, epochs, batch_size, seed, l2);
    sys.decoupled.resize(partition.k);
    for (std::size_t g = 0; g < partition.k; ++g) {
        sys.decoupled[g] = fit_logistic(train.features, train.labels, groups[g], lr, epochs,
                                        batch_size, derive_seed(seed, g + 1), l2);
    }
    return sys;
}

}  // namespace dafh
