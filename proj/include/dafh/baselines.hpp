#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dafh/dataset.hpp"
#include "dafh/models.hpp"

namespace dafh {

enum class PartitionSource { attribute, kmeans, intersection, manual, learned, single };

const char* to_string(PartitionSource source);
PartitionSource partition_source_from_string(const std::string& s);

// value -> group over one sensitive attribute; with a threshold the raw
// numeric value is first binarized to "lt"/"ge" (group 0 is the low side)
struct AttributeRule {
    std::string attribute;
    std::optional<double> threshold;
    std::map<std::string, std::size_t> value_to_group;
};

struct KMeansRule {
    Matrix centroids;  // nearest centroid over model features, ties to lowest index
};

// one group per occupied cell of the attribute cross-product; combinations
// never seen in training fall back to the largest training group
struct IntersectionRule {
    std::vector<std::string> attributes;
    std::map<std::string, std::size_t> combo_to_group;  // values joined with '\x1f'
    std::size_t fallback_group = 0;
};

// Group 0: non-white males under 45; group 1: non-white females aged 25-45;
// everyone else gets a reproducible coin flip keyed on their attribute tuple.
struct ManualRule {
    std::string race_column = "race";
    std::string sex_column = "sex";
    std::string age_column = "age";
    std::string white_value = "White";
    std::string male_value = "Male";
    std::string female_value = "Female";
    std::uint64_t coin_seed = 0;
};

struct SingleGroupRule {};

using AssignRule =
        std::variant<SingleGroupRule, AttributeRule, KMeansRule, IntersectionRule, ManualRule>;

// Hard group assignment plus the rule that reproduces it on unseen rows.
struct Partition {
    std::vector<std::size_t> assignment;  // training rows, values in [0, k)
    std::size_t k = 1;
    PartitionSource source = PartitionSource::single;
    AssignRule rule;

    std::size_t assign(const Dataset& data, std::size_t row) const;
};

void write_partition_csv(const Partition& partition, const std::string& path);

// Maps numeric ages onto the three standard bins; already-binned string
// values pass through unchanged.
std::string age_bin_label(const std::string& raw);

Partition trivial_partition(const Dataset& data, const std::string& attribute,
                            std::optional<double> binarize_threshold = {});

struct KMeansState {
    Matrix centroids;
    std::size_t iterations_run = 0;
    double inertia = 0.0;
    std::vector<double> inertia_history;  // one entry per assignment pass
};

std::pair<Partition, KMeansState> kmeans_partition(const Dataset& data, std::size_t k,
                                                   std::uint64_t seed,
                                                   std::size_t max_iters = 300,
                                                   double tol = 1e-6);

Partition intersection_partition(const Dataset& data, const std::vector<std::string>& attributes,
                                 std::size_t cell_cap = 32);

Partition manual_arrest_partition(const Dataset& data, const ManualRule& rule = {});

// One logistic fit per group on that group's rows, plus the pooled fit on
// all rows; the partition rule stands in for the group classifier at
// evaluation time.
struct PartitionedSystem {
    LogisticModel pooled;
    std::vector<LogisticModel> decoupled;
    Partition partition;
};

PartitionedSystem train_on_partition(const Dataset& train, const Partition& partition, double lr,
                                     std::size_t epochs, std::size_t batch_size,
                                     std::uint64_t seed, double l2 = 0.0);

}  // namespace dafh
