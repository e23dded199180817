#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dafh/bundle.hpp"
#include "dafh/dataset.hpp"
#include "dafh/objective.hpp"

namespace dafh {

// Every §-style evaluation quantity for one system on one dataset. Metrics
// that a configuration cannot define (no partition, empty group, missing
// sensitive column) are NaN with an explanatory flag.
struct EvalReport {
    double prob_fwh = 0.0;
    double accuracy = 0.0;
    double violations = 0.0;
    double max_gain = 0.0;
    double min_envy = 0.0;
    double delta_disparity = 0.0;
    std::vector<std::size_t> group_sizes;
    std::size_t min_group_size = 0;  // concentration diagnostic, never enforced
    std::vector<std::string> composition_cells;
    Matrix composition;  // k x cells, rows of nonempty groups sum to 1
    std::vector<std::string> flags;

    std::string to_csv_row() const;
    static std::string csv_header();
};

// Fraction of samples whose assigned classifier's 0-1 loss is <= the loss of
// the pooled classifier and of every decoupled classifier.
double prob_fwh(const LossTable& table);

// Count of groups violating rationality plus ordered pairs violating
// envy-freeness; empty groups are skipped (flagged by the caller).
std::size_t violations(const LossTable& table, std::size_t k);

// max over groups of pooled risk minus own decoupled risk.
double max_gain(const LossTable& table, std::size_t k);

// max over ordered pairs (k, k') of other-model risk minus own risk on
// group k. Named after the customary table heading even though it is a max.
double min_envy(const LossTable& table, std::size_t k);

// Disparity (max pairwise accuracy gap across the reference groups given by
// the sensitive values) of the assigned system minus that of the pooled
// classifier alone. Negative is better.
double delta_disparity(const LossTable& table, const std::vector<std::string>& group_values);

// Per-group distribution over the cross-product cells of the listed
// sensitive attributes. Numeric values of an attribute named "age" are
// mapped onto the three standard bins first.
Matrix composition(const std::vector<std::size_t>& assignment, std::size_t k,
                   const Dataset& data, const std::vector<std::string>& attributes,
                   std::vector<std::string>* cell_names = nullptr);

EvalReport evaluate(const ModelBundle& bundle, const Dataset& data,
                    const std::string& disparity_by = {},
                    const std::vector<std::string>& composition_by = {});

// ---- theorem diagnostics ----

struct GapSample {
    double gap = 0.0;
    std::size_t min_group = 0;
    bool flagged = false;  // empty group in this trial; gap undefined
};

struct GapResult {
    double reference_objective = 0.0;
    std::size_t reference_min_group = 0;
    std::vector<GapSample> samples;
};

using PopulationSampler = std::function<Dataset(std::size_t n, std::uint64_t seed)>;

// Treats one large pool as ground truth, then measures |obj - obj_hat| over
// fresh samples of trial_n rows each.
GapResult generalization_gap(const ModelBundle& system, const PopulationSampler& population,
                             std::size_t pool_n, std::size_t trial_n, std::size_t trials,
                             std::uint64_t seed);

// 1 - 2K(K+1) exp(-2 eps^2 n / 9)
double concentration_bound(std::size_t k, double epsilon, std::size_t min_group);

// Empirical discrepancy between two sample sets over a finite hypothesis
// grid: max over ordered pairs (h, h') of the difference in disagreement
// rates. A lower bound on the discrepancy over the full hypothesis class.
double discrepancy_estimate(const Matrix& sample_a, const Matrix& sample_b,
                            const std::vector<LogisticModel>& hypothesis_grid);

}  // namespace dafh
