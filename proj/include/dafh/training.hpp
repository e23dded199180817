#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dafh/dataset.hpp"
#include "dafh/models.hpp"
#include "dafh/objective.hpp"

namespace dafh {

struct StepRecord {
    std::size_t step;
    double objective;  // batch surrogate value (penalty included)
    double gamma;
};

struct EpochRecord {
    std::size_t epoch;
    std::size_t step;  // last step of the epoch
    double train_objective;  // surrogate on the full training set
    double train_accuracy;
    double train_prob_fwh;
    bool has_test = false;
    double test_accuracy = 0.0;
    double test_prob_fwh = 0.0;
};

struct TrainTrace {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;

    // columns: step,objective,gamma,train_acc,train_pfwh,test_acc,test_pfwh
    // (metric cells are filled on epoch-end rows, blank elsewhere)
    void write_csv(const std::string& path) const;
};

// Zero-initialized logistic fit by seeded mini-batch gradient descent on the
// mean logistic loss, restricted to the rows in idx. l2 adds a ridge term on
// the weights (not the bias); the default keeps the fit unregularized.
LogisticModel fit_logistic(const Matrix& x, std::span<const int> y,
                           std::span<const std::size_t> idx, double lr, std::size_t epochs,
                           std::size_t batch_size, std::uint64_t seed, double l2 = 0.0);

LogisticModel train_pooled(const Dataset& train, double lr, std::size_t epochs,
                           std::size_t batch_size, std::uint64_t seed);

struct EpochMetrics {
    double accuracy = 0.0;
    double prob_fwh = 0.0;
    bool empty_group = false;
};

EpochMetrics epoch_metrics(const TrainedSystem& system, const Dataset& data);

// Joint stochastic gradient ascent on the surrogate objective. The pooled
// classifier is trained first and frozen; each step evaluates one joint
// gradient at the pre-update parameters, then applies plain ascent to the
// group net and momentum ascent to the decoupled classifiers. Stops early
// when the full-train surrogate moves less than convergence_tol between
// epochs (0 disables).
std::pair<TrainedSystem, TrainTrace> train_dafh(const Dataset& train, const TrainConfig& config,
                                                const Dataset* monitor = nullptr);

}  // namespace dafh
