#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dafh/core.hpp"
#include "dafh/train_config.hpp"

namespace dafh {

// Binary logistic model; serves both as the pooled classifier and as each
// per-group decoupled classifier.
struct LogisticModel {
    std::vector<double> weights;
    double bias = 0.0;

    std::size_t dim() const { return weights.size(); }
};

// Group classifier: one hidden ReLU layer, softmax output over K groups.
struct GroupMLP {
    Matrix w1;               // hidden x d
    std::vector<double> b1;  // hidden
    Matrix w2;               // K x hidden
    std::vector<double> b2;  // K

    std::size_t input_dim() const { return w1.cols; }
    std::size_t hidden_dim() const { return w1.rows; }
    std::size_t group_count() const { return w2.rows; }
};

inline constexpr std::size_t group_hidden_units = 100;

// Group classifier, its decoupled classifiers, and the frozen pooled model.
struct TrainedSystem {
    GroupMLP group;
    std::vector<LogisticModel> decoupled;
    LogisticModel pooled;
    TrainConfig config;

    std::size_t k() const { return decoupled.size(); }
    std::size_t dim() const { return pooled.dim(); }
};

double sigmoid(double t);

/// Predicted probability of the +1 label; hard prediction is +1 iff >= 1/2.
double logistic_forward(const LogisticModel& model, std::span<const double> x);

inline int logistic_predict(const LogisticModel& model, std::span<const double> x) {
    return logistic_forward(model, x) >= 0.5 ? +1 : -1;
}

/// Softmax group membership probabilities (max-subtracted for stability).
std::vector<double> group_forward(const GroupMLP& model, std::span<const double> x);

/// Argmax with ties broken toward the lowest index.
std::size_t hard_assign(std::span<const double> probs);

// Zero-initialized logistic models (convex fits need no symmetry breaking);
// uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights and zero biases for the
// group net, drawn row-major from the seeded stream: w1 first, then w2.
TrainedSystem init_system(std::size_t d, std::size_t k, std::uint64_t seed);

}  // namespace dafh
