#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dafh/dataset.hpp"
#include "dafh/models.hpp"

namespace dafh {

// Hard 0-1 losses of every classifier on every sample, plus the hard group
// assignment. Column 0 is the pooled classifier, columns 1..K the decoupled
// classifiers.
struct LossTable {
    Matrix hard;                            // n x (K+1), entries in {0,1}
    std::vector<std::size_t> assignments;   // values in [0, K)
    std::vector<std::size_t> group_sizes;   // length K, sums to n

    std::size_t n() const { return hard.rows; }
    std::size_t k() const { return group_sizes.size(); }
    std::size_t min_group_size() const;
};

// Differentiable relaxations: soft group assignments (softmax rows) and the
// sigmoid surrogate of the 0-1 loss.
struct SoftTables {
    Matrix soft_assign;  // n x K, rows on the simplex
    Matrix soft_loss;    // n x K, entries in [0,1]
};

// Value and analytic gradients of the surrogate objective. Gradient arrays
// reuse the parameter container types so shapes match by construction. The
// pooled classifier is a constant of the objective and gets no gradient.
struct SurrogateGrad {
    double value = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
    GroupMLP group;
    std::vector<LogisticModel> decoupled;
};

// Group-conditional empirical risks: out(k, m) is the mean of hard-loss
// column m over rows assigned to group k. Throws on an empty group unless
// skip_empty, in which case empty rows are left as NaN.
Matrix group_risks(const LossTable& table, bool skip_empty = false);

// Mean over groups of the rationality margin plus the mean envy margin,
// with group-conditional risks (denominator n_k). Throws "empty group" when
// some group has no samples.
double exact_objective(const LossTable& table, std::size_t k);

// Same quantity with every group denominator replaced by n.
double objective_with_n_denominator(const LossTable& table, std::size_t k);

// (1/(n K^2)) * sum_i sum_k (L_i^k - 2K pi_i^k L_i^k); defined for any table.
double lower_bound_objective(const LossTable& table, std::size_t k);

// Fraction of samples whose assigned classifier is correct.
double assigned_accuracy(const LossTable& table);

// lower_bound_objective minus its accuracy decomposition; contract: |r| <= 1e-12.
double decomposition_check(const LossTable& table, std::size_t k);

// Surrogate main term from explicit tables; with one-hot assignments, hard
// losses and lambda = 0 this equals lower_bound_objective exactly.
double surrogate_core(const Matrix& soft_assign, const Matrix& soft_loss, std::size_t k);

// -KL(mean assignment || uniform); 0 exactly at the uniform distribution,
// strictly negative otherwise.
double balance_penalty(std::span<const double> mean_soft_assign);

SoftTables compute_soft_tables(const TrainedSystem& system, const Matrix& x,
                               std::span<const int> y, double tau);

SurrogateGrad surrogate_value_and_grad(const TrainedSystem& system, const Matrix& x,
                                       std::span<const int> y, double lambda, double tau);
SurrogateGrad surrogate_value_and_grad(const TrainedSystem& system, const Dataset& batch,
                                       double lambda);

// Value-only evaluation (epoch-level convergence checks).
double surrogate_value(const TrainedSystem& system, const Matrix& x, std::span<const int> y,
                       double lambda, double tau);

using AssignFn = std::function<std::size_t(std::size_t)>;  // row index -> group

LossTable build_loss_table(const TrainedSystem& system, const Dataset& data);
LossTable build_loss_table(const LogisticModel& pooled,
                           const std::vector<LogisticModel>& decoupled,
                           const AssignFn& assign, const Matrix& x, std::span<const int> y);

void write_loss_table_csv(const LossTable& table, const std::string& path);

}  // namespace dafh
