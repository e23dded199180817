#pragma once

#include <span>
#include <vector>

#include "dafh/models.hpp"
#include "dafh/objective.hpp"

// Batch kernels. Every kernel comes in two flavors: the production variant
// parallelizes with OpenMP over fixed-size chunks whose partials combine in
// chunk order (results do not depend on the thread count), and a plain
// serial reference used by the equivalence tests and the benchmark.
namespace dafh::kern {

struct GroupActs {
    Matrix hidden;  // n x H, post-ReLU
    Matrix probs;   // n x K
};

GroupActs group_forward_batch(const GroupMLP& model, const Matrix& x);
GroupActs group_forward_batch_serial(const GroupMLP& model, const Matrix& x);

// prob1(i,k): predicted probability of label +1 under decoupled model k;
// soft_loss(i,k): |sigmoid(tau*(prob1-1/2)) - (y+1)/2|.
struct DecoupledActs {
    Matrix prob1;
    Matrix soft_loss;
};

DecoupledActs decoupled_soft_batch(const std::vector<LogisticModel>& models, const Matrix& x,
                                   std::span<const int> y, double tau);
DecoupledActs decoupled_soft_batch_serial(const std::vector<LogisticModel>& models,
                                          const Matrix& x, std::span<const int> y, double tau);

SurrogateGrad surrogate_batch(const TrainedSystem& system, const Matrix& x,
                              std::span<const int> y, double lambda, double tau);
SurrogateGrad surrogate_batch_serial(const TrainedSystem& system, const Matrix& x,
                                     std::span<const int> y, double lambda, double tau);

LossTable loss_table_batch(const LogisticModel& pooled,
                           const std::vector<LogisticModel>& decoupled,
                           const AssignFn& assign, const Matrix& x, std::span<const int> y);
LossTable loss_table_batch_serial(const LogisticModel& pooled,
                                  const std::vector<LogisticModel>& decoupled,
                                  const AssignFn& assign, const Matrix& x, std::span<const int> y);

// Mean logistic loss and its gradient over the rows listed in idx.
struct LogisticGrad {
    double loss = 0.0;
    std::vector<double> gw;
    double gb = 0.0;
};

LogisticGrad logistic_grad_batch(const LogisticModel& model, const Matrix& x,
                                 std::span<const int> y, std::span<const std::size_t> idx);
LogisticGrad logistic_grad_batch_serial(const LogisticModel& model, const Matrix& x,
                                        std::span<const int> y, std::span<const std::size_t> idx);

// One Lloyd assignment pass: nearest centroid per row (ties to the lowest
// index); returns the summed squared distance.
double kmeans_assign(const Matrix& x, const Matrix& centroids, std::vector<std::size_t>& out);
double kmeans_assign_serial(const Matrix& x, const Matrix& centroids,
                            std::vector<std::size_t>& out);

// Centroid recomputation; clusters with no members keep their previous value
// and are reported in `empty`.
void kmeans_update(const Matrix& x, const std::vector<std::size_t>& assign, Matrix& centroids,
                   std::vector<std::size_t>& empty);
void kmeans_update_serial(const Matrix& x, const std::vector<std::size_t>& assign,
                          Matrix& centroids, std::vector<std::size_t>& empty);

}  // namespace dafh::kern
