#include "dafh/objective.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "dafh/kernels.hpp"

namespace dafh {

std::size_t LossTable::min_group_size() const {
    std::size_t m = group_sizes.empty() ? 0 : group_sizes[0];
    for (const auto s : group_sizes) m = std::min(m, s);
    return m;
}

Matrix group_risks(const LossTable& table, bool skip_empty) {
    const std::size_t k = table.k();
    const std::size_t models = table.hard.cols;
    Matrix risks(k, models, std::numeric_limits<double>::quiet_NaN());

    Matrix sums(k, models);
    for (std::size_t i = 0; i < table.n(); ++i) {
        double* row = sums.row(table.assignments[i]);
        const double* loss = table.hard.row(i);
        for (std::size_t m = 0; m < models; ++m) row[m] += loss[m];
    }
    for (std::size_t g = 0; g < k; ++g) {
        if (table.group_sizes[g] == 0) {
            if (!skip_empty) throw data_error("empty group");
            continue;
        }
        const double inv = 1.0 / static_cast<double>(table.group_sizes[g]);
        for (std::size_t m = 0; m < models; ++m) risks.at(g, m) = sums.at(g, m) * inv;
    }
    return risks;
}

namespace {

double objective_from_risks(const Matrix& risks, std::size_t k) {
    // risks column 0 is the pooled model, columns 1..k the decoupled models
    double total = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
        const double own = risks.at(g, g + 1);
        double value = risks.at(g, 0) - own;
        double envy = 0.0;
        for (std::size_t j = 0; j < k; ++j) envy += risks.at(g, j + 1) - own;
        total += value + envy / static_cast<double>(k);
    }
    return total / static_cast<double>(k);
}

}  // namespace

double exact_objective(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("exact_objective: group count mismatch");
    return objective_from_risks(group_risks(table), k);
}

double objective_with_n_denominator(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("objective: group count mismatch");
    // group-conditional sums divided by n instead of n_k
    const std::size_t models = table.hard.cols;
    Matrix risks(k, models);
    for (std::size_t i = 0; i < table.n(); ++i) {
        double* row = risks.row(table.assignments[i]);
        const double* loss = table.hard.row(i);
        for (std::size_t m = 0; m < models; ++m) row[m] += loss[m];
    }
    const double inv = 1.0 / static_cast<double>(table.n());
    for (auto& v : risks.data) v *= inv;
    return objective_from_risks(risks, k);
}

double lower_bound_objective(const LossTable& table, std::size_t k) {
    if (k != table.k()) throw std::invalid_argument("lower_bound: group count mismatch");
    const double kk = static_cast<double>(k);
    double total = 0.0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        const double* loss = table.hard.row(i);
        const std::size_t a = table.assignments[i];
        for (std::size_t m = 0; m < k; ++m) {
            const double l = loss[m + 1];
            total += l - (m == a ? 2.0 * kk * l : 0.0);
        }
    }
    return total / (static_cast<double>(table.n()) * kk * kk);
}

double assigned_accuracy(const LossTable& table) {
    double correct = 0.0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        correct += 1.0 - table.hard.at(i, table.assignments[i] + 1);
    }
    return correct / static_cast<double>(table.n());
}

double decomposition_check(const LossTable& table, std::size_t k) {
    const double kk = static_cast<double>(k);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        for (std::size_t m = 0; m < k; ++m) loss_sum += table.hard.at(i, m + 1);
    }
    const double rhs = (2.0 / kk) * assigned_accuracy(table) +
                       loss_sum / (static_cast<double>(table.n()) * kk * kk) - 2.0 / kk;
    return lower_bound_objective(table, k) - rhs;
}

double surrogate_core(const Matrix& soft_assign, const Matrix& soft_loss, std::size_t k) {
    if (!soft_assign.same_shape(soft_loss) || soft_assign.cols != k) {
        throw std::invalid_argument("surrogate_core: shape mismatch");
    }
    const double kk = static_cast<double>(k);
    double total = 0.0;
    for (std::size_t i = 0; i < soft_assign.rows; ++i) {
        const double* pi = soft_assign.row(i);
        const double* l = soft_loss.row(i);
        for (std::size_t m = 0; m < k; ++m) total += l[m] - 2.0 * kk * pi[m] * l[m];
    }
    return total / (static_cast<double>(soft_assign.rows) * kk * kk);
}

double balance_penalty(std::span<const double> mean_soft_assign) {
    const double kk = static_cast<double>(mean_soft_assign.size());
    double kl = 0.0;
    for (const double p : mean_soft_assign) {
        if (p <= 0.0) continue;  // lim p->0 of p*log(kp) = 0
        kl += p * std::log(kk * p);
    }
    return -kl;
}

SoftTables compute_soft_tables(const TrainedSystem& system, const Matrix& x,
                               std::span<const int> y, double tau) {
    auto acts = kern::group_forward_batch(system.group, x);
    auto dec = kern::decoupled_soft_batch(system.decoupled, x, y, tau);
    return SoftTables{std::move(acts.probs), std::move(dec.soft_loss)};
}

SurrogateGrad surrogate_value_and_grad(const TrainedSystem& system, const Matrix& x,
                                       std::span<const int> y, double lambda, double tau) {
    return kern::surrogate_batch(system, x, y, lambda, tau);
}

SurrogateGrad surrogate_value_and_grad(const TrainedSystem& system, const Dataset& batch,
                                       double lambda) {
    return kern::surrogate_batch(system, batch.features, batch.labels, lambda,
                                 system.config.tau);
}

double surrogate_value(const TrainedSystem& system, const Matrix& x, std::span<const int> y,
                       double lambda, double tau) {
    const std::size_t k = system.k();
    auto soft = compute_soft_tables(system, x, y, tau);
    std::vector<double> pbar(k, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t m = 0; m < k; ++m) pbar[m] += soft.soft_assign.at(i, m);
    }
    for (auto& p : pbar) p /= static_cast<double>(x.rows);
    return surrogate_core(soft.soft_assign, soft.soft_loss, k) +
           lambda * balance_penalty(pbar);
}

LossTable build_loss_table(const TrainedSystem& system, const Dataset& data) {
    if (data.dim() != system.dim()) {
        throw std::invalid_argument("build_loss_table: dimension mismatch");
    }
    auto acts = kern::group_forward_batch(system.group, data.features);
    std::vector<std::size_t> assigned(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        assigned[i] = hard_assign(std::span<const double>(acts.probs.row(i), system.k()));
    }
    return kern::loss_table_batch(system.pooled, system.decoupled,
                                  [&](std::size_t i) { return assigned[i]; }, data.features,
                                  data.labels);
}

LossTable build_loss_table(const LogisticModel& pooled,
                           const std::vector<LogisticModel>& decoupled, const AssignFn& assign,
                           const Matrix& x, std::span<const int> y) {
    return kern::loss_table_batch(pooled, decoupled, assign, x, y);
}

void write_loss_table_csv(const LossTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << "index,assignment";
    for (std::size_t m = 0; m < table.hard.cols; ++m) out << ",L" << m;
    out << '\n';
    for (std::size_t i = 0; i < table.n(); ++i) {
        out << i << ',' << table.assignments[i];
        for (std::size_t m = 0; m < table.hard.cols; ++m) {
            out << ',' << static_cast<int>(table.hard.at(i, m));
        }
        out << '\n';
    }
}

}  // namespace dafh
