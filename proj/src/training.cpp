#include "dafh/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dafh/kernels.hpp"
#include "dafh/metrics.hpp"
#include "dafh/rng.hpp"

namespace dafh {

namespace {

// shuffle stream ids, kept distinct so pooled pretraining and joint training
// draw from unrelated sequences of the same seed
constexpr std::uint64_t stream_pooled = 1;
constexpr std::uint64_t stream_joint = 2;

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy(x.row(idx[r]), x.row(idx[r]) + x.cols, out.row(r));
    }
    return out;
}

std::vector<int> gather_labels(std::span<const int> y, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = y[idx[r]];
    return out;
}

}  // namespace

void TrainTrace::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write file: " + path);
    out << "step,objective,gamma,train_acc,train_pfwh,test_acc,test_pfwh\n";
    std::size_t e = 0;
    char buf[512];
    for (const auto& s : steps) {
        std::string line;
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g", s.step, s.objective, s.gamma);
        line = buf;
        if (e < epochs.size() && epochs[e].step == s.step) {
            const auto& ep = epochs[e];
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", ep.train_accuracy, ep.train_prob_fwh);
            line += buf;
            if (ep.has_test) {
                std::snprintf(buf, sizeof(buf), ",%.17g,%.17g", ep.test_accuracy, ep.test_prob_fwh);
                line += buf;
            } else {
                line += ",,";
            }
            ++e;
        } else {
            line += ",,,,";
        }
        out << line << '\n';
    }
}

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y,
                           std::span<const std::size_t> idx, double lr, std::size_t epochs,
                           std::size_t batch_size, std::uint64_t seed, double l2) {
    if (idx.empty()) throw std::invalid_argument("fit_logistic: empty training set");
    if (batch_size < 1) throw std::invalid_argument("fit_logistic: batch_size must be >= 1");

    LogisticModel model;
    model.weights.assign(x.cols, 0.0);

    std::vector<std::size_t> order(idx.begin(), idx.end());
    Rng rng(seed, stream_pooled);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
            const std::size_t hi = std::min(lo + batch_size, order.size());
            const auto g = kern::logistic_grad_batch(
                    model, x, y, std::span<const std::size_t>(order.data() + lo, hi - lo));
            if (!std::isfinite(g.loss)) throw numeric_error("fit_logistic: loss diverged");
            for (std::size_t j = 0; j < model.weights.size(); ++j) {
                model.weights[j] -= lr * (g.gw[j] + l2 * model.weights[j]);
            }
            model.bias -= lr * g.gb;
        }
    }
    if (!all_finite(model.weights) || !std::isfinite(model.bias)) {
        throw numeric_error("fit_logistic: parameters diverged");
    }
    return model;
}

LogisticModel train_pooled(const Dataset& train, double lr, std::size_t epochs,
                           std::size_t batch_size, std::uint64_t seed) {
    if (train.size() == 0) throw std::invalid_argument("train_pooled: empty training set");
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return fit_logistic(train.features, train.labels, idx, lr, epochs, batch_size, seed);
}

EpochMetrics epoch_metrics(const TrainedSystem& system, const Dataset& data) {
    const LossTable table = build_loss_table(system, data);
    EpochMetrics m;
    m.accuracy = assigned_accuracy(table);
    m.prob_fwh = prob_fwh(table);
    m.empty_group = table.min_group_size() == 0;
    return m;
}

std::pair<TrainedSystem, TrainTrace> train_dafh(const Dataset& train, const TrainConfig& config,
                                                const Dataset* monitor) {
    config.validate();
    if (train.size() == 0) throw std::invalid_argument("train_dafh: empty training set");

    TrainedSystem sys = init_system(train.dim(), config.k, config.seed);
    sys.config = config;
    sys.pooled = train_pooled(train, config.lr_decoupled, config.epochs, config.batch_size,
                              config.seed);

    // momentum buffers, one per decoupled parameter array
    std::vector<std::vector<double>> vw(config.k, std::vector<double>(train.dim(), 0.0));
    std::vector<double> vb(config.k, 0.0);

    TrainTrace trace;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed, stream_joint);

    std::size_t step = 0;
    double prev_epoch_obj = 0.0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t lo = 0; lo < order.size(); lo += config.batch_size) {
            const std::size_t hi = std::min(lo + config.batch_size, order.size());
            const std::span<const std::size_t> batch_idx(order.data() + lo, hi - lo);
            const Matrix bx = gather_rows(train.features, batch_idx);
            const std::vector<int> by = gather_labels(train.labels, batch_idx);

            SurrogateGrad g;
            try {
                g = kern::surrogate_batch(sys, bx, by, config.lambda, config.tau);
            } catch (const numeric_error& e) {
                throw numeric_error(std::string(e.what()) + " at step " + std::to_string(step));
            }

            // group net: plain ascent
            for (std::size_t i = 0; i < sys.group.w1.data.size(); ++i) {
                sys.group.w1.data[i] += config.lr_group * g.group.w1.data[i];
            }
            for (std::size_t i = 0; i < sys.group.b1.size(); ++i) {
                sys.group.b1[i] += config.lr_group * g.group.b1[i];
            }
            for (std::size_t i = 0; i < sys.group.w2.data.size(); ++i) {
                sys.group.w2.data[i] += config.lr_group * g.group.w2.data[i];
            }
            for (std::size_t i = 0; i < sys.group.b2.size(); ++i) {
                sys.group.b2[i] += config.lr_group * g.group.b2[i];
            }

            // decoupled classifiers: momentum ascent
            for (std::size_t m = 0; m < config.k; ++m) {
                auto& w = sys.decoupled[m].weights;
                for (std::size_t j = 0; j < w.size(); ++j) {
                    vw[m][j] = config.momentum_decoupled * vw[m][j] + g.decoupled[m].weights[j];
                    w[j] += config.lr_decoupled * vw[m][j];
                }
                vb[m] = config.momentum_decoupled * vb[m] + g.decoupled[m].bias;
                sys.decoupled[m].bias += config.lr_decoupled * vb[m];
            }

            trace.steps.push_back({step, g.value, g.gamma});
            ++step;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.step = step - 1;
        rec.train_objective = surrogate_value(sys, train.features, train.labels, config.lambda,
                                              config.tau);
        const EpochMetrics tm = epoch_metrics(sys, train);
        rec.train_accuracy = tm.accuracy;
        rec.train_prob_fwh = tm.prob_fwh;
        if (monitor != nullptr) {
            const EpochMetrics mm = epoch_metrics(sys, *monitor);
            rec.has_test = true;
            rec.test_accuracy = mm.accuracy;
            rec.test_prob_fwh = mm.prob_fwh;
        }
        trace.epochs.push_back(rec);

        if (config.convergence_tol > 0.0 && epoch > 0 &&
            std::fabs(rec.train_objective - prev_epoch_obj) < config.convergence_tol) {
            break;
        }
        prev_epoch_obj = rec.train_objective;
    }

    return {std::move(sys), std::move(trace)};
}

}  // namespace dafh
