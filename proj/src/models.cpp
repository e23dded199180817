#include "dafh/models.hpp"

#include <algorithm>
#include <cmath>

#include "dafh/rng.hpp"

namespace dafh {

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double logistic_forward(const LogisticModel& model, std::span<const double> x) {
    if (x.size() != model.weights.size()) {
        throw std::invalid_argument("logistic_forward: dimension mismatch");
    }
    double t = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j) t += model.weights[j] * x[j];
    const double p = sigmoid(t);
    if (!std::isfinite(p)) throw numeric_error("logistic_forward: non-finite output");
    return p;
}

std::vector<double> group_forward(const GroupMLP& model, std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw std::invalid_argument("group_forward: dimension mismatch");
    }
    const std::size_t h = model.hidden_dim();
    const std::size_t k = model.group_count();

    std::vector<double> hidden(h);
    for (std::size_t i = 0; i < h; ++i) {
        double a = model.b1[i];
        const double* w = model.w1.row(i);
        for (std::size_t j = 0; j < x.size(); ++j) a += w[j] * x[j];
        hidden[i] = a > 0.0 ? a : 0.0;
    }

    std::vector<double> out(k);
    double zmax = -1e300;
    for (std::size_t i = 0; i < k; ++i) {
        double z = model.b2[i];
        const double* w = model.w2.row(i);
        for (std::size_t j = 0; j < h; ++j) z += w[j] * hidden[j];
        out[i] = z;
        zmax = std::max(zmax, z);
    }
    double sum = 0.0;
    for (auto& z : out) {
        z = std::exp(z - zmax);
        sum += z;
    }
    for (auto& z : out) z /= sum;
    return out;
}

std::size_t hard_assign(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("hard_assign: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return best;
}

TrainedSystem init_system(std::size_t d, std::size_t k, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("init_system: d must be >= 1");
    if (k < 2) throw std::invalid_argument("init_system: k must be >= 2");

    TrainedSystem sys;
    sys.pooled.weights.assign(d, 0.0);
    sys.decoupled.assign(k, sys.pooled);

    const std::size_t h = group_hidden_units;
    sys.group.w1 = Matrix(h, d);
    sys.group.b1.assign(h, 0.0);
    sys.group.w2 = Matrix(k, h);
    sys.group.b2.assign(k, 0.0);

    Rng rng(seed);
    const double lim1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (auto& w : sys.group.w1.data) w = rng.next_uniform(-lim1, lim1);
    const double lim2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (auto& w : sys.group.w2.data) w = rng.next_uniform(-lim2, lim2);

    sys.config.k = k;
    return sys;
}

}  // namespace dafh
