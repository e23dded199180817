#pragma once

#include <cstdint>
#include <stdexcept>

namespace dafh {

// Joint training hyperparameters. Defaults follow the large-dataset settings
// used throughout the experiments (batch 1024, 3 epochs, group lr 1e-3,
// decoupled lr 1e-2 with momentum 0.9, lambda 10).
struct TrainConfig {
    std::size_t k = 2;
    std::size_t batch_size = 1024;
    std::size_t epochs = 3;
    double lr_group = 1e-3;
    double lr_decoupled = 1e-2;
    double momentum_decoupled = 0.9;
    double lambda = 10.0;
    std::uint64_t seed = 0;
    double tau = 1.0;              // surrogate loss temperature
    double convergence_tol = 0.0;  // 0 disables early stopping

    void validate() const {
        if (k < 2) throw std::invalid_argument("config: k must be >= 2");
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
        if (!(lr_group >= 0.0)) throw std::invalid_argument("config: lr_group must be >= 0");
        if (!(lr_decoupled >= 0.0)) throw std::invalid_argument("config: lr_decoupled must be >= 0");
        if (!(momentum_decoupled >= 0.0 && momentum_decoupled < 1.0)) {
            throw std::invalid_argument("config: momentum must lie in [0,1)");
        }
        if (!(lambda >= 0.0)) throw std::invalid_argument("config: lambda must be >= 0");
        if (!(tau > 0.0)) throw std::invalid_argument("config: tau must be > 0");
        if (!(convergence_tol >= 0.0)) throw std::invalid_argument("config: convergence_tol must be >= 0");
    }
};

}  // namespace dafh
