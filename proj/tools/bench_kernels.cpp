// Times every batch kernel against its serial reference.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "dafh/kernels.hpp"
#include "dafh/parallel.hpp"
#include "dafh/rng.hpp"

namespace {

using dafh::Matrix;

double time_best_ms(const std::function<void()>& fn, int reps = 3) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, std::size_t n, double serial_ms, double parallel_ms) {
    std::printf("%-22s %9zu %12.2f %12.2f %9.2fx\n", name, n, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atoll(argv[1])) : 200000;
    const std::size_t d = 32;
    const std::size_t k = 3;

    dafh::Rng rng(42);
    Matrix x(n, d);
    for (auto& v : x.data) v = rng.next_gaussian();
    std::vector<int> y(n);
    for (auto& v : y) v = rng.next_sign();

    dafh::TrainedSystem sys = dafh::init_system(d, k, 7);
    for (auto& m : sys.decoupled) {
        for (auto& w : m.weights) w = 0.1 * rng.next_gaussian();
    }

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    std::printf("threads: %d, n = %zu, d = %zu, k = %zu\n\n", dafh::par::max_threads(), n, d, k);
    std::printf("%-22s %9s %12s %12s %9s\n", "kernel", "rows", "serial ms", "parallel ms",
                "speedup");

    {
        const double s = time_best_ms([&] { dafh::kern::group_forward_batch_serial(sys.group, x); });
        const double p = time_best_ms([&] { dafh::kern::group_forward_batch(sys.group, x); });
        row("group_forward", n, s, p);
    }
    {
        const double s = time_best_ms(
                [&] { dafh::kern::decoupled_soft_batch_serial(sys.decoupled, x, y, 1.0); });
        const double p =
                time_best_ms([&] { dafh::kern::decoupled_soft_batch(sys.decoupled, x, y, 1.0); });
        row("decoupled_soft", n, s, p);
    }
    {
        const double s = time_best_ms(
                [&] { dafh::kern::surrogate_batch_serial(sys, x, y, 10.0, 1.0); });
        const double p = time_best_ms([&] { dafh::kern::surrogate_batch(sys, x, y, 10.0, 1.0); });
        row("surrogate_grad", n, s, p);
    }
    {
        const auto assign = [&](std::size_t i) { return i % k; };
        const double s = time_best_ms(
                [&] { dafh::kern::loss_table_batch_serial(sys.pooled, sys.decoupled, assign, x, y); });
        const double p = time_best_ms(
                [&] { dafh::kern::loss_table_batch(sys.pooled, sys.decoupled, assign, x, y); });
        row("loss_table", n, s, p);
    }
    {
        const double s = time_best_ms(
                [&] { dafh::kern::logistic_grad_batch_serial(sys.pooled, x, y, idx); });
        const double p =
                time_best_ms([&] { dafh::kern::logistic_grad_batch(sys.pooled, x, y, idx); });
        row("logistic_grad", n, s, p);
    }
    {
        Matrix centroids(k, d);
        for (auto& v : centroids.data) v = rng.next_gaussian();
        std::vector<std::size_t> assign;
        std::vector<std::size_t> empty;
        const double s = time_best_ms([&] {
            dafh::kern::kmeans_assign_serial(x, centroids, assign);
            dafh::kern::kmeans_update_serial(x, assign, centroids, empty);
        });
        const double p = time_best_ms([&] {
            dafh::kern::kmeans_assign(x, centroids, assign);
            dafh::kern::kmeans_update(x, assign, centroids, empty);
        });
        row("kmeans_iteration", n, s, p);
    }
    return 0;
}
