#pragma once

#include <algorithm>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dafh::par {

// All parallel reductions in this project split the index space into
// fixed-size chunks and combine chunk partials in ascending chunk order.
// The floating-point result is therefore identical for any thread count,
// including a single thread.
inline constexpr std::size_t chunk_size = 512;

inline std::size_t num_chunks(std::size_t n) {
    return n == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// fn(chunk_index, begin, end); chunks run in parallel, bodies stay serial.
template <typename F>
void for_chunks(std::size_t n, F&& fn) {
    const auto chunks = static_cast<std::ptrdiff_t>(num_chunks(n));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < chunks; ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * chunk_size;
        const std::size_t hi = std::min(lo + chunk_size, n);
        fn(static_cast<std::size_t>(c), lo, hi);
    }
}

// plain parallel map over rows (no reduction involved)
template <typename F>
void for_rows(std::size_t n, F&& fn) {
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        fn(static_cast<std::size_t>(i));
    }
}

}  // namespace dafh::par
