#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mflab {

inline constexpr double pi = 3.14159265358979323846;

/// Thrown when a computed quantity violates a calibration hypothesis
/// (e.g. the mass threshold tau is too large for the given density).
struct calibration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a projection or root-finding step is degenerate.
struct degenerate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Static partition over [0, count). Results must be written by index so the
// outcome is independent of the number of workers.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t workers = hw == 0 ? 1 : hw;
    if (workers > 16) workers = 16;
    if (workers <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    if (workers > count) workers = count;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            std::size_t lo = count * w / workers;
            std::size_t hi = count * (w + 1) / workers;
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace detail
} // namespace mflab
