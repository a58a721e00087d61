#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mflab/surface.hpp"

namespace mflab {

// Deterministic corpus generation. mt19937_64 is fully specified by the
// standard; the normal variates are produced by an explicit Box-Muller step
// (std::normal_distribution is implementation-defined), so identical seeds
// give identical fields everywhere.
namespace corpus {

inline double canonical(std::mt19937_64& eng) {
    double u = double(eng() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

inline double normal(std::mt19937_64& eng) {
    double u1 = canonical(eng);
    double u2 = canonical(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

/// Band-limited random field: modes 0 < |k| <= n/4 with N(0,1) cosine/sine
/// amplitudes, scaled by `amplitude`. Zero mean by construction.
inline Field band_limited_field(const GridPtr& g, std::mt19937_64& eng, double amplitude = 1.0) {
    int n = g->n;
    int kmax = n / 4;
    std::vector<fft::cplx> a(std::size_t(n) * n, fft::cplx(0));
    auto wrap = [n](int k) { return (k % n + n) % n; };
    // half-plane of unique modes: kx > 0, or kx == 0 and ky > 0
    for (int kx = 0; kx <= kmax; ++kx) {
        for (int ky = -kmax; ky <= kmax; ++ky) {
            if (kx == 0 && ky <= 0) continue;
            if (kx * kx + ky * ky > kmax * kmax) continue;
            double c = amplitude * normal(eng);
            double s = amplitude * normal(eng);
            // u += c cos(2pi k.x) + s sin(2pi k.x)
            fft::cplx coef = 0.5 * double(n) * double(n) * fft::cplx(c, -s);
            a[std::size_t(wrap(ky)) * n + wrap(kx)] = coef;
            a[std::size_t(wrap(-ky)) * n + wrap(-kx)] = std::conj(coef);
        }
    }
    return spectral::inverse(std::move(a), g);
}

/// Probe corpus: `count` seeded band-limited fields with amplitude cycling
/// through {1,2,4,8}.
inline std::vector<Field> random_fields(const GridPtr& g, std::uint64_t seed, int count) {
    std::mt19937_64 eng(seed);
    static constexpr double amps[4] = {1.0, 2.0, 4.0, 8.0};
    std::vector<Field> out;
    out.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i)
        out.push_back(band_limited_field(g, eng, amps[i % 4]));
    return out;
}

} // namespace corpus
} // namespace mflab
