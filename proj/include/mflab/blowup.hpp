#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mflab/energy.hpp"
#include "mflab/surface.hpp"

namespace mflab {

/// A pair of limiting local masses at a common blow-up point.
struct MassPair {
    double m1 = 0.0;
    double m2 = 0.0;
};

/// Defect of the quantization constraint (m1-m2)^2 = 8 pi (m1+m2).
inline double quantization_defect(double m1, double m2) {
    return (m1 - m2) * (m1 - m2) - 8.0 * pi * (m1 + m2);
}

/// The two m1 roots of the constraint for given m2:
/// m1 = m2 + 4 pi +- 4 sqrt(pi m2 + pi^2).
inline std::pair<double, double> quantization_roots(double m2) {
    if (m2 < 0.0) throw std::invalid_argument("quantization_roots: m2 must be >= 0");
    double s = 4.0 * std::sqrt(pi * m2 + pi * pi);
    return {m2 + 4.0 * pi + s, m2 + 4.0 * pi - s};
}

struct GridSearchResult {
    std::size_t pairs_found = 0;
    std::vector<MassPair> pairs;   // capped collection of admissible pairs
    double band = 0.0;             // residual band used
    double min_residual = 0.0;     // smallest |defect| seen over the grid
    MassPair closest;              // where it was attained
};

/// Exhaustive covering search for mass pairs compatible with the quantization
/// constraint on [lo,hi)^2. The residual band is the Lipschitz envelope of the
/// defect over one cell, so a true root between grid points cannot be missed.
/// On the theorem's domain [4pi,16pi)^2 the result is empty.
inline GridSearchResult admissible_pair_search(double step, double lo = 4.0 * pi,
                                               double hi = 16.0 * pi,
                                               std::size_t max_pairs = 64) {
    if (!(step > 0.0) || step > 1e-3 * pi)
        throw std::invalid_argument("admissible_pair_search: step must be in (0, 1e-3*pi]");
    if (!(lo >= 0.0 && hi > lo))
        throw std::invalid_argument("admissible_pair_search: bad domain");
    // |grad F| <= 2|m1-m2| + 8 pi per component on the domain; half-diagonal
    // step/sqrt(2) reach gives the envelope below.
    double span = hi - lo;
    double lip = 2.0 * span + 8.0 * pi;
    double band = lip * step; // >= lip * (step/sqrt(2)) * sqrt(2)
    std::size_t m = std::size_t(std::ceil(span / step));

    GridSearchResult res;
    res.band = band;
    res.min_residual = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> counts(m, 0);
    std::vector<double> minres(m, std::numeric_limits<double>::infinity());
    std::vector<MassPair> argmin(m);
    detail::parallel_for(m, [&](std::size_t i) {
        double m1 = lo + (double(i) + 0.5) * step;
        if (m1 >= hi) return;
        std::size_t c = 0;
        for (std::size_t j = 0; j < m; ++j) {
            double m2 = lo + (double(j) + 0.5) * step;
            if (m2 >= hi) break;
            double r = std::fabs(quantization_defect(m1, m2));
            if (r <= band) ++c;
            if (r < minres[i]) {
                minres[i] = r;
                argmin[i] = {m1, m2};
            }
        }
        counts[i] = c;
    });
    for (std::size_t i = 0; i < m; ++i) {
        res.pairs_found += counts[i];
        if (minres[i] < res.min_residual) {
            res.min_residual = minres[i];
            res.closest = argmin[i];
        }
    }
    if (res.pairs_found > 0) {
        // second pass only to collect examples; rare path
        for (std::size_t i = 0; i < m && res.pairs.size() < max_pairs; ++i) {
            if (counts[i] == 0) continue;
            double m1 = lo + (double(i) + 0.5) * step;
            for (std::size_t j = 0; j < m && res.pairs.size() < max_pairs; ++j) {
                double m2 = lo + (double(j) + 0.5) * step;
                if (m2 >= hi) break;
                if (std::fabs(quantization_defect(m1, m2)) <= band)
                    res.pairs.push_back({m1, m2});
            }
        }
    }
    return res;
}

/// Local mass int_{B_{x0}(r)} rho_i h_i e^{sign u} / int h_i e^{sign u},
/// the discrete stand-in for the blow-up value. sign=+1 uses (rho1,h1).
inline double local_mass(const Field& u, const ProblemParams& p, const Point& x0,
                         double r, int sign) {
    if (!(r > 0.0) || r >= 0.45)
        throw std::invalid_argument("local_mass: need 0 < r < 0.45");
    if (sign != 1 && sign != -1) throw std::invalid_argument("local_mass: sign must be +-1");
    const Field& w = sign > 0 ? p.h1 : p.h2;
    double rho = sign > 0 ? p.rho1 : p.rho2;
    detail::check_same_grid(u, w);
    double m = sign > 0 ? max_value(u) : -min_value(u);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double e = w[i] * std::exp(sign * u[i] - m);
        den += e;
        if (geodesic_distance(u.node(i), x0) < r) num += e;
    }
    return rho * num / den;
}

} // namespace mflab
