#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mflab/surface.hpp"

namespace mflab {

/// Parameters of the two-exponential mean field functional: rates rho1, rho2
/// and strictly positive weight fields h1, h2.
struct ProblemParams {
    double rho1;
    double rho2;
    Field h1;
    Field h2;

    ProblemParams(double r1, double r2, Field w1, Field w2)
        : rho1(r1), rho2(r2), h1(std::move(w1)), h2(std::move(w2)) {
        if (!(rho1 > 0.0) || !std::isfinite(rho1) || !(rho2 > 0.0) || !std::isfinite(rho2))
            throw std::invalid_argument("ProblemParams: rho1, rho2 must be positive and finite");
        detail::check_same_grid(h1, h2);
        if (!(min_value(h1) > 0.0) || !(min_value(h2) > 0.0))
            throw std::invalid_argument("ProblemParams: weight fields must be strictly positive");
    }
};

inline double average(const Field& u) { return integrate(u); }

/// log of integral of w * e^{sign*u}, evaluated as max-shifted sum so that
/// fields with range of order +-100 do not overflow.
inline double log_int_exp(const Field& w, const Field& u, double sign = 1.0) {
    detail::check_same_grid(w, u);
    double m = sign > 0 ? max_value(u) : -min_value(u);
    double s = 0.0;
    const auto& wv = w.values();
    const auto& uv = u.values();
    for (std::size_t i = 0; i < uv.size(); ++i)
        s += wv[i] * std::exp(sign * uv[i] - m);
    return m + std::log(s * u.h() * u.h());
}

/// Same, with w identically 1.
inline double log_int_exp(const Field& u, double sign = 1.0) {
    double m = sign > 0 ? max_value(u) : -min_value(u);
    double s = 0.0;
    for (double x : u.values()) s += std::exp(sign * x - m);
    return m + std::log(s * u.h() * u.h());
}

/// Normalized density w e^{sign*u} / int w e^{sign*u}, max-shift stabilized.
inline Field normalized_exp(const Field& w, const Field& u, double sign = 1.0) {
    detail::check_same_grid(w, u);
    double m = sign > 0 ? max_value(u) : -min_value(u);
    Field f(u.grid());
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        f[i] = w[i] * std::exp(sign * u[i] - m);
        s += f[i];
    }
    s *= u.h() * u.h();
    for (std::size_t i = 0; i < f.size(); ++i) f[i] /= s;
    return f;
}

/// The functional: 1/2 int |grad u|^2 - rho1 log int h1 e^u
/// - rho2 log int h2 e^{-u} + rho1 ubar - rho2 ubar.
inline double functional_I(const Field& u, const ProblemParams& p) {
    detail::check_same_grid(u, p.h1);
    double ubar = average(u);
    double val = 0.5 * dirichlet_energy(u)
               - p.rho1 * log_int_exp(p.h1, u, +1.0)
               - p.rho2 * log_int_exp(p.h2, u, -1.0)
               + p.rho1 * ubar - p.rho2 * ubar;
    if (!std::isfinite(val)) throw std::runtime_error("functional_I: non-finite value");
    return val;
}

/// -Delta u - rho1 (h1 e^u / int h1 e^u - 1) + rho2 (h2 e^{-u} / int h2 e^{-u} - 1).
/// Zero mean by construction; its L2 norm is the convergence metric.
inline Field residual(const Field& u, const ProblemParams& p) {
    detail::check_same_grid(u, p.h1);
    Field f1 = normalized_exp(p.h1, u, +1.0);
    Field f2 = normalized_exp(p.h2, u, -1.0);
    Field lap = laplacian(u);
    Field r(u.grid());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = -lap[i] - p.rho1 * (f1[i] - 1.0) + p.rho2 * (f2[i] - 1.0);
    return r;
}

/// L2 gradient of functional_I; identical expression to residual.
inline Field gradient_I(const Field& u, const ProblemParams& p) { return residual(u, p); }

/// One probe row of the two-sided Moser-Trudinger inequality.
struct MTProbeRow {
    int sample_id = 0;
    double dirichlet = 0.0; // int |grad u|^2
    double lhs = 0.0;       // log int e^{u-ubar} + log int e^{-u+ubar}
    double slack = 0.0;     // dirichlet/(16 pi) - lhs; bounded below by -C
};

inline MTProbeRow mt2_probe(const Field& u, int sample_id = 0) {
    double ubar = average(u);
    double lhs = (log_int_exp(u, +1.0) - ubar) + (log_int_exp(u, -1.0) + ubar);
    double dir = dirichlet_energy(u);
    MTProbeRow row{sample_id, dir, lhs, dir / (16.0 * pi) - lhs};
    if (!std::isfinite(row.slack)) throw std::runtime_error("mt2_probe: non-finite slack");
    return row;
}

/// Report of the improved-constant probe on two distant regions.
struct ImprovedMTReport {
    bool hypotheses_ok = false;
    std::string violation;     // empty when hypotheses hold
    double region_distance = 0.0;
    double mass_pos[2] = {0, 0}; // fraction of int e^u in region j
    double mass_neg[2] = {0, 0}; // fraction of int e^{-u} in region j
    double lhs = 0.0;
    double slack = std::numeric_limits<double>::quiet_NaN(); // dirichlet/(32pi-eps) - lhs
};

namespace detail {

inline double mask_distance(const Field& a, const Field& b) {
    check_same_grid(a, b);
    std::vector<Point> pa, pb;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > 0.5) pa.push_back(a.node(i));
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b[i] > 0.5) pb.push_back(b.node(i));
    if (pa.empty() || pb.empty()) return std::numeric_limits<double>::infinity();
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : pa)
        for (const auto& q : pb) d = std::min(d, geodesic_distance(p, q));
    return d;
}

// fraction of int e^{sign*u} carried by the masked region, max-shifted
inline double mass_fraction(const Field& mask, const Field& u, double sign) {
    double m = sign > 0 ? max_value(u) : -min_value(u);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double e = std::exp(sign * u[i] - m);
        den += e;
        if (mask[i] > 0.5) num += e;
    }
    return num / den;
}

} // namespace detail

/// Checks the covering hypotheses (each region holds at least gamma0 of the
/// mass of both e^u and e^{-u}, regions at distance >= delta0) and, when they
/// hold, evaluates the slack of the improved inequality with constant
/// 1/(32 pi - eps).
inline ImprovedMTReport improved_mt_probe(const Field& u, const Field& region1,
                                          const Field& region2, double gamma0,
                                          double delta0 = 0.1, double eps = 1.0) {
    detail::check_same_grid(u, region1);
    detail::check_same_grid(u, region2);
    ImprovedMTReport rep;
    for (std::size_t i = 0; i < u.size(); ++i)
        if (region1[i] > 0.5 && region2[i] > 0.5)
            throw std::invalid_argument("improved_mt_probe: regions must be disjoint");
    rep.region_distance = detail::mask_distance(region1, region2);
    const Field* regs[2] = {&region1, &region2};
    for (int j = 0; j < 2; ++j) {
        rep.mass_pos[j] = detail::mass_fraction(*regs[j], u, +1.0);
        rep.mass_neg[j] = detail::mass_fraction(*regs[j], u, -1.0);
    }
    if (rep.region_distance < delta0) {
        rep.violation = "regions closer than delta0";
        return rep;
    }
    for (int j = 0; j < 2; ++j) {
        if (rep.mass_pos[j] < gamma0) {
            rep.violation = "e^u mass below gamma0 in region " + std::to_string(j + 1);
            return rep;
        }
        if (rep.mass_neg[j] < gamma0) {
            rep.violation = "e^-u mass below gamma0 in region " + std::to_string(j + 1);
            return rep;
        }
    }
    rep.hypotheses_ok = true;
    double ubar = average(u);
    rep.lhs = (log_int_exp(u, +1.0) - ubar) + (log_int_exp(u, -1.0) + ubar);
    rep.slack = dirichlet_energy(u) / (32.0 * pi - eps) - rep.lhs;
    return rep;
}

} // namespace mflab
