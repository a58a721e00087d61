#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mflab/common.hpp"
#include "mflab/surface.hpp"

namespace mflab {

/// Strictly positive field of unit total mass.
struct Density {
    Field f;

    explicit Density(Field field) : f(std::move(field)) {
        if (!(min_value(f) > 0.0))
            throw std::invalid_argument("Density: values must be strictly positive");
        if (std::fabs(integrate(f) - 1.0) > 1e-10)
            throw std::invalid_argument("Density: total mass must be 1 within 1e-10");
    }
};

/// Normalize a strictly positive field to unit mass.
inline Density make_density(Field f) {
    double tot = integrate(f);
    if (!(tot > 0.0) || !std::isfinite(tot))
        throw std::invalid_argument("make_density: non-normalizable field");
    for (auto& v : f.values()) v /= tot;
    return Density(std::move(f));
}

struct ConcConfig {
    double R = 2.0;            // balance ratio, paper requires R > 1
    double delta = 0.1;        // cone threshold
    double tau = 0.05;         // mass threshold for the core set
    double bisect_tol = 1e-10; // relative tolerance of the scale bisection

    double R0() const { return 3.0 * R; }

    void validate() const {
        if (!(R > 1.0)) throw std::invalid_argument("ConcConfig: R must be > 1");
        if (!(delta > 0.0 && delta < 0.35))
            throw std::invalid_argument("ConcConfig: delta must be in (0, 0.35)");
        if (!(tau > 0.0 && tau < 1.0))
            throw std::invalid_argument("ConcConfig: tau must be in (0,1)");
        if (!(bisect_tol > 0.0)) throw std::invalid_argument("ConcConfig: bad bisect_tol");
    }
};

/// Point of the topological cone over the torus: (beta, sigma) for
/// sigma < delta, a single apex point for sigma >= delta.
struct ConePoint {
    bool at_apex = true;
    double sigma = 0.0;          // 3 * min scale (best known value when at apex)
    std::optional<Point> beta;   // defined only off the apex

    friend bool operator==(const ConePoint& a, const ConePoint& b) {
        if (a.at_apex || b.at_apex) return a.at_apex == b.at_apex;
        return a.sigma == b.sigma && a.beta->x == b.beta->x && a.beta->y == b.beta->y;
    }
};

inline constexpr double torus_diameter = 0.70710678118654752440; // sqrt(2)/2

// ---------------------------------------------------------------------------
// Exact ball masses of a density, block-accelerated. Blocks fully inside or
// outside the ball contribute their precomputed sums; only boundary blocks
// are scanned node by node. A window fast path covers tiny radii.
// ---------------------------------------------------------------------------
class MassMap {
public:
    explicit MassMap(const Density& d) : f_(&d.f), n_(d.f.n()), h_(d.f.h()) {
        int b = int(std::cbrt(1.25 * double(n_))) ;
        block_ = std::min(std::max(b, 4), 64);
        nb_ = (n_ + block_ - 1) / block_;
        sums_.assign(std::size_t(nb_) * nb_, 0.0);
        for (int by = 0; by < nb_; ++by)
            for (int bx = 0; bx < nb_; ++bx) {
                double s = 0.0;
                for (int iy = by * block_; iy < std::min(n_, (by + 1) * block_); ++iy)
                    for (int ix = bx * block_; ix < std::min(n_, (bx + 1) * block_); ++ix)
                        s += f_->at(ix, iy);
                sums_[std::size_t(by) * nb_ + bx] = s;
            }
        total_ = 0.0;
        for (double s : sums_) total_ += s;
        total_ *= h_ * h_;
    }

    int n() const { return n_; }
    double h() const { return h_; }
    double total() const { return total_; }
    const Field& field() const { return *f_; }

    /// Mass of the open ball B_c(s).
    double mass(const Point& c, double s) const {
        if (!(s > 0.0)) return 0.0;
        if (s > torus_diameter) return total_;
        double win = 2.0 * s / h_ + 2.0;
        if (win * win < 0.3 * double(nb_) * nb_) return mass_window(c, s);
        return mass_blocks(c, s);
    }

private:
    double mass_window(const Point& c, double s) const {
        int ix0 = int(std::floor((c.x - s) / h_));
        int ix1 = int(std::ceil((c.x + s) / h_));
        int iy0 = int(std::floor((c.y - s) / h_));
        int iy1 = int(std::ceil((c.y + s) / h_));
        double acc = 0.0;
        double s2 = s * s;
        for (int iy = iy0; iy <= iy1; ++iy) {
            int wy = ((iy % n_) + n_) % n_;
            double dy = detail::axis_dist(c.y, double(wy) * h_);
            if (dy >= s) continue;
            for (int ix = ix0; ix <= ix1; ++ix) {
                int wx = ((ix % n_) + n_) % n_;
                double dx = detail::axis_dist(c.x, double(wx) * h_);
                if (dx * dx + dy * dy < s2) acc += f_->at(wx, wy);
            }
        }
        return acc * h_ * h_;
    }

    // min/max of axis_dist(c, t) over t in [lo, lo + len] (mod 1)
    static void axis_range(double c, double lo, double len, double& dmin, double& dmax) {
        double u = c - lo;
        u -= std::floor(u);             // offset of c from interval start, in [0,1)
        double d0 = detail::axis_dist(c, lo);
        double d1 = detail::axis_dist(c, lo + len);
        if (u <= len) {
            dmin = 0.0;
        } else {
            dmin = std::min(d0, d1);
        }
        double anti = u - 0.5;          // antipode offset
        anti -= std::floor(anti);
        dmax = (anti <= len) ? 0.5 : std::max(d0, d1);
    }

    double mass_blocks(const Point& c, double s) const {
        double acc = 0.0;
        double s2 = s * s;
        for (int by = 0; by < nb_; ++by) {
            int y0 = by * block_;
            int y1 = std::min(n_, y0 + block_);
            double leny = double(y1 - 1 - y0) * h_;
            double ymin, ymax;
            axis_range(c.y, double(y0) * h_, leny, ymin, ymax);
            for (int bx = 0; bx < nb_; ++bx) {
                int x0 = bx * block_;
                int x1 = std::min(n_, x0 + block_);
                double lenx = double(x1 - 1 - x0) * h_;
                double xmin, xmax;
                axis_range(c.x, double(x0) * h_, lenx, xmin, xmax);
                double dmin2 = xmin * xmin + ymin * ymin;
                if (dmin2 >= s2) continue;
                double dmax2 = xmax * xmax + ymax * ymax;
                if (dmax2 < s2) {
                    acc += sums_[std::size_t(by) * nb_ + bx];
                    continue;
                }
                for (int iy = y0; iy < y1; ++iy) {
                    double dy = detail::axis_dist(c.y, double(iy) * h_);
                    for (int ix = x0; ix < x1; ++ix) {
                        double dx = detail::axis_dist(c.x, double(ix) * h_);
                        if (dx * dx + dy * dy < s2) acc += f_->at(ix, iy);
                    }
                }
            }
        }
        return acc * h_ * h_;
    }

    const Field* f_;
    int n_, block_, nb_;
    double h_;
    double total_;
    std::vector<double> sums_;
};

struct ScaleMin {
    double value = 0.0;  // min over grid nodes of the local scale
    Point argmin;
    bool exact = true;   // false when the search aborted above `abort_above`
};

struct CoreNode {
    std::size_t index = 0;
    double sigma = 0.0;
    double mass = 0.0;   // T at this node
    double weight = 0.0; // (T - tau)^+ (sigma(f) - sigma)^+
};

struct NodeScales {
    std::vector<double> sigma; // per node
    std::vector<double> mass;  // per node
};

// ---------------------------------------------------------------------------
// The concentration map machinery of a single density.
// ---------------------------------------------------------------------------
class ConcentrationMap {
public:
    ConcentrationMap(const Density& d, ConcConfig cfg)
        : d_(&d), cfg_(cfg), mm_(d) {
        cfg_.validate();
    }

    const ConcConfig& config() const { return cfg_; }
    const MassMap& masses() const { return mm_; }

    /// Balance defect g(s) = mass(B_c(s)) + mass(B_c(R0 s)) - 1, increasing in s.
    double balance(const Point& c, double s) const {
        return mm_.mass(c, s) + mm_.mass(c, cfg_.R0() * s) - 1.0;
    }

    /// sigma(c, f): unique root of the balance defect, bisected on
    /// (h/2, sqrt(2)/2] to relative tolerance bisect_tol. A single-node spike
    /// (g(h/2) >= 0) returns the bisection floor h/2.
    double scale_at(const Point& c) const { return scale_capped(c, torus_diameter); }

    /// True iff sigma(c) > cap, decided with one defect evaluation.
    bool scale_exceeds(const Point& c, double cap) const { return balance(c, cap) < 0.0; }

    /// T(c, f): mass of the sigma(c)-ball.
    double core_mass(const Point& c) const { return mm_.mass(c, scale_at(c)); }

    /// min over grid nodes of sigma(x, f), by quadtree branch-and-bound using
    /// the exact 1-Lipschitz bound |sigma(x)-sigma(y)| <= d(x,y). If the
    /// minimum provably exceeds `abort_above` the search stops early and
    /// reports the best value seen with exact=false.
    ScaleMin min_scale(double abort_above = std::numeric_limits<double>::infinity()) const {
        const int n = mm_.n();
        const double h = mm_.h();
        const double slack = 1e-9;

        // seed at the density peak
        std::size_t peak = 0;
        const auto& vals = d_->f.values();
        for (std::size_t i = 1; i < vals.size(); ++i)
            if (vals[i] > vals[peak]) peak = i;
        ScaleMin best;
        best.argmin = d_->f.node(peak);
        best.value = scale_at(best.argmin);

        struct Cell { int ix, iy, size; };
        std::vector<Cell> level{{0, 0, n}};
        while (!level.empty()) {
            double cap = std::min(best.value, abort_above);
            double reach = 0.0;
            {
                int sz = level.front().size;
                reach = 0.5 * double(sz) * h * 1.41421356237309515;
            }
            double thresh = std::min(cap + reach + slack, torus_diameter);
            struct Eval { double sigma; bool prune; };
            std::vector<Eval> evals(level.size());
            detail::parallel_for(level.size(), [&](std::size_t k) {
                const Cell& c = level[k];
                Point ctr{double(c.ix + c.size / 2) * h, double(c.iy + c.size / 2) * h};
                if (c.size > 1 && scale_exceeds(ctr, thresh)) {
                    evals[k] = {0.0, true};
                } else if (c.size == 1) {
                    Point node{double(c.ix) * h, double(c.iy) * h};
                    if (scale_exceeds(node, cap + slack)) {
                        evals[k] = {0.0, true};
                    } else {
                        evals[k] = {scale_capped(node, std::min(cap * (1.0 + 1e-9) + slack,
                                                                torus_diameter)),
                                    false};
                    }
                } else {
                    evals[k] = {scale_capped(ctr, thresh), false};
                }
            });
            std::vector<Cell> next;
            for (std::size_t k = 0; k < level.size(); ++k) {
                const Cell& c = level[k];
                if (evals[k].prune) continue;
                if (evals[k].sigma < best.value) {
                    best.value = evals[k].sigma;
                    best.argmin = c.size == 1
                        ? Point{double(c.ix) * h, double(c.iy) * h}
                        : Point{double(c.ix + c.size / 2) * h, double(c.iy + c.size / 2) * h};
                }
                if (c.size == 1) continue;
                int half = c.size / 2;
                int rest = c.size - half;
                next.push_back({c.ix, c.iy, half});
                if (rest > 0) next.push_back({(c.ix + half) % n, c.iy, rest});
                if (rest > 0) next.push_back({c.ix, (c.iy + half) % n, rest});
                if (rest > 0) next.push_back({(c.ix + half) % n, (c.iy + half) % n, rest});
            }
            level = std::move(next);
        }
        best.exact = best.value <= abort_above;
        return best;
    }

    /// sigma(f) = 3 min_x sigma(x, f).
    double concentration_scale() const { return 3.0 * min_scale().value; }

    /// The set S(f) of nodes with T > tau and sigma(x) < sigma(f), with the
    /// centroid weights attached. Throws calibration_error when empty.
    std::vector<CoreNode> core_region() const {
        ScaleMin ms = min_scale();
        auto nodes = core_region_impl(ms);
        if (nodes.empty())
            throw calibration_error("core region empty: tau too large for this density");
        return nodes;
    }

    /// eta(f): weighted centroid in the flat embedding
    /// x -> (cos 2 pi x, sin 2 pi x, cos 2 pi y, sin 2 pi y) / (2 pi).
    std::array<double, 4> embedded_centroid() const {
        ScaleMin ms = min_scale();
        return centroid_impl(core_region_impl(ms));
    }

    /// beta(f): per-circle-factor projection of eta back to the torus.
    Point center_of_mass() const {
        ScaleMin ms = min_scale();
        return project(centroid_impl(core_region_impl(ms)));
    }

    /// psi(f) = (beta, sigma(f)), collapsed to the apex when sigma(f) >= delta.
    ConePoint concentration_point() const {
        // Small grids resolve the exact minimum cheaply; on fine grids an
        // early certificate "min > delta/3" suffices for the apex call.
        double abort = mm_.n() <= 512 ? std::numeric_limits<double>::infinity()
                                      : cfg_.delta / 3.0 * (1.0 + 1e-9);
        ScaleMin ms = min_scale(abort);
        double sigma_f = 3.0 * ms.value;
        if (!ms.exact || sigma_f >= cfg_.delta)
            return ConePoint{true, sigma_f, std::nullopt};
        auto nodes = core_region_impl(ms);
        Point beta = project(centroid_impl(nodes));
        return ConePoint{false, sigma_f, beta};
    }

    // exposed for reuse by callers that already hold the minimum
    std::vector<CoreNode> core_region_impl(const ScaleMin& ms) const {
        const int n = mm_.n();
        const double h = mm_.h();
        double sigma_f = 3.0 * ms.value;
        double radius = (cfg_.R0() + 1.0) * sigma_f + 12.0 * h;
        std::vector<std::size_t> cand;
        if (radius >= torus_diameter) {
            cand.resize(std::size_t(n) * n);
            for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = i;
        } else {
            int ix0 = int(std::floor((ms.argmin.x - radius) / h));
            int ix1 = int(std::ceil((ms.argmin.x + radius) / h));
            int iy0 = int(std::floor((ms.argmin.y - radius) / h));
            int iy1 = int(std::ceil((ms.argmin.y + radius) / h));
            for (int iy = iy0; iy <= iy1; ++iy) {
                int wy = ((iy % n) + n) % n;
                for (int ix = ix0; ix <= ix1; ++ix) {
                    int wx = ((ix % n) + n) % n;
                    Point q{double(wx) * h, double(wy) * h};
                    if (geodesic_distance(q, ms.argmin) <= radius)
                        cand.push_back(std::size_t(wy) * std::size_t(n) + std::size_t(wx));
                }
            }
        }
        std::vector<CoreNode> tmp(cand.size());
        detail::parallel_for(cand.size(), [&](std::size_t k) {
            Point q = d_->f.node(cand[k]);
            CoreNode cn;
            cn.index = cand[k];
            if (scale_exceeds(q, sigma_f)) {
                cn.weight = -1.0; // not a member
            } else {
                cn.sigma = scale_capped(q, sigma_f);
                cn.mass = mm_.mass(q, cn.sigma);
                double w = (cn.mass - cfg_.tau) * (sigma_f - cn.sigma);
                cn.weight = (cn.mass > cfg_.tau && cn.sigma < sigma_f) ? std::max(w, 0.0) : -1.0;
            }
            tmp[k] = cn;
        });
        std::vector<CoreNode> out;
        for (auto& cn : tmp)
            if (cn.weight >= 0.0) out.push_back(cn);
        return out;
    }

    std::array<double, 4> centroid_impl(const std::vector<CoreNode>& nodes) const {
        double wtot = 0.0;
        std::array<double, 4> e{0, 0, 0, 0};
        for (const auto& cn : nodes) {
            if (cn.weight <= 0.0) continue;
            Point q = d_->f.node(cn.index);
            double cx = std::cos(2.0 * pi * q.x), sx = std::sin(2.0 * pi * q.x);
            double cy = std::cos(2.0 * pi * q.y), sy = std::sin(2.0 * pi * q.y);
            e[0] += cn.weight * cx;
            e[1] += cn.weight * sx;
            e[2] += cn.weight * cy;
            e[3] += cn.weight * sy;
            wtot += cn.weight;
        }
        if (!(wtot > 0.0))
            throw calibration_error("centroid weights are all zero: tau too large");
        for (auto& v : e) v /= wtot * 2.0 * pi;
        return e;
    }

    static Point project(const std::array<double, 4>& e) {
        double rx = std::hypot(e[0], e[1]);
        double ry = std::hypot(e[2], e[3]);
        if (rx <= 1e-12 || ry <= 1e-12)
            throw degenerate_error("projection undefined: centroid on a circle axis");
        double ax = std::atan2(e[1], e[0]) / (2.0 * pi);
        double ay = std::atan2(e[3], e[2]) / (2.0 * pi);
        return Point{ax, ay};
    }

    /// sigma and T at every grid node (brute sweep; meant for small grids).
    NodeScales scale_field() const {
        std::size_t sz = d_->f.size();
        NodeScales ns;
        ns.sigma.resize(sz);
        ns.mass.resize(sz);
        detail::parallel_for(sz, [&](std::size_t i) {
            Point q = d_->f.node(i);
            ns.sigma[i] = scale_at(q);
            ns.mass[i] = mm_.mass(q, ns.sigma[i]);
        });
        return ns;
    }

private:
    double scale_capped(const Point& c, double cap) const {
        const double lo0 = 0.5 * mm_.h();
        if (balance(c, lo0) >= 0.0) return lo0; // single-node spike
        double lo = lo0, hi = cap;
        // caller guarantees g(cap) >= 0 (cap = diameter always qualifies)
        while (hi - lo > cfg_.bisect_tol * hi) {
            double mid = 0.5 * (lo + hi);
            if (balance(c, mid) >= 0.0)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }

    const Density* d_;
    ConcConfig cfg_;
    MassMap mm_;
};

// one-shot wrappers mirroring the per-operation contracts
inline double scale_at(const Point& x, const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).scale_at(x);
}
inline double core_mass(const Point& x, const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).core_mass(x);
}
inline double concentration_scale(const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).concentration_scale();
}
inline std::vector<CoreNode> core_region(const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).core_region();
}
inline std::array<double, 4> embedded_centroid(const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).embedded_centroid();
}
inline Point center_of_mass(const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).center_of_mass();
}
inline ConePoint concentration_point(const Density& f, const ConcConfig& cfg) {
    return ConcentrationMap(f, cfg).concentration_point();
}

/// Report of the defining properties of the concentration map for one density:
/// a witness point p with large core mass inside B_p(sigma) and outside
/// B_p(R sigma), and the center-of-mass bound d(p, beta) <= C' sigma.
struct ConcPropertyReport {
    Point p;                 // argmax of T over the grid
    double max_T = 0.0;
    double sigma_f = 0.0;
    double mass_inside = 0.0;  // int_{B_p(sigma_f)} f
    double mass_outside = 0.0; // int_{B_p(R sigma_f)^c} f
    bool b_holds = false;      // both masses > tau
    bool at_apex = true;
    double beta_dist = 0.0;            // d(p, beta), 0 at apex
    double beta_bound = 0.0;           // C' sigma_f
    bool a_holds = true;               // trivially true at the apex
};

/// Full check of properties a)/b) (brute sweep over nodes; small grids).
inline ConcPropertyReport check_concentration_properties(const Density& f,
                                                         const ConcConfig& cfg) {
    ConcentrationMap cm(f, cfg);
    NodeScales ns = cm.scale_field();
    std::size_t best = 0;
    for (std::size_t i = 1; i < ns.mass.size(); ++i)
        if (ns.mass[i] > ns.mass[best]) best = i;
    ConcPropertyReport rep;
    rep.p = f.f.node(best);
    rep.max_T = ns.mass[best];
    double min_sigma = ns.sigma[0];
    for (double s : ns.sigma) min_sigma = std::min(min_sigma, s);
    rep.sigma_f = 3.0 * min_sigma;
    rep.mass_inside = cm.masses().mass(rep.p, rep.sigma_f);
    rep.mass_outside = 1.0 - cm.masses().mass(rep.p, cfg.R * rep.sigma_f);
    rep.b_holds = rep.mass_inside > cfg.tau && rep.mass_outside > cfg.tau;
    rep.at_apex = rep.sigma_f >= cfg.delta;
    rep.beta_bound = std::max(3.0 * cfg.R + 1.0, torus_diameter / cfg.delta) * rep.sigma_f;
    if (!rep.at_apex) {
        ConePoint cp = cm.concentration_point();
        rep.beta_dist = geodesic_distance(rep.p, *cp.beta);
        rep.a_holds = rep.beta_dist <= rep.beta_bound;
    }
    return rep;
}

/// Calibrated mass threshold: half the smallest max_x T(x,f) over the corpus,
/// capped at 0.05 so concentrated-only corpora do not drive tau up.
inline double calibrate_tau(const std::vector<Density>& corpus, const ConcConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("calibrate_tau: empty corpus");
    double m = std::numeric_limits<double>::infinity();
    for (const auto& d : corpus) {
        ConcentrationMap cm(d, cfg);
        NodeScales ns = cm.scale_field();
        double mx = 0.0;
        for (double t : ns.mass) mx = std::max(mx, t);
        m = std::min(m, mx);
    }
    return std::min(0.05, 0.5 * m);
}

} // namespace mflab
