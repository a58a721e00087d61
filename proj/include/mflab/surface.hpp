#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "mflab/common.hpp"
#include "mflab/fft.hpp"

namespace mflab {

/// Uniform periodic grid on the unit-area flat torus [0,1)^2.
struct SurfaceGrid {
    int n;           // nodes per axis
    double h;        // spacing, 1/n
    static constexpr double total_area = 1.0;
};

using GridPtr = std::shared_ptr<const SurfaceGrid>;

inline GridPtr build_grid(int n) {
    if (n < 16) throw std::invalid_argument("invalid resolution: n must be >= 16");
    return std::make_shared<const SurfaceGrid>(SurfaceGrid{n, 1.0 / double(n)});
}

/// A point on the torus; coordinates are kept in [0,1).
struct Point {
    double x = 0.0;
    double y = 0.0;

    Point() = default;
    Point(double px, double py) : x(reduce(px)), y(reduce(py)) {}

    static double reduce(double t) {
        double r = t - std::floor(t);
        return r >= 1.0 ? 0.0 : r; // floor roundoff can yield exactly 1.0
    }
};

namespace detail {
// minimal-image difference along one axis, in [0, 1/2]
inline double axis_dist(double a, double b) {
    double d = std::fabs(a - b);
    return d > 0.5 ? 1.0 - d : d;
}
} // namespace detail

/// Flat-torus distance: per-axis minimal image, Euclidean norm. Max sqrt(2)/2.
inline double geodesic_distance(const Point& p, const Point& q) {
    return std::hypot(detail::axis_dist(p.x, q.x), detail::axis_dist(p.y, q.y));
}

/// Scalar samples on the grid nodes, row-major: value(ix, iy) = v[iy*n + ix],
/// node (ix,iy) sits at (ix*h, iy*h).
class Field {
public:
    Field() = default;
    explicit Field(GridPtr g, double fill = 0.0)
        : grid_(std::move(g)), v_(std::size_t(grid_->n) * grid_->n, fill) {}

    const GridPtr& grid() const { return grid_; }
    int n() const { return grid_->n; }
    double h() const { return grid_->h; }
    std::size_t size() const { return v_.size(); }

    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    double& at(int ix, int iy) { return v_[std::size_t(iy) * grid_->n + ix]; }
    double at(int ix, int iy) const { return v_[std::size_t(iy) * grid_->n + ix]; }

    Point node(std::size_t i) const {
        int n = grid_->n;
        return Point{double(i % std::size_t(n)) * grid_->h, double(i / std::size_t(n)) * grid_->h};
    }

    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

private:
    GridPtr grid_;
    std::vector<double> v_;
};

namespace detail {
inline void check_same_grid(const Field& a, const Field& b) {
    if (!a.grid() || !b.grid() || a.n() != b.n())
        throw std::invalid_argument("fields live on different grids");
}
} // namespace detail

template <class Fn>
Field make_field(const GridPtr& g, Fn&& fn) {
    Field f(g);
    int n = g->n;
    detail::parallel_for(std::size_t(n), [&](std::size_t iy) {
        for (int ix = 0; ix < n; ++ix)
            f.at(ix, int(iy)) = fn(Point{double(ix) * g->h, double(iy) * g->h});
    });
    return f;
}

/// Quadrature with uniform weights h^2; exact for band-limited periodic data.
inline double integrate(const Field& f) {
    double s = 0.0;
    for (double x : f.values()) s += x;
    return s * f.h() * f.h();
}

inline double inner_l2(const Field& a, const Field& b) {
    detail::check_same_grid(a, b);
    double s = 0.0;
    const auto& u = a.values();
    const auto& v = b.values();
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s * a.h() * a.h();
}

inline double norm_l2(const Field& a) { return std::sqrt(inner_l2(a, a)); }

inline double max_value(const Field& f) {
    return *std::max_element(f.values().begin(), f.values().end());
}

inline double min_value(const Field& f) {
    return *std::min_element(f.values().begin(), f.values().end());
}

// ---------------------------------------------------------------------------
// Spectral calculus. Integer frequency k(p) = p for p <= n/2, else p - n;
// continuous interpolant u(x) = (1/n^2) sum u_hat[p,q] e^{2 pi i (k_p x + k_q y)}.
// ---------------------------------------------------------------------------

namespace spectral {

inline int freq(int p, int n) { return p <= n / 2 ? p : p - n; }

inline std::vector<fft::cplx> forward(const Field& f) {
    int n = f.n();
    std::vector<fft::cplx> a(std::size_t(n) * n);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = f[i];
    fft::Plan plan{std::size_t(n)};
    detail::parallel_for(std::size_t(n), [&](std::size_t r) {
        plan.forward(&a[r * std::size_t(n)]);
    });
    detail::parallel_for(std::size_t(n), [&](std::size_t c) {
        thread_local std::vector<fft::cplx> buf;
        buf.resize(std::size_t(n));
        for (int r = 0; r < n; ++r) buf[std::size_t(r)] = a[std::size_t(r) * n + c];
        plan.forward(buf.data());
        for (int r = 0; r < n; ++r) a[std::size_t(r) * n + c] = buf[std::size_t(r)];
    });
    return a;
}

inline Field inverse(std::vector<fft::cplx> a, const GridPtr& g) {
    int n = g->n;
    fft::Plan plan{std::size_t(n)};
    detail::parallel_for(std::size_t(n), [&](std::size_t c) {
        thread_local std::vector<fft::cplx> buf;
        buf.resize(std::size_t(n));
        for (int r = 0; r < n; ++r) buf[std::size_t(r)] = a[std::size_t(r) * n + c];
        plan.inverse(buf.data());
        for (int r = 0; r < n; ++r) a[std::size_t(r) * n + c] = buf[std::size_t(r)];
    });
    detail::parallel_for(std::size_t(n), [&](std::size_t r) {
        plan.inverse(&a[r * std::size_t(n)]);
    });
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = a[i].real();
    return f;
}

} // namespace spectral

/// Integral of |grad u|^2 (no 1/2 factor). Computed as per-axis 1D spectral
/// sums, which equals the 2D Parseval expression and needs only O(n) scratch.
inline double dirichlet_energy(const Field& u) {
    int n = u.n();
    fft::Plan plan{std::size_t(n)};
    std::vector<double> row_e(std::size_t(n)), col_e(std::size_t(n));
    detail::parallel_for(std::size_t(n), [&](std::size_t r) {
        thread_local std::vector<fft::cplx> buf;
        buf.resize(std::size_t(n));
        for (int j = 0; j < n; ++j) buf[std::size_t(j)] = u[r * std::size_t(n) + j];
        plan.forward(buf.data());
        double e = 0.0;
        for (int p = 0; p < n; ++p) {
            double k = 2.0 * pi * spectral::freq(p, n);
            e += k * k * std::norm(buf[std::size_t(p)]);
        }
        row_e[r] = e;
    });
    detail::parallel_for(std::size_t(n), [&](std::size_t c) {
        thread_local std::vector<fft::cplx> buf;
        buf.resize(std::size_t(n));
        for (int r = 0; r < n; ++r) buf[std::size_t(r)] = u[std::size_t(r) * n + c];
        plan.forward(buf.data());
        double e = 0.0;
        for (int p = 0; p < n; ++p) {
            double k = 2.0 * pi * spectral::freq(p, n);
            e += k * k * std::norm(buf[std::size_t(p)]);
        }
        col_e[c] = e;
    });
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += row_e[std::size_t(i)] + col_e[std::size_t(i)];
    double nn = double(n);
    return total / (nn * nn * nn);
}

/// Spectral Laplacian.
inline Field laplacian(const Field& u) {
    int n = u.n();
    auto a = spectral::forward(u);
    for (int q = 0; q < n; ++q) {
        for (int p = 0; p < n; ++p) {
            double kx = 2.0 * pi * spectral::freq(p, n);
            double ky = 2.0 * pi * spectral::freq(q, n);
            a[std::size_t(q) * n + p] *= -(kx * kx + ky * ky);
        }
    }
    return spectral::inverse(std::move(a), u.grid());
}

/// Solve -Delta u = rhs with zero-mean u; rhs must have zero mean.
inline Field solve_poisson(const Field& rhs) {
    if (std::fabs(integrate(rhs)) > 1e-10)
        throw std::invalid_argument("solve_poisson: mean not zero");
    int n = rhs.n();
    auto a = spectral::forward(rhs);
    a[0] = 0.0;
    for (int q = 0; q < n; ++q) {
        for (int p = 0; p < n; ++p) {
            if (p == 0 && q == 0) continue;
            double kx = 2.0 * pi * spectral::freq(p, n);
            double ky = 2.0 * pi * spectral::freq(q, n);
            a[std::size_t(q) * n + p] /= kx * kx + ky * ky;
        }
    }
    return spectral::inverse(std::move(a), rhs.grid());
}

// ---------------------------------------------------------------------------
// Sharp indicator masks; radius accuracy O(h).
// ---------------------------------------------------------------------------

inline Field ball_mask(const GridPtr& g, const Point& p, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball_mask: radius must be positive");
    return make_field(g, [&](const Point& q) {
        return geodesic_distance(p, q) < r ? 1.0 : 0.0;
    });
}

inline Field annulus_mask(const GridPtr& g, const Point& p, double r1, double r2) {
    if (!(0.0 < r1 && r1 < r2)) throw std::invalid_argument("annulus_mask: need 0 < r1 < r2");
    return make_field(g, [&](const Point& q) {
        double d = geodesic_distance(p, q);
        return (d >= r1 && d < r2) ? 1.0 : 0.0;
    });
}

/// CSV dump: header `x,y,value`, row-major over nodes, 17 significant digits.
inline void write_csv(const Field& f, std::ostream& os) {
    os << "x,y,value\n";
    int n = f.n();
    char buf[96];
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n",
                          double(ix) * f.h(), double(iy) * f.h(), f.at(ix, iy));
            os << buf;
        }
    }
}

} // namespace mflab
