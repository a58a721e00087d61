#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mflab/common.hpp"

namespace mflab::fft {

using cplx = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Twiddle table w[j] = exp(-2*pi*i*j/n), j < n/2. One direct trig call per
// entry keeps the roundoff at O(eps) instead of the O(n eps) of a running
// product.
inline std::vector<cplx> twiddles(std::size_t n) {
    std::vector<cplx> w(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
        double a = -2.0 * pi * double(j) / double(n);
        w[j] = {std::cos(a), std::sin(a)};
    }
    return w;
}

inline void fft_pow2(cplx* a, std::size_t n, bool inverse, const std::vector<cplx>& w) {
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        std::size_t half = len >> 1;
        std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                cplx tw = w[j * stride];
                if (inverse) tw = std::conj(tw);
                cplx u = a[i + j];
                cplx v = a[i + j + half] * tw;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

} // namespace detail

/// In-place 1D DFT of length n (unnormalized forward; inverse divides by n).
/// Power-of-two lengths use radix-2; anything else goes through Bluestein.
class Plan {
public:
    explicit Plan(std::size_t n) : n_(n) {
        if (n_ == 0) throw std::invalid_argument("fft: zero length");
        if (detail::is_pow2(n_)) {
            w_ = detail::twiddles(n_);
        } else {
            m_ = detail::next_pow2(2 * n_ - 1);
            w_ = detail::twiddles(m_);
            chirp_.resize(n_);
            for (std::size_t k = 0; k < n_; ++k) {
                // exp(-i pi k^2 / n), k^2 reduced mod 2n to avoid overflow
                std::size_t k2 = (k * k) % (2 * n_);
                double a = -pi * double(k2) / double(n_);
                chirp_[k] = {std::cos(a), std::sin(a)};
            }
            b_.assign(m_, cplx(0));
            b_[0] = std::conj(chirp_[0]);
            for (std::size_t k = 1; k < n_; ++k)
                b_[k] = b_[m_ - k] = std::conj(chirp_[k]);
            detail::fft_pow2(b_.data(), m_, false, w_);
        }
    }

    std::size_t size() const { return n_; }

    void forward(cplx* a) const { run(a, false); }
    void inverse(cplx* a) const { run(a, true); }

private:
    void run(cplx* a, bool inv) const {
        if (m_ == 0) {
            detail::fft_pow2(a, n_, inv, w_);
            if (inv) {
                double s = 1.0 / double(n_);
                for (std::size_t i = 0; i < n_; ++i) a[i] *= s;
            }
            return;
        }
        // Bluestein: x_k chirped, convolved with the conjugate chirp.
        std::vector<cplx> tmp(m_, cplx(0));
        for (std::size_t k = 0; k < n_; ++k) {
            cplx c = inv ? std::conj(chirp_[k]) : chirp_[k];
            tmp[k] = a[k] * c;
        }
        detail::fft_pow2(tmp.data(), m_, false, w_);
        for (std::size_t k = 0; k < m_; ++k)
            tmp[k] *= inv ? std::conj(b_[k]) : b_[k];
        detail::fft_pow2(tmp.data(), m_, true, w_);
        double s = 1.0 / double(m_);
        for (std::size_t k = 0; k < n_; ++k) {
            cplx c = inv ? std::conj(chirp_[k]) : chirp_[k];
            a[k] = tmp[k] * s * c;
        }
        if (inv) {
            double q = 1.0 / double(n_);
            for (std::size_t k = 0; k < n_; ++k) a[k] *= q;
        }
    }

    std::size_t n_ = 0;
    std::size_t m_ = 0; // Bluestein length, 0 when radix-2 applies
    std::vector<cplx> w_;
    std::vector<cplx> chirp_;
    std::vector<cplx> b_;
};

} // namespace mflab::fft
