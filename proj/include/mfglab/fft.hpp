#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mfglab {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT. Unnormalized forward; inverse carries 1/n.
inline void fft_pow2(cplx* a, std::size_t n, bool inverse) {
    if (n <= 1) return;
    if (!is_pow2(n)) throw std::invalid_argument("fft_pow2: length must be a power of two");

    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    static const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? two_pi : -two_pi) / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
    }
}

// FFT along every axis of a row-major tensor with the given axis lengths.
// Axis d-1 is the fastest-varying one.
class TensorFFT {
public:
    explicit TensorFFT(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
        total_ = 1;
        for (std::size_t d : dims_) {
            if (!is_pow2(d)) throw std::invalid_argument("TensorFFT: all axis lengths must be powers of two");
            total_ *= d;
        }
        std::size_t maxd = 0;
        for (std::size_t d : dims_) maxd = std::max(maxd, d);
        line_.resize(maxd);
    }

    std::size_t size() const { return total_; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    void transform(cplx* data, bool inverse) {
        std::size_t stride = 1;
        for (std::size_t ax = dims_.size(); ax-- > 0;) {
            const std::size_t len = dims_[ax];
            apply_axis(data, len, stride, inverse);
            stride *= len;
        }
    }

private:
    void apply_axis(cplx* data, std::size_t len, std::size_t stride, bool inverse) {
        const std::size_t block = len * stride;
        if (stride == 1) {
            for (std::size_t base = 0; base < total_; base += block)
                fft_pow2(data + base, len, inverse);
            return;
        }
        for (std::size_t base = 0; base < total_; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                cplx* p = data + base + off;
                for (std::size_t k = 0; k < len; ++k) line_[k] = p[k * stride];
                fft_pow2(line_.data(), len, inverse);
                for (std::size_t k = 0; k < len; ++k) p[k * stride] = line_[k];
            }
        }
    }

    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
    std::vector<cplx> line_;
};

// Solves (I - dt * sum_ax Lap_ax) x = b for the 3-point periodic Laplacian on
// each axis, by FFT diagonalization. The discrete symbol (2 - 2cos) / h^2 is
// used so the solve inverts exactly the stencil matrix, not its continuum
// limit.
class ImplicitDiffusion {
public:
    ImplicitDiffusion(std::vector<std::size_t> dims, double h, double dt)
        : fft_(std::move(dims)), buf_(fft_.size()), mult_(fft_.size()) {
        static const double two_pi = 6.283185307179586476925286766559;
        const auto& d = fft_.dims();
        std::vector<std::vector<double>> lam(d.size());
        for (std::size_t ax = 0; ax < d.size(); ++ax) {
            lam[ax].resize(d[ax]);
            for (std::size_t k = 0; k < d[ax]; ++k)
                lam[ax][k] = (2.0 - 2.0 * std::cos(two_pi * static_cast<double>(k) / static_cast<double>(d[ax]))) / (h * h);
        }
        for (std::size_t idx = 0; idx < fft_.size(); ++idx) {
            std::size_t rem = idx;
            double s = 0.0;
            for (std::size_t ax = d.size(); ax-- > 0;) {
                s += lam[ax][rem % d[ax]];
                rem /= d[ax];
            }
            mult_[idx] = 1.0 / (1.0 + dt * s);
        }
    }

    std::size_t size() const { return fft_.size(); }

    void apply(std::vector<double>& x) {
        if (x.size() != buf_.size()) throw std::invalid_argument("ImplicitDiffusion: size mismatch");
        for (std::size_t i = 0; i < x.size(); ++i) buf_[i] = cplx(x[i], 0.0);
        fft_.transform(buf_.data(), false);
        for (std::size_t i = 0; i < x.size(); ++i) buf_[i] *= mult_[i];
        fft_.transform(buf_.data(), true);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = buf_[i].real();
    }

private:
    TensorFFT fft_;
    std::vector<cplx> buf_;
    std::vector<double> mult_;
};

}  // namespace mfglab
