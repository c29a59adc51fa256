#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fedflow {

//==============================================================================
// Radix-2 complex FFT with precomputed twiddles and bit-reversal table.
// Conventions:
//   forward:  u_hat[k] = sum_j u[j] exp(-2*pi*i*j*k/N)   (unnormalized)
//   inverse:  u[j]     = (1/N) sum_k u_hat[k] exp(+2*pi*i*j*k/N)
// One instance per transform size; methods are const and reuse no internal
// buffers, so a shared instance is safe across threads.
//==============================================================================
class Fft {
public:
    using cd = std::complex<double>;

    explicit Fft(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0)
            throw std::invalid_argument("Fft: size must be a positive power of two");
        bitrev_.resize(n);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n) ++log2n;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            bitrev_[i] = r;
        }
        // twiddle_[j] = exp(-2*pi*i*j/n), j < n/2
        twiddle_.resize(n / 2);
        const double base = -2.0 * pi() / static_cast<double>(n);
        for (std::size_t j = 0; j < n / 2; ++j)
            twiddle_[j] = cd(std::cos(base * static_cast<double>(j)),
                             std::sin(base * static_cast<double>(j)));
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<cd>& a) const { transform(a, false); }

    void inverse(std::vector<cd>& a) const {
        transform(a, true);
        const double inv = 1.0 / static_cast<double>(n_);
        for (auto& x : a) x *= inv;
    }

private:
    static double pi() { return 3.141592653589793238462643383279502884; }

    void transform(std::vector<cd>& a, bool inv) const {
        if (a.size() != n_) throw std::invalid_argument("Fft: length mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            if (bitrev_[i] > i) std::swap(a[i], a[bitrev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t stride = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    cd w = twiddle_[j * stride];
                    if (inv) w = std::conj(w);
                    const cd u = a[start + j];
                    const cd v = a[start + j + half] * w;
                    a[start + j] = u + v;
                    a[start + j + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> bitrev_;
    std::vector<cd> twiddle_;
};

// Convenience wrappers over Fft for one-off transforms of real signals.
inline std::vector<std::complex<double>> dft_forward(const std::vector<double>& u) {
    Fft fft(u.size());
    std::vector<std::complex<double>> a(u.begin(), u.end());
    fft.forward(a);
    return a;
}

inline std::vector<double> dft_inverse(const std::vector<std::complex<double>>& u_hat) {
    Fft fft(u_hat.size());
    std::vector<std::complex<double>> a = u_hat;
    fft.inverse(a);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i].real();
    return out;
}

}  // namespace fedflow
