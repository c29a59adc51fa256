#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fedflow/common.hpp"
#include "fedflow/fft.hpp"
#include "fedflow/matrix.hpp"

namespace fedflow::ks {

using cd = std::complex<double>;

inline constexpr double two_pi = 6.283185307179586476925286766559;

//==============================================================================
// Pseudo-spectral Kuramoto-Sivashinsky integrator on the periodic domain
// [0, L]:
//     u_t = -u_xxxx - u_xx - u u_x
// The linear operator is diagonal in Fourier space with symbol k^2 - k^4 and
// is treated exactly; the nonlinearity -u u_x is evaluated in physical space
// and advanced with the ETDRK4 stage scheme. The phi-function combinations of
// the scheme are evaluated as contour-integral means, which avoids the
// catastrophic cancellation of the direct formulas near k^2 - k^4 = 0.
//==============================================================================

struct KSParams {
    double domain_length = 22.0;   // L
    std::size_t grid_size = 64;    // N, power of two
    double dt = 2.5e-3;            // integrator step
    double transient_start = -250.0;
    double sample_interval = 0.25; // must be an integer multiple of dt
    int contour_points = 32;       // M, points on the coefficient contour
    std::uint64_t seed = 0;
    bool dealias = false;          // 2/3-rule truncation before squaring

    void validate() const {
        if (grid_size == 0 || (grid_size & (grid_size - 1)) != 0)
            throw std::invalid_argument("KSParams: grid_size must be a power of two");
        if (domain_length <= 0.0) throw std::invalid_argument("KSParams: domain_length must be positive");
        if (dt <= 0.0) throw std::invalid_argument("KSParams: dt must be positive");
        if (contour_points < 16)
            throw std::invalid_argument("KSParams: contour_points must be at least 16");
        const double ratio = sample_interval / dt;
        if (sample_interval <= 0.0 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw std::invalid_argument("KSParams: sample_interval must be an integer multiple of dt");
    }

    std::int64_t steps_per_sample() const {
        return static_cast<std::int64_t>(std::llround(sample_interval / dt));
    }
};

struct SpectralState {
    std::vector<cd> u_hat;  // conjugate-symmetric Fourier coefficients
    double t = 0.0;
};

// Per-mode scheme coefficients. All are real for the real KS symbol; the
// imaginary residue of the contour means is discarded.
struct ETDRK4Coeffs {
    double h = 0.0;
    std::vector<double> E;   // exp(h*lambda)
    std::vector<double> E2;  // exp(h*lambda/2)
    std::vector<double> Q;
    std::vector<double> f1;
    std::vector<double> f2;
    std::vector<double> f3;
};

struct Trajectory {
    Matrix snapshots;           // one sampled field per row
    std::vector<double> times;  // matching sample times, uniformly spaced
    KSParams params;
};

// DFT wavenumber grid: entry j is 2*pi*j~/L with j~ = j for j <= N/2 and
// j~ = j - N above. The Nyquist entry is returned verbatim; derivative
// operators must zero it (odd derivatives of the Nyquist mode are not
// representable on a real grid).
inline std::vector<double> wavenumbers(std::size_t n, double domain_length) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("wavenumbers: N must be a power of two");
    if (domain_length <= 0.0) throw std::invalid_argument("wavenumbers: L must be positive");
    std::vector<double> k(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double m = (j <= n / 2) ? static_cast<double>(j)
                                      : static_cast<double>(j) - static_cast<double>(n);
        k[j] = two_pi * m / domain_length;
    }
    return k;
}

// Linear dispersion of the KS equation: k^2 - k^4. Positive (unstable) for
// 0 < |k| < 1, zero at k in {0, +-1}, negative otherwise.
inline double linear_symbol(double k) {
    const double kk = k * k;
    return kk - kk * kk;
}

// ETDRK4 coefficients for one step size h. Q and f1..f3 are means of the
// phi-combinations over `contour_points` points equispaced on the unit
// circle centered at h*lambda; points sit at half-step angles so none falls
// on the real axis where z could vanish.
inline ETDRK4Coeffs etdrk4_coefficients(const std::vector<double>& symbols, double h,
                                        int contour_points) {
    if (h <= 0.0) throw std::invalid_argument("etdrk4_coefficients: h must be positive");
    if (contour_points < 16)
        throw std::invalid_argument("etdrk4_coefficients: need at least 16 contour points");
    const std::size_t n = symbols.size();
    ETDRK4Coeffs c;
    c.h = h;
    c.E.resize(n);
    c.E2.resize(n);
    c.Q.resize(n);
    c.f1.resize(n);
    c.f2.resize(n);
    c.f3.resize(n);

    std::vector<cd> ring(static_cast<std::size_t>(contour_points));
    for (int j = 0; j < contour_points; ++j) {
        const double theta = two_pi * (static_cast<double>(j) + 0.5) / contour_points;
        ring[static_cast<std::size_t>(j)] = cd(std::cos(theta), std::sin(theta));
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double hl = h * symbols[i];
        c.E[i] = std::exp(hl);
        c.E2[i] = std::exp(0.5 * hl);
        cd q(0.0), g1(0.0), g2(0.0), g3(0.0);
        for (const cd& r : ring) {
            const cd z = hl + r;
            const cd ez = std::exp(z);
            const cd z2 = z * z;
            const cd z3 = z2 * z;
            q += (std::exp(0.5 * z) - 1.0) / z;
            g1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
            g2 += (2.0 + z + ez * (-2.0 + z)) / z3;
            g3 += (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
        }
        const double scale = h / static_cast<double>(contour_points);
        c.Q[i] = scale * q.real();
        c.f1[i] = scale * g1.real();
        c.f2[i] = scale * g2.real();
        c.f3[i] = scale * g3.real();
    }
    return c;
}

namespace detail {

// Restore exact conjugate symmetry after transforming a real field; keeps
// the spectral state real-representable over arbitrarily long runs.
inline void symmetrize(std::vector<cd>& a) {
    const std::size_t n = a.size();
    a[0] = cd(a[0].real(), 0.0);
    if (n % 2 == 0) a[n / 2] = cd(a[n / 2].real(), 0.0);
    for (std::size_t j = 1; j < n - j; ++j) {
        const cd m = 0.5 * (a[j] + std::conj(a[n - j]));
        a[j] = m;
        a[n - j] = std::conj(m);
    }
}

}  // namespace detail

// Fourier coefficients of -u u_x for the field with coefficients u_hat,
// evaluated pseudo-spectrally as -0.5 i k F[(F^-1 u_hat)^2]. The Nyquist
// entry of the derivative is zeroed; with `dealias`, coefficients above
// |mode| = N/3 are dropped before squaring (2/3 rule).
inline std::vector<cd> nonlinear_term(const std::vector<cd>& u_hat,
                                      const std::vector<double>& k, const Fft& fft,
                                      bool dealias = false) {
    const std::size_t n = u_hat.size();
    std::vector<cd> work = u_hat;
    if (dealias) {
        const std::size_t cutoff = n / 3;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t m = (j <= n / 2) ? j : n - j;
            if (m > cutoff) work[j] = cd(0.0);
        }
    }
    fft.inverse(work);
    for (auto& w : work) {
        const double u = w.real();
        w = cd(u * u, 0.0);
    }
    fft.forward(work);
    detail::symmetrize(work);
    std::vector<cd> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double g = (j == n / 2) ? 0.0 : -0.5 * k[j];
        // i * g * work[j]
        out[j] = cd(-g * work[j].imag(), g * work[j].real());
    }
    return out;
}

class Solver {
public:
    explicit Solver(const KSParams& params)
        : params_(params), fft_(params.grid_size),
          k_(wavenumbers(params.grid_size, params.domain_length)) {
        params_.validate();
        std::vector<double> symbols(params_.grid_size);
        for (std::size_t j = 0; j < params_.grid_size; ++j) symbols[j] = linear_symbol(k_[j]);
        coeffs_ = etdrk4_coefficients(symbols, params_.dt, params_.contour_points);
        nv_.resize(params_.grid_size);
        na_.resize(params_.grid_size);
        nb_.resize(params_.grid_size);
        nc_.resize(params_.grid_size);
        a_.resize(params_.grid_size);
        b_.resize(params_.grid_size);
        c_.resize(params_.grid_size);
        scratch_.resize(params_.grid_size);
    }

    const KSParams& params() const { return params_; }
    const std::vector<double>& wavenumber_grid() const { return k_; }
    const ETDRK4Coeffs& coefficients() const { return coeffs_; }

    // Diagnostics switch: with the nonlinearity off, each mode evolves as
    // exp(lambda t) exactly, which the order and exactness tests rely on.
    void set_nonlinear_enabled(bool enabled) { nonlinear_enabled_ = enabled; }

    SpectralState make_state(const std::vector<double>& u0, double t0) const {
        if (u0.size() != params_.grid_size)
            throw std::invalid_argument("Solver: initial field has wrong length");
        SpectralState s;
        s.u_hat.assign(u0.begin(), u0.end());
        fft_.forward(s.u_hat);
        detail::symmetrize(s.u_hat);
        s.t = t0;
        return s;
    }

    // Physical field of a state. Sampled snapshots must be real to rounding;
    // residual imaginary leakage beyond 1e-10 indicates a corrupted state.
    std::vector<double> field(const SpectralState& s) const {
        std::vector<cd> a = s.u_hat;
        fft_.inverse(a);
        std::vector<double> u(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (std::abs(a[i].imag()) > 1e-10)
                throw std::runtime_error("Solver: imaginary leakage in sampled field");
            u[i] = a[i].real();
        }
        return u;
    }

    // One ETDRK4 step:
    //   a  = E2 v + Q N(v)
    //   b  = E2 v + Q N(a)
    //   c  = E2 a + Q (2 N(b) - N(v))
    //   v+ = E v + f1 N(v) + 2 f2 (N(a) + N(b)) + f3 N(c)
    void step(SpectralState& s) {
        const std::size_t n = params_.grid_size;
        std::vector<cd>& v = s.u_hat;
        apply_nonlinear(v, nv_);
        for (std::size_t j = 0; j < n; ++j) a_[j] = coeffs_.E2[j] * v[j] + coeffs_.Q[j] * nv_[j];
        apply_nonlinear(a_, na_);
        for (std::size_t j = 0; j < n; ++j) b_[j] = coeffs_.E2[j] * v[j] + coeffs_.Q[j] * na_[j];
        apply_nonlinear(b_, nb_);
        for (std::size_t j = 0; j < n; ++j)
            c_[j] = coeffs_.E2[j] * a_[j] + coeffs_.Q[j] * (2.0 * nb_[j] - nv_[j]);
        apply_nonlinear(c_, nc_);
        for (std::size_t j = 0; j < n; ++j) {
            v[j] = coeffs_.E[j] * v[j] + coeffs_.f1[j] * nv_[j] +
                   2.0 * coeffs_.f2[j] * (na_[j] + nb_[j]) + coeffs_.f3[j] * nc_[j];
        }
        s.t += params_.dt;
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(v[j].real()) || !std::isfinite(v[j].imag()))
                throw blowup_error(s.t);
        }
    }

    // Integrate from u0 at t_begin to t_end, recording the physical field
    // every sample_interval. The first sample lands at t_begin +
    // sample_interval and the last at t_end.
    Trajectory simulate(const std::vector<double>& u0, double t_begin, double t_end) {
        const double span = t_end - t_begin;
        if (span <= 0.0) throw std::invalid_argument("simulate: t_end must exceed t_begin");
        const double steps_f = span / params_.dt;
        if (std::abs(steps_f - std::round(steps_f)) > 1e-6)
            throw std::invalid_argument("simulate: (t_end - t_begin) must be a multiple of dt");
        const double samples_f = span / params_.sample_interval;
        if (std::abs(samples_f - std::round(samples_f)) > 1e-9 * samples_f)
            throw std::invalid_argument(
                "simulate: (t_end - t_begin) must be a multiple of sample_interval");
        const std::int64_t n_samples = std::llround(samples_f);
        const std::int64_t per_sample = params_.steps_per_sample();

        SpectralState state = make_state(u0, t_begin);
        Trajectory traj;
        traj.params = params_;
        traj.snapshots = Matrix(static_cast<std::size_t>(n_samples), params_.grid_size);
        traj.times.resize(static_cast<std::size_t>(n_samples));
        std::int64_t done = 0;
        for (std::int64_t s = 1; s <= n_samples; ++s) {
            for (std::int64_t q = 0; q < per_sample; ++q) {
                step(state);
                ++done;
                state.t = t_begin + static_cast<double>(done) * params_.dt;  // no drift
            }
            const std::vector<double> u = field(state);
            const auto row = static_cast<std::size_t>(s - 1);
            for (std::size_t j = 0; j < u.size(); ++j) traj.snapshots(row, j) = u[j];
            traj.times[row] = t_begin + static_cast<double>(s) * params_.sample_interval;
        }
        return traj;
    }

    // Seeded zero-mean field: random complex amplitudes on modes 1..4,
    // rescaled to RMS 0.1. The 250-unit transient erases the details, so
    // only determinism and scale matter here.
    std::vector<double> random_initial_condition() const {
        const std::size_t n = params_.grid_size;
        Rng rng(splitmix64(params_.seed));
        std::vector<cd> spec(n, cd(0.0));
        for (std::size_t m = 1; m <= 4 && m < n - m; ++m) {
            const cd amp(rng.next_symmetric(), rng.next_symmetric());
            spec[m] = 0.5 * static_cast<double>(n) * amp;
            spec[n - m] = std::conj(spec[m]);
        }
        fft_.inverse(spec);
        std::vector<double> u(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = spec[i].real();
            sq += u[i] * u[i];
        }
        const double rms = std::sqrt(sq / static_cast<double>(n));
        if (rms < 1e-12) throw std::runtime_error("random_initial_condition: degenerate draw");
        const double scale = 0.1 / rms;
        for (auto& x : u) x *= scale;
        return u;
    }

private:
    void apply_nonlinear(const std::vector<cd>& in, std::vector<cd>& out) {
        const std::size_t n = params_.grid_size;
        if (!nonlinear_enabled_) {
            out.assign(n, cd(0.0));
            return;
        }
        scratch_ = in;
        if (params_.dealias) {
            const std::size_t cutoff = n / 3;
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t m = (j <= n / 2) ? j : n - j;
                if (m > cutoff) scratch_[j] = cd(0.0);
            }
        }
        fft_.inverse(scratch_);
        for (auto& w : scratch_) {
            const double u = w.real();
            w = cd(u * u, 0.0);
        }
        fft_.forward(scratch_);
        detail::symmetrize(scratch_);
        for (std::size_t j = 0; j < n; ++j) {
            const double g = (j == n / 2) ? 0.0 : -0.5 * k_[j];
            out[j] = cd(-g * scratch_[j].imag(), g * scratch_[j].real());
        }
    }

    KSParams params_;
    Fft fft_;
    std::vector<double> k_;
    ETDRK4Coeffs coeffs_;
    bool nonlinear_enabled_ = true;
    // stage buffers, reused across steps
    std::vector<cd> nv_, na_, nb_, nc_, a_, b_, c_, scratch_;
};

}  // namespace fedflow::ks
