#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "fedflow/fft.hpp"
#include "fedflow/kssolver.hpp"

using namespace fedflow;
using namespace fedflow::ks;

namespace {

KSParams desk_params() {
    KSParams p;
    p.domain_length = 22.0;
    p.grid_size = 64;
    p.dt = 2.5e-3;
    p.sample_interval = 0.25;
    p.contour_points = 32;
    p.seed = 42;
    return p;
}

double rms(const std::vector<double>& u) {
    double s = 0.0;
    for (double x : u) s += x * x;
    return std::sqrt(s / static_cast<double>(u.size()));
}

// direct phi-combination formulas in extended precision, valid away from z = 0
struct PhiOracle {
    double Q, f1, f2, f3;
};

PhiOracle phi_direct(long double lambda, long double h) {
    const long double z = h * lambda;
    const long double ez = std::exp(z);
    const long double z2 = z * z;
    const long double z3 = z2 * z;
    PhiOracle o;
    o.Q = static_cast<double>(h * (std::exp(z / 2.0L) - 1.0L) / z);
    o.f1 = static_cast<double>(h * (-4.0L - z + ez * (4.0L - 3.0L * z + z2)) / z3);
    o.f2 = static_cast<double>(h * (2.0L + z + ez * (-2.0L + z)) / z3);
    o.f3 = static_cast<double>(h * (-4.0L - 3.0L * z - z2 + ez * (4.0L - z)) / z3);
    return o;
}

}  // namespace

TEST_CASE("wavenumbers follow the DFT ordering") {
    const double two_pi = 6.283185307179586;
    const auto k4 = wavenumbers(4, two_pi);
    CHECK(k4[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(k4[1] == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(k4[2] == Catch::Approx(2.0).epsilon(1e-14));
    CHECK(k4[3] == Catch::Approx(-1.0).epsilon(1e-14));

    const auto k64 = wavenumbers(64, 22.0);
    CHECK(k64[0] == 0.0);
    CHECK(k64[1] == Catch::Approx(0.285599).epsilon(5e-6));  // 2*pi/22
    CHECK(k64[1] == Catch::Approx(two_pi / 22.0).epsilon(1e-15));
    CHECK(k64[63] == Catch::Approx(-k64[1]).epsilon(1e-15));

    CHECK_THROWS_AS(wavenumbers(48, 22.0), std::invalid_argument);
    CHECK_THROWS_AS(wavenumbers(64, -1.0), std::invalid_argument);
}

TEST_CASE("linear symbol k^2 - k^4") {
    CHECK(linear_symbol(0.0) == 0.0);
    CHECK(linear_symbol(1.0) == 0.0);
    CHECK(linear_symbol(-1.0) == 0.0);
    // oracle: evaluate in extended precision at the first KS wavenumber
    const long double k = 6.283185307179586476925286766559L / 22.0L;
    const double expected = static_cast<double>(k * k - k * k * k * k);
    CHECK(linear_symbol(two_pi / 22.0) == Catch::Approx(expected).epsilon(1e-12));
    CHECK(expected == Catch::Approx(0.074914).epsilon(2e-5));
    // unstable band between 0 and 1
    CHECK(linear_symbol(0.5) > 0.0);
    CHECK(linear_symbol(2.0) < 0.0);
}

TEST_CASE("etdrk4 coefficients reach the analytic zero-symbol limit") {
    const double h = 0.1;
    const auto c = etdrk4_coefficients({0.0}, h, 32);
    CHECK(c.E[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(c.E2[0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(c.Q[0] == Catch::Approx(0.05).margin(1e-10));
    CHECK(c.f1[0] == Catch::Approx(h / 6.0).margin(1e-10));
    CHECK(c.f2[0] == Catch::Approx(h / 6.0).margin(1e-10));
    CHECK(c.f3[0] == Catch::Approx(h / 6.0).margin(1e-10));
}

TEST_CASE("etdrk4 coefficients match the direct formulas at a safe argument") {
    const double h = 0.1;
    const double lambda = -10.0;
    const auto c = etdrk4_coefficients({lambda}, h, 32);
    const PhiOracle o = phi_direct(lambda, h);
    CHECK(c.Q[0] == Catch::Approx(o.Q).margin(1e-10));
    CHECK(c.f1[0] == Catch::Approx(o.f1).margin(1e-10));
    CHECK(c.f2[0] == Catch::Approx(o.f2).margin(1e-10));
    CHECK(c.f3[0] == Catch::Approx(o.f3).margin(1e-10));
    CHECK(c.E[0] == Catch::Approx(std::exp(h * lambda)).epsilon(1e-14));
    CHECK(c.E2[0] == Catch::Approx(std::exp(0.5 * h * lambda)).epsilon(1e-14));
}

TEST_CASE("contour means are converged at 32 points") {
    std::vector<double> symbols;
    for (double k : wavenumbers(64, 22.0)) symbols.push_back(linear_symbol(k));
    const auto c32 = etdrk4_coefficients(symbols, 2.5e-3, 32);
    const auto c64 = etdrk4_coefficients(symbols, 2.5e-3, 64);
    for (std::size_t j = 0; j < symbols.size(); ++j) {
        CHECK(std::abs(c32.Q[j] - c64.Q[j]) < 1e-12);
        CHECK(std::abs(c32.f1[j] - c64.f1[j]) < 1e-12);
        CHECK(std::abs(c32.f2[j] - c64.f2[j]) < 1e-12);
        CHECK(std::abs(c32.f3[j] - c64.f3[j]) < 1e-12);
    }
    CHECK_THROWS_AS(etdrk4_coefficients(symbols, 2.5e-3, 8), std::invalid_argument);
    CHECK_THROWS_AS(etdrk4_coefficients(symbols, -1.0, 32), std::invalid_argument);
}

TEST_CASE("nonlinear term of trivial fields vanishes") {
    const std::size_t n = 64;
    const Fft fft(n);
    const auto k = wavenumbers(n, 22.0);
    std::vector<cd> zero(n, cd(0.0));
    for (const auto& v : nonlinear_term(zero, k, fft)) CHECK(std::abs(v) == 0.0);

    // constant field: only mode 0 is populated and k[0] = 0 kills it
    std::vector<cd> constant(n, cd(0.0));
    constant[0] = cd(1.7 * n, 0.0);
    for (const auto& v : nonlinear_term(constant, k, fft)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("nonlinear term reproduces the sine identity") {
    // u = sin(a x) with a = 2*pi/L gives -u u_x = -(a/2) sin(2 a x)
    const std::size_t n = 64;
    const double length = 22.0;
    const double a = two_pi / length;
    const Fft fft(n);
    const auto k = wavenumbers(n, length);
    std::vector<double> u(n), expect(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = length * static_cast<double>(j) / static_cast<double>(n);
        u[j] = std::sin(a * x);
        expect[j] = -(a / 2.0) * std::sin(2.0 * a * x);
    }
    const auto got = nonlinear_term(dft_forward(u), k, fft);
    const auto want = dft_forward(expect);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-10);
}

TEST_CASE("zero state is a fixed point of the step") {
    Solver solver(desk_params());
    SpectralState s = solver.make_state(std::vector<double>(64, 0.0), 0.0);
    solver.step(s);
    for (const auto& v : s.u_hat) CHECK(std::abs(v) == 0.0);
    CHECK(s.t == Catch::Approx(2.5e-3));
}

TEST_CASE("with the nonlinearity off each mode evolves as exp(lambda t)") {
    KSParams p = desk_params();
    p.dt = 0.01;
    Solver solver(p);
    solver.set_nonlinear_enabled(false);
    const auto k = solver.wavenumber_grid();

    std::vector<double> u(p.grid_size);
    for (std::size_t j = 0; j < p.grid_size; ++j) {
        const double x = p.domain_length * static_cast<double>(j) / p.grid_size;
        u[j] = 0.3 * std::cos(3.0 * k[1] * x) + 0.1 * std::sin(5.0 * k[1] * x);
    }
    SpectralState s = solver.make_state(u, 0.0);
    const std::vector<cd> initial = s.u_hat;
    const int steps = 400;
    for (int i = 0; i < steps; ++i) solver.step(s);
    for (std::size_t j = 0; j < p.grid_size; ++j) {
        if (std::abs(initial[j]) < 1e-14) continue;
        const long double lambda = static_cast<long double>(linear_symbol(k[j]));
        const long double growth =
            std::exp(lambda * static_cast<long double>(steps) * static_cast<long double>(p.dt));
        const cd expected = initial[j] * static_cast<double>(growth);
        CHECK(std::abs(s.u_hat[j] - expected) <= 1e-9 * std::abs(expected));
    }
}

TEST_CASE("step shows fourth-order convergence on the full equation") {
    KSParams base = desk_params();
    std::vector<double> u0(base.grid_size);
    for (std::size_t j = 0; j < base.grid_size; ++j) {
        const double x = base.domain_length * static_cast<double>(j) / base.grid_size;
        const double a = two_pi / base.domain_length;
        u0[j] = std::cos(a * x) * (1.0 + std::sin(a * x));
    }
    auto terminal = [&](double dt) {
        KSParams p = base;
        p.dt = dt;
        p.sample_interval = 1.0;
        Solver solver(p);
        const Trajectory traj = solver.simulate(u0, 0.0, 1.0);
        std::vector<double> u(p.grid_size);
        for (std::size_t j = 0; j < p.grid_size; ++j) u[j] = traj.snapshots(0, j);
        return u;
    };
    const double dt = 0.05;
    const auto coarse = terminal(dt);
    const auto fine = terminal(dt / 2.0);
    const auto reference = terminal(dt / 4.0);
    double err_coarse = 0.0, err_fine = 0.0;
    for (std::size_t j = 0; j < coarse.size(); ++j) {
        err_coarse += (coarse[j] - reference[j]) * (coarse[j] - reference[j]);
        err_fine += (fine[j] - reference[j]) * (fine[j] - reference[j]);
    }
    err_coarse = std::sqrt(err_coarse);
    err_fine = std::sqrt(err_fine);
    CHECK(err_coarse / err_fine >= 12.0);
}

TEST_CASE("random initial condition is deterministic, zero-mean, RMS 0.1") {
    Solver solver(desk_params());
    const auto u1 = solver.random_initial_condition();
    const auto u2 = solver.random_initial_condition();
    CHECK(u1 == u2);

    double mean = 0.0;
    for (double x : u1) mean += x;
    mean /= static_cast<double>(u1.size());
    CHECK(std::abs(mean) < 1e-12);
    CHECK(rms(u1) == Catch::Approx(0.1).margin(1e-9));

    KSParams other = desk_params();
    other.seed = 43;
    Solver solver2(other);
    CHECK(solver2.random_initial_condition() != u1);
}

TEST_CASE("simulate records the sampling protocol") {
    KSParams p = desk_params();
    Solver solver(p);
    const auto u0 = solver.random_initial_condition();
    const Trajectory traj = solver.simulate(u0, -5.0, 20.0);
    REQUIRE(traj.snapshots.rows == 100);  // 25 time units / 0.25
    REQUIRE(traj.times.size() == 100);
    CHECK(traj.times.front() == Catch::Approx(-5.0 + 0.25).margin(1e-12));
    CHECK(traj.times.back() == Catch::Approx(20.0).margin(1e-12));
    for (std::size_t i = 1; i < traj.times.size(); ++i)
        CHECK(traj.times[i] - traj.times[i - 1] == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("simulate is bit-deterministic for a fixed seed") {
    KSParams p = desk_params();
    auto run = [&p] {
        Solver solver(p);
        return solver.simulate(solver.random_initial_condition(), 0.0, 5.0).snapshots.data;
    };
    CHECK(run() == run());
}

TEST_CASE("on-attractor samples stay inside the reference RMS band") {
    KSParams p = desk_params();
    p.transient_start = -100.0;
    Solver solver(p);
    const auto u_init = solver.random_initial_condition();
    const Trajectory transient = solver.simulate(u_init, p.transient_start, 0.0);
    std::vector<double> u0(p.grid_size);
    for (std::size_t j = 0; j < p.grid_size; ++j)
        u0[j] = transient.snapshots(transient.snapshots.rows - 1, j);
    const Trajectory production = solver.simulate(u0, 0.0, 100.0);
    for (std::size_t i = 0; i < production.snapshots.rows; ++i) {
        std::vector<double> row(production.snapshots.row(i),
                                production.snapshots.row(i) + p.grid_size);
        const double r = rms(row);
        CHECK(r >= 0.5);
        CHECK(r <= 3.0);
    }
}

TEST_CASE("non-finite states raise a blowup error with the failing time") {
    Solver solver(desk_params());
    std::vector<double> bad(64, std::numeric_limits<double>::quiet_NaN());
    try {
        solver.simulate(bad, 0.0, 1.0);
        FAIL("expected blowup_error");
    } catch (const blowup_error& e) {
        CHECK(e.time() == Catch::Approx(2.5e-3).margin(1e-9));
    }
}

TEST_CASE("parameter validation rejects inconsistent settings") {
    KSParams p = desk_params();
    p.grid_size = 48;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = desk_params();
    p.sample_interval = 0.2501;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = desk_params();
    p.contour_points = 8;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
