#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedflow/matrix.hpp"

namespace fedflow::pod {

struct EighResult {
    std::vector<double> eigenvalues;  // nonincreasing
    Matrix eigenvectors;              // orthonormal columns, matching order
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Rotations zero one
// off-diagonal pair at a time; each sweep visits every pair once. Converges
// unconditionally for symmetric input, which is all POD ever feeds it.
inline EighResult jacobi_eigh(const Matrix& a_in) {
    if (a_in.rows != a_in.cols) throw std::invalid_argument("jacobi_eigh: matrix not square");
    const std::size_t n = a_in.rows;
    double max_abs = 0.0;
    for (double v : a_in.data) max_abs = std::max(max_abs, std::abs(v));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a_in(i, j) - a_in(j, i)) > 1e-10 * std::max(1.0, max_abs))
                throw std::invalid_argument("jacobi_eigh: matrix not symmetric");

    Matrix a = a_in;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double fro2 = 0.0;
    for (double x : a.data) fro2 += x * x;
    const double off_tol = 1e-30 * fro2 + 1e-300;

    const int max_sweeps = 100;
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off2 = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off2 += 2.0 * a(p, q) * a(p, q);
        if (off2 <= off_tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    if (r != p && r != q) {
                        const double arp = a(r, p);
                        const double arq = a(r, q);
                        a(r, p) = arp - s * (arq + tau * arp);
                        a(r, q) = arq + s * (arp - tau * arq);
                        a(p, r) = a(r, p);
                        a(q, r) = a(r, q);
                    }
                    const double vrp = v(r, p);
                    const double vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    if (sweep == max_sweeps)
        throw std::runtime_error("jacobi_eigh: no convergence within sweep cap");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    EighResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        res.eigenvalues[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) res.eigenvectors(r, c) = v(r, order[c]);
    }
    return res;
}

// POD basis from the eigendecomposition of the N x N snapshot covariance
// C = (1/M) X^T X of mean-centered snapshots X. The covariance route costs
// O(M N^2 + N^3), far below an SVD of the full M x N snapshot matrix, and
// spans the same subspace.
struct PODBasis {
    std::vector<double> mean_field;   // length N
    Matrix modes;                     // N x N, orthonormal columns
    std::vector<double> eigenvalues;  // nonincreasing, clamped at 0
};

inline PODBasis compute_pod(const Matrix& snapshots) {
    if (snapshots.rows < 2) throw std::invalid_argument("compute_pod: need at least 2 snapshots");
    const std::size_t m = snapshots.rows;
    const std::size_t n = snapshots.cols;
    PODBasis basis;
    basis.mean_field.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) basis.mean_field[j] += snapshots(i, j);
    for (double& x : basis.mean_field) x /= static_cast<double>(m);

    Matrix centered = snapshots;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) centered(i, j) -= basis.mean_field[j];

    Matrix cov = matmul_at_b(centered, centered);
    for (double& x : cov.data) x /= static_cast<double>(m);

    EighResult eig = jacobi_eigh(cov);
    for (double& lambda : eig.eigenvalues)
        if (lambda < 0.0) lambda = 0.0;  // round-off negatives
    basis.modes = std::move(eig.eigenvectors);
    basis.eigenvalues = std::move(eig.eigenvalues);
    return basis;
}

// Latent coefficients of X in the leading R modes: (X - mean) V_R.
inline Matrix project(const PODBasis& basis, const Matrix& x, std::size_t r) {
    const std::size_t n = basis.mean_field.size();
    if (r < 1 || r > n) throw std::invalid_argument("project: R out of range");
    if (x.cols != n) throw std::invalid_argument("project: column count mismatch");
    Matrix coeffs(x.rows, r);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t c = 0; c < r; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += (x(i, j) - basis.mean_field[j]) * basis.modes(j, c);
            coeffs(i, c) = s;
        }
    }
    return coeffs;
}

inline Matrix reconstruct(const PODBasis& basis, const Matrix& coeffs, std::size_t r) {
    const std::size_t n = basis.mean_field.size();
    if (r < 1 || r > n) throw std::invalid_argument("reconstruct: R out of range");
    if (coeffs.cols != r) throw std::invalid_argument("reconstruct: coefficient width != R");
    Matrix x(coeffs.rows, n);
    for (std::size_t i = 0; i < coeffs.rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = basis.mean_field[j];
            for (std::size_t c = 0; c < r; ++c) s += coeffs(i, c) * basis.modes(j, c);
            x(i, j) = s;
        }
    }
    return x;
}

// Per-entry reconstruction MSE of X through the leading R modes.
inline double reconstruction_mse(const PODBasis& basis, const Matrix& x, std::size_t r) {
    return mean_squared_error(reconstruct(basis, project(basis, x, r), r), x);
}

}  // namespace fedflow::pod
