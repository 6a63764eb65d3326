#pragma once

// Periodic chain of M spin-1/2 sites with nearest-neighbour and diametric
// flip-flop couplings plus an all-to-all zz term.
//
// Sites are 0-based. Basis state b has bit m set when site m is up
// (sigma^z = +1); sigma^+ raises a site. T shifts site m to m+1, I maps site m
// to M-1-m, so U_m = T^(2m+1-M) I leaves site m fixed.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ringsim/error.hpp"
#include "ringsim/parallel.hpp"

namespace ringsim::spin {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t kDenseCap = 16384;

struct SpinChainParams {
    int M = 6;
    double t = 1.0;
    double lambda = 0.0;
    double zeta = 0.0;

    std::size_t dim() const { return std::size_t(1) << M; }

    void validate() const {
        if (M < 4 || M % 2 != 0) throw ParameterError("SpinChainParams: M must be even and >= 4, got " + std::to_string(M));
        if (M > 14 || dim() > kDenseCap) throw ParameterError("SpinChainParams: 2^M exceeds dense cap");
        if (!std::isfinite(t) || !std::isfinite(lambda) || !std::isfinite(zeta))
            throw ParameterError("SpinChainParams: couplings must be finite");
    }
};

struct SpinOperator {
    std::string label;
    Matrix matrix;
};

enum class Pauli { X, Y, Z, Plus, Minus };

inline int site_bit(std::size_t b, int m) { return int((b >> m) & 1u); }

// sigma^w on site m of an M-site chain.
inline SpinOperator pauli(int M, int m, Pauli w) {
    const std::size_t n = std::size_t(1) << M;
    Matrix a = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    const std::size_t mask = std::size_t(1) << m;
    for (std::size_t b = 0; b < n; ++b) {
        const bool up = b & mask;
        const auto col = Eigen::Index(b), flip = Eigen::Index(b ^ mask);
        switch (w) {
            case Pauli::X: a(flip, col) = 1.0; break;
            case Pauli::Y: a(flip, col) = up ? cplx(0, 1) : cplx(0, -1); break;
            case Pauli::Z: a(col, col) = up ? 1.0 : -1.0; break;
            case Pauli::Plus: if (!up) a(flip, col) = 1.0; break;
            case Pauli::Minus: if (up) a(flip, col) = 1.0; break;
        }
    }
    static constexpr const char* names[] = {"x", "y", "z", "+", "-"};
    return {std::string("sigma") + names[int(w)] + "_" + std::to_string(m), std::move(a)};
}

inline std::size_t translate_state(std::size_t b, int M, int shift = 1) {
    shift = ((shift % M) + M) % M;
    const std::size_t full = (std::size_t(1) << M) - 1;
    return ((b << shift) | (b >> (M - shift))) & full;
}

inline std::size_t invert_state(std::size_t b, int M) {
    std::size_t r = 0;
    for (int m = 0; m < M; ++m)
        if (b & (std::size_t(1) << m)) r |= std::size_t(1) << (M - 1 - m);
    return r;
}

inline Matrix permutation_matrix(int M, auto&& image) {
    const std::size_t n = std::size_t(1) << M;
    Matrix p = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t b = 0; b < n; ++b) p(Eigen::Index(image(b)), Eigen::Index(b)) = 1.0;
    return p;
}

struct SymmetryOperators {
    int M = 0;
    SpinOperator N, T, I;
};

inline SymmetryOperators build_symmetry_operators(int M) {
    SpinChainParams{M}.validate();
    const std::size_t n = std::size_t(1) << M;
    SymmetryOperators ops;
    ops.M = M;
    Matrix num = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t b = 0; b < n; ++b) num(Eigen::Index(b), Eigen::Index(b)) = double(std::popcount(b));
    ops.N = {"N", std::move(num)};
    ops.T = {"T", permutation_matrix(M, [M](std::size_t b) { return translate_state(b, M); })};
    ops.I = {"I", permutation_matrix(M, [M](std::size_t b) { return invert_state(b, M); })};
    return ops;
}

// U_m = T^(2m+1-M) I
inline SpinOperator site_stabilizer(int M, int m) {
    const int k = 2 * m + 1 - M;
    return {"U_" + std::to_string(m), permutation_matrix(M, [M, k](std::size_t b) {
                return translate_state(invert_state(b, M), M, k);
            })};
}

inline SpinOperator build_spin_hamiltonian(const SpinChainParams& p) {
    p.validate();
    const int M = p.M;
    const std::size_t n = p.dim();
    Matrix h = Matrix::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t b = 0; b < n; ++b) {
        // (zeta/4) sum_{m,n} s_m s_n = (zeta/4) (sum_m s_m)^2
        const double sz = 2.0 * std::popcount(b) - M;
        h(Eigen::Index(b), Eigen::Index(b)) += 0.25 * p.zeta * sz * sz;
        auto flip_flop = [&](int m, int r, double amp) {
            const int a = m, c = (m + r) % M;
            if (site_bit(b, a) != site_bit(b, c)) {
                const std::size_t f = b ^ (std::size_t(1) << a) ^ (std::size_t(1) << c);
                h(Eigen::Index(f), Eigen::Index(b)) += amp;
            }
        };
        // (s+_m s-_{m+r} + s-_m s+_{m+r}) exchanges antiparallel spins on (m, m+r)
        for (int m = 0; m < M; ++m) {
            flip_flop(m, 1, 0.5 * p.t);
            flip_flop(m, M / 2, 0.5 * p.lambda);
        }
    }
    return {"H", std::move(h)};
}

struct QubitDoublet {
    double E0 = 0, E1 = 0;
    Vector state0, state1;
    double gap() const { return E1 - E0; }
    double third = 0;  // E2 when available
    bool degenerate = false;
};

namespace detail {

// Groups of indices whose values agree within rel_tol * max(1, |value|).
inline std::vector<std::vector<Eigen::Index>> value_clusters(const Eigen::VectorXd& v, double rel_tol) {
    std::vector<std::vector<Eigen::Index>> out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double scale = std::max({1.0, std::abs(v[i]), out.empty() ? 0.0 : std::abs(v[out.back().back()])});
        if (!out.empty() && std::abs(v[i] - v[out.back().back()]) <= rel_tol * scale)
            out.back().push_back(i);
        else
            out.push_back({i});
    }
    return out;
}

}  // namespace detail

// Lowest two eigenpairs. Degenerate clusters touching the doublet are rotated
// to diagonalize N + c*I so the returned states carry definite N and I labels.
inline QubitDoublet ground_doublet(const SpinOperator& h, const SymmetryOperators* ops = nullptr,
                                   double degeneracy_tol = 1e-8) {
    if (std::size_t(h.matrix.rows()) > kDenseCap) throw CapacityError("ground_doublet: dimension above dense cap");
    if (h.matrix.rows() < 2) throw ParameterError("ground_doublet: need at least two states");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix);
    Eigen::VectorXd vals = es.eigenvalues();
    Matrix vecs = es.eigenvectors();
    const auto groups = detail::value_clusters(vals, degeneracy_tol);

    QubitDoublet d;
    for (const auto& g : groups) {
        if (g.front() > 1) break;
        if (g.size() < 2) continue;
        d.degenerate = true;
        if (!ops) continue;
        const Eigen::Index b = g.front(), k = Eigen::Index(g.size());
        Matrix basis = vecs.middleCols(b, k);
        // irrational weight keeps joint (N, I) labels distinct
        Matrix probe = ops->N.matrix + 0.31830988618379067 * ops->I.matrix;
        Matrix restricted = basis.adjoint() * probe * basis;
        Eigen::SelfAdjointEigenSolver<Matrix> rot(0.5 * (restricted + restricted.adjoint()));
        vecs.middleCols(b, k) = basis * rot.eigenvectors();
    }
    d.E0 = vals[0];
    d.E1 = vals[1];
    d.third = vals.size() > 2 ? vals[2] : vals[1];
    d.state0 = vecs.col(0);
    d.state1 = vecs.col(1);
    return d;
}

struct SymmetryLabel {
    cplx value = 0;     // <psi|O|psi>
    double residual = 0; // ||O psi - value psi||
};

inline SymmetryLabel symmetry_label(const Matrix& op, const Vector& psi) {
    Vector o = op * psi;
    const cplx v = psi.dot(o);
    return {v, (o - v * psi).norm()};
}

struct ProtectionMetrics {
    double R = 0, D = 0;
    double n0 = 0, n1 = 0;
    cplx tau0 = 0, tau1 = 0;
    double iota0 = 0, iota1 = 0;
    bool flag_T = false;  // both states T-invariant (eigenvalue 1)
    bool flag_I = false;  // opposite I eigenvalues
    bool flag_N = false;  // equal N eigenvalue
    bool all() const { return flag_T && flag_I && flag_N; }
};

inline ProtectionMetrics classify_symmetries(const QubitDoublet& d, const SymmetryOperators& ops, double tol = 1e-8) {
    ProtectionMetrics pm;
    const auto n0 = symmetry_label(ops.N.matrix, d.state0), n1 = symmetry_label(ops.N.matrix, d.state1);
    const auto t0 = symmetry_label(ops.T.matrix, d.state0), t1 = symmetry_label(ops.T.matrix, d.state1);
    const auto i0 = symmetry_label(ops.I.matrix, d.state0), i1 = symmetry_label(ops.I.matrix, d.state1);
    pm.n0 = n0.value.real();
    pm.n1 = n1.value.real();
    pm.tau0 = t0.value;
    pm.tau1 = t1.value;
    pm.iota0 = i0.value.real();
    pm.iota1 = i1.value.real();
    pm.flag_N = n0.residual < tol && n1.residual < tol && std::abs(pm.n0 - pm.n1) < tol;
    pm.flag_T = t0.residual < tol && t1.residual < tol && std::abs(t0.value - 1.0) < tol && std::abs(t1.value - 1.0) < tol;
    pm.flag_I = i0.residual < tol && i1.residual < tol && std::abs(std::abs(pm.iota0) - 1.0) < tol &&
                std::abs(pm.iota0 + pm.iota1) < tol;
    return pm;
}

// R and D at every site, maximum reported.
inline void sensitivity_metrics(const QubitDoublet& d, int M, ProtectionMetrics& pm) {
    pm.R = 0;
    pm.D = 0;
    for (int m = 0; m < M; ++m) {
        double r2 = 0, d2 = 0;
        for (Pauli w : {Pauli::X, Pauli::Y, Pauli::Z}) {
            const Matrix s = pauli(M, m, w).matrix;
            r2 += std::norm(d.state1.dot(s * d.state0));
            d2 += std::norm(d.state1.dot(s * d.state1) - d.state0.dot(s * d.state0));
        }
        pm.R = std::max(pm.R, std::sqrt(r2));
        pm.D = std::max(pm.D, std::sqrt(d2));
    }
}

inline ProtectionMetrics sensitivity_metrics(const QubitDoublet& d, int M) {
    ProtectionMetrics pm;
    sensitivity_metrics(d, M, pm);
    return pm;
}

struct ProtectionRow {
    double zeta = 0, lambda = 0;
    double gap = 0;
    ProtectionMetrics metrics;
};

inline ProtectionRow evaluate_point(const SpinChainParams& p, const SymmetryOperators& ops) {
    const auto d = ground_doublet(build_spin_hamiltonian(p), &ops);
    ProtectionRow row{p.zeta, p.lambda, d.gap(), classify_symmetries(d, ops)};
    sensitivity_metrics(d, p.M, row.metrics);
    return row;
}

// Row-major over (zeta, lambda): zeta outer, lambda inner.
inline std::vector<ProtectionRow> sweep_protection_map(const SpinChainParams& p0, const std::vector<double>& zeta_grid,
                                                       const std::vector<double>& lambda_grid) {
    p0.validate();
    for (double z : zeta_grid)
        if (!std::isfinite(z)) throw ParameterError("sweep_protection_map: non-finite zeta");
    for (double l : lambda_grid)
        if (!std::isfinite(l)) throw ParameterError("sweep_protection_map: non-finite lambda");
    const auto ops = build_symmetry_operators(p0.M);
    std::vector<ProtectionRow> rows(zeta_grid.size() * lambda_grid.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        SpinChainParams p = p0;
        p.zeta = zeta_grid[i / lambda_grid.size()];
        p.lambda = lambda_grid[i % lambda_grid.size()];
        rows[i] = evaluate_point(p, ops);
    });
    return rows;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
    return v;
}

}  // namespace ringsim::spin
