#pragma once

// Six-node Josephson ring in the Cooper-pair charge basis.
//
// Nodes are numbered 0..5 here (1..6 in the usual circuit drawing). Node m is
// grounded through a radial junction (E_Jr, E_Cr), joined to node m+1 by
// azimuthal junction m (E_Ja, E_Ca), and outer junction j in {0,1,2} joins the
// diametric pair (2j+1, 2j+4) mod 6, i.e. drawing nodes (2m, 2m+3) for m = j+1.
//
// Flux bookkeeping (units of the flux quantum):
//   azimuthal junction m:  Phi_a[m] = Phi_I[m]
//   outer junction j:      Phi_l[j] = Phi_I[2j+1] + Phi_I[2j+2] + Phi_I[2j+3] + Phi_O[j]
// The outer loop of junction j closes through the azimuthal junctions between
// its two nodes, so it encloses exactly those three inner sectors.
//
// Energies are E/h in GHz throughout. Charging convention E_C = e^2/2C, so the
// charging term is sum_mn Etilde_mn (N_m - Ng_m)(N_n - Ng_n) with Etilde = 4 K^-1
// where K is the capacitance matrix in units of e^2/(2 GHz h).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/error.hpp"
#include "ringsim/parallel.hpp"
#include "ringsim/sparse_spectra.hpp"

namespace ringsim::circuit {

using spectra::cplx;
using spectra::Vector;

inline constexpr int kNodes = 6;
inline constexpr int kOuter = 3;
// Junction slots: radial 0..5, azimuthal 6..11, outer 12..14.
inline constexpr int kJunctions = 2 * kNodes + kOuter;
inline constexpr int radial_slot(int m) { return m; }
inline constexpr int azimuthal_slot(int m) { return kNodes + m; }
inline constexpr int outer_slot(int j) { return 2 * kNodes + j; }
using Matrix6 = Eigen::Matrix<double, kNodes, kNodes>;

struct CircuitParams {
    double E_Jr = 1.7;
    double E_Cr = 7.4;
    double E_Ja = 6.0;
    double E_Ca = 2.1;
    double E_Jl = 30.0;
    double E_Cl = 0.56;
    std::array<double, kNodes> Ng{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    std::array<double, kNodes> Phi_I{0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    std::array<double, kOuter> Phi_O{1.5, 1.5, 1.5};
    int d = 10;
    std::size_t max_dim = 4'000'000;
    // Per-junction multipliers on E_J and E_C (fabrication disorder); 1 means nominal.
    std::array<double, kJunctions> J_scale = unit_scales();
    std::array<double, kJunctions> C_scale = unit_scales();

    static constexpr std::array<double, kJunctions> unit_scales() {
        std::array<double, kJunctions> a{};
        for (auto& v : a) v = 1.0;
        return a;
    }

    double e_j(int slot) const {
        const double base = slot < kNodes ? E_Jr : slot < 2 * kNodes ? E_Ja : E_Jl;
        return base * J_scale[std::size_t(slot)];
    }
    double e_c(int slot) const {
        const double base = slot < kNodes ? E_Cr : slot < 2 * kNodes ? E_Ca : E_Cl;
        return base * C_scale[std::size_t(slot)];
    }

    // Design point with the operating-point fluxes and Ng = 1/2.
    static CircuitParams white_cross() { return {}; }

    std::size_t dim() const {
        std::size_t n = 1;
        for (int i = 0; i < kNodes; ++i) n *= std::size_t(d);
        return n;
    }

    void validate() const {
        const double e[] = {E_Jr, E_Cr, E_Ja, E_Ca, E_Jl, E_Cl};
        const char* names[] = {"E_Jr", "E_Cr", "E_Ja", "E_Ca", "E_Jl", "E_Cl"};
        for (int i = 0; i < 6; ++i)
            if (!(e[i] > 0.0) || !std::isfinite(e[i]))
                throw ParameterError(std::string("CircuitParams: ") + names[i] + " must be positive");
        for (int k = 0; k < kJunctions; ++k)
            if (!(e_j(k) > 0.0 && e_c(k) > 0.0) || !std::isfinite(e_j(k) * e_c(k)))
                throw ParameterError("CircuitParams: junction " + std::to_string(k) + " has a non-positive energy");
        if (d < 2) throw ParameterError("CircuitParams: d must be at least 2");
        if (d > 64 || dim() > max_dim)
            throw CapacityError("CircuitParams: dimension d^6 = " + std::to_string(dim()) +
                                " exceeds the memory budget " + std::to_string(max_dim));
    }
};

struct InverseCapacitanceMatrix {
    Matrix6 etilde;  // GHz
};

// Capacitance matrix in units where C_x = 1/E_Cx.
inline Matrix6 capacitance_matrix(const CircuitParams& p);

// Overload taking capacitances directly (C_x in units of 1/GHz); C_a or C_l may be zero.
inline InverseCapacitanceMatrix build_inverse_capacitance(const Matrix6& k) {
    Eigen::LLT<Matrix6> llt(k);
    if (llt.info() != Eigen::Success)
        throw ParameterError("build_inverse_capacitance: capacitance matrix is not positive definite");
    return {4.0 * llt.solve(Matrix6::Identity())};
}

inline InverseCapacitanceMatrix build_inverse_capacitance(const CircuitParams& p) {
    for (int k = 0; k < kJunctions; ++k)
        if (!(p.e_c(k) > 0))
            throw ParameterError("build_inverse_capacitance: charging energies must be positive");
    return build_inverse_capacitance(capacitance_matrix(p));
}

inline Matrix6 capacitance_matrix(double c_r, double c_a, double c_l) {
    Matrix6 k = Matrix6::Zero();
    for (int m = 0; m < kNodes; ++m) {
        k(m, m) = c_r + 2 * c_a + c_l;
        k(m, (m + 1) % kNodes) -= c_a;
        k(m, (m + 5) % kNodes) -= c_a;
        k(m, (m + 3) % kNodes) -= c_l;
    }
    return k;
}

struct OuterJunction {
    int a;  // node whose phase enters with a minus sign
    int b;  // node whose phase enters with a plus sign
};

// Outer junction j connects drawing nodes 2m and 2m+3 with m = j+1.
constexpr OuterJunction outer_junction(int j) { return {(2 * j + 1) % kNodes, (2 * j + 4) % kNodes}; }

// Per-junction capacitances C = 1/E_C; uniform families give the circulant pattern.
inline Matrix6 capacitance_matrix(const CircuitParams& p) {
    Matrix6 k = Matrix6::Zero();
    auto link = [&k](int a, int b, double c) {
        k(a, a) += c;
        k(b, b) += c;
        k(a, b) -= c;
        k(b, a) -= c;
    };
    for (int m = 0; m < kNodes; ++m) {
        k(m, m) += 1.0 / p.e_c(radial_slot(m));
        link(m, (m + 1) % kNodes, 1.0 / p.e_c(azimuthal_slot(m)));
    }
    for (int j = 0; j < kOuter; ++j) link(outer_junction(j).a, outer_junction(j).b, 1.0 / p.e_c(outer_slot(j)));
    return k;
}

inline double wrap_phase(double x) {
    constexpr double two_pi = 2 * std::numbers::pi;
    double r = std::fmod(x, two_pi);
    if (r < 0) r += two_pi;
    return r;
}

struct FluxOffsets {
    std::array<double, kNodes> Phi_a{};  // flux quanta
    std::array<double, kOuter> Phi_l{};
    std::array<double, kNodes> phase_a{};  // radians, in [0, 2 pi)
    std::array<double, kOuter> phase_l{};
};

inline FluxOffsets compose_flux_offsets(const std::array<double, kNodes>& phi_inner,
                                        const std::array<double, kOuter>& phi_outer) {
    FluxOffsets f;
    for (int m = 0; m < kNodes; ++m) f.Phi_a[std::size_t(m)] = phi_inner[std::size_t(m)];
    for (int j = 0; j < kOuter; ++j) {
        double s = phi_outer[std::size_t(j)];
        for (int k = 1; k <= 3; ++k) s += phi_inner[std::size_t((2 * j + k) % kNodes)];
        f.Phi_l[std::size_t(j)] = s;
    }
    constexpr double two_pi = 2 * std::numbers::pi;
    for (int m = 0; m < kNodes; ++m) f.phase_a[std::size_t(m)] = wrap_phase(two_pi * f.Phi_a[std::size_t(m)]);
    for (int j = 0; j < kOuter; ++j) f.phase_l[std::size_t(j)] = wrap_phase(two_pi * f.Phi_l[std::size_t(j)]);
    return f;
}

// Per-node window of d consecutive Cooper-pair numbers starting at
// floor(Ng) - d/2 + 1 (even d) or floor(Ng) - (d-1)/2 (odd d). Ng = 1/2 gives
// -d/2+1 .. d/2 for even d; odd d carries the extra state on the low side. The
// window only moves when Ng crosses an integer, so small offsets around a
// half-integer never change the basis.
class ChargeBasis {
public:
    ChargeBasis(int d, const std::array<double, kNodes>& ng) : d_(d) {
        for (int m = 0; m < kNodes; ++m) {
            const double g = ng[std::size_t(m)];
            lo_[std::size_t(m)] = (d % 2 == 0) ? int(std::floor(g)) - d / 2 + 1 : int(std::floor(g)) - (d - 1) / 2;
        }
        std::size_t s = 1;
        for (int m = 0; m < kNodes; ++m) {
            stride_[std::size_t(m)] = s;
            s *= std::size_t(d);
        }
        dim_ = s;
    }

    int d() const { return d_; }
    std::size_t dim() const { return dim_; }
    std::size_t stride(int m) const { return stride_[std::size_t(m)]; }
    int lowest_charge(int m) const { return lo_[std::size_t(m)]; }
    // local index of node m in basis state i
    int digit(std::size_t i, int m) const { return int((i / stride_[std::size_t(m)]) % std::size_t(d_)); }
    int charge(std::size_t i, int m) const { return lo_[std::size_t(m)] + digit(i, m); }

private:
    int d_;
    std::size_t dim_ = 0;
    std::array<int, kNodes> lo_{};
    std::array<std::size_t, kNodes> stride_{};
};

// Correlated hop amp * S+_raise S-_lower + h.c.
struct PairHop {
    int raise;
    int lower;
    cplx amp;
};

// Matrix-free Hermitian operator for the circuit Hamiltonian. Immutable after
// construction; apply() is safe to call concurrently.
class CircuitHamiltonian {
public:
    explicit CircuitHamiltonian(const CircuitParams& p) : params_(p), basis_(p.d, p.Ng) {
        p.validate();
        etilde_ = build_inverse_capacitance(p).etilde;
        flux_ = compose_flux_offsets(p.Phi_I, p.Phi_O);
        for (int m = 0; m < kNodes; ++m) radial_[std::size_t(m)] = -0.5 * p.e_j(radial_slot(m));
        for (int m = 0; m < kNodes; ++m)
            hops_.push_back({m, (m + 1) % kNodes,
                             -0.5 * p.e_j(azimuthal_slot(m)) * std::polar(1.0, flux_.phase_a[std::size_t(m)])});
        for (int j = 0; j < kOuter; ++j) {
            const auto oj = outer_junction(j);
            hops_.push_back({oj.a, oj.b, -0.5 * p.e_j(outer_slot(j)) * std::polar(1.0, flux_.phase_l[std::size_t(j)])});
        }
        diag_.resize(basis_.dim());
        parallel_chunks(basis_.dim(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                Eigen::Matrix<double, kNodes, 1> q;
                for (int m = 0; m < kNodes; ++m) q[m] = basis_.charge(i, m) - p.Ng[std::size_t(m)];
                diag_[i] = q.dot(etilde_ * q);
            }
        });
    }

    std::size_t dim() const { return basis_.dim(); }
    const CircuitParams& params() const { return params_; }
    const ChargeBasis& basis() const { return basis_; }
    const Matrix6& etilde() const { return etilde_; }
    const FluxOffsets& flux() const { return flux_; }
    const std::vector<double>& diagonal() const { return diag_; }
    const std::vector<PairHop>& pair_hops() const { return hops_; }
    double radial_amplitude(int m = 0) const { return radial_[std::size_t(m)]; }

    void apply(const Vector& x, Vector& y) const {
        const std::size_t n = dim();
        if (std::size_t(x.size()) != n) throw ParameterError("CircuitHamiltonian::apply: dimension mismatch");
        y.resize(static_cast<Eigen::Index>(n));
        const int top = basis_.d() - 1;
        parallel_chunks(n, [&](std::size_t b, std::size_t e) {
            std::array<int, kNodes> dig{};
            for (int m = 0; m < kNodes; ++m) dig[std::size_t(m)] = basis_.digit(b, m);
            std::array<std::ptrdiff_t, kNodes> st{};
            for (int m = 0; m < kNodes; ++m) st[std::size_t(m)] = std::ptrdiff_t(basis_.stride(m));
            const cplx* xp = x.data();
            for (std::size_t i = b; i < e; ++i) {
                const std::ptrdiff_t ii = std::ptrdiff_t(i);
                cplx acc = diag_[i] * xp[ii];
                for (int m = 0; m < kNodes; ++m) {
                    const int dm = dig[std::size_t(m)];
                    cplx rad = 0.0;
                    if (dm < top) rad += xp[ii + st[std::size_t(m)]];
                    if (dm > 0) rad += xp[ii - st[std::size_t(m)]];
                    acc += radial_[std::size_t(m)] * rad;
                }
                for (const auto& h : hops_) {
                    const int dr = dig[std::size_t(h.raise)], dl = dig[std::size_t(h.lower)];
                    const std::ptrdiff_t shift = st[std::size_t(h.raise)] - st[std::size_t(h.lower)];
                    if (dr > 0 && dl < top) acc += h.amp * xp[ii - shift];
                    if (dr < top && dl > 0) acc += std::conj(h.amp) * xp[ii + shift];
                }
                y[ii] = acc;
                // odometer increment
                for (int m = 0; m < kNodes; ++m) {
                    if (++dig[std::size_t(m)] < basis_.d()) break;
                    dig[std::size_t(m)] = 0;
                }
            }
        });
    }

    // Explicit upper-triangle storage (small d only).
    spectra::SparseHermitian to_sparse() const {
        std::vector<spectra::Triplet> t;
        const int top = basis_.d() - 1;
        for (std::size_t i = 0; i < dim(); ++i) {
            t.push_back({i, i, diag_[i]});
            for (int m = 0; m < kNodes; ++m)
                if (basis_.digit(i, m) < top) t.push_back({i, i + basis_.stride(m), radial_[std::size_t(m)]});
            for (const auto& h : hops_) {
                // column i -> row j = i + s_raise - s_lower carries amp
                if (basis_.digit(i, h.raise) < top && basis_.digit(i, h.lower) > 0) {
                    const std::size_t j = i + basis_.stride(h.raise) - basis_.stride(h.lower);
                    if (i < j) t.push_back({i, j, std::conj(h.amp)});
                    else t.push_back({j, i, h.amp});
                }
            }
        }
        return spectra::SparseHermitian(dim(), std::move(t));
    }

private:
    CircuitParams params_;
    ChargeBasis basis_;
    Matrix6 etilde_;
    FluxOffsets flux_;
    std::array<double, kNodes> radial_{};
    std::vector<PairHop> hops_;
    std::vector<double> diag_;
};

inline CircuitHamiltonian assemble_hamiltonian(const CircuitParams& p) { return CircuitHamiltonian(p); }

// Derivatives of <v|H|v> with respect to the gate charges and loop fluxes
// (Hellmann-Feynman; v must be a normalized eigenvector). Flux in Phi0.
struct LevelGradient {
    std::array<double, kNodes> Ng{};
    std::array<double, kNodes> Phi_I{};
    std::array<double, kOuter> Phi_O{};
};

inline LevelGradient level_gradient(const CircuitHamiltonian& h, const Vector& v) {
    const auto& b = h.basis();
    const auto& p = h.params();
    const int top = b.d() - 1;
    LevelGradient g;
    // charging term: dH/dNg_m = -2 sum_n Etilde_mn (N_n - Ng_n)
    for (std::size_t i = 0; i < h.dim(); ++i) {
        const double w = std::norm(v[Eigen::Index(i)]);
        if (w == 0.0) continue;
        Eigen::Matrix<double, kNodes, 1> q;
        for (int m = 0; m < kNodes; ++m) q[m] = b.charge(i, m) - p.Ng[std::size_t(m)];
        const Eigen::Matrix<double, kNodes, 1> e = h.etilde() * q;
        for (int m = 0; m < kNodes; ++m) g.Ng[std::size_t(m)] -= 2 * w * e[m];
    }
    // hop amp e^{i phi} S+_r S-_l + h.c.: d/dphi <H> = -2 Im(amp <S+_r S-_l>)
    std::vector<double> dphi;
    for (const auto& hop : h.pair_hops()) {
        const std::size_t sr = b.stride(hop.raise), sl = b.stride(hop.lower);
        cplx e = 0.0;
        for (std::size_t i = 0; i < h.dim(); ++i)
            if (b.digit(i, hop.raise) > 0 && b.digit(i, hop.lower) < top)
                e += std::conj(v[Eigen::Index(i)]) * v[Eigen::Index(i - sr + sl)];
        dphi.push_back(-2 * (hop.amp * e).imag());
    }
    constexpr double two_pi = 2 * std::numbers::pi;
    for (int m = 0; m < kNodes; ++m) g.Phi_I[std::size_t(m)] = two_pi * dphi[std::size_t(m)];
    for (int j = 0; j < kOuter; ++j) {
        const double d = two_pi * dphi[std::size_t(kNodes + j)];
        g.Phi_O[std::size_t(j)] = d;
        for (int k = 1; k <= 3; ++k) g.Phi_I[std::size_t((2 * j + k) % kNodes)] += d;
    }
    return g;
}

// Single-node operators acting on a state vector.
enum class NodeOperator { N, Cos, Sin };

inline Vector apply_node_operator(const ChargeBasis& basis, NodeOperator op, int m, const Vector& x) {
    const std::size_t n = basis.dim();
    Vector y = Vector::Zero(static_cast<Eigen::Index>(n));
    const int top = basis.d() - 1;
    const std::size_t s = basis.stride(m);
    for (std::size_t i = 0; i < n; ++i) {
        const int dm = basis.digit(i, m);
        const auto ii = static_cast<Eigen::Index>(i);
        switch (op) {
            case NodeOperator::N:
                y[ii] = double(basis.lowest_charge(m) + dm) * x[ii];
                break;
            case NodeOperator::Cos:  // (S- + S+)/2
                if (dm < top) y[ii] += 0.5 * x[static_cast<Eigen::Index>(i + s)];
                if (dm > 0) y[ii] += 0.5 * x[static_cast<Eigen::Index>(i - s)];
                break;
            case NodeOperator::Sin:  // (i/2)(S- - S+)
                if (dm < top) y[ii] += cplx(0, 0.5) * x[static_cast<Eigen::Index>(i + s)];
                if (dm > 0) y[ii] -= cplx(0, 0.5) * x[static_cast<Eigen::Index>(i - s)];
                break;
        }
    }
    return y;
}

struct SpectrumOptions {
    std::size_t levels = 3;
    double tol = 1e-10;
    std::uint64_t seed = 1;
    std::size_t max_iter = 20000;
    std::size_t krylov = 0;
    bool complete_clusters = true;
    bool convergence_check = false;  // also solve at d-2
    bool keep_vectors = false;
    std::vector<Vector> guess;
};

struct SpectrumResult {
    std::vector<double> eigenvalues;  // GHz, ascending
    double omega01 = 0;
    double omega12 = 0;
    double alpha = 0;
    std::vector<double> residuals;
    std::optional<double> convergence_delta;  // |omega01(d) - omega01(d-2)|, GHz
    std::size_t iterations = 0;
    std::vector<Vector> vectors;
};

inline SpectrumResult spectrum(const CircuitParams& p, const SpectrumOptions& opt = {}) {
    if (opt.levels < 2) throw ParameterError("spectrum: need at least two levels");
    CircuitHamiltonian h(p);
    spectra::LanczosOptions lo;
    lo.k = std::min(opt.levels, h.dim());
    lo.tol = opt.tol;
    lo.seed = opt.seed;
    lo.max_iter = opt.max_iter;
    lo.krylov = opt.krylov;
    lo.complete_clusters = opt.complete_clusters;
    lo.guess = opt.guess;
    auto er = spectra::lowest_k(h, lo);
    SpectrumResult r;
    r.eigenvalues = er.values;
    r.residuals = er.residuals;
    r.iterations = er.iterations;
    r.omega01 = r.eigenvalues[1] - r.eigenvalues[0];
    if (r.eigenvalues.size() > 2) {
        r.omega12 = r.eigenvalues[2] - r.eigenvalues[1];
        r.alpha = r.omega12 / r.omega01;
    }
    if (opt.keep_vectors) r.vectors = std::move(er.vectors);
    if (opt.convergence_check && p.d - 2 >= 2) {
        CircuitParams q = p;
        q.d = p.d - 2;
        SpectrumOptions o2 = opt;
        o2.convergence_check = false;
        o2.keep_vectors = false;
        o2.guess.clear();
        o2.levels = 2;
        r.convergence_delta = std::abs(spectrum(q, o2).omega01 - r.omega01);
    }
    return r;
}

struct ProtectionRow {
    int node;
    cplx n10;        // <1|N_m|0>
    cplx n01;        // <0|N_m|1>
    double abs_n10;  // |<1|N_m|0>|
    double abs_cos10;
    double abs_sin10;
    double dz;       // <1|N_m|1> - <0|N_m|0>
};

struct ProtectionReport {
    std::vector<ProtectionRow> rows;
    double max_abs_n10 = 0;
    double max_abs_dz = 0;
    double omega01 = 0;
    double alpha = 0;
    bool protected_within(double tol) const { return max_abs_n10 < tol && max_abs_dz < tol; }
};

// Matrix elements from an already solved doublet (vectors[0], vectors[1]).
inline ProtectionReport protection_from_spectrum(const CircuitParams& p, const SpectrumResult& sr) {
    if (sr.vectors.size() < 2) throw ParameterError("protection_from_spectrum: eigenvectors not kept");
    const ChargeBasis basis(p.d, p.Ng);
    const Vector& v0 = sr.vectors[0];
    const Vector& v1 = sr.vectors[1];
    ProtectionReport rep;
    rep.omega01 = sr.omega01;
    rep.alpha = sr.alpha;
    for (int m = 0; m < kNodes; ++m) {
        ProtectionRow row{};
        row.node = m;
        const Vector n0 = apply_node_operator(basis, NodeOperator::N, m, v0);
        const Vector n1 = apply_node_operator(basis, NodeOperator::N, m, v1);
        row.n10 = v1.dot(n0);
        row.n01 = v0.dot(n1);
        row.abs_n10 = std::abs(row.n10);
        row.dz = v1.dot(n1).real() - v0.dot(n0).real();
        row.abs_cos10 = std::abs(v1.dot(apply_node_operator(basis, NodeOperator::Cos, m, v0)));
        row.abs_sin10 = std::abs(v1.dot(apply_node_operator(basis, NodeOperator::Sin, m, v0)));
        rep.max_abs_n10 = std::max(rep.max_abs_n10, row.abs_n10);
        rep.max_abs_dz = std::max(rep.max_abs_dz, std::abs(row.dz));
        rep.rows.push_back(row);
    }
    return rep;
}

inline ProtectionReport protection_matrix_elements(const CircuitParams& p, const SpectrumOptions& opt = {}) {
    SpectrumOptions o = opt;
    o.keep_vectors = true;
    o.levels = std::max<std::size_t>(o.levels, 2);
    return protection_from_spectrum(p, spectrum(p, o));
}

// Operating-point offsets: total gate charge split evenly over the six gates;
// total flux applied as a homogeneous field scaling every loop flux by
// (1 + dPhi_tot / (3 Phi0)), 3 Phi0 being the operating-point inner flux.
inline CircuitParams with_offsets(const CircuitParams& base, double dq_tot, double dphi_tot) {
    CircuitParams p = base;
    for (auto& g : p.Ng) g += dq_tot / kNodes;
    const double scale = 1.0 + dphi_tot / 3.0;
    for (auto& f : p.Phi_I) f *= scale;
    for (auto& f : p.Phi_O) f *= scale;
    return p;
}

struct SpectroscopyRow {
    double dq_tot;
    double dphi_tot;
    std::array<double, 4> omega{};  // omega_0k for k = 1..4, GHz
    bool ok = true;
    std::string error;
};

inline std::vector<SpectroscopyRow> spectroscopy_sweep(const CircuitParams& p, const std::vector<double>& dq_grid,
                                                       const std::vector<double>& dphi_grid,
                                                       const SpectrumOptions& opt = {}) {
    std::vector<SpectroscopyRow> rows;
    for (double dq : dq_grid)
        for (double df : dphi_grid) rows.push_back({dq, df, {}, true, {}});
    parallel_for(rows.size(), [&](std::size_t i) {
        auto& row = rows[i];
        SpectrumOptions o = opt;
        o.levels = std::max<std::size_t>(o.levels, 5);
        try {
            auto sr = spectrum(with_offsets(p, row.dq_tot, row.dphi_tot), o);
            for (std::size_t k = 0; k < 4; ++k) row.omega[k] = sr.eigenvalues[k + 1] - sr.eigenvalues[0];
        } catch (const ConvergenceError& e) {
            row.ok = false;
            row.error = e.what();
        }
    });
    return rows;
}

// Summary of a pair of one-dimensional sweeps (charge at zero flux offset,
// flux at zero charge offset).
struct SpectroscopyAnalysis {
    double flux_slope = 0;         // steepest d omega01 / d dPhi_tot on the rising branch, GHz/Phi0
    double crossing = 0;           // omega01 where levels 1 and 2 cross, GHz (0 if not reached)
    double charge_rel_change = 0;  // max |omega01(dQ) - omega01(0)| / omega01(0)
};

inline SpectroscopyAnalysis analyze_spectroscopy(const std::vector<SpectroscopyRow>& rows) {
    SpectroscopyAnalysis a;
    double w0 = 0;
    std::vector<const SpectroscopyRow*> flux, charge;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        if (r.dq_tot == 0 && r.dphi_tot == 0) w0 = r.omega[0];
        if (r.dq_tot == 0 && r.dphi_tot >= 0) flux.push_back(&r);
        if (r.dphi_tot == 0) charge.push_back(&r);
    }
    for (const auto* r : charge)
        if (w0 > 0) a.charge_rel_change = std::max(a.charge_rel_change, std::abs(r->omega[0] - w0) / w0);
    std::sort(flux.begin(), flux.end(), [](auto* x, auto* y) { return x->dphi_tot < y->dphi_tot; });
    // Walk the rising branch; the crossing is where the extrapolated omega01 and
    // omega02 segments meet inside the next sweep interval.
    for (std::size_t i = 1; i < flux.size(); ++i) {
        const auto *p = flux[i - 1], *q = flux[i];
        const double h = q->dphi_tot - p->dphi_tot;
        if (h <= 0) continue;  // both sweeps contain the origin
        const double s1 = (q->omega[0] - p->omega[0]) / h;
        const double s2 = (q->omega[1] - p->omega[1]) / h;
        if (s1 <= 0) break;
        a.flux_slope = std::max(a.flux_slope, s1);
        if (i + 1 < flux.size() && s1 > s2) {
            const double x = (q->omega[1] - q->omega[0]) / (s1 - s2);
            if (x <= flux[i + 1]->dphi_tot - q->dphi_tot) {
                a.crossing = q->omega[0] + s1 * x;
                break;
            }
        }
    }
    return a;
}

// Junction families sharing one bare plasma frequency sqrt(8 E_J E_C).
inline CircuitParams plasma_constrained(double ecr_over_eja, double ejl_over_eja, double e_ja = 6.0,
                                        double plasma_ghz = 10.0) {
    const double prod = plasma_ghz * plasma_ghz / 8.0;
    CircuitParams p;
    p.E_Ja = e_ja;
    p.E_Ca = prod / e_ja;
    p.E_Cr = ecr_over_eja * e_ja;
    p.E_Jr = prod / p.E_Cr;
    p.E_Jl = ejl_over_eja * e_ja;
    p.E_Cl = prod / p.E_Jl;
    return p;
}

struct Fig2bRow {
    double ecr_over_eja;
    double ejl_over_eja;
    double omega01 = 0;
    double alpha = 0;
    bool symmetric = false;
    bool ok = true;
};

inline std::vector<Fig2bRow> fig2b_map(const std::vector<double>& ecr_grid, const std::vector<double>& ejl_grid,
                                       int d, double flag_tol = 1e-6, const SpectrumOptions& opt = {}) {
    std::vector<Fig2bRow> rows;
    for (double a : ecr_grid)
        for (double b : ejl_grid) rows.push_back({a, b});
    parallel_for(rows.size(), [&](std::size_t i) {
        auto& row = rows[i];
        CircuitParams p = plasma_constrained(row.ecr_over_eja, row.ejl_over_eja);
        p.d = d;
        try {
            SpectrumOptions o = opt;
            o.levels = std::max<std::size_t>(o.levels, 3);
            auto rep = protection_matrix_elements(p, o);
            row.omega01 = rep.omega01;
            row.alpha = rep.alpha;
            row.symmetric = rep.protected_within(flag_tol);
        } catch (const ConvergenceError&) {
            row.ok = false;
        }
    });
    return rows;
}

}  // namespace ringsim::circuit
