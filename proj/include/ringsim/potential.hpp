#pragma once

// Classical Josephson potential of the six-node ring over node phases.
//
//   V = -E_Ja sum_m cos(phi_{m+1} - phi_m - a_m)
//       -E_Jl sum_j cos(phi_{b_j} - phi_{a_j} - l_j)
//       -E_Jr sum_m cos(phi_m)
//
// with outer junction j = (a_j, b_j) = (2j+1, 2j+4) mod 6 and flux phases a_m,
// l_j as composed by the circuit model. Energies in GHz, phases in radians.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ringsim/circuit.hpp"
#include "ringsim/error.hpp"
#include "ringsim/parallel.hpp"

namespace ringsim::landscape {

using circuit::kNodes;
using circuit::kOuter;
using PhasePoint = std::array<double, kNodes>;

inline constexpr double kTwoPi = 2 * std::numbers::pi;
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

struct PotentialParams {
    double E_Jr = 1.7;
    double E_Ja = 6.0;
    double E_Jl = 30.0;
    std::array<double, kNodes> phase_a{};
    std::array<double, kOuter> phase_l{};

    static PotentialParams from_circuit(const circuit::CircuitParams& c) {
        const auto f = circuit::compose_flux_offsets(c.Phi_I, c.Phi_O);
        return {c.E_Jr, c.E_Ja, c.E_Jl, f.phase_a, f.phase_l};
    }

    static PotentialParams operating_point() { return from_circuit(circuit::CircuitParams::white_cross()); }

    static PotentialParams flux_free(double e_jr = 1.7, double e_ja = 6.0, double e_jl = 30.0) {
        return {e_jr, e_ja, e_jl, {}, {}};
    }

    void validate() const {
        if (!(E_Jr > 0 && E_Ja > 0 && E_Jl > 0)) throw ParameterError("PotentialParams: energies must be positive");
    }
};

// Gauge-invariant junction phases, each oriented from the lower to the higher node of the hop.
struct JunctionPhases {
    std::array<double, kNodes> azimuthal{};
    std::array<double, kOuter> outer{};
    std::array<double, kNodes> radial{};
};

inline JunctionPhases junction_phases(const PotentialParams& p, const PhasePoint& x) {
    JunctionPhases j;
    for (int m = 0; m < kNodes; ++m) {
        const auto i = std::size_t(m);
        j.azimuthal[i] = x[std::size_t((m + 1) % kNodes)] - x[i] - p.phase_a[i];
        j.radial[i] = x[i];
    }
    for (int k = 0; k < kOuter; ++k) {
        const auto oj = circuit::outer_junction(k);
        j.outer[std::size_t(k)] = x[std::size_t(oj.b)] - x[std::size_t(oj.a)] - p.phase_l[std::size_t(k)];
    }
    return j;
}

inline double potential(const PotentialParams& p, const PhasePoint& x) {
    const auto j = junction_phases(p, x);
    double v = 0;
    for (int m = 0; m < kNodes; ++m) v -= p.E_Ja * std::cos(j.azimuthal[std::size_t(m)]) + p.E_Jr * std::cos(j.radial[std::size_t(m)]);
    for (int k = 0; k < kOuter; ++k) v -= p.E_Jl * std::cos(j.outer[std::size_t(k)]);
    return v;
}

inline PhasePoint gradient(const PotentialParams& p, const PhasePoint& x) {
    const auto j = junction_phases(p, x);
    PhasePoint g{};
    for (int m = 0; m < kNodes; ++m) {
        const auto i = std::size_t(m);
        const double s = p.E_Ja * std::sin(j.azimuthal[i]);
        g[std::size_t((m + 1) % kNodes)] += s;
        g[i] -= s;
        g[i] += p.E_Jr * std::sin(j.radial[i]);
    }
    for (int k = 0; k < kOuter; ++k) {
        const auto oj = circuit::outer_junction(k);
        const double s = p.E_Jl * std::sin(j.outer[std::size_t(k)]);
        g[std::size_t(oj.b)] += s;
        g[std::size_t(oj.a)] -= s;
    }
    return g;
}

inline double norm(const PhasePoint& g) {
    double s = 0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

// phi_n = n x + y with drawing labels n = 1..6, i.e. node m gets (m+1) x + y.
inline PhasePoint plane_point(double x, double y) {
    PhasePoint phi{};
    for (int m = 0; m < kNodes; ++m) phi[std::size_t(m)] = double(m + 1) * x + y;
    return phi;
}

inline double plane_potential(const PotentialParams& p, double x, double y) { return potential(p, plane_point(x, y)); }

// (dV/dx, dV/dy) restricted to the plane
inline std::array<double, 2> plane_gradient(const PotentialParams& p, double x, double y) {
    const auto g = gradient(p, plane_point(x, y));
    std::array<double, 2> r{0, 0};
    for (int m = 0; m < kNodes; ++m) {
        r[0] += double(m + 1) * g[std::size_t(m)];
        r[1] += g[std::size_t(m)];
    }
    return r;
}

// Persistent-current minima: phi_n = -+ 2 pi n / 3.
inline PhasePoint clockwise_point() { return plane_point(-kTwoPi / 3, 0.0); }
inline PhasePoint anticlockwise_point() { return plane_point(kTwoPi / 3, 0.0); }

struct Minimum {
    PhasePoint point{};
    double energy = 0;
    double grad_norm = 0;
    std::size_t iterations = 0;
};

inline Eigen::Matrix<double, kNodes, kNodes> hessian(const PotentialParams& p, const PhasePoint& x) {
    const auto j = junction_phases(p, x);
    Eigen::Matrix<double, kNodes, kNodes> h = Eigen::Matrix<double, kNodes, kNodes>::Zero();
    auto pair = [&h](int a, int b, double c) {
        h(a, a) += c;
        h(b, b) += c;
        h(a, b) -= c;
        h(b, a) -= c;
    };
    for (int m = 0; m < kNodes; ++m) {
        pair(m, (m + 1) % kNodes, p.E_Ja * std::cos(j.azimuthal[std::size_t(m)]));
        h(m, m) += p.E_Jr * std::cos(j.radial[std::size_t(m)]);
    }
    for (int k = 0; k < kOuter; ++k) {
        const auto oj = circuit::outer_junction(k);
        pair(oj.a, oj.b, p.E_Jl * std::cos(j.outer[std::size_t(k)]));
    }
    return h;
}

// Descent with Armijo backtracking until |grad| < grad_tol. The search direction
// is the Newton step where the Hessian is positive definite, else the gradient.
inline Minimum find_minimum(const PotentialParams& p, PhasePoint x, double grad_tol = 1e-9,
                            std::size_t max_iter = 10000) {
    p.validate();
    using Vec6 = Eigen::Matrix<double, kNodes, 1>;
    double f = potential(p, x);
    PhasePoint g = gradient(p, x);
    for (std::size_t it = 0; it < max_iter; ++it) {
        const double gn = norm(g);
        if (gn < grad_tol) return {x, f, gn, it};
        const Vec6 gv = Eigen::Map<const Vec6>(g.data());
        Vec6 dir = -gv / (2 * p.E_Ja + p.E_Jr + 2 * p.E_Jl);
        Eigen::LLT<Eigen::Matrix<double, kNodes, kNodes>> llt(hessian(p, x));
        if (llt.info() == Eigen::Success) dir = -llt.solve(gv);
        double slope = gv.dot(dir);
        if (!(slope < 0)) {
            dir = -gv / (2 * p.E_Ja + p.E_Jr + 2 * p.E_Jl);
            slope = gv.dot(dir);
        }
        double s = 1.0;
        for (;;) {
            PhasePoint trial = x;
            for (int m = 0; m < kNodes; ++m) trial[std::size_t(m)] += s * dir[m];
            const double ft = potential(p, trial);
            // below energy roundoff the gradient norm decides
            const bool flat = std::abs(ft - f) <= 1e-13 * std::max(1.0, std::abs(f)) && norm(gradient(p, trial)) < gn;
            if (ft <= f + 1e-4 * s * slope || flat || s < 1e-12) {
                x = trial;
                f = ft;
                break;
            }
            s *= 0.5;
        }
        g = gradient(p, x);
    }
    throw ConvergenceError("find_minimum: iteration cap reached with |grad| = " + std::to_string(norm(g)),
                           {norm(g)});
}

// Stationary point of the y-fixed line cut inside [lo, hi] (safeguarded Newton on dV/dx).
inline double refine_cut_minimum(const PotentialParams& p, double y, double lo, double hi, double tol = 1e-12) {
    auto d1 = [&](double x) { return plane_gradient(p, x, y)[0]; };
    double flo = d1(lo), fhi = d1(hi);
    if (flo > 0 || fhi < 0) throw ParameterError("refine_cut_minimum: bracket does not enclose a minimum");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = d1(x);
        if (std::abs(f) < 1e-14) return x;
        if (f < 0) lo = x; else hi = x;
        const double h = 1e-6;
        const double curv = (d1(x + h) - d1(x - h)) / (2 * h);
        double nx = curv > 0 ? x - f / curv : 0.5 * (lo + hi);
        if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
        if (std::abs(nx - x) < tol) return nx;
        x = nx;
    }
    return x;
}

// Junction currents in units of each junction's critical current, positive
// along the junction orientation used in junction_phases.
struct JunctionCurrents {
    std::array<double, kNodes> azimuthal{};
    std::array<double, kOuter> outer{};
    std::array<double, kNodes> radial{};
    double I_ca = 0, I_cl = 0, I_cr = 0;  // critical currents, nA
};

// I_c = 2 e E_J / hbar = 4 pi e (E_J/h)
inline double critical_current_nA(double e_j_ghz) { return 2 * kTwoPi * kElementaryCharge * e_j_ghz * 1e9 * 1e9; }

inline JunctionCurrents junction_currents(const PotentialParams& p, const PhasePoint& x) {
    const auto j = junction_phases(p, x);
    JunctionCurrents c;
    for (std::size_t m = 0; m < kNodes; ++m) {
        c.azimuthal[m] = std::sin(j.azimuthal[m]);
        c.radial[m] = std::sin(j.radial[m]);
    }
    for (std::size_t k = 0; k < kOuter; ++k) c.outer[k] = std::sin(j.outer[k]);
    c.I_ca = critical_current_nA(p.E_Ja);
    c.I_cl = critical_current_nA(p.E_Jl);
    c.I_cr = critical_current_nA(p.E_Jr);
    return c;
}

// Net current leaving each node (nA); equals (2e/hbar) dV/dphi_m.
inline PhasePoint node_current_balance(const JunctionCurrents& c) {
    PhasePoint r{};
    for (int m = 0; m < kNodes; ++m) {
        const auto i = std::size_t(m);
        r[i] += c.I_cr * c.radial[i];
        r[i] -= c.I_ca * c.azimuthal[i];
        r[std::size_t((m + 1) % kNodes)] += c.I_ca * c.azimuthal[i];
    }
    for (int k = 0; k < kOuter; ++k) {
        const auto oj = circuit::outer_junction(k);
        r[std::size_t(oj.a)] -= c.I_cl * c.outer[std::size_t(k)];
        r[std::size_t(oj.b)] += c.I_cl * c.outer[std::size_t(k)];
    }
    return r;
}

struct RasterPoint {
    double x, y, V;
};

// Row-major: y outer, x inner.
inline std::vector<RasterPoint> raster(const PotentialParams& p, const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<RasterPoint> out(xs.size() * ys.size());
    parallel_for(out.size(), [&](std::size_t i) {
        const double x = xs[i % xs.size()], y = ys[i / xs.size()];
        out[i] = {x, y, plane_potential(p, x, y)};
    });
    return out;
}

}  // namespace ringsim::landscape
