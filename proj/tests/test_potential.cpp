#include <gtest/gtest.h>

#include <random>

#include "ringsim/potential.hpp"

using namespace ringsim;
using namespace ringsim::landscape;

namespace {

PhasePoint shifted(PhasePoint x, double s) {
    for (auto& v : x) v += s;
    return x;
}

PhasePoint fd_gradient(const PotentialParams& p, const PhasePoint& x, double h = 1e-5) {
    PhasePoint g{};
    for (std::size_t m = 0; m < kNodes; ++m) {
        PhasePoint a = x, b = x;
        a[m] += h;
        b[m] -= h;
        g[m] = (potential(p, a) - potential(p, b)) / (2 * h);
    }
    return g;
}

PhasePoint random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-kTwoPi, kTwoPi);
    PhasePoint x{};
    for (auto& v : x) v = u(rng);
    return x;
}

}  // namespace

TEST(Potential, FluxFreeOriginIsGlobalMinimum) {
    auto p = PotentialParams::flux_free(1.7, 6.0, 30.0);
    EXPECT_DOUBLE_EQ(potential(p, {}), -6 * 1.7 - 6 * 6.0 - 3 * 30.0);
    EXPECT_LT(norm(gradient(p, {})), 1e-15);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) EXPECT_GE(potential(p, random_point(rng)), potential(p, {}));
}

TEST(Potential, Periodicity) {
    auto p = PotentialParams::operating_point();
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        auto x = random_point(rng);
        auto y = x;
        y[std::size_t(i % kNodes)] += kTwoPi;
        EXPECT_NEAR(potential(p, x), potential(p, y), 1e-12);
        EXPECT_NEAR(potential(p, x), potential(p, shifted(x, kTwoPi)), 1e-12);
        auto g1 = gradient(p, x), g2 = gradient(p, y);
        for (std::size_t m = 0; m < kNodes; ++m) EXPECT_NEAR(g1[m], g2[m], 1e-12);
    }
}

TEST(Potential, GradientMatchesFiniteDifferences) {
    auto p = PotentialParams::operating_point();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        auto x = random_point(rng);
        auto g = gradient(p, x), f = fd_gradient(p, x);
        for (std::size_t m = 0; m < kNodes; ++m) EXPECT_NEAR(g[m], f[m], 1e-6 * std::max(1.0, std::abs(g[m])));
    }
}

TEST(Potential, OperatingPointFluxPhases) {
    auto p = PotentialParams::operating_point();
    for (double a : p.phase_a) EXPECT_NEAR(a, std::numbers::pi, 1e-12);
    for (double l : p.phase_l) EXPECT_NEAR(std::min(l, kTwoPi - l), 0.0, 1e-12);
}

TEST(Potential, CurrentStateCoordinates) {
    auto p = PotentialParams::operating_point();
    const auto cw = clockwise_point(), acw = anticlockwise_point();
    EXPECT_NEAR(potential(p, cw), -3 * p.E_Ja - 3 * p.E_Jl, 1e-12);
    EXPECT_NEAR(potential(p, cw), potential(p, acw), 1e-12);
    // The radial junctions are the only unbalanced term: dV/dphi_m = E_Jr sin(phi_m).
    auto g = gradient(p, cw);
    for (std::size_t m = 0; m < kNodes; ++m) EXPECT_NEAR(g[m], p.E_Jr * std::sin(cw[m]), 1e-12);
    // and they drop out without radial Josephson coupling
    auto q = p;
    q.E_Jr = 1e-300;
    EXPECT_LT(norm(gradient(q, cw)), 1e-12);
    EXPECT_LT(norm(gradient(q, acw)), 1e-12);
}

TEST(Potential, CutMinimaWithoutRadialCoupling) {
    auto p = PotentialParams::operating_point();
    p.E_Jr = 1e-300;
    EXPECT_NEAR(refine_cut_minimum(p, 0.0, 1.5, 2.6), kTwoPi / 3, 1e-9);
    EXPECT_NEAR(refine_cut_minimum(p, 0.0, -2.6, -1.5), -kTwoPi / 3, 1e-9);
}

TEST(Potential, CutMinimaAtOperatingPoint) {
    auto p = PotentialParams::operating_point();
    const double xr = refine_cut_minimum(p, 0.0, 1.5, 2.6);
    const double xl = refine_cut_minimum(p, 0.0, -2.6, -1.5);
    EXPECT_NEAR(xr, -xl, 1e-10);
    EXPECT_NEAR(plane_gradient(p, xr, 0.0)[0], 0.0, 1e-10);
    EXPECT_NEAR(plane_potential(p, xr, 0.0), plane_potential(p, xl, 0.0), 1e-10);
    // radial coupling pulls the cut minimum slightly outward
    EXPECT_GT(xr, kTwoPi / 3);
    EXPECT_LT(xr - kTwoPi / 3, 1e-2);
}

TEST(Potential, PlaneInversionSymmetry) {
    auto p = PotentialParams::operating_point();
    for (double x = -3; x <= 3; x += 0.37)
        for (double y = -3; y <= 3; y += 0.41) EXPECT_NEAR(plane_potential(p, x, y), plane_potential(p, -x, -y), 1e-11);
}

TEST(Potential, ValleyIsFlatAlongY) {
    auto p = PotentialParams::operating_point();
    for (double y = -3; y <= 3; y += 0.25) {
        EXPECT_LT(std::abs(plane_gradient(p, kTwoPi / 3, y)[1]), 1e-9);
        EXPECT_LT(std::abs(plane_gradient(p, -kTwoPi / 3, y)[1]), 1e-9);
        EXPECT_NEAR(plane_potential(p, kTwoPi / 3, y), plane_potential(p, kTwoPi / 3, 0.0), 1e-10);
    }
}

TEST(FindMinimum, ConvergesFromNearCurrentStates) {
    auto p = PotentialParams::operating_point();
    auto a = find_minimum(p, shifted(anticlockwise_point(), 0.05));
    auto c = find_minimum(p, shifted(clockwise_point(), -0.05));
    EXPECT_LT(a.grad_norm, 1e-9);
    EXPECT_NEAR(a.energy, c.energy, 1e-10);
    EXPECT_LT(a.energy, potential(p, anticlockwise_point()));
    // the relaxed minimum stays within a few tenths of a radian of the current state
    for (std::size_t m = 0; m < kNodes; ++m)
        EXPECT_LT(std::abs(std::remainder(a.point[m] - anticlockwise_point()[m], kTwoPi)), 0.3);
}

TEST(FindMinimum, ImmediateConvergenceAtMinimum) {
    auto p = PotentialParams::flux_free();
    auto r = find_minimum(p, {});
    EXPECT_EQ(r.iterations, 0u);
}

TEST(FindMinimum, IterationCap) {
    auto p = PotentialParams::operating_point();
    EXPECT_THROW(find_minimum(p, {0.3, 1.0, -0.2, 2.0, 0.1, 0.4}, 1e-12, 3), ConvergenceError);
}

TEST(JunctionCurrents, PersistentCurrentState) {
    auto p = PotentialParams::operating_point();
    auto c = junction_currents(p, clockwise_point());
    for (double a : c.azimuthal) EXPECT_NEAR(std::abs(a), std::sin(std::numbers::pi / 3), 1e-12);
    for (double o : c.outer) EXPECT_LT(std::abs(o), 1e-12);
    EXPECT_NEAR(c.I_ca, 12.08, 0.01);
    EXPECT_NEAR(c.I_ca * std::sin(std::numbers::pi / 3), 10.46, 0.01);
    auto a = junction_currents(p, anticlockwise_point());
    for (std::size_t m = 0; m < kNodes; ++m) EXPECT_NEAR(a.azimuthal[m], -c.azimuthal[m], 1e-12);
}

TEST(JunctionCurrents, FluxFreeOriginCarriesNoCurrent) {
    auto c = junction_currents(PotentialParams::flux_free(), {});
    for (double v : c.azimuthal) EXPECT_EQ(v, 0.0);
    for (double v : c.outer) EXPECT_EQ(v, 0.0);
    for (double v : c.radial) EXPECT_EQ(v, 0.0);
}

TEST(JunctionCurrents, KirchhoffAtStationaryPoints) {
    auto p = PotentialParams::operating_point();
    auto m = find_minimum(p, anticlockwise_point());
    for (double r : node_current_balance(junction_currents(p, m.point))) EXPECT_LT(std::abs(r), 1e-8);
    // away from stationarity the balance is the scaled gradient
    std::mt19937_64 rng(9);
    auto x = random_point(rng);
    auto bal = node_current_balance(junction_currents(p, x));
    auto g = gradient(p, x);
    const double scale = critical_current_nA(1.0);
    for (std::size_t k = 0; k < kNodes; ++k) EXPECT_NEAR(bal[k], scale * g[k], 1e-9 * scale);
}

TEST(Raster, LayoutAndValues) {
    auto p = PotentialParams::operating_point();
    std::vector<double> xs{-1.0, 0.0, 1.0}, ys{-0.5, 0.5};
    auto r = raster(p, xs, ys);
    ASSERT_EQ(r.size(), 6u);
    EXPECT_EQ(r[4].x, 0.0);
    EXPECT_EQ(r[4].y, 0.5);
    EXPECT_EQ(r[4].V, plane_potential(p, 0.0, 0.5));
}
