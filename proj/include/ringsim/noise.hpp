#pragma once

// Pure dephasing from low-frequency parameter noise.
//
// Noise records are synthesised in the frequency domain: each Fourier bin k gets
// a complex Gaussian amplitude Z_k sqrt(S(f_k) df) with Z_{-k} = conj(Z_k) and a
// real Z_0, and the record x(t_l) = sum_k X_k exp(2 pi i k l / N) is one inverse
// DFT (no 1/N factor). The qubit frequency follows the noise adiabatically
// through a second-order Taylor model fitted to exact spectra, the phase is its
// running integral, and f(t) = E[exp(-i phi(t))] is the ensemble average.

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ringsim/circuit.hpp"
#include "ringsim/error.hpp"
#include "ringsim/parallel.hpp"

namespace ringsim::noise {

using circuit::CircuitParams;
using cplx = std::complex<double>;

struct PSDSpec {
    double A = 0.0;  // power at 1 Hz, (parameter unit)^2 / Hz
    double f_ir = 1.0;
    double f_uv = 1e6;

    void validate() const {
        if (!(A >= 0.0)) throw ParameterError("PSDSpec: A must be non-negative");
        if (!(f_ir > 0.0 && f_ir < f_uv)) throw ParameterError("PSDSpec: need 0 < f_IR < f_UV");
    }
};

// Flat below f_IR, 1/f up to f_UV, zero above; even in f.
inline double psd_value(const PSDSpec& s, double f) {
    const double af = std::abs(f);
    if (af < s.f_ir) return s.A;
    if (af < s.f_uv) return s.A / af;
    return 0.0;
}

// Expected record variance S(0) df + 2 sum_{k>=1} S(k df) df.
inline double parseval_variance(const PSDSpec& s, std::size_t n, double df) {
    double v = psd_value(s, 0.0) * df;
    for (std::size_t k = 1; k <= (n - 1) / 2; ++k) v += 2.0 * psd_value(s, double(k) * df) * df;
    return v;
}

struct NoiseTrace {
    std::vector<double> samples;
    double dt = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// FFTW_ESTIMATE plans are cached per length and reused through the new-array
// execute interface; ESTIMATE keeps the chosen algorithm, and hence the
// floating-point result, independent of timing.
struct PlanCache {
    std::map<std::size_t, fftw_plan> c2r, r2c;
    ~PlanCache() {
        for (auto& [n, p] : c2r) fftw_destroy_plan(p);
        for (auto& [n, p] : r2c) fftw_destroy_plan(p);
    }
};

inline fftw_plan cached_plan(std::size_t n, bool inverse) {
    static PlanCache cache;
    std::lock_guard lock(fftw_planner_mutex());
    auto& m = inverse ? cache.c2r : cache.r2c;
    if (auto it = m.find(n); it != m.end()) return it->second;
    fftw_complex* c = fftw_alloc_complex(n / 2 + 1);
    double* r = fftw_alloc_real(n);
    fftw_plan p = inverse ? fftw_plan_dft_c2r_1d(int(n), c, r, FFTW_ESTIMATE)
                          : fftw_plan_dft_r2c_1d(int(n), r, c, FFTW_ESTIMATE);
    fftw_free(c);
    fftw_free(r);
    m.emplace(n, p);
    return p;
}

// splitmix64 finaliser; decorrelates derived seeds
constexpr std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Fourier amplitudes X_k for k = 0..(n-1)/2.
inline std::vector<cplx> amplitudes(const PSDSpec& s, std::size_t n, double df, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t half = (n - 1) / 2;
    std::vector<cplx> x(half + 1);
    x[0] = g(rng) * std::sqrt(psd_value(s, 0.0) * df);
    for (std::size_t k = 1; k <= half; ++k) {
        const double re = g(rng);
        const double im = g(rng);
        x[k] = cplx(re, im) * std::sqrt(0.5 * psd_value(s, double(k) * df) * df);
    }
    return x;
}

}  // namespace detail

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    return detail::mix(detail::mix(detail::mix(base) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

// One real noise record of n (odd) samples with timestep 1/(n df).
inline NoiseTrace sample_noise(const PSDSpec& s, std::size_t n, double df, std::uint64_t seed) {
    s.validate();
    if (n % 2 == 0) throw ParameterError("sample_noise: N must be odd");
    if (!(df > 0.0)) throw ParameterError("sample_noise: delta_f must be positive");
    NoiseTrace tr;
    tr.dt = 1.0 / (double(n) * df);
    tr.seed = seed;
    tr.samples.assign(n, 0.0);
    if (s.A == 0.0) return tr;

    auto amp = detail::amplitudes(s, n, df, seed);
    fftw_complex* in = fftw_alloc_complex(amp.size());
    double* out = fftw_alloc_real(n);
    for (std::size_t k = 0; k < amp.size(); ++k) {
        in[k][0] = amp[k].real();
        in[k][1] = amp[k].imag();
    }
    fftw_execute_dft_c2r(detail::cached_plan(n, true), in, out);
    std::copy(out, out + n, tr.samples.begin());
    fftw_free(in);
    fftw_free(out);
    return tr;
}

// Same record through a full complex inverse DFT over k = -(n-1)/2..(n-1)/2.
// Used to check that the Hermitian-symmetric amplitudes give a real signal.
inline std::vector<cplx> sample_noise_complex(const PSDSpec& s, std::size_t n, double df, std::uint64_t seed) {
    if (n % 2 == 0) throw ParameterError("sample_noise: N must be odd");
    auto amp = detail::amplitudes(s, n, df, seed);
    fftw_complex* buf = fftw_alloc_complex(n);
    for (std::size_t k = 0; k < n; ++k) buf[k][0] = buf[k][1] = 0.0;
    for (std::size_t k = 0; k < amp.size(); ++k) {
        buf[k][0] = amp[k].real();
        buf[k][1] = amp[k].imag();
        if (k > 0) {
            buf[n - k][0] = amp[k].real();
            buf[n - k][1] = -amp[k].imag();
        }
    }
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(int(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::vector<cplx> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = cplx(buf[i][0], buf[i][1]);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(buf);
    return out;
}

// One-sided periodogram estimate of S(f_k), k = 0..(n-1)/2: |DFT_k|^2 / (n^2 df).
inline std::vector<double> periodogram(const std::vector<double>& x, double df) {
    const std::size_t n = x.size();
    double* in = fftw_alloc_real(n);
    std::copy(x.begin(), x.end(), in);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_execute_dft_r2c(detail::cached_plan(n, false), in, out);
    std::vector<double> p((n - 1) / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / (double(n) * double(n) * df);
    fftw_free(in);
    fftw_free(out);
    return p;
}

// ---------------------------------------------------------------------------
// Noise channels

enum class ChannelKind { Gate, InnerFlux, OuterFlux };

struct Channel {
    ChannelKind kind;
    int index;
    std::string label() const {
        switch (kind) {
            case ChannelKind::Gate: return "Ng" + std::to_string(index);
            case ChannelKind::InnerFlux: return "PhiI" + std::to_string(index);
            case ChannelKind::OuterFlux: return "PhiO" + std::to_string(index);
        }
        return "?";
    }
};

inline CircuitParams shifted(CircuitParams p, const Channel& c, double x) {
    switch (c.kind) {
        case ChannelKind::Gate: p.Ng[std::size_t(c.index)] += x; break;
        case ChannelKind::InnerFlux: p.Phi_I[std::size_t(c.index)] += x; break;
        case ChannelKind::OuterFlux: p.Phi_O[std::size_t(c.index)] += x; break;
    }
    return p;
}

struct NoiseChannelSet {
    std::vector<Channel> channels;
    std::vector<PSDSpec> psd;  // per channel
    std::string rule;

    std::size_t size() const { return channels.size(); }
    double total_A() const {
        double a = 0;
        for (const auto& s : psd) a += s.A;
        return a;
    }
};

// Charge noise: total power a_total_e2 in units of e^2 at 1 Hz, split evenly over
// the six gates and converted to Cooper-pair units (divide by 4).
inline NoiseChannelSet charge_channels(double a_total_e2 = 4e-8, double f_ir = 1.0, double f_uv = 1e6) {
    NoiseChannelSet s;
    s.rule = "A_c split evenly over 6 gates; e^2 -> (2e)^2 units";
    for (int m = 0; m < circuit::kNodes; ++m) {
        s.channels.push_back({ChannelKind::Gate, m});
        s.psd.push_back({a_total_e2 / 4.0 / circuit::kNodes, f_ir, f_uv});
    }
    return s;
}

// Flux noise: total power in Phi0^2 at 1 Hz split over the 6 inner and 3 outer loops.
inline NoiseChannelSet flux_channels(double a_total = 4e-12, double f_ir = 1.0, double f_uv = 1e6) {
    NoiseChannelSet s;
    s.rule = "A_f split evenly over 9 loops (6 inner + 3 outer)";
    const double per = a_total / (circuit::kNodes + circuit::kOuter);
    for (int m = 0; m < circuit::kNodes; ++m) {
        s.channels.push_back({ChannelKind::InnerFlux, m});
        s.psd.push_back({per, f_ir, f_uv});
    }
    for (int j = 0; j < circuit::kOuter; ++j) {
        s.channels.push_back({ChannelKind::OuterFlux, j});
        s.psd.push_back({per, f_ir, f_uv});
    }
    return s;
}

// ---------------------------------------------------------------------------
// Response surface

struct ResponseSurface {
    double omega_ref = 0;       // GHz
    Eigen::VectorXd d_x;        // GHz per unit
    Eigen::MatrixXd d_xx;       // GHz per unit^2
    std::vector<std::string> labels;
    double asymmetry = 0;       // max |D_xy - D_yx| over the stencil pairs
    double richardson_drift = 0; // max relative change of diag D_xx at half step (if run)

    // delta omega01 for offsets x (GHz)
    double delta(const Eigen::VectorXd& x) const { return d_x.dot(x) + 0.5 * x.dot(d_xx * x); }
};

struct StencilSteps {
    double charge = 1e-3;  // Cooper pairs
    double flux = 1e-5;    // Phi0
    bool richardson = false;
};

// Gradient: Hellmann-Feynman first derivatives, Hessian from central differences
// of the gradient (2n+1 solves). Stencil: energies only (2n^2+1 solves).
enum class FitMethod { Gradient, Stencil };

struct FitOptions {
    double tol = 1e-12;
    std::uint64_t seed = 1;
    FitMethod method = FitMethod::Gradient;
};

inline double step_for(const Channel& c, const StencilSteps& s) {
    return c.kind == ChannelKind::Gate ? s.charge : s.flux;
}

// omega01 at many nearby parameter points, warm-started from a reference solve.
class GapEvaluator {
public:
    GapEvaluator(const CircuitParams& base, const FitOptions& opt) : base_(base), opt_(opt) {
        circuit::SpectrumOptions o;
        o.levels = 2;
        o.tol = opt.tol;
        o.seed = opt.seed;
        o.complete_clusters = false;
        o.keep_vectors = true;
        auto r = circuit::spectrum(base, o);
        omega_ref_ = r.omega01;
        guess_ = r.vectors;
    }

    double omega_ref() const { return omega_ref_; }
    const CircuitParams& base() const { return base_; }

    // d omega01 / d x_c for every channel c at p
    Eigen::VectorXd gradient(const CircuitParams& p, const std::vector<Channel>& channels) const {
        circuit::SpectrumOptions o;
        o.levels = 2;
        o.tol = opt_.tol;
        o.seed = opt_.seed;
        o.complete_clusters = false;
        o.keep_vectors = true;
        o.guess = guess_;
        const auto r = circuit::spectrum(p, o);
        const circuit::CircuitHamiltonian h(p);
        const auto g0 = circuit::level_gradient(h, r.vectors[0]);
        const auto g1 = circuit::level_gradient(h, r.vectors[1]);
        Eigen::VectorXd g(Eigen::Index(channels.size()));
        for (std::size_t k = 0; k < channels.size(); ++k) {
            const auto i = std::size_t(channels[k].index);
            switch (channels[k].kind) {
                case ChannelKind::Gate: g[Eigen::Index(k)] = g1.Ng[i] - g0.Ng[i]; break;
                case ChannelKind::InnerFlux: g[Eigen::Index(k)] = g1.Phi_I[i] - g0.Phi_I[i]; break;
                case ChannelKind::OuterFlux: g[Eigen::Index(k)] = g1.Phi_O[i] - g0.Phi_O[i]; break;
            }
        }
        return g;
    }

    double operator()(const CircuitParams& p) const {
        circuit::SpectrumOptions o;
        o.levels = 2;
        o.tol = opt_.tol;
        o.seed = opt_.seed;
        o.complete_clusters = false;
        o.guess = guess_;
        return circuit::spectrum(p, o).omega01;
    }

private:
    CircuitParams base_;
    FitOptions opt_;
    double omega_ref_ = 0;
    std::vector<spectra::Vector> guess_;
};

// Taylor coefficients of omega01 around p. Gradient method: D_x exact, column a
// of D_xx = (g(+h_a) - g(-h_a))/2h_a. Stencil method: D_x from (f(+h) - f(-h))/2h,
// diagonal D_xx from the 3-point stencil, cross terms from the 4-point stencil
// (f(++) - f(+-) - f(-+) + f(--))/(4 h_a h_b).
inline ResponseSurface fit_response_surface(const CircuitParams& p, const NoiseChannelSet& set,
                                            const StencilSteps& steps = {}, int d_fit = 6,
                                            const FitOptions& opt = {}) {
    CircuitParams base = p;
    base.d = d_fit;
    GapEvaluator gap(base, opt);
    const std::size_t n = set.size();
    ResponseSurface rs;
    rs.omega_ref = gap.omega_ref();
    rs.d_x = Eigen::VectorXd::Zero(Eigen::Index(n));
    rs.d_xx = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (const auto& c : set.channels) rs.labels.push_back(c.label());

    if (opt.method == FitMethod::Gradient) {
        std::vector<Eigen::VectorXd> cols(2 * n + 1);
        parallel_for(cols.size(), [&](std::size_t i) {
            if (i == 2 * n) {
                cols[i] = gap.gradient(base, set.channels);
                return;
            }
            const auto& c = set.channels[i / 2];
            const double h = (i % 2 == 0 ? 1.0 : -1.0) * step_for(c, steps);
            cols[i] = gap.gradient(shifted(base, c, h), set.channels);
        });
        rs.d_x = cols[2 * n];
        for (std::size_t a = 0; a < n; ++a)
            rs.d_xx.col(Eigen::Index(a)) = (cols[2 * a] - cols[2 * a + 1]) / (2 * step_for(set.channels[a], steps));
        rs.asymmetry = (rs.d_xx - rs.d_xx.transpose()).cwiseAbs().maxCoeff();
        if (steps.richardson) {
            for (std::size_t a = 0; a < n; ++a) {
                const auto& c = set.channels[a];
                const double h = 0.5 * step_for(c, steps);
                const auto gp = gap.gradient(shifted(base, c, h), set.channels);
                const auto gm = gap.gradient(shifted(base, c, -h), set.channels);
                const double half = (gp[Eigen::Index(a)] - gm[Eigen::Index(a)]) / (2 * h);
                const double full = rs.d_xx(Eigen::Index(a), Eigen::Index(a));
                if (full != 0.0)
                    rs.richardson_drift = std::max(rs.richardson_drift, std::abs(half - full) / std::abs(full));
            }
        }
        return rs;
    }

    struct Job {
        std::size_t a, b;
        double sa, sb;
        double value = 0;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < n; ++a) {
        jobs.push_back({a, a, +1, 0});
        jobs.push_back({a, a, -1, 0});
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            for (double sa : {+1.0, -1.0})
                for (double sb : {+1.0, -1.0}) jobs.push_back({a, b, sa, sb});

    auto point = [&](const Job& j, double scale) {
        const auto& ca = set.channels[j.a];
        CircuitParams q = shifted(base, ca, j.sa * scale * step_for(ca, steps));
        if (j.b != j.a) {
            const auto& cb = set.channels[j.b];
            q = shifted(q, cb, j.sb * scale * step_for(cb, steps));
        }
        return q;
    };
    parallel_for(jobs.size(), [&](std::size_t i) { jobs[i].value = gap(point(jobs[i], 1.0)); });

    const double f0 = rs.omega_ref;
    std::size_t idx = 0;
    for (std::size_t a = 0; a < n; ++a) {
        const double h = step_for(set.channels[a], steps);
        const double fp = jobs[idx++].value, fm = jobs[idx++].value;
        rs.d_x[Eigen::Index(a)] = (fp - fm) / (2 * h);
        rs.d_xx(Eigen::Index(a), Eigen::Index(a)) = (fp - 2 * f0 + fm) / (h * h);
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double ha = step_for(set.channels[a], steps), hb = step_for(set.channels[b], steps);
            const double fpp = jobs[idx++].value, fpm = jobs[idx++].value;
            const double fmp = jobs[idx++].value, fmm = jobs[idx++].value;
            const double dab = (fpp - fpm - fmp + fmm) / (4 * ha * hb);
            // the same stencil read with the roles of a and b exchanged
            const double dba = (fpp - fmp - fpm + fmm) / (4 * hb * ha);
            rs.asymmetry = std::max(rs.asymmetry, std::abs(dab - dba));
            rs.d_xx(Eigen::Index(a), Eigen::Index(b)) = dab;
            rs.d_xx(Eigen::Index(b), Eigen::Index(a)) = dba;
        }

    if (steps.richardson) {
        for (std::size_t a = 0; a < n; ++a) {
            const double h = 0.5 * step_for(set.channels[a], steps);
            const double fp = gap(shifted(base, set.channels[a], h));
            const double fm = gap(shifted(base, set.channels[a], -h));
            const double half = (fp - 2 * f0 + fm) / (h * h);
            const double full = rs.d_xx(Eigen::Index(a), Eigen::Index(a));
            if (full != 0.0) rs.richardson_drift = std::max(rs.richardson_drift, std::abs(half - full) / std::abs(full));
        }
    }
    return rs;
}

// ---------------------------------------------------------------------------
// Phase accumulation and coherence

inline constexpr double kGHzToRadPerSecond = 2 * std::numbers::pi * 1e9;

// phi(t_l) = integral of 2 pi delta omega01 (cumulative trapezoid), one trace per channel.
inline std::vector<double> accumulate_phase(const std::vector<NoiseTrace>& traces, const ResponseSurface& rs,
                                            std::size_t max_samples = 0) {
    if (traces.size() != std::size_t(rs.d_x.size()))
        throw ParameterError("accumulate_phase: " + std::to_string(traces.size()) + " traces for " +
                             std::to_string(rs.d_x.size()) + " channels");
    if (traces.empty()) return {};
    std::size_t len = traces.front().samples.size();
    const double dt = traces.front().dt;
    for (const auto& t : traces)
        if (t.samples.size() != len || t.dt != dt) throw ParameterError("accumulate_phase: ragged traces");
    if (max_samples) len = std::min(len, max_samples);

    const Eigen::Index nc = rs.d_x.size();
    std::vector<double> phi(len, 0.0);
    Eigen::VectorXd x(nc);
    double prev = 0.0;
    for (std::size_t l = 0; l < len; ++l) {
        for (Eigen::Index c = 0; c < nc; ++c) x[c] = traces[std::size_t(c)].samples[l];
        const double rate = kGHzToRadPerSecond * rs.delta(x);
        if (l > 0) phi[l] = phi[l - 1] + 0.5 * (prev + rate) * dt;
        prev = rate;
    }
    return phi;
}

struct CoherenceCurve {
    std::vector<double> t;   // s
    std::vector<cplx> f;     // ensemble mean of exp(-i phi)
    std::vector<double> err; // bootstrap std of |f|
    std::size_t ensemble = 0;
    std::vector<std::string> channels;
};

// phases[r][l]: trajectory r at time t[l].
inline CoherenceCurve coherence_curve(const std::vector<std::vector<double>>& phases, const std::vector<double>& t,
                                      std::size_t bootstrap = 200, std::uint64_t seed = 1) {
    if (phases.size() < 2) throw ParameterError("coherence_curve: ensemble size must be at least 2");
    const std::size_t len = t.size();
    for (const auto& p : phases)
        if (p.size() != len) throw ParameterError("coherence_curve: phase/time length mismatch");
    const std::size_t n = phases.size();
    CoherenceCurve c;
    c.t = t;
    c.ensemble = n;
    c.f.assign(len, 0.0);
    std::vector<std::vector<cplx>> e(n, std::vector<cplx>(len));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t l = 0; l < len; ++l) {
            e[r][l] = std::polar(1.0, -phases[r][l]);
            c.f[l] += e[r][l];
        }
    for (auto& v : c.f) v /= double(n);

    c.err.assign(len, 0.0);
    if (bootstrap > 1) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> s1(len, 0.0), s2(len, 0.0);
        std::vector<cplx> acc(len);
        for (std::size_t b = 0; b < bootstrap; ++b) {
            std::fill(acc.begin(), acc.end(), cplx(0.0));
            for (std::size_t r = 0; r < n; ++r) {
                const auto& row = e[pick(rng)];
                for (std::size_t l = 0; l < len; ++l) acc[l] += row[l];
            }
            for (std::size_t l = 0; l < len; ++l) {
                const double a = std::abs(acc[l]) / double(n);
                s1[l] += a;
                s2[l] += a * a;
            }
        }
        for (std::size_t l = 0; l < len; ++l) {
            const double m = s1[l] / double(bootstrap);
            c.err[l] = std::sqrt(std::max(0.0, s2[l] / double(bootstrap) - m * m));
        }
    }
    return c;
}

struct DephasingTime {
    double t_phi = 0;  // s
    bool lower_bound = false;  // no 1/e crossing inside the record
};

inline DephasingTime dephasing_time(const CoherenceCurve& c) {
    const double target = std::exp(-1.0);
    for (std::size_t l = 1; l < c.t.size(); ++l) {
        const double a = std::abs(c.f[l - 1]), b = std::abs(c.f[l]);
        if (b < target) {
            const double w = (a - target) / (a - b);
            return {c.t[l - 1] + w * (c.t[l] - c.t[l - 1]), false};
        }
    }
    return {c.t.empty() ? 0.0 : c.t.back(), true};
}

// ---------------------------------------------------------------------------
// Monte Carlo pipeline

struct MonteCarloSettings {
    std::size_t n = 199'999;     // samples per record (odd)
    double df = 5.0;             // Hz
    std::size_t ensemble = 400;
    std::size_t output_points = 4000;  // coherence grid size (decimated)
    std::size_t bootstrap = 200;
    std::uint64_t seed = 1;
    std::string preset = "desk";

    static MonteCarloSettings desk() { return {}; }
    static MonteCarloSettings full() {
        MonteCarloSettings s;
        s.n = 1'999'999;
        s.df = 0.5;
        s.preset = "full";
        return s;
    }
};

struct DephasingResult {
    ResponseSurface surface;
    CoherenceCurve curve;
    DephasingTime t_phi;
};

// Cumulative trapezoid integrals of x_a and x_a x_b (a <= b) for every
// trajectory, sampled on a decimated time grid. The phase of any quadratic
// response surface over the same channels is a linear contraction of these,
// so one noise ensemble serves many surfaces.
class PhaseMoments {
public:
    PhaseMoments() = default;

    PhaseMoments(const NoiseChannelSet& set, const MonteCarloSettings& mc)
        : nc_(set.size()), ensemble_(mc.ensemble), seed_(mc.seed) {
        if (mc.n % 2 == 0) throw ParameterError("PhaseMoments: N must be odd");
        if (mc.ensemble < 2) throw ParameterError("PhaseMoments: ensemble size must be at least 2");
        stride_ = std::max<std::size_t>(1, mc.n / std::max<std::size_t>(1, mc.output_points));
        len_ = (mc.n + stride_ - 1) / stride_;
        const double dt = 1.0 / (double(mc.n) * mc.df);
        t_.resize(len_);
        for (std::size_t l = 0; l < len_; ++l) t_[l] = double(l * stride_) * dt;
        for (const auto& c : set.channels) labels_.push_back(c.label());

        const std::size_t nq = series();
        data_.assign(ensemble_ * nq * len_, 0.0);
        parallel_for(ensemble_, [&](std::size_t r) {
            std::vector<NoiseTrace> traces;
            traces.reserve(nc_);
            for (std::size_t c = 0; c < nc_; ++c)
                traces.push_back(sample_noise(set.psd[c], mc.n, mc.df, derive_seed(mc.seed, c + 1, r)));
            std::vector<double> acc(nq, 0.0), prev(nq, 0.0), cur(nq);
            double* out = &data_[r * nq * len_];
            for (std::size_t l = 0; l < mc.n; ++l) {
                std::size_t q = 0;
                for (std::size_t a = 0; a < nc_; ++a) cur[q++] = traces[a].samples[l];
                for (std::size_t a = 0; a < nc_; ++a)
                    for (std::size_t b = a; b < nc_; ++b) cur[q++] = traces[a].samples[l] * traces[b].samples[l];
                if (l > 0)
                    for (q = 0; q < nq; ++q) acc[q] += 0.5 * (prev[q] + cur[q]) * dt;
                std::swap(prev, cur);
                if (l % stride_ == 0)
                    for (q = 0; q < nq; ++q) out[q * len_ + l / stride_] = acc[q];
            }
        });
    }

    std::size_t channels() const { return nc_; }
    std::size_t ensemble() const { return ensemble_; }
    std::size_t series() const { return nc_ + nc_ * (nc_ + 1) / 2; }
    const std::vector<double>& times() const { return t_; }
    const std::vector<std::string>& labels() const { return labels_; }
    std::uint64_t seed() const { return seed_; }

    // Phase of trajectory r (radians) for a surface; entries scaled in place.
    std::vector<double> phase(std::size_t r, const ResponseSurface& rs) const {
        const auto w = weights(rs);
        std::vector<double> phi(len_, 0.0);
        const double* base = &data_[r * series() * len_];
        for (std::size_t q = 0; q < w.size(); ++q) {
            if (w[q] == 0.0) continue;
            const double* row = base + q * len_;
            for (std::size_t l = 0; l < len_; ++l) phi[l] += w[q] * row[l];
        }
        return phi;
    }

    std::vector<std::vector<double>> phases(const ResponseSurface& rs) const {
        if (std::size_t(rs.d_x.size()) != nc_) throw ParameterError("PhaseMoments: surface/channel mismatch");
        std::vector<std::vector<double>> out(ensemble_);
        parallel_for(ensemble_, [&](std::size_t r) { out[r] = phase(r, rs); });
        return out;
    }

private:
    // delta omega = sum_a D_a x_a + (1/2) sum_ab D_ab x_a x_b, converted to rad/s
    std::vector<double> weights(const ResponseSurface& rs) const {
        std::vector<double> w;
        w.reserve(series());
        for (std::size_t a = 0; a < nc_; ++a) w.push_back(kGHzToRadPerSecond * rs.d_x[Eigen::Index(a)]);
        for (std::size_t a = 0; a < nc_; ++a)
            for (std::size_t b = a; b < nc_; ++b) {
                const auto ia = Eigen::Index(a), ib = Eigen::Index(b);
                const double d = a == b ? 0.5 * rs.d_xx(ia, ia) : 0.5 * (rs.d_xx(ia, ib) + rs.d_xx(ib, ia));
                w.push_back(kGHzToRadPerSecond * d);
            }
        return w;
    }

    std::size_t nc_ = 0, ensemble_ = 0, stride_ = 1, len_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> t_;
    std::vector<std::string> labels_;
    std::vector<double> data_;  // [trajectory][series][time]
};

inline CoherenceCurve coherence_from_moments(const PhaseMoments& pm, const ResponseSurface& rs, std::size_t bootstrap,
                                             std::uint64_t seed) {
    auto curve = coherence_curve(pm.phases(rs), pm.times(), bootstrap, derive_seed(seed, 0xB007));
    curve.channels = pm.labels();
    return curve;
}

// Ensemble for one fitted surface. Trajectory r, channel c draws its record
// from seed derive_seed(seed, c + 1, r), so results do not depend on scheduling.
inline CoherenceCurve simulate_coherence(const ResponseSurface& rs, const NoiseChannelSet& set,
                                         const MonteCarloSettings& mc) {
    if (set.size() != std::size_t(rs.d_x.size())) throw ParameterError("simulate_coherence: channel mismatch");
    return coherence_from_moments(PhaseMoments(set, mc), rs, mc.bootstrap, mc.seed);
}

inline DephasingResult dephasing(const CircuitParams& p, const NoiseChannelSet& set, const MonteCarloSettings& mc,
                                 int d_fit = 6, const StencilSteps& steps = {}, const FitOptions& fit = {}) {
    DephasingResult r;
    r.surface = fit_response_surface(p, set, steps, d_fit, fit);
    r.curve = simulate_coherence(r.surface, set, mc);
    r.t_phi = dephasing_time(r.curve);
    return r;
}

}  // namespace ringsim::noise
