#pragma once

// Fabrication-disorder ensembles. Each of the 15 junctions draws X and Y,
// each of the 9 loops draws Z, each gate draws an additive offset G:
//
//   E_J -> E_J (1+X)(1+Y),  E_C -> E_C / (1+X),  Phi -> Phi (1+Z),  Ng -> Ng + G
//
// Draws come from a generator seeded by (base seed, realization index), so a
// realization never depends on scheduling.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ringsim/circuit.hpp"
#include "ringsim/error.hpp"
#include "ringsim/noise.hpp"
#include "ringsim/parallel.hpp"

namespace ringsim::disorder {

using circuit::CircuitParams;

struct DisorderSpec {
    double sigma_junction = 0.02;
    double sigma_loop = 0.002;
    double sigma_gate = 0.001;  // Cooper pairs, absolute
    std::size_t realizations = 20;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(sigma_junction >= 0 && sigma_loop >= 0 && sigma_gate >= 0))
            throw ParameterError("DisorderSpec: standard deviations must be non-negative");
        if (realizations == 0) throw ParameterError("DisorderSpec: need at least one realization");
    }
};

struct Realization {
    CircuitParams params;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::size_t resamples = 0;  // junction draws rejected for a non-positive factor
};

inline Realization sample_realization(const CircuitParams& base, const DisorderSpec& spec, std::size_t index) {
    spec.validate();
    Realization r;
    r.params = base;
    r.index = index;
    r.seed = noise::derive_seed(spec.seed, 0xD15, index);
    std::mt19937_64 rng(r.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto& p = r.params;
    for (int k = 0; k < circuit::kJunctions; ++k) {
        double x = 0, y = 0;
        for (;;) {
            x = spec.sigma_junction * unit(rng);
            y = spec.sigma_junction * unit(rng);
            if (1 + x > 0 && 1 + y > 0) break;
            ++r.resamples;
        }
        p.J_scale[std::size_t(k)] *= (1 + x) * (1 + y);
        p.C_scale[std::size_t(k)] /= 1 + x;
    }
    for (auto& f : p.Phi_I) f *= 1 + spec.sigma_loop * unit(rng);
    for (auto& f : p.Phi_O) f *= 1 + spec.sigma_loop * unit(rng);
    for (auto& g : p.Ng) g += spec.sigma_gate * unit(rng);
    return r;
}

struct EnsembleOptions {
    bool gap = true;
    bool tphi_charge = false;
    bool tphi_flux = false;
    int d_gap = 8;
    int d_fit = 6;
    double gap_tol = 1e-10;
    noise::MonteCarloSettings mc;
    noise::StencilSteps steps;
    noise::FitOptions fit;
    noise::NoiseChannelSet charge = noise::charge_channels();
    noise::NoiseChannelSet flux = noise::flux_channels();
    std::function<void(std::size_t done, std::size_t total)> progress;
};

struct RealizationRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::size_t resamples = 0;
    double omega01 = std::numeric_limits<double>::quiet_NaN();    // GHz
    double t_phi_c = std::numeric_limits<double>::quiet_NaN();    // s
    double t_phi_f = std::numeric_limits<double>::quiet_NaN();    // s
    bool t_phi_c_bound = false;  // decay not reached inside the record
    bool t_phi_f_bound = false;
    bool ok = true;
    std::string error;
};

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
};

struct ObservableSummary {
    std::string name;
    std::size_t n = 0;
    double mean = 0;
    double std = 0;  // sample standard deviation
    Histogram hist;
};

struct EnsembleSummary {
    std::vector<RealizationRecord> records;
    std::vector<ObservableSummary> observables;
    std::size_t failures = 0;
    std::size_t resamples = 0;

    const ObservableSummary* find(const std::string& name) const {
        for (const auto& o : observables)
            if (o.name == name) return &o;
        return nullptr;
    }
};

// Equal-width bins over [min, max]; every value lands in exactly one bin.
inline Histogram histogram(const std::vector<double>& v, std::size_t bins = 0) {
    Histogram h;
    if (v.empty()) return h;
    if (bins == 0) bins = std::max<std::size_t>(1, std::size_t(std::ceil(std::sqrt(double(v.size())))));
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) bins = 1;
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(i == bins ? hi : lo + (hi - lo) * double(i) / double(bins));
    h.counts.assign(bins, 0);
    for (double x : v) {
        std::size_t b = hi == lo ? 0 : std::size_t((x - lo) / (hi - lo) * double(bins));
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

// Welford accumulation: identical inputs give exactly that mean and zero spread.
inline ObservableSummary summarize(const std::string& name, const std::vector<double>& v, std::size_t bins = 0) {
    ObservableSummary s;
    s.name = name;
    double m2 = 0;
    for (double x : v) {
        ++s.n;
        const double d = x - s.mean;
        s.mean += d / double(s.n);
        m2 += d * (x - s.mean);
    }
    s.std = s.n > 1 ? std::sqrt(std::max(0.0, m2 / double(s.n - 1))) : 0.0;
    s.hist = histogram(v, bins);
    return s;
}

inline double realization_gap(const CircuitParams& p, int d, double tol) {
    CircuitParams q = p;
    q.d = d;
    circuit::SpectrumOptions o;
    o.levels = 2;
    o.tol = tol;
    o.complete_clusters = false;
    return circuit::spectrum(q, o).omega01;
}

// One noise ensemble per channel set is shared by all realizations, so ensemble
// spread reflects the disorder alone.
inline EnsembleSummary ensemble_run(const CircuitParams& base, const DisorderSpec& spec, const EnsembleOptions& opt) {
    spec.validate();
    std::optional<noise::PhaseMoments> pm_c, pm_f;
    if (opt.tphi_charge) pm_c.emplace(opt.charge, opt.mc);
    if (opt.tphi_flux) pm_f.emplace(opt.flux, opt.mc);

    EnsembleSummary out;
    out.records.resize(spec.realizations);
    std::size_t done = 0;
    std::mutex progress_mutex;
    parallel_for(spec.realizations, [&](std::size_t i) {
        const auto real = sample_realization(base, spec, i);
        auto& rec = out.records[i];
        rec.index = i;
        rec.seed = real.seed;
        rec.resamples = real.resamples;
        try {
            if (opt.gap) rec.omega01 = realization_gap(real.params, opt.d_gap, opt.gap_tol);
            auto tphi = [&](const noise::NoiseChannelSet& set, const noise::PhaseMoments& pm, double& t, bool& bound) {
                const auto rs = noise::fit_response_surface(real.params, set, opt.steps, opt.d_fit, opt.fit);
                const auto curve = noise::coherence_from_moments(pm, rs, opt.mc.bootstrap, opt.mc.seed);
                const auto tp = noise::dephasing_time(curve);
                t = tp.t_phi;
                bound = tp.lower_bound;
            };
            if (pm_c) tphi(opt.charge, *pm_c, rec.t_phi_c, rec.t_phi_c_bound);
            if (pm_f) tphi(opt.flux, *pm_f, rec.t_phi_f, rec.t_phi_f_bound);
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        if (opt.progress) {
            std::lock_guard lock(progress_mutex);
            opt.progress(++done, spec.realizations);
        }
    });

    std::vector<double> gap, tc, tf;
    for (const auto& r : out.records) {
        out.resamples += r.resamples;
        if (!r.ok) {
            ++out.failures;
            continue;
        }
        if (opt.gap) gap.push_back(r.omega01);
        if (opt.tphi_charge) tc.push_back(r.t_phi_c);
        if (opt.tphi_flux) tf.push_back(r.t_phi_f);
    }
    if (opt.gap) out.observables.push_back(summarize("omega01_GHz", gap));
    if (opt.tphi_charge) out.observables.push_back(summarize("t_phi_c_s", tc));
    if (opt.tphi_flux) out.observables.push_back(summarize("t_phi_f_s", tf));
    return out;
}

}  // namespace ringsim::disorder
