#pragma once

// Manifest-driven experiment runs. A manifest names one experiment, a preset
// (desk | full), a seed, an output root and a parameter block. Resolution fills
// every parameter from the preset defaults and rejects unknown keys; the
// resolved manifest alone reproduces a run. Outputs go to
// <output>/<experiment>-<hash of the resolved manifest>/.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringsim/circuit.hpp"
#include "ringsim/disorder.hpp"
#include "ringsim/error.hpp"
#include "ringsim/io.hpp"
#include "ringsim/noise.hpp"
#include "ringsim/parallel.hpp"
#include "ringsim/potential.hpp"
#include "ringsim/sparse_spectra.hpp"
#include "ringsim/spin_chain.hpp"

namespace ringsim::runner {

using json = nlohmann::json;

inline const std::vector<std::string>& experiments() {
    static const std::vector<std::string> ids{"spin-map",    "circuit-spectrum", "potential-map",
                                              "spectroscopy", "dephasing",        "disorder"};
    return ids;
}

struct Manifest {
    std::string experiment;
    std::string preset = "desk";
    std::uint64_t seed = 1;
    std::string output = "out";
    json params = json::object();

    json to_json() const {
        return {{"experiment", experiment}, {"preset", preset}, {"seed", seed}, {"output", output}, {"params", params}};
    }
};

// ---------------------------------------------------------------------------
// Defaults

inline json circuit_block() {
    const auto p = circuit::CircuitParams::white_cross();
    return {{"E_Jr", p.E_Jr}, {"E_Cr", p.E_Cr}, {"E_Ja", p.E_Ja}, {"E_Ca", p.E_Ca},   {"E_Jl", p.E_Jl},
            {"E_Cl", p.E_Cl}, {"Ng", p.Ng},     {"Phi_I", p.Phi_I}, {"Phi_O", p.Phi_O}};
}

inline json range(double lo, double hi, std::size_t n) { return {{"min", lo}, {"max", hi}, {"n", n}}; }

inline json monte_carlo_block(bool full) {
    const auto mc = full ? noise::MonteCarloSettings::full() : noise::MonteCarloSettings::desk();
    return {{"n", mc.n},
            {"df", mc.df},
            {"ensemble", mc.ensemble},
            {"output_points", mc.output_points},
            {"bootstrap", mc.bootstrap},
            {"A_charge_e2", 4e-8},
            {"A_flux", 4e-12},
            {"f_ir", 1.0},
            {"f_uv", 1e6},
            {"charge_step", 1e-3},
            {"flux_step", 1e-5},
            {"fit_tol", 1e-12},
            {"fit_method", "gradient"}};
}

inline json default_params(const std::string& experiment, const std::string& preset) {
    const bool full = preset == "full";
    const double pi = std::numbers::pi;
    if (experiment == "spin-map")
        return {{"M", 6}, {"t", 1.0}, {"zeta", range(-2, 2, full ? 101 : 21)}, {"lambda", range(-2, 2, full ? 101 : 21)}};
    if (experiment == "circuit-spectrum")
        return {{"circuit", circuit_block()},
                {"d", full ? 10 : 8},
                {"levels", 3},
                {"tol", 1e-10},
                {"convergence_check", true},
                {"write_vectors", false},
                {"map",
                 {{"enabled", false},
                  {"d", full ? 6 : 4},
                  {"ecr_over_eja", range(0.25, 2.0, full ? 36 : 8)},
                  {"ejl_over_eja", range(1.0, 8.0, full ? 36 : 8)}}}};
    if (experiment == "potential-map")
        return {{"circuit", circuit_block()}, {"x", range(-pi, pi, full ? 401 : 101)}, {"y", range(-pi, pi, full ? 401 : 101)}};
    if (experiment == "spectroscopy")
        return {{"circuit", circuit_block()},
                {"d", full ? 10 : 6},
                {"tol", 1e-10},
                {"dq_tot", range(-0.1, 0.1, full ? 41 : 11)},
                {"dphi_tot", range(0.0, 0.2, full ? 81 : 21)}};
    if (experiment == "dephasing")
        return {{"circuit", circuit_block()},
                {"d_fit", full ? 10 : 6},
                {"noise", {"charge", "flux"}},
                {"monte_carlo", monte_carlo_block(full)}};
    if (experiment == "disorder")
        return {{"circuit", circuit_block()},
                {"sigma_junction", 0.02},
                {"sigma_loop", 0.0},
                {"sigma_gate", 0.0},
                {"realizations", full ? 200 : 20},
                {"gap", true},
                {"tphi_charge", true},
                {"tphi_flux", true},
                {"d_gap", full ? 10 : 8},
                {"d_fit", full ? 10 : 6},
                {"gap_tol", 1e-10},
                {"monte_carlo", monte_carlo_block(full)}};
    throw ParameterError("experiment: unknown id '" + experiment + "'");
}

// ---------------------------------------------------------------------------
// Resolution

namespace detail {

inline void merge(json& base, const json& over, const std::string& path) {
    if (!over.is_object()) throw ParameterError(path + ": expected an object");
    for (auto it = over.begin(); it != over.end(); ++it) {
        const std::string key = path + "." + it.key();
        if (!base.contains(it.key())) throw ParameterError(key + ": unknown key");
        json& slot = base[it.key()];
        const json& v = it.value();
        if (slot.is_object()) {
            merge(slot, v, key);
        } else if (slot.is_number()) {
            if (!v.is_number()) throw ParameterError(key + ": expected a number");
            if (slot.is_number_integer() && !v.is_number_integer()) throw ParameterError(key + ": expected an integer");
            if (slot.is_number_unsigned() && v.is_number_integer() && v.get<long long>() < 0)
                throw ParameterError(key + ": expected a non-negative integer");
            // keep floating defaults floating so 1 and 1.0 resolve alike
            if (slot.is_number_float()) slot = v.get<double>();
            else slot = v;
        } else if (slot.is_boolean()) {
            if (!v.is_boolean()) throw ParameterError(key + ": expected true or false");
            slot = v;
        } else if (slot.is_string()) {
            if (!v.is_string()) throw ParameterError(key + ": expected a string");
            slot = v;
        } else if (slot.is_array()) {
            if (!v.is_array()) throw ParameterError(key + ": expected an array");
            // fixed-size numeric vectors keep their length
            if (!slot.empty() && slot.front().is_number()) {
                if (v.size() != slot.size())
                    throw ParameterError(key + ": expected " + std::to_string(slot.size()) + " entries");
                for (const auto& e : v)
                    if (!e.is_number()) throw ParameterError(key + ": expected numbers");
            }
            slot = v;
        }
    }
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

struct Overrides {
    std::optional<std::string> preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
};

inline Manifest resolve(const json& doc, const Overrides& ov = {}) {
    if (!doc.is_object()) throw ParameterError("manifest: top level must be an object");
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "experiment" && it.key() != "preset" && it.key() != "seed" && it.key() != "output" &&
            it.key() != "params")
            throw ParameterError(it.key() + ": unknown key");
    Manifest m;
    if (!doc.contains("experiment") || !doc["experiment"].is_string())
        throw ParameterError("experiment: required string");
    m.experiment = doc["experiment"].get<std::string>();
    if (std::find(experiments().begin(), experiments().end(), m.experiment) == experiments().end())
        throw ParameterError("experiment: unknown id '" + m.experiment + "'");
    if (doc.contains("preset")) {
        if (!doc["preset"].is_string()) throw ParameterError("preset: expected a string");
        m.preset = doc["preset"].get<std::string>();
    }
    if (ov.preset) m.preset = *ov.preset;
    if (m.preset != "desk" && m.preset != "full") throw ParameterError("preset: expected desk or full");
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0)
            throw ParameterError("seed: expected a non-negative integer");
        m.seed = doc["seed"].get<std::uint64_t>();
    }
    if (ov.seed) m.seed = *ov.seed;
    if (doc.contains("output")) {
        if (!doc["output"].is_string()) throw ParameterError("output: expected a string");
        m.output = doc["output"].get<std::string>();
    }
    if (ov.output) m.output = *ov.output;
    m.params = default_params(m.experiment, m.preset);
    if (doc.contains("params")) detail::merge(m.params, doc["params"], "params");
    return m;
}

inline Manifest load_manifest(const std::filesystem::path& path, const Overrides& ov = {}) {
    json doc;
    try {
        doc = json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParameterError("manifest: " + std::string(e.what()));
    }
    return resolve(doc, ov);
}

// Identity of a run: everything except the output root.
inline std::string run_hash(const Manifest& m) {
    const json id = {{"experiment", m.experiment}, {"preset", m.preset}, {"seed", m.seed}, {"params", m.params}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(id.dump())));
    return std::string(buf).substr(0, 12);
}

inline std::filesystem::path run_directory(const Manifest& m) {
    return std::filesystem::path(m.output) / (m.experiment + "-" + run_hash(m));
}

// ---------------------------------------------------------------------------
// Parameter extraction

inline circuit::CircuitParams circuit_from(const json& b) {
    circuit::CircuitParams p;
    p.E_Jr = b.at("E_Jr");
    p.E_Cr = b.at("E_Cr");
    p.E_Ja = b.at("E_Ja");
    p.E_Ca = b.at("E_Ca");
    p.E_Jl = b.at("E_Jl");
    p.E_Cl = b.at("E_Cl");
    p.Ng = b.at("Ng").get<std::array<double, circuit::kNodes>>();
    p.Phi_I = b.at("Phi_I").get<std::array<double, circuit::kNodes>>();
    p.Phi_O = b.at("Phi_O").get<std::array<double, circuit::kOuter>>();
    return p;
}

inline std::vector<double> grid_from(const json& r, const std::string& key) {
    const std::size_t n = r.at("n");
    if (n == 0) throw ParameterError(key + ".n: must be positive");
    return spin::linspace(r.at("min"), r.at("max"), n);
}

inline noise::MonteCarloSettings mc_from(const json& b, const std::string& preset, std::uint64_t seed) {
    noise::MonteCarloSettings mc;
    mc.n = b.at("n");
    mc.df = b.at("df");
    mc.ensemble = b.at("ensemble");
    mc.output_points = b.at("output_points");
    mc.bootstrap = b.at("bootstrap");
    mc.seed = seed;
    mc.preset = preset;
    if (mc.n % 2 == 0) throw ParameterError("params.monte_carlo.n: must be odd");
    return mc;
}

inline noise::FitOptions fit_from(const json& b, std::uint64_t seed) {
    noise::FitOptions f;
    f.tol = b.at("fit_tol");
    f.seed = seed;
    const std::string method = b.at("fit_method");
    if (method == "gradient") f.method = noise::FitMethod::Gradient;
    else if (method == "stencil") f.method = noise::FitMethod::Stencil;
    else throw ParameterError("params.monte_carlo.fit_method: expected gradient or stencil");
    return f;
}

// ---------------------------------------------------------------------------
// Experiments

struct RunContext {
    Manifest manifest;
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
    std::ostream* log = nullptr;

    void say(const std::string& s) const {
        if (log) *log << s << std::endl;
    }

    void write(const std::string& name, const std::string& content) {
        io::write_atomic(dir / name, content);
        files.push_back(dir / name);
    }

    io::CsvTable table(std::vector<std::string> header) const {
        io::CsvTable t;
        t.header = std::move(header);
        t.note("experiment", manifest.experiment);
        t.note("preset", manifest.preset);
        t.note("seed", static_cast<unsigned long long>(manifest.seed));
        t.note("run", run_hash(manifest));
        return t;
    }
};

inline void run_spin_map(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    spin::SpinChainParams p;
    p.M = q.at("M");
    p.t = q.at("t");
    const auto zetas = grid_from(q.at("zeta"), "params.zeta");
    const auto lambdas = grid_from(q.at("lambda"), "params.lambda");
    ctx.say("spin-map: " + std::to_string(zetas.size() * lambdas.size()) + " points, M = " + std::to_string(p.M));
    const auto rows = spin::sweep_protection_map(p, zetas, lambdas);
    auto t = ctx.table({"zeta", "lambda", "gap", "R", "D", "flag_T", "flag_I", "flag_N", "n0", "n1", "iota0", "iota1"});
    t.note("M", p.M);
    t.note("t", p.t);
    std::size_t protected_points = 0;
    double max_r = 0, max_d = 0;
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        t.row(r.zeta, r.lambda, r.gap, m.R, m.D, m.flag_T, m.flag_I, m.flag_N, m.n0, m.n1, m.iota0, m.iota1);
        if (m.all()) {
            ++protected_points;
            max_r = std::max(max_r, m.R);
            max_d = std::max(max_d, m.D);
        }
    }
    t.note("protected_points", protected_points);
    t.note("max_R_protected", max_r);
    t.note("max_D_protected", max_d);
    ctx.write("spin_map.csv", t.str());
}

inline void run_circuit_spectrum(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    auto p = circuit_from(q.at("circuit"));
    p.d = q.at("d");
    circuit::SpectrumOptions o;
    o.levels = q.at("levels");
    o.levels = std::max<std::size_t>(o.levels, 3);
    o.tol = q.at("tol");
    o.seed = ctx.manifest.seed;
    o.convergence_check = q.at("convergence_check");
    o.keep_vectors = true;
    ctx.say("circuit-spectrum: d = " + std::to_string(p.d) + ", dimension " + std::to_string(p.dim()));
    const auto sr = circuit::spectrum(p, o);
    auto t = ctx.table({"d", "omega01", "omega12", "alpha", "E0", "E1", "E2", "convergence_delta", "max_residual",
                        "iterations"});
    t.note("units", "GHz");
    double max_res = 0;
    for (double r : sr.residuals) max_res = std::max(max_res, r);
    const double delta = sr.convergence_delta.value_or(std::nan(""));
    if (sr.convergence_delta) {
        t.note("convergence_d_minus_2_GHz", delta);
        t.note("convergence_relative", delta / sr.omega01);
    }
    t.row(p.d, sr.omega01, sr.omega12, sr.alpha, sr.eigenvalues[0], sr.eigenvalues[1], sr.eigenvalues[2], delta, max_res,
          static_cast<unsigned long long>(sr.iterations));
    ctx.write("spectrum.csv", t.str());

    const auto rep = circuit::protection_from_spectrum(p, sr);
    auto pt = ctx.table({"node", "abs_n10", "abs_cos10", "abs_sin10", "dz"});
    pt.note("max_abs_n10", rep.max_abs_n10);
    pt.note("max_abs_dz", rep.max_abs_dz);
    for (const auto& r : rep.rows) pt.row(r.node, r.abs_n10, r.abs_cos10, r.abs_sin10, r.dz);
    ctx.write("protection.csv", pt.str());

    if (q.at("write_vectors").get<bool>()) {
        const auto path = ctx.dir / "eigenvectors.bin";
        auto tmp = path;
        tmp += ".tmp";
        spectra::write_eigenvectors(tmp, sr.vectors);
        std::filesystem::rename(tmp, path);
        ctx.files.push_back(path);
    }

    const auto& mp = q.at("map");
    if (mp.at("enabled").get<bool>()) {
        const int d = mp.at("d");
        const auto a = grid_from(mp.at("ecr_over_eja"), "params.map.ecr_over_eja");
        const auto b = grid_from(mp.at("ejl_over_eja"), "params.map.ejl_over_eja");
        ctx.say("circuit-spectrum: plasma-constrained map, " + std::to_string(a.size() * b.size()) + " points at d = " +
                std::to_string(d));
        circuit::SpectrumOptions mo;
        mo.tol = o.tol;
        mo.seed = o.seed;
        const auto rows = circuit::fig2b_map(a, b, d, 1e-6, mo);
        auto mt = ctx.table({"ecr_over_eja", "ejl_over_eja", "omega01", "alpha", "symmetric", "ok"});
        mt.note("d", d);
        mt.note("E_Ja", 6.0);
        mt.note("plasma_GHz", 10.0);
        for (const auto& r : rows) mt.row(r.ecr_over_eja, r.ejl_over_eja, r.omega01, r.alpha, r.symmetric, r.ok);
        ctx.write("map.csv", mt.str());
    }
}

inline json currents_json(const landscape::JunctionCurrents& c) {
    return {{"azimuthal_over_Ic", c.azimuthal},
            {"outer_over_Ic", c.outer},
            {"radial_over_Ic", c.radial},
            {"I_ca_nA", c.I_ca},
            {"I_cl_nA", c.I_cl},
            {"I_cr_nA", c.I_cr}};
}

inline void run_potential_map(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    const auto pp = landscape::PotentialParams::from_circuit(circuit_from(q.at("circuit")));
    pp.validate();
    const auto xs = grid_from(q.at("x"), "params.x"), ys = grid_from(q.at("y"), "params.y");
    ctx.say("potential-map: " + std::to_string(xs.size() * ys.size()) + " points");
    auto t = ctx.table({"x", "y", "V"});
    t.note("units", "GHz");
    t.note("plane", "phi_m = (m+1) x + y, m = 0..5");
    for (const auto& r : landscape::raster(pp, xs, ys)) t.row(r.x, r.y, r.V);
    ctx.write("raster.csv", t.str());

    json rep = json::object();
    const double third = 2 * std::numbers::pi / 3;
    for (int side : {+1, -1}) {
        const std::string name = side > 0 ? "anticlockwise" : "clockwise";
        const auto bar = side > 0 ? landscape::anticlockwise_point() : landscape::clockwise_point();
        json e;
        const double lo = side > 0 ? third - 0.6 : -third - 0.6;
        e["cut_minimum_x"] = landscape::refine_cut_minimum(pp, 0.0, lo, lo + 1.2);
        e["cut_minimum_offset_from_2pi_over_3"] = std::abs(e["cut_minimum_x"].get<double>()) - third;
        e["current_state"] = {{"phi", bar},
                              {"energy", landscape::potential(pp, bar)},
                              {"grad_norm", landscape::norm(landscape::gradient(pp, bar))},
                              {"currents", currents_json(landscape::junction_currents(pp, bar))}};
        const auto c = landscape::junction_currents(pp, bar);
        e["current_state"]["I_p_nA"] = c.I_ca * std::abs(c.azimuthal[0]);
        const auto m = landscape::find_minimum(pp, bar);
        e["relaxed_minimum"] = {{"phi", m.point},
                                {"energy", m.energy},
                                {"grad_norm", m.grad_norm},
                                {"iterations", m.iterations},
                                {"currents", currents_json(landscape::junction_currents(pp, m.point))}};
        rep[name] = e;
    }
    ctx.write("minima.json", rep.dump(2) + "\n");
}

inline void run_spectroscopy(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    auto p = circuit_from(q.at("circuit"));
    p.d = q.at("d");
    circuit::SpectrumOptions o;
    o.tol = q.at("tol");
    o.seed = ctx.manifest.seed;
    const auto dq = grid_from(q.at("dq_tot"), "params.dq_tot");
    const auto dphi = grid_from(q.at("dphi_tot"), "params.dphi_tot");
    ctx.say("spectroscopy: " + std::to_string(dq.size()) + " charge and " + std::to_string(dphi.size()) +
            " flux points at d = " + std::to_string(p.d));
    auto rows = circuit::spectroscopy_sweep(p, dq, {0.0}, o);
    const auto fr = circuit::spectroscopy_sweep(p, {0.0}, dphi, o);
    rows.insert(rows.end(), fr.begin(), fr.end());
    const auto a = circuit::analyze_spectroscopy(rows);
    auto t = ctx.table({"dq_tot", "dphi_tot", "omega01", "omega02", "omega03", "omega04", "ok"});
    t.note("units", "GHz; dq_tot in Cooper pairs; dphi_tot in Phi0");
    t.note("d", p.d);
    t.note("flux_slope_GHz_per_Phi0", a.flux_slope);
    t.note("crossing_GHz", a.crossing);
    t.note("charge_max_relative_change", a.charge_rel_change);
    for (const auto& r : rows) t.row(r.dq_tot, r.dphi_tot, r.omega[0], r.omega[1], r.omega[2], r.omega[3], r.ok);
    ctx.write("spectroscopy.csv", t.str());
}

inline noise::NoiseChannelSet channel_set(const std::string& kind, const json& mc) {
    if (kind == "charge") return noise::charge_channels(mc.at("A_charge_e2"), mc.at("f_ir"), mc.at("f_uv"));
    if (kind == "flux") return noise::flux_channels(mc.at("A_flux"), mc.at("f_ir"), mc.at("f_uv"));
    throw ParameterError("params.noise: expected charge or flux, got '" + kind + "'");
}

inline json surface_json(const noise::ResponseSurface& rs) {
    json dxx = json::array();
    for (Eigen::Index i = 0; i < rs.d_xx.rows(); ++i) {
        std::vector<double> row(std::size_t(rs.d_xx.cols()));
        for (Eigen::Index j = 0; j < rs.d_xx.cols(); ++j) row[std::size_t(j)] = rs.d_xx(i, j);
        dxx.push_back(row);
    }
    return {{"labels", rs.labels},
            {"omega_ref_GHz", rs.omega_ref},
            {"D_x", std::vector<double>(rs.d_x.data(), rs.d_x.data() + rs.d_x.size())},
            {"D_xx", dxx},
            {"asymmetry", rs.asymmetry}};
}

inline void run_dephasing(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    const auto p = circuit_from(q.at("circuit"));
    const int d_fit = q.at("d_fit");
    const auto& mcb = q.at("monte_carlo");
    const auto mc = mc_from(mcb, ctx.manifest.preset, ctx.manifest.seed);
    const auto fit = fit_from(mcb, ctx.manifest.seed);
    const noise::StencilSteps steps{mcb.at("charge_step"), mcb.at("flux_step"), false};
    auto summary = ctx.table({"noise", "t_phi_s", "lower_bound", "omega_ref", "channels"});
    summary.note("d_fit", d_fit);
    summary.note("n", static_cast<unsigned long long>(mc.n));
    summary.note("df", mc.df);
    summary.note("ensemble", static_cast<unsigned long long>(mc.ensemble));
    for (const auto& kind_j : q.at("noise")) {
        const std::string kind = kind_j.get<std::string>();
        const auto set = channel_set(kind, mcb);
        ctx.say("dephasing: " + kind + " noise, " + std::to_string(set.size()) + " channels, d_fit = " +
                std::to_string(d_fit));
        const auto r = noise::dephasing(p, set, mc, d_fit, steps, fit);
        auto t = ctx.table({"t_s", "re_f", "im_f", "abs_f", "err"});
        t.note("noise", kind);
        t.note("rule", set.rule);
        t.note("t_phi_s", r.t_phi.t_phi);
        t.note("lower_bound", r.t_phi.lower_bound);
        t.note("d_fit", d_fit);
        for (std::size_t i = 0; i < r.curve.t.size(); ++i)
            t.row(r.curve.t[i], r.curve.f[i].real(), r.curve.f[i].imag(), std::abs(r.curve.f[i]), r.curve.err[i]);
        ctx.write("coherence_" + kind + ".csv", t.str());
        ctx.write("response_" + kind + ".json", surface_json(r.surface).dump(2) + "\n");
        summary.row(kind, r.t_phi.t_phi, r.t_phi.lower_bound, r.surface.omega_ref, static_cast<unsigned long>(set.size()));
    }
    ctx.write("dephasing.csv", summary.str());
}

inline void run_disorder(RunContext& ctx) {
    const auto& q = ctx.manifest.params;
    const auto base = circuit_from(q.at("circuit"));
    disorder::DisorderSpec spec;
    spec.sigma_junction = q.at("sigma_junction");
    spec.sigma_loop = q.at("sigma_loop");
    spec.sigma_gate = q.at("sigma_gate");
    spec.realizations = q.at("realizations");
    spec.seed = ctx.manifest.seed;
    const auto& mcb = q.at("monte_carlo");
    disorder::EnsembleOptions opt;
    opt.gap = q.at("gap");
    opt.tphi_charge = q.at("tphi_charge");
    opt.tphi_flux = q.at("tphi_flux");
    opt.d_gap = q.at("d_gap");
    opt.d_fit = q.at("d_fit");
    opt.gap_tol = q.at("gap_tol");
    opt.mc = mc_from(mcb, ctx.manifest.preset, ctx.manifest.seed);
    opt.fit = fit_from(mcb, ctx.manifest.seed);
    opt.steps = {mcb.at("charge_step"), mcb.at("flux_step"), false};
    opt.charge = channel_set("charge", mcb);
    opt.flux = channel_set("flux", mcb);
    opt.progress = [&ctx](std::size_t done, std::size_t total) {
        ctx.say("disorder: realization " + std::to_string(done) + "/" + std::to_string(total));
    };
    ctx.say("disorder: " + std::to_string(spec.realizations) + " realizations");
    const auto s = disorder::ensemble_run(base, spec, opt);

    auto meta = [&](io::CsvTable& t) {
        t.note("sigma_junction", spec.sigma_junction);
        t.note("sigma_loop", spec.sigma_loop);
        t.note("sigma_gate", spec.sigma_gate);
        t.note("d_gap", opt.d_gap);
        t.note("d_fit", opt.d_fit);
        t.note("failures", static_cast<unsigned long>(s.failures));
        t.note("resamples", static_cast<unsigned long>(s.resamples));
    };
    auto rt = ctx.table({"index", "seed", "resamples", "omega01", "t_phi_c_s", "t_phi_f_s", "ok"});
    meta(rt);
    for (const auto& r : s.records)
        rt.row(static_cast<unsigned long>(r.index), static_cast<unsigned long long>(r.seed),
               static_cast<unsigned long>(r.resamples), r.omega01, r.t_phi_c, r.t_phi_f, r.ok);
    ctx.write("realizations.csv", rt.str());

    auto st = ctx.table({"observable", "n", "mean", "std"});
    meta(st);
    auto ht = ctx.table({"observable", "bin", "lo", "hi", "count"});
    for (const auto& o : s.observables) {
        st.row(o.name, static_cast<unsigned long>(o.n), o.mean, o.std);
        for (std::size_t b = 0; b < o.hist.counts.size(); ++b)
            ht.row(o.name, static_cast<unsigned long>(b), o.hist.edges[b], o.hist.edges[b + 1],
                   static_cast<unsigned long>(o.hist.counts[b]));
    }
    ctx.write("summary.csv", st.str());
    ctx.write("histogram.csv", ht.str());
}

struct RunResult {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
    double seconds = 0;
};

inline RunResult run(const Manifest& m, std::ostream* log = nullptr) {
    RunContext ctx{m, run_directory(m), {}, log};
    std::filesystem::create_directories(ctx.dir);
    ctx.write("manifest.resolved.json", m.to_json().dump(2) + "\n");
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (m.experiment == "spin-map") run_spin_map(ctx);
        else if (m.experiment == "circuit-spectrum") run_circuit_spectrum(ctx);
        else if (m.experiment == "potential-map") run_potential_map(ctx);
        else if (m.experiment == "spectroscopy") run_spectroscopy(ctx);
        else if (m.experiment == "dephasing") run_dephasing(ctx);
        else if (m.experiment == "disorder") run_disorder(ctx);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(m.experiment + ": " + e.what(), e.residuals());
    } catch (const json::exception& e) {
        throw ParameterError(m.experiment + ": " + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // the only file that varies between identical runs
    const json info = {{"threads", worker_count()}, {"seconds", secs}, {"files", json::array()}};
    json log_doc = info;
    for (const auto& f : ctx.files) log_doc["files"].push_back(f.filename().string());
    ctx.write("run.json", log_doc.dump(2) + "\n");
    return {ctx.dir, ctx.files, secs};
}

}  // namespace ringsim::runner
