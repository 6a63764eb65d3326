// Command-line front end: run a manifest, or render a CSV grid to SVG.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ringsim/error.hpp"
#include "ringsim/io.hpp"
#include "ringsim/runner.hpp"
#include "ringsim/svg.hpp"

namespace {

int run_command(const std::string& manifest_path, const std::optional<std::string>& preset,
                const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out) {
    const auto m = ringsim::runner::load_manifest(manifest_path, {preset, seed, out});
    const auto dir = ringsim::runner::run_directory(m);
    std::cerr << "run " << m.experiment << " (" << m.preset << ", seed " << m.seed << ") -> " << dir.string() << '\n';
    const auto r = ringsim::runner::run(m, &std::cerr);
    for (const auto& f : r.files) std::cout << f.string() << '\n';
    std::cerr << "done in " << r.seconds << " s\n";
    return 0;
}

int render_command(const std::string& csv, const std::string& x, const std::string& y, const std::string& z,
                   const std::string& out, const ringsim::svg::HeatmapOptions& opt) {
    const auto data = ringsim::io::read_csv(csv);
    ringsim::io::write_atomic(out, ringsim::svg::render_heatmap(data, x, y, z, opt));
    std::cout << out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ringsim: protected-qubit ring simulations"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the experiment described by a JSON manifest");
    std::string manifest;
    std::optional<std::string> preset, out;
    std::optional<std::uint64_t> seed;
    run->add_option("manifest", manifest, "manifest path")->required()->check(CLI::ExistingFile);
    run->add_option("--preset", preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
    run->add_option("--seed", seed, "base random seed");
    run->add_option("--out", out, "output root directory");

    auto* render = app.add_subcommand("render", "render three CSV columns as an SVG heatmap");
    std::string csv, x, y, z, svg_out;
    ringsim::svg::HeatmapOptions opt;
    render->add_option("csv", csv, "input CSV")->required()->check(CLI::ExistingFile);
    render->add_option("--x", x, "column for the horizontal axis")->required();
    render->add_option("--y", y, "column for the vertical axis")->required();
    render->add_option("--z", z, "column for the color")->required();
    render->add_option("-o,--output", svg_out, "output SVG path")->required();
    render->add_option("--palette", opt.palette, "viridis or gray")->check(CLI::IsMember({"viridis", "gray"}));
    render->add_flag("--log", opt.log_scale, "color by log10 of the value");
    render->add_option("--cell", opt.cell, "pixels per cell")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return run_command(manifest, preset, seed, out);
        return render_command(csv, x, y, z, svg_out, opt);
    } catch (const ringsim::ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ringsim::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
