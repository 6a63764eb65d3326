#pragma once

// Self-contained SVG heatmaps from gridded CSV columns.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ringsim/error.hpp"
#include "ringsim/io.hpp"

namespace ringsim::svg {

struct Rgb {
    int r, g, b;
};

// Piecewise-linear palettes over u in [0, 1].
inline Rgb palette_color(const std::string& name, double u) {
    static const std::vector<std::array<double, 3>> viridis{
        {68, 1, 84}, {72, 40, 120}, {62, 74, 137}, {49, 104, 142}, {38, 130, 142},
        {31, 158, 137}, {53, 183, 121}, {109, 205, 89}, {180, 222, 44}, {253, 231, 37}};
    static const std::vector<std::array<double, 3>> gray{{0, 0, 0}, {255, 255, 255}};
    const auto* stops = &viridis;
    if (name == "gray") stops = &gray;
    else if (name != "viridis") throw ParameterError("unknown palette '" + name + "'");
    u = std::clamp(std::isfinite(u) ? u : 0.0, 0.0, 1.0);
    const double s = u * double(stops->size() - 1);
    const std::size_t i = std::min(std::size_t(s), stops->size() - 2);
    const double f = s - double(i);
    const auto &a = (*stops)[i], &b = (*stops)[i + 1];
    auto mix = [&](int k) { return int(std::lround(a[std::size_t(k)] + f * (b[std::size_t(k)] - a[std::size_t(k)]))); };
    return {mix(0), mix(1), mix(2)};
}

struct HeatmapOptions {
    std::string palette = "viridis";
    bool log_scale = false;
    int cell = 8;  // pixels per grid cell
};

struct Grid {
    std::vector<double> xs, ys;  // ascending
    std::vector<double> z;       // row-major, y outer
};

// Every (x, y) pair must appear exactly once.
inline Grid to_grid(const io::CsvData& d, const std::string& x, const std::string& y, const std::string& z) {
    const auto cx = d.column(x), cy = d.column(y), cz = d.column(z);
    std::map<double, std::size_t> xi, yi;
    for (const auto& r : d.rows) {
        xi.emplace(std::stod(r[cx]), 0);
        yi.emplace(std::stod(r[cy]), 0);
    }
    Grid g;
    for (auto& [v, i] : xi) {
        i = g.xs.size();
        g.xs.push_back(v);
    }
    for (auto& [v, i] : yi) {
        i = g.ys.size();
        g.ys.push_back(v);
    }
    if (d.rows.size() != g.xs.size() * g.ys.size())
        throw ParameterError("heatmap: ragged grid (" + std::to_string(d.rows.size()) + " rows for " +
                             std::to_string(g.xs.size()) + " x " + std::to_string(g.ys.size()) + " cells)");
    g.z.assign(d.rows.size(), std::nan(""));
    std::vector<bool> seen(d.rows.size(), false);
    for (const auto& r : d.rows) {
        const std::size_t k = yi[std::stod(r[cy])] * g.xs.size() + xi[std::stod(r[cx])];
        if (seen[k]) throw ParameterError("heatmap: ragged grid (duplicate point)");
        seen[k] = true;
        g.z[k] = std::stod(r[cz]);
    }
    return g;
}

inline std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

inline std::string render_heatmap(const io::CsvData& d, const std::string& x, const std::string& y,
                                  const std::string& z, const HeatmapOptions& opt = {}) {
    const Grid g = to_grid(d, x, y, z);
    auto value = [&](double v) { return opt.log_scale ? (v > 0 ? std::log10(v) : std::nan("")) : v; };
    double lo = INFINITY, hi = -INFINITY;
    for (double v : g.z) {
        const double t = value(v);
        if (std::isfinite(t)) {
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    const int nx = int(g.xs.size()), ny = int(g.ys.size()), c = opt.cell;
    const int margin = 40, w = nx * c, h = ny * c;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * margin << "\" height=\"" << h + 2 * margin
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<g transform=\"translate(" << margin << ',' << margin << ")\" shape-rendering=\"crispEdges\">\n";
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double t = value(g.z[std::size_t(j * nx + i)]);
            const double u = hi > lo ? (t - lo) / (hi - lo) : 0.5;
            // y grows upward
            os << "<rect x=\"" << i * c << "\" y=\"" << (ny - 1 - j) * c << "\" width=\"" << c << "\" height=\"" << c
               << "\" fill=\"" << (std::isfinite(t) ? hex(palette_color(opt.palette, u)) : std::string("#ffffff"))
               << "\"/>\n";
        }
    os << "</g>\n";
    os << "<text x=\"" << margin << "\" y=\"" << h + margin + 16 << "\">" << x << ": " << io::fmt(g.xs.front()) << " .. "
       << io::fmt(g.xs.back()) << "</text>\n";
    os << "<text x=\"" << margin << "\" y=\"" << margin - 8 << "\">" << y << ": " << io::fmt(g.ys.front()) << " .. "
       << io::fmt(g.ys.back()) << "; " << (opt.log_scale ? "log10 " : "") << z << ": " << io::fmt(lo) << " .. "
       << io::fmt(hi) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace ringsim::svg
