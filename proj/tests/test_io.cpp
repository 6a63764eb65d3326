#include <gtest/gtest.h>

#include <filesystem>
#include <regex>
#include <set>

#include "ringsim/io.hpp"
#include "ringsim/svg.hpp"

using namespace ringsim;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto d = std::filesystem::temp_directory_path() / ("ringsim_io_" + name);
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

io::CsvData grid_csv(int nx, int ny, auto&& f) {
    io::CsvTable t;
    t.header = {"x", "y", "V"};
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) t.row(double(i), double(j), f(i, j));
    return io::parse_csv(t.str());
}

std::vector<std::string> fills(const std::string& svg) {
    std::vector<std::string> out;
    const std::regex re("<rect [^>]*fill=\"(#[0-9a-f]{6})\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
        out.push_back((*it)[1]);
    return out;
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 1.0, 0.0}) EXPECT_EQ(std::stod(io::fmt(x)), x);
    EXPECT_EQ(io::fmt(0.1), "0.1");
    EXPECT_EQ(io::fmt(1.0), "1");
    EXPECT_EQ(io::fmt(std::nan("")), "nan");
    EXPECT_EQ(io::fmt(-INFINITY), "-inf");
    EXPECT_EQ(io::fmt(true), "1");
}

TEST(Csv, MetadataAndRoundTrip) {
    io::CsvTable t;
    t.header = {"a", "b", "name"};
    t.note("seed", 7);
    t.note("units", "GHz");
    t.row(1.5, 2, "x");
    t.row(-0.25, 3, "y");
    const auto text = t.str();
    EXPECT_EQ(text, "# seed=7\n# units=GHz\na,b,name\n1.5,2,x\n-0.25,3,y\n");
    const auto d = io::parse_csv(text);
    ASSERT_EQ(d.meta.size(), 2u);
    EXPECT_EQ(d.meta[1].first, "units");
    EXPECT_EQ(d.meta[1].second, "GHz");
    EXPECT_EQ(d.numbers("a"), (std::vector<double>{1.5, -0.25}));
    EXPECT_EQ(io::CsvData::body(text), "a,b,name\n1.5,2,x\n-0.25,3,y\n");
    EXPECT_THROW(d.column("missing"), ParameterError);
}

TEST(Csv, RejectsWrongRowWidth) {
    io::CsvTable t;
    t.header = {"a", "b"};
    EXPECT_THROW(t.row(1.0), ParameterError);
    EXPECT_THROW(io::parse_csv("a,b\n1,2\n3\n"), ParameterError);
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
    const auto d = scratch("atomic");
    const auto f = d / "sub" / "out.csv";
    io::write_atomic(f, "first\n");
    io::write_atomic(f, "second\n");
    EXPECT_EQ(io::read_file(f), "second\n");
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(d / "sub")) {
        ++n;
        EXPECT_EQ(e.path().extension(), ".csv");
    }
    EXPECT_EQ(n, 1u);
}

TEST(Heatmap, OneRectPerCell) {
    const auto d = grid_csv(2, 2, [](int i, int j) { return double(i + 2 * j); });
    const auto svg = svg::render_heatmap(d, "x", "y", "V");
    EXPECT_EQ(fills(svg).size(), 4u);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Heatmap, ConstantFieldIsOneColor) {
    const auto d = grid_csv(3, 4, [](int, int) { return 2.0; });
    const auto f = fills(svg::render_heatmap(d, "x", "y", "V"));
    EXPECT_EQ(std::set<std::string>(f.begin(), f.end()).size(), 1u);
}

TEST(Heatmap, MonotoneFieldMapsMonotonically) {
    const auto d = grid_csv(11, 1, [](int i, int) { return double(i); });
    svg::HeatmapOptions o;
    o.palette = "gray";
    const auto f = fills(svg::render_heatmap(d, "x", "y", "V", o));
    ASSERT_EQ(f.size(), 11u);
    EXPECT_EQ(f.front(), "#000000");
    EXPECT_EQ(f.back(), "#ffffff");
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_GT(f[i], f[i - 1]);
}

TEST(Heatmap, RejectsRaggedGrid) {
    EXPECT_THROW(svg::render_heatmap(io::parse_csv("x,y,V\n0,0,1\n1,0,2\n0,1,3\n"), "x", "y", "V"), ParameterError);
    EXPECT_THROW(svg::render_heatmap(io::parse_csv("x,y,V\n0,0,1\n0,0,2\n1,1,3\n1,0,4\n"), "x", "y", "V"),
                 ParameterError);
    EXPECT_THROW(svg::palette_color("jet", 0.5), ParameterError);
}
