#pragma once

// CSV tables with '#' metadata lines and atomic file output.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "ringsim/error.hpp"

namespace ringsim::io {

// Shortest representation that round-trips, so equal doubles print equal text.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline std::string fmt(bool b) { return b ? "1" : "0"; }
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(long x) { return std::to_string(x); }
inline std::string fmt(unsigned long x) { return std::to_string(x); }
inline std::string fmt(unsigned long long x) { return std::to_string(x); }
inline std::string fmt(const std::string& s) { return s; }
inline std::string fmt(const char* s) { return s; }

struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    template <class T>
    void note(const std::string& key, const T& value) {
        meta.emplace_back(key, fmt(value));
    }

    template <class... T>
    void row(const T&... v) {
        std::vector<std::string> r{fmt(v)...};
        if (r.size() != header.size()) throw ParameterError("CsvTable: row width does not match the header");
        rows.push_back(std::move(r));
    }

    std::string str() const {
        std::ostringstream os;
        for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
        return os.str();
    }
};

// Write to a sibling temporary and rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct CsvData {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParameterError("csv: no column named '" + name + "'");
    }

    std::vector<double> numbers(const std::string& name) const {
        const auto c = column(name);
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(std::stod(r[c]));
        return v;
    }

    // body without metadata lines
    static std::string body(const std::string& text) {
        std::istringstream is(text);
        std::string line, out;
        while (std::getline(is, line))
            if (line.empty() || line[0] != '#') out += line + '\n';
        return out;
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline CsvData parse_csv(const std::string& text) {
    CsvData d;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            d.meta.emplace_back(body.substr(0, eq), eq == std::string::npos ? "" : body.substr(eq + 1));
            continue;
        }
        auto cells = split_line(line);
        if (d.header.empty()) {
            d.header = std::move(cells);
        } else {
            if (cells.size() != d.header.size())
                throw ParameterError("csv: row with " + std::to_string(cells.size()) + " cells under a header of " +
                                     std::to_string(d.header.size()));
            d.rows.push_back(std::move(cells));
        }
    }
    return d;
}

inline CsvData read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

}  // namespace ringsim::io
