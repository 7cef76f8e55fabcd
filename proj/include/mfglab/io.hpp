#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mfglab/grid.hpp"
#include "mfglab/measures.hpp"

namespace mfglab {

namespace detail {

inline std::uint64_t to_le_bits(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    return bits;
}

inline double from_le_bits(std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace detail

// flat little-endian 64-bit reals plus a JSON sidecar {dim, M, K, t0, T}
inline void write_field(const ScalarField& f, const std::string& path) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("write_field: cannot open " + path);
    for (double v : f.values) {
        const std::uint64_t bits = detail::to_le_bits(v);
        bin.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
    nlohmann::json side;
    side["dim"] = f.grid.dim;
    side["M"] = f.grid.points_per_axis;
    side["K"] = f.time ? f.time->steps : 0;
    side["t0"] = f.time ? f.time->t0 : 0.0;
    side["T"] = f.time ? f.time->horizon : 0.0;
    std::ofstream meta(path + ".json");
    meta << side.dump(2) << "\n";
}

inline ScalarField read_field(const std::string& path) {
    std::ifstream meta(path + ".json");
    if (!meta) throw std::runtime_error("read_field: missing sidecar for " + path);
    nlohmann::json side = nlohmann::json::parse(meta);
    const int dim = side.at("dim").get<int>();
    const int m = side.at("M").get<int>();
    const int k = side.at("K").get<int>();
    ScalarField f;
    if (k > 0)
        f = ScalarField(TorusGrid(dim, m), TimeGrid(side.at("t0").get<double>(), side.at("T").get<double>(), k));
    else
        f = ScalarField(TorusGrid(dim, m));
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("read_field: cannot open " + path);
    for (double& v : f.values) {
        std::uint64_t bits;
        bin.read(reinterpret_cast<char*>(&bits), sizeof(bits));
        if (!bin) throw std::runtime_error("read_field: truncated file " + path);
        v = detail::from_le_bits(bits);
    }
    return f;
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// CSV export of a 1-d slice (node, x, value)
inline void write_csv_slice(const ScalarField& f, int k, const std::string& path) {
    if (f.grid.dim != 1) throw std::invalid_argument("write_csv_slice: 1-d fields only");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv_slice: cannot open " + path);
    out << "node,x,value\n";
    const double* s = f.time ? f.slice(k) : f.values.data();
    for (int i = 0; i < f.grid.points_per_axis; ++i)
        out << i << "," << format_g17(i * f.grid.spacing()) << "," << format_g17(s[i]) << "\n";
}

// one point per row
inline void write_atoms_csv(const std::vector<std::vector<double>>& pts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_atoms_csv: cannot open " + path);
    for (const auto& p : pts) {
        for (std::size_t a = 0; a < p.size(); ++a) out << (a ? "," : "") << format_g17(p[a]);
        out << "\n";
    }
}

inline std::vector<std::vector<double>> read_atoms_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_atoms_csv: cannot open " + path);
    std::vector<std::vector<double>> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> p;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t next = line.find(',', pos);
            p.push_back(std::stod(line.substr(pos, next - pos)));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

}  // namespace mfglab
