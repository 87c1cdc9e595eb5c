// field_io.hpp - field snapshot files.
//
// Layout: one line of JSON text terminated by '\n'
//     {"format":"ahe-field","version":1,"rank":r,"N":N,"kind":"...","t":t,...}
// followed by points * r * r complex values, each as two little-endian
// IEEE-754 float64 (real, imaginary), lattice row-major, matrices row-major
// within a point.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "ahe/field.hpp"
#include "ahe/types.hpp"

namespace ahe {

struct Snapshot {
    MatrixField field;
    int N = 0;
    std::string kind;
    double t = 0.0;
    double beta = 0.0;
};

namespace detail {

inline std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    else return __builtin_bswap64(v);
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const MatrixField& f, int N, const std::string& kind, double t,
                           double beta = 0.0) {
    const std::size_t n = static_cast<std::size_t>(N);
    if (f.points() != n * n * n * n) throw ShapeError("snapshot: field does not match N");
    nlohmann::json header = {{"format", "ahe-field"}, {"version", 1}, {"rank", f.rank()}, {"N", N},
                             {"kind", kind},         {"t", t},        {"beta", beta}};
    os << header.dump() << '\n';
    for (cd v : f.values()) {
        double parts[2] = {v.real(), v.imag()};
        for (double d : parts) {
            const std::uint64_t bits = detail::to_little(std::bit_cast<std::uint64_t>(d));
            os.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    }
    if (!os) throw std::runtime_error("snapshot: write failed");
}

inline Snapshot read_snapshot(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("snapshot: missing header");
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "ahe-field") throw std::runtime_error("snapshot: not an ahe-field file");
    Snapshot s;
    s.N = header.at("N").get<int>();
    s.kind = header.at("kind").get<std::string>();
    s.t = header.at("t").get<double>();
    s.beta = header.value("beta", 0.0);
    const int rank = header.at("rank").get<int>();
    const std::size_t n = static_cast<std::size_t>(s.N);
    s.field = MatrixField(n * n * n * n, rank);
    for (cd& v : s.field.values()) {
        double parts[2];
        for (double& d : parts) {
            std::uint64_t bits;
            if (!is.read(reinterpret_cast<char*>(&bits), sizeof(bits)))
                throw std::runtime_error("snapshot: truncated payload");
            d = std::bit_cast<double>(detail::to_little(bits));
        }
        v = cd{parts[0], parts[1]};
    }
    return s;
}

inline void write_snapshot_file(const std::string& path, const MatrixField& f, int N, const std::string& kind,
                                double t, double beta = 0.0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("snapshot: cannot open " + path);
    write_snapshot(os, f, N, kind, t, beta);
}

inline Snapshot read_snapshot_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("snapshot: cannot open " + path);
    return read_snapshot(is);
}

}  // namespace ahe
