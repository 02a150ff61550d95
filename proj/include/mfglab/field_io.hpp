#pragma once

// Flat binary serialization for fields and slices.
//
// Layout (all quantities 64-bit little-endian, in order):
//   u64 n_dim                      1 or 2
//   u64 nx[axis]                   n_dim entries
//   u64 nt                         time levels; 1 for a spatial slice
//   f64 length[axis]               n_dim entries
//   f64 T                          horizon; 0 for a spatial slice
//   f64 values[...]                row-major over (space..., time), time fastest
//
// Values follow the in-memory layout of ScalarField exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfglab/grid.hpp"

namespace mfglab {

static_assert(std::endian::native == std::endian::little,
              "field_io assumes a little-endian host");

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), 8);
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("field_io: truncated header");
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw std::runtime_error("field_io: truncated header");
    return v;
}

inline void write_header(std::ostream& os, const SpaceTimeGrid& g, std::uint64_t nt,
                         double T) {
    write_u64(os, std::uint64_t(g.dim));
    write_u64(os, g.nx);
    if (g.dim == 2) write_u64(os, g.ny);
    write_u64(os, nt);
    write_f64(os, g.Lx);
    if (g.dim == 2) write_f64(os, g.Ly);
    write_f64(os, T);
}

struct Header {
    SpaceTimeGrid grid;
    std::uint64_t nt = 0;
    double T = 0.0;
};

inline Header read_header(std::istream& is, const std::string& path) {
    Header h;
    const std::uint64_t dim = read_u64(is);
    if (dim != 1 && dim != 2)
        throw std::runtime_error("field_io: " + path + ": bad dimension " +
                                 std::to_string(dim));
    h.grid.dim = int(dim);
    h.grid.nx = read_u64(is);
    h.grid.ny = (dim == 2) ? read_u64(is) : 1;
    h.nt = read_u64(is);
    h.grid.Lx = read_f64(is);
    h.grid.Ly = (dim == 2) ? read_f64(is) : 1.0;
    h.T = read_f64(is);
    return h;
}

inline void read_values(std::istream& is, std::vector<double>& v, const std::string& path) {
    is.read(reinterpret_cast<char*>(v.data()),
            std::streamsize(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("field_io: " + path + ": truncated values");
}

}  // namespace detail

inline void save_field(const ScalarField& u, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("field_io: cannot open " + path + " for writing");
    detail::write_header(os, u.grid, u.grid.nt, u.grid.T);
    os.write(reinterpret_cast<const char*>(u.values.data()),
             std::streamsize(u.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("field_io: write failed for " + path);
}

inline ScalarField load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("field_io: cannot open " + path);
    const detail::Header h = detail::read_header(is, path);
    if (h.nt < 2) throw std::runtime_error("field_io: " + path + " holds a slice, not a field");
    SpaceTimeGrid g = h.grid;
    g.nt = h.nt;
    g.T = h.T;
    g.validate();
    ScalarField u(g);
    detail::read_values(is, u.values, path);
    return u;
}

/// Slices use the same layout with nt == 1 and T == 0.
inline void save_slice(const SpatialSlice& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("field_io: cannot open " + path + " for writing");
    detail::write_header(os, s.grid, 1, 0.0);
    os.write(reinterpret_cast<const char*>(s.values.data()),
             std::streamsize(s.values.size() * sizeof(double)));
    if (!os) throw std::runtime_error("field_io: write failed for " + path);
}

/// Loads a slice; `like` supplies the time axis of the carried grid so the
/// result is usable against fields on that grid.
inline SpatialSlice load_slice(const std::string& path, const SpaceTimeGrid& like) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("field_io: cannot open " + path);
    const detail::Header h = detail::read_header(is, path);
    if (h.nt != 1) throw std::runtime_error("field_io: " + path + " is not a slice");
    if (h.grid.dim != like.dim || h.grid.nx != like.nx || h.grid.ny != like.ny ||
        h.grid.Lx != like.Lx || (like.dim == 2 && h.grid.Ly != like.Ly))
        throw std::runtime_error("field_io: " + path + ": spatial grid mismatch");
    SpatialSlice s(like);
    detail::read_values(is, s.values, path);
    return s;
}

inline SpatialSlice load_slice(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("field_io: cannot open " + path);
    const detail::Header h = detail::read_header(is, path);
    if (h.nt != 1) throw std::runtime_error("field_io: " + path + " is not a slice");
    SpaceTimeGrid g = h.grid;
    g.nt = 2;  // placeholder time axis
    g.T = 1.0;
    g.validate();
    SpatialSlice s(g);
    detail::read_values(is, s.values, path);
    return s;
}

}  // namespace mfglab
