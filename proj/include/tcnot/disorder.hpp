#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcnot/io.hpp"
#include "tcnot/lattice2d.hpp"
#include "tcnot/lattice3d.hpp"
#include "tcnot/noise.hpp"
#include "tcnot/rng.hpp"

namespace tcnot {

// Quenched bond signs for the 2D model. s_c[b], s_t[b] in {+1, -1}; -1
// marks a bond whose combined error triggers that block's detectors.
struct DisorderField2D {
    int L = 0;
    double p_tilde = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::int8_t> s_c;
    std::vector<std::int8_t> s_t;
};

// Per-bond i.i.d. draws from the joint sign law. Bond b uses the stream
// (seed, kDisorder2D, b), so fields are reproducible under any execution
// order.
inline DisorderField2D sample_disorder_2d(const Torus2D& lat, double p_tilde,
                                          std::uint64_t seed) {
    const JointBondDist dist = joint_bond_dist(p_tilde);
    const double c0 = dist.prob[0][0];
    const double c1 = c0 + dist.prob[0][1];
    const double c2 = c1 + dist.prob[1][0];
    DisorderField2D field;
    field.L = lat.L;
    field.p_tilde = p_tilde;
    field.seed = seed;
    field.s_c.resize(lat.n_bonds());
    field.s_t.resize(lat.n_bonds());
    for (int b = 0; b < lat.n_bonds(); ++b) {
        rng::Stream stream(rng::derive_key(seed, rng::kDisorder2D, b));
        const double u = stream.u01();
        if (u < c0) {
            field.s_c[b] = 1;
            field.s_t[b] = 1;
        } else if (u < c1) {
            field.s_c[b] = 1;
            field.s_t[b] = -1;
        } else if (u < c2) {
            field.s_c[b] = -1;
            field.s_t[b] = 1;
        } else {
            field.s_c[b] = -1;
            field.s_t[b] = -1;
        }
    }
    return field;
}

// Quenched signs for one species of the 3D model: s on timelike plaquette
// rows (one per (bond, t+1/2), physical error on that qubit between
// rounds), r on spatial plaquettes (one per (p2d, t), syndrome error).
struct DisorderBlock3D {
    std::vector<std::int8_t> s;  // indexed like timelike plaquettes: t*2L^2 + bond
    std::vector<std::int8_t> r;  // indexed like spatial plaquettes:  t*L^2 + p2d
};

struct DisorderField3D {
    int L = 0;
    int Tmax = 0;
    double p = 0.0;
    double q = 0.0;
    std::uint64_t seed = 0;
    DisorderBlock3D control;
    DisorderBlock3D target;
};

inline DisorderField3D sample_disorder_3d(const Cubic3D& lat, double p, double q,
                                          std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 0.5 && q >= 0.0 && q <= 0.5))
        throw std::invalid_argument("sample_disorder_3d: rates must lie in [0, 1/2]");
    DisorderField3D field;
    field.L = lat.L();
    field.Tmax = lat.Tmax;
    field.p = p;
    field.q = q;
    field.seed = seed;
    // Control and target blocks draw independent signs; block index enters
    // the stream key.
    for (int block = 0; block < 2; ++block) {
        DisorderBlock3D& d = block == 0 ? field.control : field.target;
        d.s.resize(lat.n_timelike_plaquettes());
        d.r.resize(lat.n_spatial_plaquettes());
        for (int i = 0; i < lat.n_timelike_plaquettes(); ++i) {
            rng::Stream stream(rng::derive_key(seed, rng::kDisorder3D, 2 * i, block));
            d.s[i] = stream.bernoulli(p) ? -1 : 1;
        }
        for (int i = 0; i < lat.n_spatial_plaquettes(); ++i) {
            rng::Stream stream(rng::derive_key(seed, rng::kDisorder3D, 2 * i + 1, block));
            d.r[i] = stream.bernoulli(q) ? -1 : 1;
        }
    }
    return field;
}

// --- serialization -------------------------------------------------------
//
// CSV with '#'-prefixed header lines carrying the lattice size, rates and
// seed, then one record per element. Schemas:
//   2D: bond,s_c,s_t
//   3D: kind,block,index,sign   (kind s = timelike row, r = spatial plaquette)

inline void save_disorder_2d(const DisorderField2D& field, std::ostream& out) {
    out << "# tcnot-disorder2d v1\n";
    out << "# L: " << field.L << "\n";
    out << "# p_tilde: " << field.p_tilde << "\n";
    out << "# seed: " << field.seed << "\n";
    out << "bond,s_c,s_t\n";
    for (std::size_t b = 0; b < field.s_c.size(); ++b)
        out << b << ',' << int(field.s_c[b]) << ',' << int(field.s_t[b]) << '\n';
}

inline DisorderField2D load_disorder_2d(std::istream& in) {
    DisorderField2D field;
    std::string line;
    bool saw_columns = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "L:") hs >> field.L;
            if (key == "p_tilde:") hs >> field.p_tilde;
            if (key == "seed:") hs >> field.seed;
            continue;
        }
        if (!saw_columns) {  // column header row
            saw_columns = true;
            continue;
        }
        std::istringstream row(line);
        long b = 0;
        int sc = 0, st = 0;
        char comma = 0;
        row >> b >> comma >> sc >> comma >> st;
        if (!row) throw std::runtime_error("load_disorder_2d: malformed row: " + line);
        if (b >= long(field.s_c.size())) {
            field.s_c.resize(b + 1);
            field.s_t.resize(b + 1);
        }
        field.s_c[b] = static_cast<std::int8_t>(sc);
        field.s_t[b] = static_cast<std::int8_t>(st);
    }
    if (field.L < 2 || field.s_c.size() != std::size_t(2 * field.L * field.L))
        throw std::runtime_error("load_disorder_2d: inconsistent header / record count");
    return field;
}

inline DisorderField3D load_disorder_3d(std::istream& in) {
    DisorderField3D field;
    std::string line;
    bool saw_columns = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "L:") hs >> field.L;
            if (key == "Tmax:") hs >> field.Tmax;
            if (key == "p:") hs >> field.p;
            if (key == "q:") hs >> field.q;
            if (key == "seed:") hs >> field.seed;
            continue;
        }
        if (!saw_columns) {
            saw_columns = true;
            continue;
        }
        const auto items = io::split_csv(line);
        if (items.size() != 4)
            throw std::runtime_error("load_disorder_3d: malformed row: " + line);
        DisorderBlock3D& block = items[1] == "c" ? field.control : field.target;
        auto& vec = items[0] == "s" ? block.s : block.r;
        const std::size_t index = std::stoul(items[2]);
        if (index >= vec.size()) vec.resize(index + 1);
        vec[index] = static_cast<std::int8_t>(std::stoi(items[3]));
    }
    if (field.L < 2 || field.Tmax < 2)
        throw std::runtime_error("load_disorder_3d: missing header");
    const Cubic3D lat(field.L, field.Tmax);
    for (const auto* block : {&field.control, &field.target})
        if (int(block->s.size()) != lat.n_timelike_plaquettes() ||
            int(block->r.size()) != lat.n_spatial_plaquettes())
            throw std::runtime_error("load_disorder_3d: inconsistent record count");
    return field;
}

inline void save_disorder_3d(const DisorderField3D& field, std::ostream& out) {
    out << "# tcnot-disorder3d v1\n";
    out << "# L: " << field.L << "\n";
    out << "# Tmax: " << field.Tmax << "\n";
    out << "# p: " << field.p << "\n";
    out << "# q: " << field.q << "\n";
    out << "# seed: " << field.seed << "\n";
    out << "kind,block,index,sign\n";
    const char* blocks[2] = {"c", "t"};
    for (int bi = 0; bi < 2; ++bi) {
        const DisorderBlock3D& d = bi == 0 ? field.control : field.target;
        for (std::size_t i = 0; i < d.s.size(); ++i)
            out << "s," << blocks[bi] << ',' << i << ',' << int(d.s[i]) << '\n';
        for (std::size_t i = 0; i < d.r.size(); ++i)
            out << "r," << blocks[bi] << ',' << i << ',' << int(d.r[i]) << '\n';
    }
}

}  // namespace tcnot
