#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tcnot {

// Periodic L x L square lattice. Ising spins live on sites, qubits /
// disorder signs on bonds, detectors on plaquettes.
//
// Fixed index order (disorder files depend on it):
//   site  s = y*L + x
//   bond  b in [0, L^2)      : horizontal, (x,y) -- (x+1,y), b = y*L + x
//   bond  b in [L^2, 2L^2)   : vertical,   (x,y) -- (x,y+1), b = L^2 + y*L + x
//   plaquette p = y*L + x    : square with lower-left corner (x,y)
struct Torus2D {
    int L = 0;

    explicit Torus2D(int linear_size) : L(linear_size) {
        if (L < 2) throw std::invalid_argument("Torus2D: L must be >= 2");
    }

    int n_sites() const { return L * L; }
    int n_bonds() const { return 2 * L * L; }
    int n_plaquettes() const { return L * L; }

    int site(int x, int y) const {
        x = wrap(x);
        y = wrap(y);
        return y * L + x;
    }
    int site_x(int s) const { return s % L; }
    int site_y(int s) const { return s / L; }

    int hbond(int x, int y) const { return wrap(y) * L + wrap(x); }
    int vbond(int x, int y) const { return L * L + wrap(y) * L + wrap(x); }
    bool bond_is_vertical(int b) const { return b >= L * L; }

    // The two sites at the ends of bond b, with periodic wrapping.
    std::pair<int, int> bond_endpoints(int b) const {
        check_bond(b);
        if (b < L * L) {
            const int x = b % L, y = b / L;
            return {site(x, y), site(x + 1, y)};
        }
        const int r = b - L * L;
        const int x = r % L, y = r / L;
        return {site(x, y), site(x, y + 1)};
    }

    // The four bonds incident to site s (the star of s).
    std::array<int, 4> site_bonds(int s) const {
        check_site(s);
        const int x = site_x(s), y = site_y(s);
        return {hbond(x, y), hbond(x - 1, y), vbond(x, y), vbond(x, y - 1)};
    }

    // The four bonds bounding plaquette p (lower-left corner convention).
    std::array<int, 4> plaquette_bonds(int p) const {
        if (p < 0 || p >= n_plaquettes())
            throw std::out_of_range("Torus2D: plaquette index");
        const int x = p % L, y = p / L;
        return {hbond(x, y), hbond(x, y + 1), vbond(x, y), vbond(x + 1, y)};
    }

    int wrap(int c) const {
        c %= L;
        return c < 0 ? c + L : c;
    }

private:
    void check_site(int s) const {
        if (s < 0 || s >= n_sites()) throw std::out_of_range("Torus2D: site index");
    }
    void check_bond(int b) const {
        if (b < 0 || b >= n_bonds()) throw std::out_of_range("Torus2D: bond index");
    }
};

// Cycles are bond sets that leave every plaquette product unchanged.
// Trivial generators are site stars (flipping one Ising spin flips the
// signs on its four incident bonds); the non-trivial representatives wind
// around the torus and cannot be composed from stars.
struct CycleBasis {
    using BondSet = std::vector<std::uint8_t>;  // indicator over bonds

    std::vector<BondSet> trivial_generators;  // one star per site
    std::array<BondSet, 3> nontrivial;        // winding-x, winding-y, both
};

inline void xor_into(CycleBasis::BondSet& a, const CycleBasis::BondSet& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] ^= b[i];
}

// Parity of bonds of E on each detector plaquette; zero everywhere iff E
// is a cycle.
inline std::vector<std::uint8_t> plaquette_syndrome(const Torus2D& lat,
                                                    const CycleBasis::BondSet& e) {
    std::vector<std::uint8_t> syn(lat.n_plaquettes(), 0);
    for (int p = 0; p < lat.n_plaquettes(); ++p) {
        std::uint8_t parity = 0;
        for (int b : lat.plaquette_bonds(p)) parity ^= e[b];
        syn[p] = parity;
    }
    return syn;
}

// Homology invariants of a cycle: parity of horizontal bonds per row is
// constant across rows (detects winding in y), parity of vertical bonds
// per column is constant across columns (detects winding in x).
inline std::pair<int, int> winding_class(const Torus2D& lat,
                                         const CycleBasis::BondSet& e) {
    int wx = 0, wy = 0;
    for (int y = 0; y < lat.L; ++y) wx ^= e[lat.vbond(0, y)];
    for (int x = 0; x < lat.L; ++x) wy ^= e[lat.hbond(x, 0)];
    return {wx, wy};
}

// One straight loop per non-trivial class: a ring of vertical bonds along
// a row (winds in x), a ring of horizontal bonds along a column (winds in
// y), and their XOR.
inline CycleBasis logical_representatives(const Torus2D& lat) {
    CycleBasis basis;
    basis.trivial_generators.reserve(lat.n_sites());
    for (int s = 0; s < lat.n_sites(); ++s) {
        CycleBasis::BondSet star(lat.n_bonds(), 0);
        for (int b : lat.site_bonds(s)) star[b] ^= 1;
        basis.trivial_generators.push_back(std::move(star));
    }
    CycleBasis::BondSet ring_x(lat.n_bonds(), 0), ring_y(lat.n_bonds(), 0);
    for (int x = 0; x < lat.L; ++x) ring_x[lat.vbond(x, 0)] = 1;
    for (int y = 0; y < lat.L; ++y) ring_y[lat.hbond(0, y)] = 1;
    basis.nontrivial[0] = ring_x;
    basis.nontrivial[1] = ring_y;
    basis.nontrivial[2] = ring_x;
    xor_into(basis.nontrivial[2], ring_y);
    return basis;
}

}  // namespace tcnot
