#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "tcnot/lattice2d.hpp"

namespace tcnot {

// Cubic lattice, periodic in both spatial directions, open in time.
// Spins live on links. Integer time slices t in [0, Tmax) carry the
// spatial links; half-integer slices t+1/2 (t in [0, Tmax-1)) carry the
// timelike links.
//
// Index order:
//   spatial link  (bond b, t)     : id = t*2L^2 + b
//   timelike link (site s, t+1/2) : id = n_spatial_links() + t*L^2 + s
//   spatial plaquette  (p2d, t)   : id = t*L^2 + p2d
//   timelike plaquette (b, t+1/2) : id = n_spatial_plaquettes() + t*2L^2 + b
struct Cubic3D {
    Torus2D base;
    int Tmax = 0;

    Cubic3D(int linear_size, int time_slices)
        : base(linear_size), Tmax(time_slices) {
        if (Tmax < 2) throw std::invalid_argument("Cubic3D: Tmax must be >= 2");
    }

    int L() const { return base.L; }
    int n_sites2d() const { return base.n_sites(); }
    int n_bonds2d() const { return base.n_bonds(); }

    int n_spatial_links() const { return n_bonds2d() * Tmax; }
    int n_timelike_links() const { return n_sites2d() * (Tmax - 1); }
    int n_links() const { return n_spatial_links() + n_timelike_links(); }

    int n_spatial_plaquettes() const { return n_sites2d() * Tmax; }
    int n_timelike_plaquettes() const { return n_bonds2d() * (Tmax - 1); }
    int n_plaquettes() const { return n_spatial_plaquettes() + n_timelike_plaquettes(); }

    int spatial_link(int bond, int t) const { return t * n_bonds2d() + bond; }
    int timelike_link(int site, int t) const {  // the link at (site, t+1/2)
        return n_spatial_links() + t * n_sites2d() + site;
    }
    bool link_is_timelike(int l) const { return l >= n_spatial_links(); }
    int spatial_link_t(int l) const { return l / n_bonds2d(); }
    int spatial_link_bond(int l) const { return l % n_bonds2d(); }

    int spatial_plaquette(int p2d, int t) const { return t * n_sites2d() + p2d; }
    int timelike_plaquette(int bond, int t) const {  // rung at (bond, t+1/2)
        return n_spatial_plaquettes() + t * n_bonds2d() + bond;
    }

    // The four member links of a plaquette. A spatial plaquette at slice t
    // holds the four spatial links of the underlying 2D plaquette; the
    // timelike plaquette of bond l between t and t+1 holds the spatial link
    // of l at both slices plus the timelike links at the bond's endpoints.
    std::array<int, 4> plaquette_links(int p) const {
        if (p < 0 || p >= n_plaquettes())
            throw std::out_of_range("Cubic3D: plaquette index");
        if (p < n_spatial_plaquettes()) {
            const int t = p / n_sites2d();
            const int p2d = p % n_sites2d();
            const auto bonds = base.plaquette_bonds(p2d);
            return {spatial_link(bonds[0], t), spatial_link(bonds[1], t),
                    spatial_link(bonds[2], t), spatial_link(bonds[3], t)};
        }
        const int r = p - n_spatial_plaquettes();
        const int t = r / n_bonds2d();
        const int bond = r % n_bonds2d();
        const auto [s1, s2] = base.bond_endpoints(bond);
        return {spatial_link(bond, t), spatial_link(bond, t + 1),
                timelike_link(s1, t), timelike_link(s2, t)};
    }

    // All links incident to the vertex (site, t): four spatial plus the
    // timelike links below/above when they exist (open time boundaries).
    std::vector<int> vertex_links(int site, int t) const {
        if (t < 0 || t >= Tmax) throw std::out_of_range("Cubic3D: time slice");
        std::vector<int> links;
        links.reserve(6);
        for (int b : base.site_bonds(site)) links.push_back(spatial_link(b, t));
        if (t > 0) links.push_back(timelike_link(site, t - 1));
        if (t < Tmax - 1) links.push_back(timelike_link(site, t));
        return links;
    }
};

}  // namespace tcnot
