#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tcnot {

using QubitMask = std::uint64_t;  // bit q set = X flip on qubit q

// Planar rotated surface code of odd distance d: d^2 data qubits on a
// d x d grid, (d^2-1)/2 Z-stabilizers and as many X-stabilizers on the
// checkerboard of plaquettes between them, weight-2 at the boundaries.
// Only the Z side is used here (bit-flip errors); the X-stabilizers enter
// as the degeneracy group of X error patterns.
//
// Plaquette (i, j) has corner qubits rows {i, i+1} x cols {j, j+1};
// Z-plaquettes have i+j even with 0 <= j <= d-2 (weight-2 rows at the top
// and bottom), X-plaquettes have i+j odd with 0 <= i <= d-2. Logical X is
// the top row of qubits, logical Z the left column.
struct RotatedSurfaceCode {
    int d = 0;
    std::vector<QubitMask> z_stabs;
    std::vector<QubitMask> x_stabs;
    QubitMask logical_x = 0;
    QubitMask logical_z = 0;

    explicit RotatedSurfaceCode(int distance) : d(distance) {
        if (d < 3 || d % 2 == 0)
            throw std::invalid_argument("RotatedSurfaceCode: d must be odd and >= 3");
        if (d * d > 63)
            throw std::invalid_argument("RotatedSurfaceCode: d too large for mask");
        auto qubit = [&](int r, int c) { return r * d + c; };
        auto corners = [&](int i, int j) {
            QubitMask m = 0;
            for (int r = i; r <= i + 1; ++r)
                for (int c = j; c <= j + 1; ++c)
                    if (r >= 0 && r < d && c >= 0 && c < d)
                        m |= QubitMask(1) << qubit(r, c);
            return m;
        };
        for (int i = -1; i < d; ++i)
            for (int j = -1; j < d; ++j) {
                const bool even = ((i + j) % 2 + 2) % 2 == 0;
                if (even && j >= 0 && j <= d - 2) z_stabs.push_back(corners(i, j));
                if (!even && i >= 0 && i <= d - 2) x_stabs.push_back(corners(i, j));
            }
        for (int c = 0; c < d; ++c) logical_x |= QubitMask(1) << qubit(0, c);
        for (int r = 0; r < d; ++r) logical_z |= QubitMask(1) << qubit(r, 0);
        build_solver();
    }

    int n_qubits() const { return d * d; }
    int n_z_stabs() const { return int(z_stabs.size()); }

    // Z-syndrome of an X error pattern: bit j = parity of overlap with
    // Z-stabilizer j.
    std::uint64_t syndrome(QubitMask error) const {
        std::uint64_t syn = 0;
        for (std::size_t j = 0; j < z_stabs.size(); ++j)
            syn |= std::uint64_t(std::popcount(error & z_stabs[j]) & 1) << j;
        return syn;
    }

    // Any one X pattern with the given syndrome (from the precomputed
    // row-reduced solver). Throws if the syndrome is not achievable.
    QubitMask solve_syndrome(std::uint64_t syn) const {
        QubitMask u = 0;
        for (const auto& pivot : pivots_)
            if (std::popcount(pivot.combo & syn) & 1) u |= pivot.column_bit;
        if (syndrome(u) != syn)
            throw std::runtime_error("solve_syndrome: infeasible syndrome");
        return u;
    }

    // True when the pattern (which must be syndrome-free) acts as logical X:
    // odd overlap with logical Z.
    bool is_logical_x(QubitMask cycle) const {
        return std::popcount(cycle & logical_z) & 1;
    }

private:
    struct Pivot {
        QubitMask column_bit = 0;
        std::uint64_t combo = 0;  // which original stabilizers were XORed in
    };
    std::vector<Pivot> pivots_;

    void build_solver() {
        struct Row {
            QubitMask mask;
            std::uint64_t combo;
        };
        std::vector<Row> rows;
        for (std::size_t j = 0; j < z_stabs.size(); ++j)
            rows.push_back({z_stabs[j], std::uint64_t(1) << j});
        std::vector<std::pair<std::size_t, QubitMask>> pivot_rows;
        std::size_t next = 0;
        for (int col = 0; col < n_qubits() && next < rows.size(); ++col) {
            const QubitMask bit = QubitMask(1) << col;
            std::size_t found = rows.size();
            for (std::size_t r = next; r < rows.size(); ++r)
                if (rows[r].mask & bit) {
                    found = r;
                    break;
                }
            if (found == rows.size()) continue;
            std::swap(rows[next], rows[found]);
            for (std::size_t r = 0; r < rows.size(); ++r)
                if (r != next && (rows[r].mask & bit)) {
                    rows[r].mask ^= rows[next].mask;
                    rows[r].combo ^= rows[next].combo;
                }
            pivot_rows.emplace_back(next, bit);
            ++next;
        }
        if (next != z_stabs.size())
            throw std::logic_error("RotatedSurfaceCode: dependent Z-stabilizers");
        // combos are read after all eliminations have settled
        for (const auto& [row, bit] : pivot_rows)
            pivots_.push_back({bit, rows[row].combo});
    }
};

}  // namespace tcnot
