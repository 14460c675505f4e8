#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcnot/disorder.hpp"
#include "tcnot/lattice3d.hpp"
#include "tcnot/mc_at2d.hpp"  // Schedule, SweepStats, ObservableSeries
#include "tcnot/noise.hpp"
#include "tcnot/parallel.hpp"
#include "tcnot/rng.hpp"

namespace tcnot {

enum class Species { sigma, tau };

// Two link-spin species on the cubic lattice:
//   H = -K sum_{p,t} r_c Prod sigma          (spatial plaquettes)
//       -J sum_{l,t} s_c sigma sigma sigma sigma   (timelike rungs)
//       + same for tau with r_t, s_t, except the rung row at the gate slice
//         t = T, which carries the five-spin term
//           -J s_t sigma_l(T) tau_l(T) tau_l(T+1) tau_l1(T+1/2) tau_l2(T+1/2).
// With the defect terms removed (two_species = false) this is a single
// plain random-plaquette gauge model in sigma.
struct GaugeState3D {
    int L = 0;
    int Tmax = 0;
    int defect_time = -1;  // integer slice T; requires 0 <= T <= Tmax-2
    bool two_species = false;
    std::vector<std::int8_t> sigma;  // per link
    std::vector<std::int8_t> tau;
    DisorderField3D disorder;
    GaugeCouplings couplings;
    double beta = 1.0;
    double tracked_energy = 0.0;
};

namespace detail3d {

inline double row_term_sigma(const Cubic3D& lat, const GaugeState3D& st, int bond,
                             int t) {
    const auto [s1, s2] = lat.base.bond_endpoints(bond);
    const int prod = st.sigma[lat.spatial_link(bond, t)] *
                     st.sigma[lat.spatial_link(bond, t + 1)] *
                     st.sigma[lat.timelike_link(s1, t)] *
                     st.sigma[lat.timelike_link(s2, t)];
    return -st.couplings.J * st.disorder.control.s[t * lat.n_bonds2d() + bond] * prod;
}

inline double row_term_tau(const Cubic3D& lat, const GaugeState3D& st, int bond,
                           int t) {
    const auto [s1, s2] = lat.base.bond_endpoints(bond);
    int prod = st.tau[lat.spatial_link(bond, t)] *
               st.tau[lat.spatial_link(bond, t + 1)] *
               st.tau[lat.timelike_link(s1, t)] * st.tau[lat.timelike_link(s2, t)];
    if (t == st.defect_time) prod *= st.sigma[lat.spatial_link(bond, t)];
    return -st.couplings.J * st.disorder.target.s[t * lat.n_bonds2d() + bond] * prod;
}

inline double spatial_term(const Cubic3D& lat, const GaugeState3D& st, Species sp,
                           int p2d, int t) {
    const auto bonds = lat.base.plaquette_bonds(p2d);
    const auto& spins = sp == Species::sigma ? st.sigma : st.tau;
    const auto& signs = sp == Species::sigma ? st.disorder.control.r : st.disorder.target.r;
    int prod = 1;
    for (int b : bonds) prod *= spins[lat.spatial_link(b, t)];
    return -st.couplings.K * signs[t * lat.n_sites2d() + p2d] * prod;
}

}  // namespace detail3d

// Full energy from scratch.
inline double gauge_energy(const Cubic3D& lat, const GaugeState3D& st) {
    double e = 0.0;
    for (int t = 0; t < lat.Tmax; ++t)
        for (int p = 0; p < lat.n_sites2d(); ++p) {
            e += detail3d::spatial_term(lat, st, Species::sigma, p, t);
            if (st.two_species) e += detail3d::spatial_term(lat, st, Species::tau, p, t);
        }
    for (int t = 0; t < lat.Tmax - 1; ++t)
        for (int b = 0; b < lat.n_bonds2d(); ++b) {
            e += detail3d::row_term_sigma(lat, st, b, t);
            if (st.two_species) e += detail3d::row_term_tau(lat, st, b, t);
        }
    return e;
}

// The same model written in the spin-permutation form: the second species
// enters every term after the gate slice as the composite sigma*tau, and
// the gate row couples the composite at T to the composite at T+1. Equal
// to gauge_energy after mapping tau -> sigma*tau on all links after the
// gate (see permute_after_defect).
inline double gauge_energy_permutation_form(const Cubic3D& lat, const GaugeState3D& st) {
    if (!st.two_species)
        throw std::invalid_argument("permutation form requires two species");
    const int T = st.defect_time;
    auto w = [&](int link) {
        return int(st.sigma[link]) * int(st.tau[link]);
    };
    double e = 0.0;
    // sigma sector unchanged
    for (int t = 0; t < lat.Tmax; ++t)
        for (int p = 0; p < lat.n_sites2d(); ++p)
            e += detail3d::spatial_term(lat, st, Species::sigma, p, t);
    for (int t = 0; t < lat.Tmax - 1; ++t)
        for (int b = 0; b < lat.n_bonds2d(); ++b)
            e += detail3d::row_term_sigma(lat, st, b, t);
    // second species: plain tau up to the gate, composite after
    for (int t = 0; t < lat.Tmax; ++t)
        for (int p = 0; p < lat.n_sites2d(); ++p) {
            int prod = 1;
            for (int b : lat.base.plaquette_bonds(p)) {
                const int link = lat.spatial_link(b, t);
                prod *= t <= T ? int(st.tau[link]) : w(link);
            }
            e += -st.couplings.K * st.disorder.target.r[t * lat.n_sites2d() + p] * prod;
        }
    for (int t = 0; t < lat.Tmax - 1; ++t)
        for (int b = 0; b < lat.n_bonds2d(); ++b) {
            const auto [s1, s2] = lat.base.bond_endpoints(b);
            const int la = lat.spatial_link(b, t), lb = lat.spatial_link(b, t + 1);
            const int l1 = lat.timelike_link(s1, t), l2 = lat.timelike_link(s2, t);
            int prod;
            if (t < T)
                prod = int(st.tau[la]) * st.tau[lb] * st.tau[l1] * st.tau[l2];
            else
                prod = w(la) * w(lb) * w(l1) * w(l2);
            e += -st.couplings.J * st.disorder.target.s[t * lat.n_bonds2d() + b] * prod;
        }
    return e;
}

// Change of variables relating the two forms: tau -> sigma*tau on every
// link strictly after the gate (spatial slices >= T+1, timelike slots >= T).
inline GaugeState3D permute_after_defect(const Cubic3D& lat, const GaugeState3D& st) {
    GaugeState3D out = st;
    for (int t = st.defect_time + 1; t < lat.Tmax; ++t)
        for (int b = 0; b < lat.n_bonds2d(); ++b) {
            const int l = lat.spatial_link(b, t);
            out.tau[l] = static_cast<std::int8_t>(st.sigma[l] * st.tau[l]);
        }
    for (int t = st.defect_time; t < lat.Tmax - 1; ++t)
        for (int s = 0; s < lat.n_sites2d(); ++s) {
            const int l = lat.timelike_link(s, t);
            out.tau[l] = static_cast<std::int8_t>(st.sigma[l] * st.tau[l]);
        }
    return out;
}

// Metropolis sampler with single-link flips for both species.
class GaugeSampler {
public:
    // defect_time = -1 with two species keeps both sectors but drops the
    // gate row coupling (a decoupled pair, used by the factorization tests)
    GaugeSampler(const Cubic3D& lat, DisorderField3D disorder, GaugeCouplings couplings,
                 int defect_time, bool two_species)
        : lat_(lat) {
        if (two_species && defect_time != -1 &&
            (defect_time < 0 || defect_time > lat.Tmax - 2))
            throw std::invalid_argument("GaugeSampler: defect slice needs 0 <= T <= Tmax-2");
        st_.L = lat.L();
        st_.Tmax = lat.Tmax;
        st_.defect_time = two_species ? defect_time : -1;
        st_.two_species = two_species;
        st_.disorder = std::move(disorder);
        st_.couplings = couplings;
        st_.sigma.assign(lat.n_links(), 1);
        st_.tau.assign(lat.n_links(), 1);
        bond_plaquettes_.assign(lat.n_bonds2d(), {});
        for (int p = 0; p < lat.base.n_plaquettes(); ++p)
            for (int b : lat.base.plaquette_bonds(p)) bond_plaquettes_[b].push_back(p);
        for (const auto& v : bond_plaquettes_)
            if (v.size() != 2) throw std::logic_error("bond must sit in exactly 2 plaquettes");
        st_.tracked_energy = gauge_energy(lat_, st_);
    }

    const GaugeState3D& state() const { return st_; }
    GaugeState3D& state() { return st_; }
    const Cubic3D& lattice() const { return lat_; }

    void set_beta(double beta) {
        if (!(beta >= 0.0)) throw std::invalid_argument("set_beta: beta must be >= 0");
        st_.beta = beta;
    }

    void randomize(rng::Stream& stream) {
        for (auto& s : st_.sigma) s = static_cast<std::int8_t>(stream.pm1());
        if (st_.two_species)
            for (auto& t : st_.tau) t = static_cast<std::int8_t>(stream.pm1());
        st_.tracked_energy = gauge_energy(lat_, st_);
    }

    // sum of all Hamiltonian terms containing the given link
    double local_terms(Species sp, int link) const {
        double sum = 0.0;
        if (!lat_.link_is_timelike(link)) {
            const int t = lat_.spatial_link_t(link);
            const int b = lat_.spatial_link_bond(link);
            for (int p : bond_plaquettes_[b]) sum += detail3d::spatial_term(lat_, st_, sp, p, t);
            if (sp == Species::sigma) {
                if (t > 0) sum += detail3d::row_term_sigma(lat_, st_, b, t - 1);
                if (t < lat_.Tmax - 1) sum += detail3d::row_term_sigma(lat_, st_, b, t);
                // the gate row borrows sigma_l(T)
                if (st_.two_species && t == st_.defect_time)
                    sum += detail3d::row_term_tau(lat_, st_, b, t);
            } else {
                if (t > 0) sum += detail3d::row_term_tau(lat_, st_, b, t - 1);
                if (t < lat_.Tmax - 1) sum += detail3d::row_term_tau(lat_, st_, b, t);
            }
        } else {
            const int r = link - lat_.n_spatial_links();
            const int t = r / lat_.n_sites2d();
            const int site = r % lat_.n_sites2d();
            for (int b : lat_.base.site_bonds(site))
                sum += sp == Species::sigma ? detail3d::row_term_sigma(lat_, st_, b, t)
                                            : detail3d::row_term_tau(lat_, st_, b, t);
        }
        return sum;
    }

    // One sweep = one proposal per link per species, with (link, species)
    // drawn uniformly at random (random scan; see the 2D sampler note).
    void sweep(rng::Stream& stream, SweepStats* stats = nullptr) {
        const int n = lat_.n_links();
        const int per_sweep = st_.two_species ? 2 * n : n;
        for (int step = 0; step < per_sweep; ++step) {
            const int link = int(stream.below(n));
            const Species sp = st_.two_species && (stream.next_u64() >> 63)
                                   ? Species::tau
                                   : Species::sigma;
            propose(sp, link, stream, stats);
        }
    }

    // Gauge move: flip all links of one species at the vertex (site, t).
    // For the sigma species at the gate slice the move also flips the tau
    // timelike link above the vertex, compensating the five-spin row.
    void gauge_move(Species sp, int site, int t) {
        auto& spins = sp == Species::sigma ? st_.sigma : st_.tau;
        for (int link : lat_.vertex_links(site, t)) spins[link] = -spins[link];
        if (sp == Species::sigma && st_.two_species && t == st_.defect_time)
            st_.tau[lat_.timelike_link(site, t)] = -st_.tau[lat_.timelike_link(site, t)];
        st_.tracked_energy = gauge_energy(lat_, st_);
    }

    // Product of sigma or tau over a rectangular R1 x R2 loop of spatial
    // links at slice t, lower-left corner (x0, y0).
    int loop_product(Species sp, int R1, int R2, int x0, int y0, int t) const {
        const auto& spins = sp == Species::sigma ? st_.sigma : st_.tau;
        int prod = 1;
        for (int i = 0; i < R1; ++i) {
            prod *= spins[lat_.spatial_link(lat_.base.hbond(x0 + i, y0), t)];
            prod *= spins[lat_.spatial_link(lat_.base.hbond(x0 + i, y0 + R2), t)];
        }
        for (int j = 0; j < R2; ++j) {
            prod *= spins[lat_.spatial_link(lat_.base.vbond(x0, y0 + j), t)];
            prod *= spins[lat_.spatial_link(lat_.base.vbond(x0 + R1, y0 + j), t)];
        }
        return prod;
    }

    // translation average of the loop product at one slice
    double loop_translated(Species sp, int R1, int R2, int t) const {
        if (R1 < 1 || R2 < 1 || 2 * std::max(R1, R2) > lat_.L())
            throw std::invalid_argument("loop larger than lattice");
        long sum = 0;
        for (int y = 0; y < lat_.L(); ++y)
            for (int x = 0; x < lat_.L(); ++x) sum += loop_product(sp, R1, R2, x, y, t);
        return double(sum) / double(lat_.n_sites2d());
    }

    // per-rung-row average of the second species' timelike term value
    // (sign included, coupling stripped); the defect row shows the sigma
    // dressing
    std::vector<double> timelike_row_averages(Species sp) const {
        std::vector<double> rows(lat_.Tmax - 1, 0.0);
        const double coupling = -st_.couplings.J;
        for (int t = 0; t < lat_.Tmax - 1; ++t) {
            double sum = 0.0;
            for (int b = 0; b < lat_.n_bonds2d(); ++b)
                sum += (sp == Species::sigma ? detail3d::row_term_sigma(lat_, st_, b, t)
                                             : detail3d::row_term_tau(lat_, st_, b, t)) /
                       coupling;
            rows[t] = sum / double(lat_.n_bonds2d());
        }
        return rows;
    }

    bool all_plaquettes_satisfied() const {
        for (int t = 0; t < lat_.Tmax; ++t)
            for (int p = 0; p < lat_.n_sites2d(); ++p) {
                if (detail3d::spatial_term(lat_, st_, Species::sigma, p, t) > 0) return false;
                if (st_.two_species &&
                    detail3d::spatial_term(lat_, st_, Species::tau, p, t) > 0)
                    return false;
            }
        for (int t = 0; t < lat_.Tmax - 1; ++t)
            for (int b = 0; b < lat_.n_bonds2d(); ++b) {
                if (detail3d::row_term_sigma(lat_, st_, b, t) > 0) return false;
                if (st_.two_species && detail3d::row_term_tau(lat_, st_, b, t) > 0)
                    return false;
            }
        return true;
    }

private:
    void propose(Species sp, int link, rng::Stream& stream, SweepStats* stats) {
        const double de = -2.0 * local_terms(sp, link);
        if (de <= 0.0 || stream.u01() < std::exp(-st_.beta * de)) {
            auto& spins = sp == Species::sigma ? st_.sigma : st_.tau;
            spins[link] = -spins[link];
            st_.tracked_energy += de;
            if (stats) ++stats->accepted;
        }
        if (stats) ++stats->proposed;
    }

    Cubic3D lat_;
    GaugeState3D st_;
    std::vector<std::vector<int>> bond_plaquettes_;
};

// --- ensemble running -----------------------------------------------------

struct WilsonLoopSpec {
    int R1 = 2;
    int R2 = 2;
    int perimeter() const { return 2 * (R1 + R2); }
};

struct WilsonEstimate {
    int R1 = 0, R2 = 0, perimeter = 0;
    double mean = 0.0;
    double err = 0.0;
    int n_realizations = 0;
};

struct Gauge3DPointConfig {
    int L = 4;
    int Tmax = 9;          // default 2L+1 with the gate mid-circuit
    int defect_time = 4;   // T = L
    bool two_species = true;
    double p = 0.02;
    double q = 0.02;
    Schedule schedule = Schedule::defaults();
    std::vector<WilsonLoopSpec> loops;
    Species loop_species = Species::sigma;
    int t_margin = 2;  // slices skipped at both time boundaries when measuring
};

struct Gauge3DPointResult {
    std::vector<WilsonEstimate> loops;
    std::vector<double> row_mean;  // per timelike row, second species
    std::vector<double> row_err;
    double energy_mean = 0.0;
    double energy_err = 0.0;
};

struct GaugeRealizationResult {
    std::vector<double> loop_means;
    std::vector<double> row_means;
    double energy = 0.0;
};

inline GaugeRealizationResult run_gauge_realization(const Gauge3DPointConfig& cfg,
                                                    std::uint64_t master_seed,
                                                    int realization) {
    const Cubic3D lat(cfg.L, cfg.Tmax);
    const auto disorder = sample_disorder_3d(
        lat, cfg.p, cfg.q, rng::derive_key(master_seed, rng::kDisorder3D, 0x3d, realization));
    const auto couplings = gauge_couplings(cfg.p == 0.0 ? 1e-12 : cfg.p,
                                           cfg.q == 0.0 ? 1e-12 : cfg.q);
    GaugeSampler sampler(lat, disorder, couplings, cfg.defect_time, cfg.two_species);
    rng::Stream stream(rng::derive_key(master_seed, rng::kChain3D, 0x3d, realization));
    sampler.randomize(stream);
    for (double beta : cfg.schedule.beta_ladder) {
        sampler.set_beta(beta);
        for (int s = 0; s < cfg.schedule.sweeps_per_rung; ++s) sampler.sweep(stream);
    }
    sampler.set_beta(1.0);
    GaugeRealizationResult out;
    out.loop_means.assign(cfg.loops.size(), 0.0);
    out.row_means.assign(std::max(0, cfg.Tmax - 1), 0.0);
    const int t_lo = cfg.t_margin;
    const int t_hi = cfg.Tmax - cfg.t_margin;
    long n_meas = 0;
    double e_sum = 0.0;
    for (int s = 0; s < cfg.schedule.measurement_sweeps; ++s) {
        sampler.sweep(stream);
        if ((s + 1) % cfg.schedule.measurement_interval != 0) continue;
        ++n_meas;
        e_sum += sampler.state().tracked_energy;
        for (std::size_t i = 0; i < cfg.loops.size(); ++i) {
            double acc = 0.0;
            int slices = 0;
            for (int t = t_lo; t < t_hi; ++t, ++slices)
                acc += sampler.loop_translated(cfg.loop_species, cfg.loops[i].R1,
                                               cfg.loops[i].R2, t);
            out.loop_means[i] += slices ? acc / double(slices) : 0.0;
        }
        if (cfg.two_species) {
            const auto rows = sampler.timelike_row_averages(Species::tau);
            for (std::size_t t = 0; t < rows.size(); ++t) out.row_means[t] += rows[t];
        }
    }
    if (n_meas > 0) {
        for (auto& v : out.loop_means) v /= double(n_meas);
        for (auto& v : out.row_means) v /= double(n_meas);
        out.energy = e_sum / double(n_meas);
    }
    return out;
}

inline Gauge3DPointResult run_gauge_point(const Gauge3DPointConfig& cfg,
                                          int n_realizations, std::uint64_t master_seed,
                                          unsigned n_threads = 1) {
    if (n_realizations < 2)
        throw std::invalid_argument("run_gauge_point: need >= 2 realizations");
    std::vector<GaugeRealizationResult> results(n_realizations);
    parallel_for(n_realizations, n_threads, [&](std::size_t r) {
        results[r] = run_gauge_realization(cfg, master_seed, int(r));
    });
    Gauge3DPointResult out;
    auto mean_err = [&](auto getter, double& mean, double& err) {
        double sum = 0.0;
        for (const auto& r : results) sum += getter(r);
        mean = sum / double(n_realizations);
        double var = 0.0;
        for (const auto& r : results) var += (getter(r) - mean) * (getter(r) - mean);
        var /= double(n_realizations - 1);
        err = std::sqrt(var / double(n_realizations));
    };
    out.loops.resize(cfg.loops.size());
    for (std::size_t i = 0; i < cfg.loops.size(); ++i) {
        out.loops[i].R1 = cfg.loops[i].R1;
        out.loops[i].R2 = cfg.loops[i].R2;
        out.loops[i].perimeter = cfg.loops[i].perimeter();
        out.loops[i].n_realizations = n_realizations;
        mean_err([&](const GaugeRealizationResult& r) { return r.loop_means[i]; },
                 out.loops[i].mean, out.loops[i].err);
    }
    const std::size_t n_rows = results.front().row_means.size();
    out.row_mean.resize(n_rows);
    out.row_err.resize(n_rows);
    for (std::size_t t = 0; t < n_rows; ++t)
        mean_err([&](const GaugeRealizationResult& r) { return r.row_means[t]; },
                 out.row_mean[t], out.row_err[t]);
    mean_err([](const GaugeRealizationResult& r) { return r.energy; }, out.energy_mean,
             out.energy_err);
    return out;
}

// --- loop tension fit ------------------------------------------------------

enum class TensionStatus { ok, confined_indeterminate, too_few_points };

struct LoopTensionFit {
    double A = 0.0;      // perimeter coefficient of -ln<W>
    double A_err = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    int n_used = 0;
    TensionStatus status = TensionStatus::ok;
};

// Weighted least squares of -ln<W> against loop perimeter. Loops whose
// estimate is consistent with zero carry no usable signal; if fewer than
// three distinct perimeters survive, the result is flagged instead of
// extrapolated.
inline LoopTensionFit loop_tension(const std::vector<WilsonEstimate>& loops) {
    std::vector<double> xs, ys, ws;
    std::set<int> perims;
    bool any_significant = false;
    for (const auto& loop : loops) {
        if (loop.mean <= 0.0 || loop.mean <= 3.0 * loop.err) continue;
        any_significant = true;
        const double y = -std::log(loop.mean);
        const double sigma = loop.err > 0.0 ? loop.err / loop.mean : 1e-6;
        xs.push_back(loop.perimeter);
        ys.push_back(y);
        ws.push_back(1.0 / (sigma * sigma));
        perims.insert(loop.perimeter);
    }
    LoopTensionFit fit;
    if (perims.size() < 3) {
        fit.status = any_significant ? TensionStatus::too_few_points
                                     : TensionStatus::confined_indeterminate;
        return fit;
    }
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sw += ws[i];
        swx += ws[i] * xs[i];
        swy += ws[i] * ys[i];
        swxx += ws[i] * xs[i] * xs[i];
        swxy += ws[i] * xs[i] * ys[i];
    }
    const double delta = sw * swxx - swx * swx;
    fit.A = (sw * swxy - swx * swy) / delta;
    fit.intercept = (swxx * swy - swx * swxy) / delta;
    fit.A_err = std::sqrt(swxx > 0 ? sw / delta : 0.0);
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.intercept + fit.A * xs[i]);
        rss += r * r;
    }
    fit.residual_rms = std::sqrt(rss / double(xs.size()));
    fit.n_used = int(xs.size());
    return fit;
}

// --- exact oracle (L = 2, Tmax = 2) ----------------------------------------

struct ExactGaugeResult {
    double log_z = 0.0;
    double energy = 0.0;
};

// Exact thermal average for the smallest lattice. The single-species model
// is a direct 2^20 sum. The coupled model factorizes: the tau sum only
// feels sigma through the eight gate-row products, so one tau pass binned
// by that pattern plus one sigma pass gives the exact joint average.
inline ExactGaugeResult exact_gauge_small(const Cubic3D& lat,
                                          const DisorderField3D& disorder,
                                          GaugeCouplings couplings, int defect_time,
                                          bool two_species, double beta) {
    if (lat.L() != 2 || lat.Tmax != 2)
        throw std::invalid_argument("exact_gauge_small: only L=2, Tmax=2 supported");
    if (two_species && defect_time != 0 && defect_time != -1)
        throw std::invalid_argument("exact_gauge_small: defect must sit at T=0 (or -1)");
    const int n_links = lat.n_links();  // 20
    const int nb = lat.n_bonds2d();     // 8

    GaugeState3D st;
    st.L = lat.L();
    st.Tmax = lat.Tmax;
    st.defect_time = -1;  // single-species evaluations below
    st.two_species = false;
    st.disorder = disorder;
    st.couplings = couplings;
    st.sigma.assign(n_links, 1);
    st.tau.assign(n_links, 1);

    auto species_energy = [&](const std::vector<std::int8_t>& spins, bool target) {
        GaugeState3D tmp = st;
        if (target) {
            tmp.disorder.control = disorder.target;
        }
        tmp.sigma = spins;
        return gauge_energy(lat, tmp);
    };

    if (!two_species) {
        double e_min = 0.0;
        std::vector<double> energies(1 << n_links);
        std::vector<std::int8_t> spins(n_links);
        for (long c = 0; c < (1L << n_links); ++c) {
            for (int i = 0; i < n_links; ++i) spins[i] = (c >> i) & 1 ? 1 : -1;
            const double e = species_energy(spins, false);
            energies[c] = e;
            if (c == 0 || e < e_min) e_min = e;
        }
        double z = 0.0, esum = 0.0;
        for (double e : energies) {
            const double w = std::exp(-beta * (e - e_min));
            z += w;
            esum += w * e;
        }
        return {std::log(z) - beta * e_min, esum / z};
    }

    // tau pass: bin by the gate-row product pattern rho (one bit per bond)
    std::vector<double> z_by_rho(1 << nb, 0.0), e_by_rho(1 << nb, 0.0);
    {
        std::vector<std::int8_t> tau(n_links);
        for (long c = 0; c < (1L << n_links); ++c) {
            for (int i = 0; i < n_links; ++i) tau[i] = (c >> i) & 1 ? 1 : -1;
            // base energy: spatial tau terms only (the lone rung row is the gate row)
            GaugeState3D tmp = st;
            tmp.sigma = tau;
            tmp.disorder.control = disorder.target;
            double e_base = 0.0;
            for (int t = 0; t < lat.Tmax; ++t)
                for (int p = 0; p < lat.n_sites2d(); ++p)
                    e_base += detail3d::spatial_term(lat, tmp, Species::sigma, p, t);
            int rho = 0;
            for (int b = 0; b < nb; ++b) {
                const auto [s1, s2] = lat.base.bond_endpoints(b);
                const int prod = tau[lat.spatial_link(b, 0)] * tau[lat.spatial_link(b, 1)] *
                                 tau[lat.timelike_link(s1, 0)] * tau[lat.timelike_link(s2, 0)];
                if (prod < 0) rho |= 1 << b;
            }
            const double w = std::exp(-beta * e_base);
            z_by_rho[rho] += w;
            e_by_rho[rho] += w * e_base;
        }
    }
    // per sigma gate-link pattern pi: tau-sector partition and energy sums
    std::vector<double> z_tau(1 << nb, 0.0), e_tau(1 << nb, 0.0);
    for (int pi = 0; pi < (1 << nb); ++pi) {
        for (int rho = 0; rho < (1 << nb); ++rho) {
            if (z_by_rho[rho] == 0.0) continue;
            double row_energy = 0.0;
            for (int b = 0; b < nb; ++b) {
                const int sign = disorder.target.s[b];
                const int pib = defect_time == 0 ? ((pi >> b) & 1 ? -1 : 1) : 1;
                const int rhob = (rho >> b) & 1 ? -1 : 1;
                row_energy += -couplings.J * sign * pib * rhob;
            }
            const double f = std::exp(-beta * row_energy);
            z_tau[pi] += f * z_by_rho[rho];
            e_tau[pi] += f * (e_by_rho[rho] + row_energy * z_by_rho[rho]);
        }
    }
    // sigma pass
    double z = 0.0, esum = 0.0, log_shift = 0.0;
    bool first = true;
    std::vector<std::int8_t> sigma(n_links);
    std::vector<double> e_sigma(1 << n_links);
    std::vector<int> pi_of(1 << n_links);
    for (long c = 0; c < (1L << n_links); ++c) {
        for (int i = 0; i < n_links; ++i) sigma[i] = (c >> i) & 1 ? 1 : -1;
        e_sigma[c] = species_energy(sigma, false);
        int pi = 0;
        for (int b = 0; b < nb; ++b)
            if (sigma[lat.spatial_link(b, 0)] < 0) pi |= 1 << b;
        pi_of[c] = pi;
        if (first || e_sigma[c] < log_shift) log_shift = e_sigma[c];
        first = false;
    }
    for (long c = 0; c < (1L << n_links); ++c) {
        const double w = std::exp(-beta * (e_sigma[c] - log_shift));
        z += w * z_tau[pi_of[c]];
        esum += w * (e_sigma[c] * z_tau[pi_of[c]] + e_tau[pi_of[c]]);
    }
    return {std::log(z) - beta * log_shift, esum / z};
}

}  // namespace tcnot
