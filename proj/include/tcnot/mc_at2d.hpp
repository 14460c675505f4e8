#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "tcnot/disorder.hpp"
#include "tcnot/lattice2d.hpp"
#include "tcnot/noise.hpp"
#include "tcnot/parallel.hpp"
#include "tcnot/rng.hpp"

namespace tcnot {

// Two coupled site-spin species on the torus with quenched bond signs:
//   H = -K2 sum_l s_c sigma sigma - K4 sum_l s_t tau tau
//       - K4 sum_l s_t s_c tau tau sigma sigma
// sampled from exp(-beta H) with beta annealed up to 1.

struct AtState {
    int L = 0;
    std::vector<std::int8_t> sigma;
    std::vector<std::int8_t> tau;
    DisorderField2D disorder;
    ATCouplings couplings;
    double beta = 1.0;
    double tracked_energy = 0.0;  // updated incrementally by sweeps
};

// Sum over all bonds of the three Hamiltonian terms, from scratch.
inline double at_energy(const Torus2D& lat, const DisorderField2D& disorder,
                        const ATCouplings& k, const std::vector<std::int8_t>& sigma,
                        const std::vector<std::int8_t>& tau) {
    if (int(sigma.size()) != lat.n_sites() || int(tau.size()) != lat.n_sites() ||
        int(disorder.s_c.size()) != lat.n_bonds())
        throw std::invalid_argument("at_energy: size mismatch");
    double e = 0.0;
    for (int b = 0; b < lat.n_bonds(); ++b) {
        const auto [i, j] = lat.bond_endpoints(b);
        const double ss = double(sigma[i]) * sigma[j];
        const double tt = double(tau[i]) * tau[j];
        e -= k.K2 * disorder.s_c[b] * ss;
        e -= k.K4 * disorder.s_t[b] * tt;
        e -= k.K4 * disorder.s_t[b] * disorder.s_c[b] * tt * ss;
    }
    return e;
}

inline double at_energy(const AtState& st) {
    return at_energy(Torus2D(st.L), st.disorder, st.couplings, st.sigma, st.tau);
}

// |M_x| = |sum_i x_i| / L^2 for both species.
inline std::pair<double, double> measure_magnetizations(const AtState& st) {
    long ms = 0, mt = 0;
    for (std::size_t i = 0; i < st.sigma.size(); ++i) {
        ms += st.sigma[i];
        mt += st.tau[i];
    }
    const double n = double(st.sigma.size());
    return {std::abs(ms) / n, std::abs(mt) / n};
}

// Annealing ladder. The final rung is always beta = 1 exactly; measurements
// happen only there.
struct Schedule {
    std::vector<double> beta_ladder;
    int sweeps_per_rung = 500;
    int measurement_sweeps = 2000;
    int measurement_interval = 10;
    int n_realizations = 200;

    static std::vector<double> geometric_ladder(double beta0, int rungs) {
        std::vector<double> ladder(rungs);
        for (int i = 0; i < rungs; ++i)
            ladder[i] = beta0 * std::pow(1.0 / beta0, double(i) / double(rungs - 1));
        ladder.back() = 1.0;
        return ladder;
    }

    static Schedule defaults() {
        Schedule s;
        s.beta_ladder = geometric_ladder(0.1, 20);
        return s;
    }

    void validate() const {
        if (beta_ladder.empty() || beta_ladder.back() != 1.0)
            throw std::invalid_argument("Schedule: ladder must end at beta = 1");
        if (!std::is_sorted(beta_ladder.begin(), beta_ladder.end()))
            throw std::invalid_argument("Schedule: ladder must ascend");
        if (sweeps_per_rung < 1 || measurement_sweeps < 1 || measurement_interval < 1)
            throw std::invalid_argument("Schedule: counts must be >= 1");
    }
};

struct SweepStats {
    long proposed = 0;
    long accepted = 0;
    double acceptance_rate() const {
        return proposed ? double(accepted) / double(proposed) : 0.0;
    }
};

// Sampler owning the neighbor tables and the per-beta acceptance table.
// Every single-site energy change is of the form 2*K2*a + 2*K4*g with
// a in [-4, 4] and g in [-8, 8], so acceptance probabilities are table
// lookups and the inner loop is exp-free.
class AtSampler {
public:
    AtSampler(const Torus2D& lat, DisorderField2D disorder, ATCouplings couplings)
        : lat_(lat) {
        st_.L = lat.L;
        st_.disorder = std::move(disorder);
        st_.couplings = couplings;
        st_.sigma.assign(lat.n_sites(), 1);
        st_.tau.assign(lat.n_sites(), 1);
        nbr_site_.resize(lat.n_sites());
        nbr_bond_.resize(lat.n_sites());
        for (int s = 0; s < lat.n_sites(); ++s) {
            const auto bonds = lat.site_bonds(s);
            for (int m = 0; m < 4; ++m) {
                const auto [a, b] = lat.bond_endpoints(bonds[m]);
                nbr_site_[s][m] = (a == s) ? b : a;
                nbr_bond_[s][m] = bonds[m];
            }
        }
        set_beta(1.0);
        st_.tracked_energy = at_energy(lat_, st_.disorder, st_.couplings, st_.sigma, st_.tau);
    }

    const AtState& state() const { return st_; }
    AtState& state() { return st_; }

    void set_beta(double beta) {
        if (!(beta >= 0.0)) throw std::invalid_argument("set_beta: beta must be >= 0");
        st_.beta = beta;
        for (int a = -4; a <= 4; ++a)
            for (int g = -8; g <= 8; ++g) {
                const double de =
                    2.0 * st_.couplings.K2 * a + 2.0 * st_.couplings.K4 * g;
                delta_e_[a + 4][g + 8] = de;
                accept_[a + 4][g + 8] = std::exp(-beta * de);
            }
    }

    void randomize_spins(rng::Stream& stream) {
        for (auto& s : st_.sigma) s = static_cast<std::int8_t>(stream.pm1());
        for (auto& t : st_.tau) t = static_cast<std::int8_t>(stream.pm1());
        st_.tracked_energy = at_energy(lat_, st_.disorder, st_.couplings, st_.sigma, st_.tau);
    }

    // One sweep = 3 N proposals with (site, move) drawn uniformly at random,
    // move in {flip sigma_i, flip tau_i, flip both}, each accepted with
    // min(1, exp(-beta dE)). Random scan matters: a fixed site/move order
    // makes downhill proposals unrejectable in a fixed pattern, which
    // quasi-disconnects part of the configuration space on small lattices
    // (caught by the exact-enumeration chi-square test).
    void sweep(rng::Stream& stream, SweepStats* stats = nullptr) {
        const int n = lat_.n_sites();
        for (int step = 0; step < 3 * n; ++step) {
            const int i = int(stream.below(n));
            const int move = int(stream.below(3));
            int a = 0, b = 0, c = 0;  // bond sums entering dE
            for (int m = 0; m < 4; ++m) {
                const int j = nbr_site_[i][m];
                const int l = nbr_bond_[i][m];
                const int ss = st_.sigma[i] * st_.sigma[j];
                const int tt = st_.tau[i] * st_.tau[j];
                const int sc = st_.disorder.s_c[l];
                const int stn = st_.disorder.s_t[l];
                a += sc * ss;
                b += sc * stn * ss * tt;
                c += stn * tt;
            }
            // dE = 2 K2 a + 2 K4 b (sigma), 2 K4 (b + c) (tau),
            //      2 K2 a + 2 K4 c (both; the four-body term is invariant)
            const int ai = move == 0 ? a : move == 1 ? 0 : a;
            const int gi = move == 0 ? b : move == 1 ? b + c : c;
            if (stream.u01() < accept_[ai + 4][gi + 8]) {
                if (move != 1) st_.sigma[i] = -st_.sigma[i];
                if (move != 0) st_.tau[i] = -st_.tau[i];
                st_.tracked_energy += delta_e_[ai + 4][gi + 8];
                if (stats) ++stats->accepted;
            }
            if (stats) ++stats->proposed;
        }
    }

private:
    Torus2D lat_;
    AtState st_;
    std::vector<std::array<int, 4>> nbr_site_;
    std::vector<std::array<int, 4>> nbr_bond_;
    double accept_[9][17];
    double delta_e_[9][17];
};

// Per-measurement traces at beta = 1 plus simple summary statistics.
struct ObservableSeries {
    std::vector<double> m_sigma;
    std::vector<double> m_tau;
    std::vector<double> energy;
    double acceptance_rate = 0.0;

    static double mean(const std::vector<double>& v) {
        return v.empty() ? 0.0
                         : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    }
    // standard error via batch means, robust to autocorrelation
    static double batch_std_error(const std::vector<double>& v, int n_batches = 20) {
        if (v.size() < 2) return 0.0;
        n_batches = std::min<int>(n_batches, int(v.size()));
        const std::size_t per = v.size() / n_batches;
        std::vector<double> batches;
        for (int k = 0; k < n_batches; ++k) {
            const auto first = v.begin() + k * per;
            batches.push_back(std::accumulate(first, first + per, 0.0) / double(per));
        }
        const double m = mean(batches);
        double var = 0.0;
        for (double x : batches) var += (x - m) * (x - m);
        var /= double(batches.size() - 1);
        return std::sqrt(var / double(batches.size()));
    }
};

// Random initialization, annealing down the ladder, then measurements at
// beta = 1. Deterministic given the seed.
inline ObservableSeries anneal_run(const Torus2D& lat, const DisorderField2D& disorder,
                                   const ATCouplings& couplings, const Schedule& schedule,
                                   std::uint64_t seed) {
    schedule.validate();
    AtSampler sampler(lat, disorder, couplings);
    rng::Stream stream(rng::derive_key(seed, rng::kChain2D));
    sampler.randomize_spins(stream);
    SweepStats stats;
    for (double beta : schedule.beta_ladder) {
        sampler.set_beta(beta);
        for (int s = 0; s < schedule.sweeps_per_rung; ++s) sampler.sweep(stream, &stats);
    }
    sampler.set_beta(1.0);
    ObservableSeries series;
    for (int s = 0; s < schedule.measurement_sweeps; ++s) {
        sampler.sweep(stream, &stats);
        if ((s + 1) % schedule.measurement_interval == 0) {
            const auto [ms, mt] = measure_magnetizations(sampler.state());
            series.m_sigma.push_back(ms);
            series.m_tau.push_back(mt);
            series.energy.push_back(sampler.state().tracked_energy);
        }
    }
    series.acceptance_rate = stats.acceptance_rate();
    return series;
}

// One point of a magnetization curve: disorder-averaged means with
// standard errors over realizations.
struct CurvePoint {
    int L = 0;
    double p_tilde = 0.0;
    double p = 0.0;
    double m_sigma_mean = 0.0, m_sigma_err = 0.0;
    double m_tau_mean = 0.0, m_tau_err = 0.0;
    double energy_mean = 0.0, energy_err = 0.0;
    int n_realizations = 0;
    std::uint64_t seed = 0;
};

struct RealizationResult {
    double m_sigma = 0.0;
    double m_tau = 0.0;
    double energy = 0.0;
};

inline RealizationResult run_realization_2d(const Torus2D& lat, double p_tilde,
                                            const Schedule& schedule,
                                            std::uint64_t master_seed, int realization) {
    if (p_tilde == 0.0) {
        // zero rate: clean disorder, infinite couplings, perfect order. The
        // magnetizations are exact; the energy column uses clamped couplings.
        const auto k = at_couplings(1e-12);
        return {1.0, 1.0, -(k.K2 + 2 * k.K4) * lat.n_bonds()};
    }
    const auto disorder = sample_disorder_2d(
        lat, p_tilde, rng::derive_key(master_seed, rng::kDisorder2D, 0x5eed, realization));
    const auto couplings = at_couplings(p_tilde);
    const auto series =
        anneal_run(lat, disorder, couplings,
                   schedule, rng::derive_key(master_seed, rng::kChain2D, 0x5eed, realization));
    return {ObservableSeries::mean(series.m_sigma), ObservableSeries::mean(series.m_tau),
            ObservableSeries::mean(series.energy)};
}

// Independent disorder realizations (parallel; deterministic reduction in
// realization order) averaged into a curve point.
inline CurvePoint disorder_average(const Torus2D& lat, double p_tilde,
                                   const Schedule& schedule, int n_realizations,
                                   std::uint64_t master_seed,
                                   unsigned n_threads = 1) {
    if (n_realizations < 2)
        throw std::invalid_argument("disorder_average: need >= 2 realizations");
    std::vector<RealizationResult> results(n_realizations);
    parallel_for(n_realizations, n_threads, [&](std::size_t r) {
        results[r] = run_realization_2d(lat, p_tilde, schedule, master_seed, int(r));
    });
    CurvePoint pt;
    pt.L = lat.L;
    pt.p_tilde = p_tilde;
    pt.p = net_rate(p_tilde);
    pt.n_realizations = n_realizations;
    pt.seed = master_seed;
    auto reduce = [&](auto getter, double& mean, double& err) {
        double sum = 0.0;
        for (const auto& r : results) sum += getter(r);
        mean = sum / double(n_realizations);
        double var = 0.0;
        for (const auto& r : results) var += (getter(r) - mean) * (getter(r) - mean);
        var /= double(n_realizations - 1);
        err = std::sqrt(var / double(n_realizations));
    };
    reduce([](const RealizationResult& r) { return r.m_sigma; }, pt.m_sigma_mean,
           pt.m_sigma_err);
    reduce([](const RealizationResult& r) { return r.m_tau; }, pt.m_tau_mean, pt.m_tau_err);
    reduce([](const RealizationResult& r) { return r.energy; }, pt.energy_mean,
           pt.energy_err);
    return pt;
}

// Exact sums over all spin configurations; the oracle the sampler is
// validated against. Capped at L <= 3 (2^18 joint states).
struct ExactAtResult {
    double log_z = 0.0;
    double m_sigma = 0.0;
    double m_tau = 0.0;
    double energy = 0.0;
};

inline ExactAtResult exact_partition_small(const Torus2D& lat,
                                           const DisorderField2D& disorder,
                                           const ATCouplings& couplings, double beta) {
    const int n = lat.n_sites();
    if (n > 9) throw std::invalid_argument("exact_partition_small: L must be <= 3");
    const long n_states = 1L << n;
    std::vector<std::int8_t> sigma(n), tau(n);
    // pass 1: minimum energy for a stable log-sum-exp
    double e_min = 0.0;
    bool first = true;
    std::vector<double> energies(n_states * n_states);
    for (long is = 0; is < n_states; ++is) {
        for (int i = 0; i < n; ++i) sigma[i] = (is >> i) & 1 ? 1 : -1;
        for (long it = 0; it < n_states; ++it) {
            for (int i = 0; i < n; ++i) tau[i] = (it >> i) & 1 ? 1 : -1;
            const double e = at_energy(lat, disorder, couplings, sigma, tau);
            energies[is * n_states + it] = e;
            if (first || e < e_min) {
                e_min = e;
                first = false;
            }
        }
    }
    double z = 0.0, sum_ms = 0.0, sum_mt = 0.0, sum_e = 0.0;
    for (long is = 0; is < n_states; ++is) {
        int msum = 0;
        for (int i = 0; i < n; ++i) msum += (is >> i) & 1 ? 1 : -1;
        const double ms = std::abs(msum) / double(n);
        for (long it = 0; it < n_states; ++it) {
            int tsum = 0;
            for (int i = 0; i < n; ++i) tsum += (it >> i) & 1 ? 1 : -1;
            const double mt = std::abs(tsum) / double(n);
            const double e = energies[is * n_states + it];
            const double w = std::exp(-beta * (e - e_min));
            z += w;
            sum_ms += w * ms;
            sum_mt += w * mt;
            sum_e += w * e;
        }
    }
    return {std::log(z) - beta * e_min, sum_ms / z, sum_mt / z, sum_e / z};
}

// Gauge transformation of the disorder (one site-spin pattern per species):
// s_c -> s_c g[l1] g[l2], s_t -> s_t h[l1] h[l2]. Observables built from the
// partition function are invariant under it.
inline DisorderField2D apply_gauge(const Torus2D& lat, const DisorderField2D& disorder,
                                   const std::vector<std::int8_t>& g_sigma,
                                   const std::vector<std::int8_t>& g_tau) {
    DisorderField2D out = disorder;
    for (int b = 0; b < lat.n_bonds(); ++b) {
        const auto [i, j] = lat.bond_endpoints(b);
        out.s_c[b] = static_cast<std::int8_t>(disorder.s_c[b] * g_sigma[i] * g_sigma[j]);
        out.s_t[b] = static_cast<std::int8_t>(disorder.s_t[b] * g_tau[i] * g_tau[j]);
    }
    return out;
}

}  // namespace tcnot
