#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tcnot/noise.hpp"
#include "tcnot/parallel.hpp"
#include "tcnot/rng.hpp"
#include "tcnot/surface_code.hpp"

namespace tcnot {

// Bit flips sampled in the four persistent channels: 1/2 = before/after
// the gate, c/t = control/target block.
struct ErrorSample {
    QubitMask e_c1 = 0, e_c2 = 0, e_t1 = 0, e_t2 = 0;
};

// Detector bits per block. Control detectors see the combined control
// error, target detectors additionally see the pre-gate control error the
// gate copied over: d_c = syn(e_c1 ^ e_c2), d_t = syn(e_t1 ^ e_t2 ^ e_c1).
struct DetectorSet {
    std::uint64_t d_c = 0;
    std::uint64_t d_t = 0;
};

inline ErrorSample sample_error(const RotatedSurfaceCode& code, double p_tilde,
                                std::uint64_t seed) {
    if (!(p_tilde >= 0.0 && p_tilde <= 0.5))
        throw std::invalid_argument("sample_error: p_tilde must lie in [0, 1/2]");
    rng::Stream stream(rng::derive_key(seed, rng::kDecoderShots));
    ErrorSample s;
    for (QubitMask* mask : {&s.e_c1, &s.e_c2, &s.e_t1, &s.e_t2})
        for (int q = 0; q < code.n_qubits(); ++q)
            if (stream.bernoulli(p_tilde)) *mask |= QubitMask(1) << q;
    return s;
}

inline QubitMask combined_control(const ErrorSample& s) { return s.e_c1 ^ s.e_c2; }
inline QubitMask combined_target(const ErrorSample& s) {
    return s.e_t1 ^ s.e_t2 ^ s.e_c1;
}

inline DetectorSet detectors(const RotatedSurfaceCode& code, const ErrorSample& s) {
    return {code.syndrome(combined_control(s)), code.syndrome(combined_target(s))};
}

struct DecodeOutcome {
    QubitMask correction_c = 0;
    QubitMask correction_t = 0;
    bool logical_c = false;  // class of the correction relative to the reference pair
    bool logical_t = false;
    bool tie = false;
};

// Most-likely-error decoder over the correlated bond weights. The joint
// per-qubit law factorizes as p(s_c, s_t) ~ exp(K2 s_c + K4 s_t + K4 s_c s_t),
// so with u/v the control/target flip indicators the cost of a candidate
// pair is
//   cost(u, v) = 2(K2 + K4) wt(u) + 4 K4 wt(v & ~u) + const,
// which the A-side flip having already paid for the copied error: wherever
// u is set, the target sign is free. The decoder enumerates both stabilizer
// cosets (including the logical representative), prunes on weight lower
// bounds, and returns the global arg-max configuration. Exact, hence
// limited to d <= 5 (coset size 2^13 per block).
class JointMleDecoder {
public:
    JointMleDecoder(const RotatedSurfaceCode& code, double p_tilde)
        : code_(&code), p_tilde_(p_tilde) {
        if (code.d > 5)
            throw std::invalid_argument("JointMleDecoder: d must be <= 5");
        if (!(p_tilde >= 0.0 && p_tilde <= 0.5))
            throw std::invalid_argument("JointMleDecoder: p_tilde must lie in [0, 1/2]");
        if (p_tilde > 0.0 && p_tilde < 0.5) {
            const auto k = at_couplings(p_tilde);
            cost_u_ = 2.0 * (k.K2 + k.K4);
            cost_v_ = 4.0 * k.K4;
        } else {
            cost_u_ = cost_v_ = 0.0;  // degenerate rates; everything ties
        }
        // kernel of the syndrome map: X-stabilizers plus the logical X
        std::vector<QubitMask> gens = code.x_stabs;
        gens.push_back(code.logical_x);
        const std::size_t k = gens.size();
        combos_.resize(std::size_t(1) << k);
        combo_logical_.resize(combos_.size());
        QubitMask acc = 0;
        bool logical = false;
        combos_[0] = 0;
        combo_logical_[0] = false;
        for (std::size_t i = 1; i < combos_.size(); ++i) {
            const int flip = std::countr_zero(i);  // Gray-code walk
            acc ^= gens[flip];
            if (flip == int(k - 1)) logical = !logical;
            combos_[i] = acc;
            combo_logical_[i] = logical;
        }
    }

    DecodeOutcome decode(const DetectorSet& det) const {
        const QubitMask u0 = code_->solve_syndrome(det.d_c);
        const QubitMask v0 = code_->solve_syndrome(det.d_t);
        const auto u_sorted = sorted_coset(u0);
        const auto v_sorted = sorted_coset(v0);

        double best = std::numeric_limits<double>::infinity();
        Candidate best_u{}, best_v{};
        bool tie = false;
        const double eps = 1e-9 * (cost_u_ + cost_v_ + 1.0);
        for (const auto& uc : u_sorted) {
            const double base = cost_u_ * uc.weight;
            if (base > best + eps) break;
            const QubitMask not_u = ~uc.mask;
            for (const auto& vc : v_sorted) {
                if (cost_v_ > 0.0 && vc.weight > uc.weight &&
                    base + cost_v_ * (vc.weight - uc.weight) > best + eps)
                    break;  // wt(v & ~u) >= wt(v) - wt(u) for everything below
                const double cost = base + cost_v_ * std::popcount(vc.mask & not_u);
                if (cost + eps < best) {
                    best = cost;
                    best_u = uc;
                    best_v = vc;
                    tie = false;
                } else if (cost <= best + eps &&
                           (uc.logical != best_u.logical || vc.logical != best_v.logical)) {
                    tie = true;
                    if (rank(uc, vc) < rank(best_u, best_v)) {
                        best_u = uc;
                        best_v = vc;
                    }
                }
            }
        }
        DecodeOutcome out;
        out.correction_c = best_u.mask;
        out.correction_t = best_v.mask;
        out.logical_c = best_u.logical;
        out.logical_t = best_v.logical;
        out.tie = tie;
        return out;
    }

    const RotatedSurfaceCode& code() const { return *code_; }
    double p_tilde() const { return p_tilde_; }

private:
    struct Candidate {
        QubitMask mask = 0;
        int weight = 0;
        bool logical = false;
    };

    static int rank(const Candidate& u, const Candidate& v) {
        return 2 * (int(u.logical) + int(v.logical)) + int(u.logical);
    }

    // coset {base ^ combo}, counting-sorted by Hamming weight
    std::vector<Candidate> sorted_coset(QubitMask base) const {
        const int nq = code_->n_qubits();
        std::vector<int> bucket_count(nq + 1, 0);
        std::vector<Candidate> cands(combos_.size());
        for (std::size_t i = 0; i < combos_.size(); ++i) {
            const QubitMask m = base ^ combos_[i];
            const int w = std::popcount(m);
            cands[i] = {m, w, combo_logical_[i] != 0};
            ++bucket_count[w];
        }
        std::vector<int> offset(nq + 2, 0);
        for (int w = 0; w <= nq; ++w) offset[w + 1] = offset[w] + bucket_count[w];
        std::vector<Candidate> sorted(cands.size());
        for (const auto& c : cands) sorted[offset[c.weight]++] = c;
        return sorted;
    }

    const RotatedSurfaceCode* code_;
    double p_tilde_;
    double cost_u_ = 0.0, cost_v_ = 0.0;
    std::vector<QubitMask> combos_;
    std::vector<std::uint8_t> combo_logical_;
};

// Wilson score interval, z = 1.96.
struct RateEstimate {
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

inline RateEstimate wilson_interval(long successes, long trials) {
    const double z = 1.96;
    const double n = double(trials);
    const double phat = trials ? double(successes) / n : 0.0;
    const double denom = 1.0 + z * z / n;
    const double center = (phat + z * z / (2.0 * n)) / denom;
    const double hw =
        z * std::sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n)) / denom;
    return {phat, std::max(0.0, center - hw), std::min(1.0, center + hw)};
}

struct LerRow {
    int d = 0;
    double p_tilde = 0.0;
    double p = 0.0;
    long shots = 0;
    RateEstimate ler_control;
    RateEstimate ler_target;
    long ties = 0;
    std::uint64_t seed = 0;
};

// Monte-Carlo logical error rates: sample the four channels, decode from
// the detectors alone, and count shots whose residual falls in a
// non-trivial logical class. Shots are independent streams, so the result
// is reproducible under any thread count.
inline LerRow ler_estimate(const RotatedSurfaceCode& code, double p_tilde, long shots,
                           std::uint64_t seed, unsigned n_threads = 1) {
    if (shots < 1000) throw std::invalid_argument("ler_estimate: shots must be >= 1000");
    const JointMleDecoder decoder(code, p_tilde);
    struct Tally {
        long fail_c = 0, fail_t = 0, ties = 0;
    };
    const unsigned chunks = std::max(1u, n_threads * 8);
    std::vector<Tally> tallies(chunks);
    const long per = (shots + chunks - 1) / chunks;
    parallel_for(chunks, n_threads, [&](std::size_t chunk) {
        Tally& tally = tallies[chunk];
        const long lo = long(chunk) * per;
        const long hi = std::min(shots, lo + per);
        for (long i = lo; i < hi; ++i) {
            const auto sample =
                sample_error(code, p_tilde, rng::derive_key(seed, rng::kDecoderShots, i));
            const auto det = detectors(code, sample);
            const auto out = decoder.decode(det);
            if (code.syndrome(out.correction_c) != det.d_c ||
                code.syndrome(out.correction_t) != det.d_t)
                throw std::logic_error("ler_estimate: correction does not match detectors");
            if (code.is_logical_x(combined_control(sample) ^ out.correction_c))
                ++tally.fail_c;
            if (code.is_logical_x(combined_target(sample) ^ out.correction_t))
                ++tally.fail_t;
            if (out.tie) ++tally.ties;
        }
    });
    Tally total;
    for (const auto& t : tallies) {
        total.fail_c += t.fail_c;
        total.fail_t += t.fail_t;
        total.ties += t.ties;
    }
    LerRow row;
    row.d = code.d;
    row.p_tilde = p_tilde;
    row.p = net_rate(p_tilde);
    row.shots = shots;
    row.ler_control = wilson_interval(total.fail_c, shots);
    row.ler_target = wilson_interval(total.fail_t, shots);
    row.ties = total.ties;
    row.seed = seed;
    return row;
}

// Exact d = 3 logical error rates: sum the joint bond-sign law over all
// 4^9 combined flip patterns, decoding each detector pair once (256 pairs)
// and accumulating probability into success/failure buckets.
struct ExactLer {
    double ler_control = 0.0;
    double ler_target = 0.0;
    double total_probability = 0.0;  // conservation check, must be 1
    std::array<double, 4> class_mass{};  // (fail_c, fail_t) buckets
};

inline ExactLer exact_ler_d3(double p_tilde) {
    const RotatedSurfaceCode code(3);
    const JointMleDecoder decoder(code, p_tilde);
    const auto dist = joint_bond_dist(p_tilde);
    const int nq = code.n_qubits();

    // decode every possible detector pair once
    const int n_syn = 1 << code.n_z_stabs();
    std::vector<DecodeOutcome> cache(n_syn * n_syn);
    for (int sc = 0; sc < n_syn; ++sc)
        for (int st = 0; st < n_syn; ++st)
            cache[sc * n_syn + st] =
                decoder.decode({std::uint64_t(sc), std::uint64_t(st)});

    std::vector<std::uint32_t> syn_of(1 << nq);
    for (std::uint32_t u = 0; u < syn_of.size(); ++u)
        syn_of[u] = std::uint32_t(code.syndrome(u));

    // probability by category counts; all qubits share the same law
    std::array<std::vector<double>, 4> powers;
    const double base[4] = {dist.prob[0][0], dist.prob[0][1], dist.prob[1][0],
                            dist.prob[1][1]};
    for (int c = 0; c < 4; ++c) {
        powers[c].resize(nq + 1);
        powers[c][0] = 1.0;
        for (int k = 1; k <= nq; ++k) powers[c][k] = powers[c][k - 1] * base[c];
    }

    // Kahan-compensated bucket sums; 4^9 terms would otherwise drift at
    // the 1e-11 level
    double mass[4] = {0, 0, 0, 0};
    double comp[4] = {0, 0, 0, 0};
    for (std::uint32_t u = 0; u < (1u << nq); ++u) {
        const int cu = std::popcount(u);
        for (std::uint32_t v = 0; v < (1u << nq); ++v) {
            const int cuv = std::popcount(u & v);
            const int cv = std::popcount(v);
            const double prob = powers[0][nq - cu - cv + cuv] * powers[1][cv - cuv] *
                                powers[2][cu - cuv] * powers[3][cuv];
            const auto& out = cache[syn_of[u] * n_syn + syn_of[v]];
            const bool fail_c = code.is_logical_x(u ^ out.correction_c);
            const bool fail_t = code.is_logical_x(v ^ out.correction_t);
            const int bucket = 2 * fail_c + fail_t;
            const double y = prob - comp[bucket];
            const double t = mass[bucket] + y;
            comp[bucket] = (t - mass[bucket]) - y;
            mass[bucket] = t;
        }
    }
    ExactLer result;
    for (int b = 0; b < 4; ++b) result.class_mass[b] = mass[b];
    result.total_probability = mass[0] + mass[1] + mass[2] + mass[3];
    result.ler_control = mass[2] + mass[3];
    result.ler_target = mass[1] + mass[3];
    return result;
}

}  // namespace tcnot
