#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tcnot {

// Physical error rates. p is the net bit-flip probability of the combined
// channel, p_tilde the per-channel persistent rate (one channel before and
// one after the gate), q the syndrome-error probability. When both p and
// p_tilde are set they must satisfy p = 2*p_tilde*(1-p_tilde).
struct NoiseParams {
    double p = 0.0;
    double p_tilde = 0.0;
    double q = 0.0;

    void validate() const {
        for (double r : {p, p_tilde, q})
            if (!(r >= 0.0 && r <= 0.5))
                throw std::invalid_argument("NoiseParams: rates must lie in [0, 1/2]");
        if (p != 0.0 && p_tilde != 0.0 &&
            std::abs(p - 2.0 * p_tilde * (1.0 - p_tilde)) > 1e-12)
            throw std::invalid_argument("NoiseParams: p and p_tilde are inconsistent");
    }
};

struct ATCouplings {
    double K2 = 0.0;  // two-body sigma-sigma coupling
    double K4 = 0.0;  // tau-tau and four-body coupling
};

struct GaugeCouplings {
    double J = 0.0;  // timelike (bit-flip) coupling
    double K = 0.0;  // spatial plaquette (syndrome) coupling
};

namespace detail {
inline void check_rate(double r, const char* name) {
    if (!(r >= 0.0 && r <= 0.5))
        throw std::invalid_argument(std::string(name) + " must lie in [0, 1/2]");
}
}  // namespace detail

// Net rate of two consecutive independent flip channels of rate p_tilde.
inline double net_rate(double p_tilde) {
    detail::check_rate(p_tilde, "p_tilde");
    return 2.0 * p_tilde * (1.0 - p_tilde);
}

// Inverse of net_rate: the root of 2x(1-x) = p in [0, 1/2].
inline double split_rate(double p) {
    detail::check_rate(p, "p");
    return 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * p));
}

// J = (1/2) ln((1-p)/p), K = (1/2) ln((1-q)/q).
inline GaugeCouplings gauge_couplings(double p, double q) {
    detail::check_rate(p, "p");
    detail::check_rate(q, "q");
    if (p == 0.0 || q == 0.0)
        throw std::domain_error("gauge_couplings: infinite coupling at zero rate");
    return {0.5 * std::log((1.0 - p) / p), 0.5 * std::log((1.0 - q) / q)};
}

inline double rbim_coupling(double p) {
    detail::check_rate(p, "p");
    if (p == 0.0) throw std::domain_error("rbim_coupling: infinite coupling at p = 0");
    return 0.5 * std::log((1.0 - p) / p);
}

// Couplings of the two-species site-spin model, as functions of the
// per-channel rate. With x = 1 - 2*p_tilde:
//   K2 = (1/4) ln{ [(1+x^2)^2 - 4x^6] / (1-x^2)^2 }
//   K4 = (1/4) ln{ (1+x^2+2x^3) / (1+x^2-2x^3) }
// Both vanish at p_tilde = 1/2 and diverge at p_tilde = 0.
inline ATCouplings at_couplings(double p_tilde) {
    detail::check_rate(p_tilde, "p_tilde");
    if (p_tilde == 0.0)
        throw std::domain_error("at_couplings: infinite couplings at p_tilde = 0");
    const double x = 1.0 - 2.0 * p_tilde;
    const double x2 = x * x, x3 = x2 * x, x6 = x3 * x3;
    const double k2 = 0.25 * std::log(((1.0 + x2) * (1.0 + x2) - 4.0 * x6) /
                                      ((1.0 - x2) * (1.0 - x2)));
    const double k4 = 0.25 * std::log((1.0 + x2 + 2.0 * x3) / (1.0 + x2 - 2.0 * x3));
    return {k2, k4};
}

// Joint distribution of the combined error signs on one bond. s_c = -1
// means the control detectors see a flip there, s_t = -1 the target
// detectors. The sharing of the pre-gate control error makes the law
// non-factorizable:
//   p(s_c, s_t) = [1 + x^2 s_c + x^3 s_t (1 + s_c)] / 4,  x = 1 - 2*p_tilde.
struct JointBondDist {
    // prob[i][j]: i = 0 for s_c = +1, 1 for s_c = -1; same for j / s_t.
    std::array<std::array<double, 2>, 2> prob{};

    double operator()(int s_c, int s_t) const {
        return prob[s_c == -1 ? 1 : 0][s_t == -1 ? 1 : 0];
    }
    double marginal_c_minus() const { return prob[1][0] + prob[1][1]; }
    double sum() const { return prob[0][0] + prob[0][1] + prob[1][0] + prob[1][1]; }
};

inline JointBondDist joint_bond_dist(double p_tilde) {
    detail::check_rate(p_tilde, "p_tilde");
    const double x = 1.0 - 2.0 * p_tilde;
    const double x2 = x * x, x3 = x2 * x;
    JointBondDist d;
    for (int i = 0; i < 2; ++i) {
        const double sc = i ? -1.0 : 1.0;
        for (int j = 0; j < 2; ++j) {
            const double st = j ? -1.0 : 1.0;
            d.prob[i][j] = (1.0 + x2 * sc + x3 * st * (1.0 + sc)) / 4.0;
        }
    }
    return d;
}

// Threshold of the target block when decoded on its own: its detectors see
// three consecutive flip channels of rate p_tilde, so the critical rate
// solves p_tilde^3 + 3(1-p_tilde)^2 p_tilde = 0.109. Bisection on [0, 1/2].
struct SeparateDecodingThreshold {
    double p_tilde = 0.0;
    double p = 0.0;
    double residual = 0.0;
};

inline SeparateDecodingThreshold independent_target_threshold(double memory_threshold = 0.109) {
    const auto f = [&](double x) {
        return x * x * x + 3.0 * (1.0 - x) * (1.0 - x) * x - memory_threshold;
    };
    double lo = 0.0, hi = 0.5;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    const double root = 0.5 * (lo + hi);
    return {root, net_rate(root), std::abs(f(root))};
}

// Conservative local threshold of the target block near the gate slice:
// the loop tension A of the control sector renormalizes tanh J, so the
// critical rate solves e^{-A} (1 - 2p) = 1 - 2 p_star, i.e.
// p = (1 - e^{A} (1 - 2 p_star)) / 2, clamped at zero when the
// renormalization alone already exceeds the critical value.
struct DefectThresholdEstimate {
    double p_c = 0.0;
    bool clamped = false;
};

inline DefectThresholdEstimate defect_threshold_estimate(double loop_tension_A,
                                                         double p_star) {
    if (loop_tension_A < 0.0)
        throw std::invalid_argument("defect_threshold_estimate: A must be >= 0");
    if (!(p_star > 0.0 && p_star < 0.5))
        throw std::invalid_argument("defect_threshold_estimate: p_star must be in (0, 1/2)");
    if (loop_tension_A == 0.0) return {p_star, false};  // no renormalization
    const double v = std::exp(loop_tension_A) * (1.0 - 2.0 * p_star);
    if (v > 1.0) return {0.0, true};
    return {0.5 * (1.0 - v), false};
}

}  // namespace tcnot
