#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcnot/rng.hpp"

namespace tcnot::fss {

struct DataRow {
    int L = 0;
    double p_tilde = 0.0;
    double m = 0.0;
    double m_err = 0.0;
};

struct FssDataset {
    std::vector<DataRow> rows;
    std::string species;  // "sigma" or "tau"

    void validate() const {
        std::set<int> sizes;
        for (const auto& r : rows) {
            if (r.m_err <= 0.0) throw std::invalid_argument("FssDataset: errors must be > 0");
            sizes.insert(r.L);
        }
        if (sizes.size() < 2) throw std::invalid_argument("FssDataset: need >= 2 sizes");
        for (int L : sizes) {
            int count = 0;
            for (const auto& r : rows) count += (r.L == L);
            if (count < 4)
                throw std::invalid_argument("FssDataset: need >= 4 points per size");
        }
    }

    std::pair<double, double> p_range() const {
        double lo = rows.front().p_tilde, hi = lo;
        for (const auto& r : rows) {
            lo = std::min(lo, r.p_tilde);
            hi = std::max(hi, r.p_tilde);
        }
        return {lo, hi};
    }
};

// Scaling transform: x = eps L^{1/nu}, y = M L^{beta/nu} with
// eps = (p_tilde - p_c)/p_c. Error bars scale with y.
struct ScaledPoint {
    double x = 0.0;
    double y = 0.0;
    double y_err = 0.0;
};

inline ScaledPoint rescale(const DataRow& row, double beta, double nu, double p_c) {
    if (!(p_c > 0.0)) throw std::invalid_argument("rescale: p_c must be > 0");
    const double eps = (row.p_tilde - p_c) / p_c;
    const double lb = std::pow(double(row.L), beta / nu);
    return {eps * std::pow(double(row.L), 1.0 / nu), row.m * lb, row.m_err * lb};
}

inline DataRow unscale(const ScaledPoint& pt, int L, double beta, double nu, double p_c) {
    const double lb = std::pow(double(L), beta / nu);
    DataRow row;
    row.L = L;
    row.p_tilde = p_c * (1.0 + pt.x / std::pow(double(L), 1.0 / nu));
    row.m = pt.y / lb;
    row.m_err = pt.y_err / lb;
    return row;
}

struct QualityDetail {
    double s = 0.0;      // error-normalized mean-square deviation
    int used = 0;        // points with a bracketing pair from other sizes
    int total = 0;
};

// Collapse quality: error-normalized mean-square deviation of each scaled
// point from the master curve linearly interpolated through the scaled
// points of the other system sizes. Around 1 when the data collapse within
// error bars; grows quickly away from the true parameters. Points whose x
// falls outside the other sizes' range carry no master-curve estimate and
// are skipped, which is why fits must also watch the used fraction.
inline QualityDetail collapse_quality_detail(const FssDataset& data, double beta,
                                             double nu, double p_c) {
    std::vector<ScaledPoint> scaled(data.rows.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i)
        scaled[i] = rescale(data.rows[i], beta, nu, p_c);

    double sum = 0.0;
    int used = 0;
    std::set<int> contributing_sizes;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        // master curve through all other sizes, sorted in x
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < data.rows.size(); ++j)
            if (data.rows[j].L != data.rows[i].L) others.push_back(j);
        std::sort(others.begin(), others.end(),
                  [&](std::size_t a, std::size_t b) { return scaled[a].x < scaled[b].x; });
        // bracketing pair
        const double x = scaled[i].x;
        std::size_t hi = others.size();
        for (std::size_t k = 0; k < others.size(); ++k)
            if (scaled[others[k]].x >= x) {
                hi = k;
                break;
            }
        if (hi == 0 || hi == others.size()) continue;  // outside overlap window
        const ScaledPoint& a = scaled[others[hi - 1]];
        const ScaledPoint& b = scaled[others[hi]];
        const double w = (b.x > a.x) ? (x - a.x) / (b.x - a.x) : 0.5;
        const double y_hat = a.y + w * (b.y - a.y);
        const double var_hat = (1.0 - w) * (1.0 - w) * a.y_err * a.y_err +
                               w * w * b.y_err * b.y_err;
        const double d = scaled[i].y - y_hat;
        sum += d * d / (scaled[i].y_err * scaled[i].y_err + var_hat);
        ++used;
        contributing_sizes.insert(data.rows[i].L);
    }
    if (used == 0 || contributing_sizes.size() < 2)
        throw std::runtime_error("collapse_quality: sizes do not overlap in x");
    return {sum / double(used), used, int(data.rows.size())};
}

inline double collapse_quality(const FssDataset& data, double beta, double nu,
                               double p_c) {
    return collapse_quality_detail(data, beta, nu, p_c).s;
}

struct CollapseResult {
    double beta = 0.0;
    double nu = 0.0;
    double p_c = 0.0;
    double quality = 0.0;
    double beta_err = 0.0;
    double nu_err = 0.0;
    double p_c_err = 0.0;
    int n_bootstrap = 0;
    bool at_bound = false;
    std::uint64_t seed = 0;
};

struct FitBounds {
    double beta_lo = 0.0, beta_hi = 1.0;
    double nu_lo = 0.5, nu_hi = 3.0;
    double p_c_lo = 0.0, p_c_hi = 0.0;  // zeros: use the data range
};

namespace detail {

// Nelder-Mead on R^3 with reflection/expansion/contraction/shrink.
// Out-of-bounds points get a quadratic penalty so the simplex walks back.
inline std::array<double, 3> nelder_mead(
    const std::function<double(const std::array<double, 3>&)>& f,
    std::array<double, 3> start, const std::array<double, 3>& step, int max_iter,
    double* final_value = nullptr) {
    constexpr int n = 3;
    std::array<std::array<double, 3>, 4> pts;
    std::array<double, 4> vals;
    pts[0] = start;
    for (int i = 0; i < n; ++i) {
        pts[i + 1] = start;
        pts[i + 1][i] += step[i];
    }
    for (int i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    for (int it = 0; it < max_iter; ++it) {
        std::array<int, 4> order{0, 1, 2, 3};
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return vals[a] < vals[b]; });
        const int best = order[0], worst = order[3], second_worst = order[2];
        if (std::abs(vals[worst] - vals[best]) <
            1e-10 * (std::abs(vals[best]) + 1e-12))
            break;
        std::array<double, 3> centroid{0, 0, 0};
        for (int i = 0; i <= n; ++i)
            if (i != worst)
                for (int d = 0; d < n; ++d) centroid[d] += pts[i][d] / double(n);
        auto blend = [&](double t) {
            std::array<double, 3> p;
            for (int d = 0; d < n; ++d)
                p[d] = centroid[d] + t * (centroid[d] - pts[worst][d]);
            return p;
        };
        const auto reflected = blend(1.0);
        const double fr = f(reflected);
        if (fr < vals[best]) {
            const auto expanded = blend(2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                pts[worst] = expanded;
                vals[worst] = fe;
            } else {
                pts[worst] = reflected;
                vals[worst] = fr;
            }
        } else if (fr < vals[second_worst]) {
            pts[worst] = reflected;
            vals[worst] = fr;
        } else {
            const auto contracted = blend(fr < vals[worst] ? 0.5 : -0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = contracted;
                vals[worst] = fc;
            } else {  // shrink toward the best point
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (int d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    if (final_value) *final_value = vals[best];
    return pts[best];
}

}  // namespace detail

// Derivative-free minimization of the collapse quality with multi-start
// over a coarse parameter grid, then bootstrap (rows perturbed within their
// errors) for parameter uncertainties. Deterministic given the seed.
inline CollapseResult fit_collapse(const FssDataset& data, FitBounds bounds = {},
                                   int n_bootstrap = 200, std::uint64_t seed = 1) {
    data.validate();
    const auto [p_lo_data, p_hi_data] = data.p_range();
    if (bounds.p_c_lo == 0.0 && bounds.p_c_hi == 0.0) {
        bounds.p_c_lo = p_lo_data;
        bounds.p_c_hi = p_hi_data;
    }

    auto objective_on = [&bounds](const FssDataset& d) {
        return [&bounds, &d](const std::array<double, 3>& v) {
            const double beta = v[0], nu = v[1], p_c = v[2];
            double penalty = 0.0;
            auto pen = [&](double x, double lo, double hi) {
                if (x < lo) penalty += 1e4 * (lo - x) * (lo - x) / ((hi - lo) * (hi - lo));
                if (x > hi) penalty += 1e4 * (x - hi) * (x - hi) / ((hi - lo) * (hi - lo));
                return std::clamp(x, lo, hi);
            };
            const double bb = pen(beta, bounds.beta_lo, bounds.beta_hi);
            const double nn = pen(nu, bounds.nu_lo, bounds.nu_hi);
            const double pp = pen(p_c, bounds.p_c_lo, bounds.p_c_hi);
            try {
                const auto q = collapse_quality_detail(d, bb, nn, pp);
                // keep the optimizer from "improving" S by shoving points
                // out of the mutual overlap window
                const double frac = double(q.used) / double(q.total);
                if (frac < 0.6) penalty += 1e3 * (0.6 - frac) * (0.6 - frac);
                return q.s + penalty;
            } catch (const std::runtime_error&) {
                return 1e12;  // no overlap at these parameters
            }
        };
    };

    auto minimize = [&](const FssDataset& d, std::array<double, 3>* out) {
        const auto f = objective_on(d);
        double best_val = std::numeric_limits<double>::infinity();
        std::array<double, 3> best{};
        const double span = bounds.p_c_hi - bounds.p_c_lo;
        for (double beta0 : {0.1, 0.3}) {
            for (double nu0 : {1.0, 1.8}) {
                for (double frac : {0.3, 0.5, 0.7}) {
                    const double p0 = bounds.p_c_lo + frac * span;
                    double val = 0.0;
                    auto res = detail::nelder_mead(
                        f, {beta0, nu0, p0}, {0.05, 0.2, 0.1 * span}, 400, &val);
                    if (val < best_val) {
                        best_val = val;
                        best = res;
                    }
                }
            }
        }
        // polish
        double val = 0.0;
        auto res = detail::nelder_mead(f, best, {0.01, 0.05, 0.01 * span}, 400, &val);
        if (val < best_val) {
            best_val = val;
            best = res;
        }
        *out = best;
        return best_val;
    };

    CollapseResult result;
    result.seed = seed;
    result.n_bootstrap = n_bootstrap;
    std::array<double, 3> best{};
    result.quality = minimize(data, &best);
    result.beta = std::clamp(best[0], bounds.beta_lo, bounds.beta_hi);
    result.nu = std::clamp(best[1], bounds.nu_lo, bounds.nu_hi);
    result.p_c = std::clamp(best[2], bounds.p_c_lo, bounds.p_c_hi);

    const double tol_b = 1e-6 * (bounds.beta_hi - bounds.beta_lo);
    const double tol_n = 1e-6 * (bounds.nu_hi - bounds.nu_lo);
    const double tol_p = 1e-6 * (bounds.p_c_hi - bounds.p_c_lo);
    result.at_bound = result.beta <= bounds.beta_lo + tol_b ||
                      result.beta >= bounds.beta_hi - tol_b ||
                      result.nu <= bounds.nu_lo + tol_n ||
                      result.nu >= bounds.nu_hi - tol_n ||
                      result.p_c <= bounds.p_c_lo + tol_p ||
                      result.p_c >= bounds.p_c_hi - tol_p;

    // bootstrap: Gaussian resampling of each row within its error bar
    std::vector<std::array<double, 3>> samples;
    for (int k = 0; k < n_bootstrap; ++k) {
        FssDataset resampled = data;
        rng::Stream stream(rng::derive_key(seed, rng::kBootstrap, k));
        for (auto& row : resampled.rows) row.m += row.m_err * stream.normal();
        const auto f = objective_on(resampled);
        double val = 0.0;
        auto res = detail::nelder_mead(f, best, {0.02, 0.1, 0.002}, 250, &val);
        samples.push_back(res);
    }
    auto spread = [&](int d, double center) {
        double var = 0.0;
        for (const auto& s : samples) var += (s[d] - center) * (s[d] - center);
        return samples.empty() ? 0.0 : std::sqrt(var / double(samples.size()));
    };
    result.beta_err = spread(0, result.beta);
    result.nu_err = spread(1, result.nu);
    result.p_c_err = spread(2, result.p_c);
    return result;
}

}  // namespace tcnot::fss
