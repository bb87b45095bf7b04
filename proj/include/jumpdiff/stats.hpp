#pragma once

// Small statistics toolbox: moments, quantiles, regression, KS and chi-square
// tests, Wilson bound, bootstrap resampling. Everything is deterministic given
// an Rng, so test p-values are stable under a fixed seed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "common.hpp"
#include "rng.hpp"

namespace jumpdiff {

inline double mean(ConstSpan x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double variance(ConstSpan x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += sq(v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double stddev(ConstSpan x) { return std::sqrt(variance(x)); }

inline double std_error(ConstSpan x) { return stddev(x) / std::sqrt(static_cast<double>(x.size())); }

// Quantile of a sorted sample, linear interpolation.
inline double quantile_sorted(ConstSpan sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) throw NumericsError("quantile of empty sample");
    if (n == 1) return sorted[0];
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, n - 1);
    const double w = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

inline double quantile(Vec x, double q) {
    std::sort(x.begin(), x.end());
    return quantile_sorted(x, q);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// --- regularized incomplete gamma Q(a,x), for chi-square tails ---

namespace detail {

inline double gamma_q_series(double a, double x) {
    double sum = 1.0 / a, term = sum;
    for (int n = 1; n < 500; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw NumericsError("gamma_q domain");
    if (x == 0.0) return 1.0;
    return (x < a + 1.0) ? detail::gamma_q_series(a, x) : detail::gamma_q_contfrac(a, x);
}

inline double chi_square_pvalue(double stat, int dof) {
    return gamma_q(0.5 * dof, 0.5 * stat);
}

// Kolmogorov tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

inline KsResult ks_two_sample(Vec a, Vec b) {
    if (a.empty() || b.empty()) throw NumericsError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double xa = a[i], xb = b[j];
        if (xa <= xb) ++i;
        if (xb <= xa) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    return {d, kolmogorov_q(lambda)};
}

inline KsResult ks_one_sample(Vec a, const std::function<double(double)>& cdf) {
    if (a.empty()) throw NumericsError("ks_one_sample: empty sample");
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
        d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    const double ne = std::sqrt(n);
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    return {d, kolmogorov_q(lambda)};
}

// Chi-square goodness of fit against expected bin counts; bins with tiny
// expectation are pooled into their neighbour.
inline double chi_square_gof_pvalue(const Vec& observed, const Vec& expected, int fitted_params = 0) {
    if (observed.size() != expected.size() || observed.empty())
        throw NumericsError("chi_square_gof: size mismatch");
    double stat = 0.0;
    int used = 0;
    double o_pool = 0.0, e_pool = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_pool += observed[i];
        e_pool += expected[i];
        if (e_pool >= 5.0 || i + 1 == observed.size()) {
            if (e_pool > 0.0) {
                stat += sq(o_pool - e_pool) / e_pool;
                ++used;
            }
            o_pool = e_pool = 0.0;
        }
    }
    const int dof = std::max(1, used - 1 - fitted_params);
    return chi_square_pvalue(stat, dof);
}

inline double wilson_lower_bound(double successes, double n, double z = 1.96) {
    if (n <= 0.0) return 0.0;
    const double p = successes / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = p + z2 / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return std::max(0.0, (center - half) / denom);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

inline LinearFit linear_fit(ConstSpan x, ConstSpan y) {
    if (x.size() != y.size() || x.size() < 2) throw NumericsError("linear_fit: bad input");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += sq(x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw NumericsError("linear_fit: degenerate abscissa");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += sq(y[i] - f.intercept - f.slope * x[i]);
    f.residual_rms = std::sqrt(rss / static_cast<double>(x.size()));
    return f;
}

struct BootstrapCi {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap of a statistic of one sample. The interval is widened
// to contain the plug-in estimate.
inline BootstrapCi bootstrap_ci(ConstSpan sample, const std::function<double(ConstSpan)>& stat,
                                Rng& rng, int replicates = 400, double level = 0.95) {
    const std::size_t n = sample.size();
    if (n == 0) throw NumericsError("bootstrap_ci: empty sample");
    BootstrapCi out;
    out.estimate = stat(sample);
    Vec reps(static_cast<std::size_t>(replicates));
    Vec resampled(n);
    for (int r = 0; r < replicates; ++r) {
        for (std::size_t i = 0; i < n; ++i) resampled[i] = sample[rng.uniform_index(n)];
        reps[static_cast<std::size_t>(r)] = stat(resampled);
    }
    std::sort(reps.begin(), reps.end());
    const double alpha = 0.5 * (1.0 - level);
    out.lo = std::min(out.estimate, quantile_sorted(reps, alpha));
    out.hi = std::max(out.estimate, quantile_sorted(reps, 1.0 - alpha));
    return out;
}

}  // namespace jumpdiff
