#pragma once

// Central finite differences, relative step. Mixed partials up to order 3 are
// built recursively (2^k stencil points).

#include <functional>
#include <vector>

#include "common.hpp"

namespace jumpdiff {

using ScalarFn = std::function<double(ConstSpan)>;

struct ScalarField {
    ScalarFn value;
    std::function<void(ConstSpan, Span)> gradient;  // optional analytic
    std::function<void(ConstSpan, Span)> hessian;   // optional analytic, row-major d*d

    ScalarField() = default;
    ScalarField(ScalarFn v) : value(std::move(v)) {}  // NOLINT: implicit by design
};

inline double fd_step(double xi, double rel) { return rel * std::max(1.0, std::fabs(xi)); }

inline void fd_gradient(const ScalarFn& f, ConstSpan x, Span out, double rel = 1e-4) {
    Vec p(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = fd_step(x[i], rel);
        p[i] = x[i] + h;
        const double fp = f(p);
        p[i] = x[i] - h;
        const double fm = f(p);
        p[i] = x[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

inline void fd_hessian(const ScalarFn& f, ConstSpan x, Span out, double rel = 1e-4) {
    const std::size_t d = x.size();
    Vec p(x.begin(), x.end());
    const double f0 = f(x);
    for (std::size_t i = 0; i < d; ++i) {
        const double hi = fd_step(x[i], rel);
        p[i] = x[i] + hi;
        const double fp = f(p);
        p[i] = x[i] - hi;
        const double fm = f(p);
        p[i] = x[i];
        out[i * d + i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for (std::size_t j = i + 1; j < d; ++j) {
            const double hj = fd_step(x[j], rel);
            p[i] = x[i] + hi;
            p[j] = x[j] + hj;
            const double fpp = f(p);
            p[j] = x[j] - hj;
            const double fpm = f(p);
            p[i] = x[i] - hi;
            const double fmm = f(p);
            p[j] = x[j] + hj;
            const double fmp = f(p);
            p[i] = x[i];
            p[j] = x[j];
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
}

// Mixed partial for an ordered index tuple (1-based dims), recursive stencil.
inline double fd_partial(const ScalarFn& f, ConstSpan x, const std::vector<int>& dims, double rel = 1e-3) {
    if (dims.empty()) return f(x);
    Vec p(x.begin(), x.end());
    const int i = dims.front() - 1;
    const double h = fd_step(x[static_cast<std::size_t>(i)], rel);
    std::vector<int> rest(dims.begin() + 1, dims.end());
    p[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + h;
    const double fp = fd_partial(f, p, rest, rel);
    p[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - h;
    const double fm = fd_partial(f, p, rest, rel);
    return (fp - fm) / (2.0 * h);
}

// Ordered index tuples {1..d}^q for q in [q_lo, q_hi].
inline std::vector<std::vector<int>> index_tuples(int d, int q_lo, int q_hi) {
    std::vector<std::vector<int>> out;
    for (int q = q_lo; q <= q_hi; ++q) {
        std::vector<int> idx(static_cast<std::size_t>(q), 1);
        while (true) {
            out.push_back(idx);
            int pos = q - 1;
            while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == d) {
                idx[static_cast<std::size_t>(pos)] = 1;
                --pos;
            }
            if (pos < 0) break;
            ++idx[static_cast<std::size_t>(pos)];
        }
    }
    return out;
}

}  // namespace jumpdiff
