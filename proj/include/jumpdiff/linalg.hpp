#pragma once

// Dense symmetric eigen-decomposition (cyclic Jacobi) for the small state
// dimensions used here; backs PSD checks and symmetric square roots.

#include "common.hpp"

namespace jumpdiff {

struct SymEigen {
    Vec values;   // ascending
    Vec vectors;  // column-major, vectors[j*d+i]
};

inline SymEigen sym_eigen(ConstSpan a_in, int d) {
    Vec a(a_in.begin(), a_in.end());
    Vec v(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i * d + i)] = 1.0;
    auto at = [&](Vec& m, int i, int j) -> double& { return m[static_cast<std::size_t>(j * d + i)]; };
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += sq(at(a, p, q));
        if (off < 1e-26) break;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) {
                const double apq = at(a, p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = 0.5 * (at(a, q, q) - at(a, p, p)) / apq;
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int i = 0; i < d; ++i) {
                    const double aip = at(a, i, p), aiq = at(a, i, q);
                    at(a, i, p) = c * aip - s * aiq;
                    at(a, i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < d; ++i) {
                    const double api = at(a, p, i), aqi = at(a, q, i);
                    at(a, p, i) = c * api - s * aqi;
                    at(a, q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < d; ++i) {
                    const double vip = at(v, i, p), viq = at(v, i, q);
                    at(v, i, p) = c * vip - s * viq;
                    at(v, i, q) = s * vip + c * viq;
                }
            }
    }
    SymEigen out;
    out.values.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) out.values[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i * d + i)];
    out.vectors = std::move(v);
    // sort ascending, keeping vectors aligned
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (out.values[static_cast<std::size_t>(j)] < out.values[static_cast<std::size_t>(i)]) {
                std::swap(out.values[static_cast<std::size_t>(i)], out.values[static_cast<std::size_t>(j)]);
                for (int r = 0; r < d; ++r)
                    std::swap(out.vectors[static_cast<std::size_t>(i * d + r)],
                              out.vectors[static_cast<std::size_t>(j * d + r)]);
            }
    return out;
}

inline double min_eigenvalue(ConstSpan a, int d) { return sym_eigen(a, d).values.front(); }

inline bool is_psd(ConstSpan a, int d, double tol = 1e-10) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::fabs(v));
    return min_eigenvalue(a, d) >= -tol * std::max(1.0, scale);
}

// Symmetric positive semidefinite square root via eigen-decomposition.
inline Vec sym_sqrt(ConstSpan a, int d) {
    const SymEigen e = sym_eigen(a, d);
    Vec out(static_cast<std::size_t>(d * d), 0.0);
    for (int l = 0; l < d; ++l) {
        const double lam = std::sqrt(std::max(0.0, e.values[static_cast<std::size_t>(l)]));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(j * d + i)] += lam * e.vectors[static_cast<std::size_t>(l * d + i)] *
                                                            e.vectors[static_cast<std::size_t>(l * d + j)];
    }
    return out;
}

}  // namespace jumpdiff
