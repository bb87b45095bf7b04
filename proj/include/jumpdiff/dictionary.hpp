#pragma once

// Test-function dictionary: products of one-dimensional Gaussian bumps and
// tanh sigmoids with seeded random centers and scales, each rescaled so the
// sum of sup norms of all ordered partial derivatives up to order 3 is <= 1.
// Distances computed over the dictionary are lower bounds of the smooth-class
// distance, never the exact sup.

#include <functional>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "sets.hpp"

namespace jumpdiff {

namespace detail {

struct Factor {
    bool bump = true;  // else sigmoid
    double center = 0.0;
    double scale = 1.0;

    double value(double x) const {
        const double u = (x - center) / scale;
        return bump ? std::exp(-u * u) : std::tanh(u);
    }

    // k-th derivative in x, k <= 3, analytic.
    double derivative(double x, int k) const {
        const double u = (x - center) / scale;
        const double s = scale;
        if (bump) {
            const double e = std::exp(-u * u);
            switch (k) {
                case 0: return e;
                case 1: return -2.0 * u * e / s;
                case 2: return (4.0 * u * u - 2.0) * e / (s * s);
                default: return (12.0 * u - 8.0 * u * u * u) * e / (s * s * s);
            }
        }
        const double y = std::tanh(u);
        const double dy = 1.0 - y * y;
        switch (k) {
            case 0: return y;
            case 1: return dy / s;
            case 2: return -2.0 * y * dy / (s * s);
            default: return dy * (6.0 * y * y - 2.0) / (s * s * s);
        }
    }

    // Sup of |k-th derivative| over the line; dense scan, both bases flatten
    // beyond |u| ~ 3.
    double derivative_sup(int k) const {
        const int n = 600;
        double sup = 0.0;
        for (int i = -n; i <= n; ++i) {
            const double x = center + scale * 4.0 * static_cast<double>(i) / n;
            sup = std::max(sup, std::fabs(derivative(x, k)));
        }
        return sup;
    }
};

}  // namespace detail

struct TestFunction {
    std::function<double(ConstSpan)> value;
    std::string id;
    double norm3 = 1.0;  // sum of derivative sup norms after scaling, <= 1
};

struct Dictionary {
    int dim = 1;
    std::vector<TestFunction> fns;
    std::size_t size() const { return fns.size(); }
};

inline Dictionary build_dictionary(int dim, int size, std::uint64_t seed, const Box& domain) {
    check(dim >= 1 && dim <= 8, "build_dictionary: dim out of range");
    Dictionary dict;
    dict.dim = dim;
    Rng rng = Rng::derive(seed, 0xd1c7);
    for (int n = 0; n < size; ++n) {
        std::vector<detail::Factor> factors(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j) {
            auto& fac = factors[static_cast<std::size_t>(j)];
            fac.bump = rng.uniform() < 0.5;
            const double lo = domain.lo[static_cast<std::size_t>(j)], hi = domain.hi[static_cast<std::size_t>(j)];
            fac.center = rng.uniform(lo, hi);
            const double width = std::max(1e-6, hi - lo);
            fac.scale = rng.uniform(0.25, 1.5) * 0.5 * width;
        }
        double sups[8][4];
        for (int j = 0; j < dim; ++j)
            for (int k = 0; k <= 3; ++k) sups[j][k] = factors[static_cast<std::size_t>(j)].derivative_sup(k);

        // Product structure: sup|∂^α f| factorizes into per-dimension sups.
        // Sum over all ordered index tuples of length 0..3.
        double norm = 0.0;
        std::vector<int> counts(static_cast<std::size_t>(dim), 0);
        auto add_tuples = [&](int len) {
            std::vector<int> idx(static_cast<std::size_t>(len), 0);
            while (true) {
                std::fill(counts.begin(), counts.end(), 0);
                for (int v : idx) ++counts[static_cast<std::size_t>(v)];
                double prod = 1.0;
                for (int j = 0; j < dim; ++j) prod *= sups[j][counts[static_cast<std::size_t>(j)]];
                norm += prod;
                int pos = len - 1;
                while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == dim - 1) {
                    idx[static_cast<std::size_t>(pos)] = 0;
                    --pos;
                }
                if (pos < 0) break;
                ++idx[static_cast<std::size_t>(pos)];
            }
        };
        {
            double prod0 = 1.0;
            for (int j = 0; j < dim; ++j) prod0 *= sups[j][0];
            norm += prod0;
        }
        for (int len = 1; len <= 3; ++len) add_tuples(len);

        const double scale = 1.0 / norm;
        TestFunction tf;
        tf.id = "dict_" + std::to_string(n);
        tf.norm3 = 1.0;
        tf.value = [factors, scale](ConstSpan x) {
            double v = scale;
            for (std::size_t j = 0; j < factors.size(); ++j) v *= factors[j].value(x[j]);
            return v;
        };
        dict.fns.push_back(std::move(tf));
    }
    return dict;
}

}  // namespace jumpdiff
