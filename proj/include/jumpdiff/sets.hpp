#pragma once

// Axis-aligned boxes, balls and evaluation grids. Compacts and target sets
// are restricted to these shapes (plus an indicator escape hatch) so that
// membership is testable.

#include <functional>

#include "common.hpp"

namespace jumpdiff {

struct Box {
    Vec lo, hi;

    static Box cube(int dim, double half_width, double center = 0.0) {
        Box b;
        b.lo.assign(static_cast<std::size_t>(dim), center - half_width);
        b.hi.assign(static_cast<std::size_t>(dim), center + half_width);
        return b;
    }

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(ConstSpan x) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
};

struct BallSet {
    Vec center;
    double radius = 0.0;

    BallSet() = default;
    BallSet(Vec c, double r) : center(std::move(c)), radius(r) {
        check(radius > 0.0, "BallSet: radius must be positive");
    }
    static BallSet scalar(double c, double r) { return BallSet(Vec{c}, r); }

    int dim() const { return static_cast<int>(center.size()); }
    bool contains(ConstSpan x) const { return dist2(center, x) < radius; }
    double volume() const {
        // Euclidean ball volume, small dimensions only.
        const int d = dim();
        if (d == 1) return 2.0 * radius;
        if (d == 2) return 3.14159265358979323846 * radius * radius;
        if (d == 3) return 4.0 / 3.0 * 3.14159265358979323846 * radius * radius * radius;
        throw NumericsError("BallSet::volume: dimension > 3 unsupported");
    }
};

// Compact membership: box, ball, or arbitrary indicator.
struct CompactSet {
    std::function<bool(ConstSpan)> contains;

    static CompactSet from_box(Box b) {
        return CompactSet{[b = std::move(b)](ConstSpan x) { return b.contains(x); }};
    }
    static CompactSet from_ball(BallSet b) {
        return CompactSet{[b = std::move(b)](ConstSpan x) { return b.contains(x); }};
    }
};

inline Vec linspace(double lo, double hi, int n) {
    check(n >= 1, "linspace: need n >= 1");
    Vec out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = 0.5 * (lo + hi);
        return out;
    }
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return out;
}

// Cartesian evaluation grid over a box, default 33 points per dimension.
struct GridSpec {
    Box box;
    int points_per_dim = 33;

    std::vector<Vec> points() const {
        const int d = box.dim();
        std::vector<Vec> axes;
        axes.reserve(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            axes.push_back(linspace(box.lo[static_cast<std::size_t>(i)], box.hi[static_cast<std::size_t>(i)],
                                    points_per_dim));
        std::vector<Vec> out;
        std::size_t total = 1;
        for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(points_per_dim);
        out.reserve(total);
        Vec idx(static_cast<std::size_t>(d), 0.0);
        std::vector<std::size_t> counter(static_cast<std::size_t>(d), 0);
        for (std::size_t k = 0; k < total; ++k) {
            Vec p(static_cast<std::size_t>(d));
            for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = axes[static_cast<std::size_t>(i)][counter[static_cast<std::size_t>(i)]];
            out.push_back(std::move(p));
            for (int i = 0; i < d; ++i) {
                auto& c = counter[static_cast<std::size_t>(i)];
                if (++c < static_cast<std::size_t>(points_per_dim)) break;
                c = 0;
            }
        }
        return out;
    }
};

}  // namespace jumpdiff
