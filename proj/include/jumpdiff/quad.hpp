#pragma once

// Mark-space quadrature against a layered measure: composite Gauss-Legendre
// on interval layers, plain Monte Carlo through the layer sampler otherwise.

#include <array>
#include <functional>
#include <limits>

#include "common.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace jumpdiff {

struct QuadratureSpec {
    enum class Mode { Deterministic, MonteCarlo };
    Mode mode = Mode::Deterministic;
    int segments = 24;
    int mc_samples = 20000;
    std::uint64_t mc_seed = 900001;
    // apply_generator raises when the Monte Carlo standard error exceeds this.
    double mc_se_threshold = std::numeric_limits<double>::infinity();

    static QuadratureSpec monte_carlo(int samples, std::uint64_t seed = 900001) {
        QuadratureSpec q;
        q.mode = Mode::MonteCarlo;
        q.mc_samples = samples;
        q.mc_seed = seed;
        return q;
    }
};

struct QuadResult {
    double value = 0.0;
    double std_err = 0.0;

    QuadResult& operator+=(const QuadResult& o) {
        value += o.value;
        std_err = std::sqrt(sq(std_err) + sq(o.std_err));
        return *this;
    }
};

namespace detail {

// 16-point Gauss-Legendre on [-1,1], symmetric halves.
inline const std::array<double, 8>& gl_nodes() {
    static const std::array<double, 8> n = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                                            0.9445750230732326, 0.9894009349916499};
    return n;
}
inline const std::array<double, 8>& gl_weights() {
    static const std::array<double, 8> w = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                                            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                                            0.0622535239386479, 0.0271524594117541};
    return w;
}

}  // namespace detail

using MarkFn = std::function<double(ConstSpan z)>;

// Integral of f against the layer's part of the measure (f d(mu|layer)).
inline QuadResult integrate_layer(const Layer& layer, int dim_mark, double t, const MarkFn& f,
                                  const QuadratureSpec& spec, std::uint64_t stream = 0) {
    QuadResult out;
    if (spec.mode == QuadratureSpec::Mode::Deterministic && layer.kind == Layer::Kind::IntervalConst) {
        const Interval iv = layer.interval_at(t);
        // Segment boundaries: uniform by default; geometric for wide
        // nonnegative layers so decaying integrands keep their mass near the
        // lower edge. Uniform counts stay even, which aligns a boundary with
        // the midpoint of symmetric two-sided bands.
        Vec bounds;
        bounds.reserve(static_cast<std::size_t>(spec.segments) + 1);
        const bool wide = iv.lo >= 0.0 && iv.length() > 200.0 * (1.0 + iv.lo);
        if (wide) {
            const double s0 = 1e-3 * (1.0 + iv.lo);
            const double ratio = std::pow(iv.length() / s0, 1.0 / (spec.segments - 1));
            bounds.push_back(iv.lo);
            double off = s0;
            for (int s = 1; s < spec.segments; ++s, off *= ratio) bounds.push_back(iv.lo + off);
            bounds.push_back(iv.hi);
        } else {
            const double seg_len = iv.length() / spec.segments;
            for (int s = 0; s <= spec.segments; ++s) bounds.push_back(iv.lo + s * seg_len);
        }
        double total = 0.0;
        for (int s = 0; s < spec.segments; ++s) {
            const double a = bounds[static_cast<std::size_t>(s)], b = bounds[static_cast<std::size_t>(s) + 1];
            const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            double acc = 0.0;
            for (std::size_t q = 0; q < detail::gl_nodes().size(); ++q) {
                const double dz = half * detail::gl_nodes()[q];
                double z = mid + dz;
                acc += detail::gl_weights()[q] * f(ConstSpan(&z, 1));
                z = mid - dz;
                acc += detail::gl_weights()[q] * f(ConstSpan(&z, 1));
            }
            total += acc * half;
        }
        out.value = total * layer.density_value;
        return out;
    }
    Rng rng = Rng::derive(spec.mc_seed, 0x9a4d, stream);
    Vec z(static_cast<std::size_t>(dim_mark));
    Vec draws;
    draws.reserve(static_cast<std::size_t>(spec.mc_samples));
    for (int i = 0; i < spec.mc_samples; ++i) {
        layer.sample(t, rng, z);
        draws.push_back(f(z));
    }
    const double m = layer.mass(t);
    out.value = m * mean(draws);
    out.std_err = m * std_error(draws);
    return out;
}

// Integral over the prefix G_level (level <= 0 means all layers).
inline QuadResult integrate_measure(const LayeredMeasure& measure, double t, const MarkFn& f,
                                    const QuadratureSpec& spec, int level = 0) {
    const int upto = level <= 0 ? measure.levels() : level;
    QuadResult total;
    for (int i = 0; i < upto; ++i)
        total += integrate_layer(measure.layers[static_cast<std::size_t>(i)], measure.dim_mark, t, f, spec,
                                 static_cast<std::uint64_t>(i + 1));
    return total;
}

// Integral over layers (from, to] of the layer list, 1-based indices.
inline QuadResult integrate_layers(const LayeredMeasure& measure, double t, const MarkFn& f,
                                   const QuadratureSpec& spec, int first_level, int last_level) {
    QuadResult total;
    for (int i = first_level; i <= last_level; ++i)
        total += integrate_layer(measure.layers[static_cast<std::size_t>(i - 1)], measure.dim_mark, t, f, spec,
                                 static_cast<std::uint64_t>(i));
    return total;
}

}  // namespace jumpdiff
