#pragma once

// Model descriptors. An inhomogeneous model is drift + state-dependent jumps
// driven by a layered mark measure; a limit model additionally carries
// diffusion columns and time-free coefficients. Both are immutable after
// construction and safe to share across threads; all sampling goes through an
// explicit Rng handle.

#include <functional>
#include <utility>

#include "common.hpp"
#include "measure.hpp"
#include "sets.hpp"

namespace jumpdiff {

using DriftFn = std::function<void(double t, ConstSpan x, Span out)>;
using JumpAmplitudeFn = std::function<void(double t, ConstSpan z, ConstSpan x, Span out)>;
using JumpRateFn = std::function<double(double t, ConstSpan z, ConstSpan x)>;

struct InhomogeneousModel {
    int dim_state = 1;
    int dim_mark = 1;
    DriftFn drift;
    JumpAmplitudeFn jump_amplitude;
    JumpRateFn jump_rate;
    double rate_bound = 0.0;  // global sup of jump_rate
    LayeredMeasure measure;
    // Optional mark classifier into regimes 1 (fast), 2 (intermediate), 3 (slow).
    std::function<int(double t, ConstSpan z)> regime;
    // Optional analytic bound for sup_x of the |amplitude|*rate mass beyond the declared layers.
    std::function<double(ConstSpan x)> tail_alpha;
};

using LimitDriftFn = std::function<void(ConstSpan x, Span out)>;
// Diffusion columns, flattened column-major: out[l*d + i] = sigma_l^i(x).
using DiffusionFn = std::function<void(ConstSpan x, Span out)>;
using LimitJumpAmplitudeFn = std::function<void(ConstSpan z, ConstSpan x, Span out)>;
using LimitJumpRateFn = std::function<double(ConstSpan z, ConstSpan x)>;

struct LimitModel {
    int dim_state = 1;
    int dim_mark = 1;
    int dim_noise = 0;  // number of Brownian columns
    LimitDriftFn drift;
    DiffusionFn diffusion;  // required iff dim_noise > 0
    LimitJumpAmplitudeFn jump_amplitude;
    LimitJumpRateFn jump_rate;
    double rate_bound = 0.0;
    LayeredMeasure measure;
    std::function<double(ConstSpan x)> tail_alpha;

    // sigma sigma^T at x.
    void covariance(ConstSpan x, Span a_out) const {
        const int d = dim_state, k = dim_noise;
        for (int i = 0; i < d * d; ++i) a_out[static_cast<std::size_t>(i)] = 0.0;
        if (k == 0) return;
        Vec cols(static_cast<std::size_t>(d * k));
        diffusion(x, cols);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int l = 0; l < k; ++l)
                    s += cols[static_cast<std::size_t>(l * d + i)] * cols[static_cast<std::size_t>(l * d + j)];
                a_out[static_cast<std::size_t>(i * d + j)] = s;
            }
    }
};

// A jump-only limit model viewed as a (constant-in-time) inhomogeneous model.
// Used by the identical-dynamics controls; diffusion is not representable.
inline InhomogeneousModel as_inhomogeneous(const LimitModel& lm) {
    check(lm.dim_noise == 0, "as_inhomogeneous: limit model has a diffusion part");
    InhomogeneousModel m;
    m.dim_state = lm.dim_state;
    m.dim_mark = lm.dim_mark;
    m.drift = [g = lm.drift](double, ConstSpan x, Span out) { g(x, out); };
    m.jump_amplitude = [c = lm.jump_amplitude](double, ConstSpan z, ConstSpan x, Span out) { c(z, x, out); };
    m.jump_rate = [r = lm.jump_rate](double, ConstSpan z, ConstSpan x) { return r(z, x); };
    m.rate_bound = lm.rate_bound;
    m.measure = lm.measure;
    m.tail_alpha = lm.tail_alpha;
    return m;
}

// The same dynamics with the time origin moved to `offset`: coefficients,
// classifier and layer geometry are evaluated at offset + t.
inline InhomogeneousModel shift_time(const InhomogeneousModel& m, double offset) {
    InhomogeneousModel out = m;
    out.drift = [f = m.drift, offset](double t, ConstSpan x, Span o) { f(offset + t, x, o); };
    out.jump_amplitude = [f = m.jump_amplitude, offset](double t, ConstSpan z, ConstSpan x, Span o) {
        f(offset + t, z, x, o);
    };
    out.jump_rate = [f = m.jump_rate, offset](double t, ConstSpan z, ConstSpan x) {
        return f(offset + t, z, x);
    };
    if (m.regime)
        out.regime = [f = m.regime, offset](double t, ConstSpan z) { return f(offset + t, z); };
    for (auto& l : out.measure.layers) {
        if (l.kind == Layer::Kind::IntervalConst && l.time_varying) {
            l.lo_fn = [f = l.lo_fn, offset](double t) { return f(offset + t); };
            l.hi_fn = [f = l.hi_fn, offset](double t) { return f(offset + t); };
        }
        if (l.rate_sup_fn) l.rate_sup_fn = [f = l.rate_sup_fn, offset](double t) { return f(offset + t); };
    }
    return out;
}

struct LyapunovSpec {
    std::function<double(ConstSpan x)> value;  // V >= 1
    double decay_rate = 0.0;                   // candidate b, optional
    double excursion_bound = 0.0;              // candidate c, optional
    CompactSet compact;                        // K
};

}  // namespace jumpdiff
