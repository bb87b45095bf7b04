#pragma once

// Layered jump-mark measures. A measure is a finite ordered list of layers;
// the active prefix G_n = layer_1 ∪ ... ∪ layer_n carries a cumulative rate
// bound. Interval layers have constant density on a (possibly time-varying)
// interval and support exact thinning envelopes; custom layers are static
// escape hatches with their own sampler and membership test.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace jumpdiff {

struct Interval {
    double lo = 0.0, hi = 0.0;
    double length() const { return hi - lo; }
};

struct Layer {
    enum class Kind { IntervalConst, Custom };

    Kind kind = Kind::IntervalConst;
    bool time_varying = false;

    // IntervalConst: 1-d marks, density h == density_value on [lo(t), hi(t)].
    std::function<double(double)> lo_fn, hi_fn;
    double density_value = 1.0;

    // Custom: static mass and sampler; membership required, density optional.
    double custom_mass = 0.0;
    std::function<void(Rng&, Span)> custom_sampler;
    std::function<bool(ConstSpan)> custom_contains;
    std::function<double(ConstSpan)> custom_density;
    double support_volume = 0.0;  // >0 if the sampler is uniform over a known volume

    // Sup of the jump rate over this layer at time t; defaults to the model bound.
    std::function<double(double)> rate_sup_fn;

    static Layer interval(double lo, double hi, double density = 1.0) {
        check(hi > lo, "Layer::interval: empty interval");
        Layer l;
        l.lo_fn = [lo](double) { return lo; };
        l.hi_fn = [hi](double) { return hi; };
        l.density_value = density;
        return l;
    }

    // Time-varying interval; edges must be monotone in t so that the hull of
    // the interval over a window is spanned by the window endpoints.
    static Layer moving_interval(std::function<double(double)> lo, std::function<double(double)> hi,
                                 double density = 1.0) {
        Layer l;
        l.lo_fn = std::move(lo);
        l.hi_fn = std::move(hi);
        l.density_value = density;
        l.time_varying = true;
        return l;
    }

    static Layer custom(double mass, std::function<void(Rng&, Span)> sampler,
                        std::function<bool(ConstSpan)> contains,
                        std::function<double(ConstSpan)> density = nullptr, double support_volume = 0.0) {
        Layer l;
        l.kind = Kind::Custom;
        l.custom_mass = mass;
        l.custom_sampler = std::move(sampler);
        l.custom_contains = std::move(contains);
        l.custom_density = std::move(density);
        l.support_volume = support_volume;
        return l;
    }

    Interval interval_at(double t) const {
        return Interval{lo_fn(t), hi_fn(t)};
    }

    Interval hull(double t0, double t1) const {
        const Interval a = interval_at(t0), b = interval_at(t1);
        return Interval{std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
    }

    double mass(double t) const {
        if (kind == Kind::Custom) return custom_mass;
        return interval_at(t).length() * density_value;
    }

    double hull_mass(double t0, double t1) const {
        if (kind == Kind::Custom) return custom_mass;
        return hull(t0, t1).length() * density_value;
    }

    void sample(double t, Rng& rng, Span out) const {
        if (kind == Kind::Custom) {
            custom_sampler(rng, out);
            return;
        }
        const Interval iv = interval_at(t);
        out[0] = rng.uniform(iv.lo, iv.hi);
    }

    void sample_hull(double t0, double t1, Rng& rng, Span out) const {
        if (kind == Kind::Custom) {
            custom_sampler(rng, out);
            return;
        }
        const Interval iv = hull(t0, t1);
        out[0] = rng.uniform(iv.lo, iv.hi);
    }

    bool contains(double t, ConstSpan z) const {
        if (kind == Kind::Custom) return custom_contains(z);
        const Interval iv = interval_at(t);
        return z[0] > iv.lo && z[0] < iv.hi;
    }

    // Density of the absolutely continuous part at z, 0 outside the layer.
    double density(double t, ConstSpan z) const {
        if (kind == Kind::Custom) {
            if (!custom_density) return 0.0;
            return custom_contains(z) ? custom_density(z) : 0.0;
        }
        return contains(t, z) ? density_value : 0.0;
    }

    bool has_density() const {
        return kind == Kind::IntervalConst || static_cast<bool>(custom_density);
    }
};

struct LayeredMeasure {
    int dim_mark = 1;
    std::vector<Layer> layers;
    Vec cum_rate_bound;  // Gamma_n, strictly increasing across layers
    bool time_varying = false;

    int levels() const { return static_cast<int>(layers.size()); }

    double mass_prefix(double t, int level) const {
        double m = 0.0;
        for (int i = 0; i < level; ++i) m += layers[static_cast<std::size_t>(i)].mass(t);
        return m;
    }

    double rate_bound_at(int level) const {
        check(level >= 1 && level <= levels(), "rate_bound_at: bad level");
        return cum_rate_bound[static_cast<std::size_t>(level - 1)];
    }
};

// Validates layers and caches cumulative rate bounds. When bounds are not
// supplied they default to mass(G_n) * max layer rate-sup seen so far, i.e.
// the dominating-rate construction used by the simulators.
inline LayeredMeasure build_layered_measure(std::vector<Layer> layers, int dim_mark, double global_rate_bound,
                                            std::optional<Vec> supplied_bounds = std::nullopt) {
    check(dim_mark >= 1, "build_layered_measure: dim_mark >= 1 required");
    check(global_rate_bound > 0.0 || layers.empty(), "build_layered_measure: rate bound must be positive");
    LayeredMeasure m;
    m.dim_mark = dim_mark;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = layers[i];
        if (l.kind == Layer::Kind::IntervalConst)
            check(dim_mark == 1, "interval layers require 1-d marks");
        if (!l.rate_sup_fn) {
            const double g = global_rate_bound;
            l.rate_sup_fn = [g](double) { return g; };
        }
        const double mass0 = l.mass(0.0);
        check(mass0 > 0.0 && std::isfinite(mass0), "layer " + std::to_string(i + 1) + ": nonpositive or infinite mass");
        if (l.time_varying) m.time_varying = true;
    }
    m.layers = std::move(layers);
    if (supplied_bounds) {
        check(supplied_bounds->size() == m.layers.size(), "rate bounds: size mismatch");
        double prev = 0.0;
        for (std::size_t i = 0; i < supplied_bounds->size(); ++i) {
            check((*supplied_bounds)[i] > prev, "rate bounds must be strictly increasing and positive");
            prev = (*supplied_bounds)[i];
        }
        m.cum_rate_bound = *supplied_bounds;
    } else {
        double acc = 0.0;
        for (const auto& l : m.layers) {
            acc += l.mass(0.0) * l.rate_sup_fn(0.0);
            m.cum_rate_bound.push_back(acc);
        }
        for (std::size_t i = 1; i < m.cum_rate_bound.size(); ++i)
            check(m.cum_rate_bound[i] > m.cum_rate_bound[i - 1], "computed rate bounds not increasing");
    }
    return m;
}

struct MassCheck {
    int layer = 0;
    double declared = 0.0;
    double estimate = 0.0;
    double std_err = 0.0;
    bool pass = true;
    bool membership_pass = true;
};

// Monte Carlo spot checks: sampler output lies in the layer, and if a density
// is available over a uniform sampler of known volume, its integral matches
// the declared mass within 3 standard errors.
inline std::vector<MassCheck> check_measure(const LayeredMeasure& m, double t, int n_samples, Rng& rng) {
    std::vector<MassCheck> out;
    Vec z(static_cast<std::size_t>(m.dim_mark));
    for (int li = 0; li < m.levels(); ++li) {
        const Layer& l = m.layers[static_cast<std::size_t>(li)];
        MassCheck chk;
        chk.layer = li + 1;
        chk.declared = l.mass(t);
        const double volume =
            l.kind == Layer::Kind::IntervalConst ? l.interval_at(t).length() : l.support_volume;
        Vec h_draws;
        h_draws.reserve(static_cast<std::size_t>(n_samples));
        for (int s = 0; s < n_samples; ++s) {
            l.sample(t, rng, z);
            if (!l.contains(t, z)) {
                // interval samplers draw the open interval; custom samplers must agree
                if (l.kind == Layer::Kind::Custom) chk.membership_pass = false;
            }
            if (volume > 0.0 && l.has_density()) h_draws.push_back(l.density(t, z));
        }
        if (!h_draws.empty()) {
            chk.estimate = volume * mean(h_draws);
            chk.std_err = volume * std_error(h_draws);
            const double band = 3.0 * std::max(chk.std_err, 1e-12 * std::fabs(chk.declared));
            chk.pass = std::fabs(chk.estimate - chk.declared) <= band;
        } else {
            chk.estimate = chk.declared;
        }
        chk.pass = chk.pass && chk.membership_pass;
        out.push_back(chk);
    }
    return out;
}

}  // namespace jumpdiff
