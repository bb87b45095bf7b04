#pragma once

// Report-only validation of the standing assumptions on user grids:
// empirical Lipschitz constants, rate-bound checks, the coefficient mass
// C_mu = sup_x \int (L_c(z) rate + L_rate(z) |amplitude|) d(mu), the off-set
// amplitude mass alpha(G^c), and positive semidefiniteness of the diffusion
// covariance. Estimates are grid maxima, reported as estimates, never as
// certified bounds.

#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "quad.hpp"
#include "sets.hpp"

namespace jumpdiff {

struct ValidationEntry {
    std::string name;
    bool pass = true;
    double value = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;
    double sup_rate = 0.0;        // grid sup of the jump rate
    double lip_drift = 0.0;       // empirical Lipschitz of the drift in x
    double lip_sigma_sum = 0.0;   // sum over columns, limit models only
    double coeff_mass = 0.0;      // C_mu estimate
    double alpha_complement = 0.0;  // sup_x off-prefix |amplitude|*rate mass (incl. analytic tail)
    bool all_pass = true;

    void add(ValidationEntry e) {
        all_pass = all_pass && e.pass;
        entries.push_back(std::move(e));
    }
};

struct ValidationGrids {
    GridSpec x_grid;
    Vec t_grid = {0.0};          // ignored for limit models
    int z_points_per_layer = 65; // per-layer mark probe grid (interval layers)
    int truncation_level = 0;    // prefix for alpha(G^c); 0 = all layers
    double tolerance = 1e-6;
};

namespace detail {

inline std::vector<Vec> layer_probe_marks(const LayeredMeasure& m, double t, int per_layer, Rng& rng) {
    std::vector<Vec> zs;
    for (const auto& l : m.layers) {
        if (l.kind == Layer::Kind::IntervalConst) {
            const Interval iv = l.interval_at(t);
            const double pad = iv.length() * 1e-6;
            for (double z : linspace(iv.lo + pad, iv.hi - pad, per_layer)) zs.push_back(Vec{z});
        } else {
            Vec z(static_cast<std::size_t>(m.dim_mark));
            for (int i = 0; i < per_layer; ++i) {
                l.sample(t, rng, z);
                zs.push_back(z);
            }
        }
    }
    return zs;
}

// Max difference quotient along consecutive grid points (plus a few long-range
// pairs); adequate as an empirical Lipschitz estimate on a product grid.
template <typename F>
double empirical_lipschitz(const std::vector<Vec>& xs, F&& f) {
    double lip = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double dx = dist2(xs[i], xs[i + 1]);
        if (dx <= 0.0) continue;
        lip = std::max(lip, std::fabs(f(xs[i]) - f(xs[i + 1])) / dx);
    }
    const std::size_t stride = std::max<std::size_t>(1, xs.size() / 7);
    for (std::size_t i = 0; i + stride < xs.size(); i += stride) {
        const double dx = dist2(xs[i], xs[i + stride]);
        if (dx <= 0.0) continue;
        lip = std::max(lip, std::fabs(f(xs[i]) - f(xs[i + stride])) / dx);
    }
    return lip;
}

}  // namespace detail

inline ValidationReport validate_model(const InhomogeneousModel& model, const ValidationGrids& grids) {
    ValidationReport rep;
    const auto xs = grids.x_grid.points();
    Rng rng(4242);
    Vec buf(static_cast<std::size_t>(model.dim_state));
    Vec buf2(static_cast<std::size_t>(model.dim_state));

    double sup_rate = 0.0;
    bool bound_ok = true;
    std::string bad_point;
    double lip_drift = 0.0;
    for (double t : grids.t_grid) {
        const auto zs = detail::layer_probe_marks(model.measure, t, grids.z_points_per_layer, rng);
        for (const auto& z : zs) {
            for (const auto& x : xs) {
                const double r = model.jump_rate(t, z, x);
                sup_rate = std::max(sup_rate, r);
                if (r > model.rate_bound * (1.0 + grids.tolerance) && bound_ok) {
                    bound_ok = false;
                    std::ostringstream os;
                    os << "rate " << r << " > bound " << model.rate_bound << " at t=" << t << " z=" << z[0]
                       << " x=" << x[0];
                    bad_point = os.str();
                }
            }
        }
        for (int i = 0; i < model.dim_state; ++i)
            lip_drift = std::max(lip_drift, detail::empirical_lipschitz(xs, [&](ConstSpan x) {
                                     model.drift(t, x, buf);
                                     return buf[static_cast<std::size_t>(i)];
                                 }));
    }
    rep.sup_rate = sup_rate;
    rep.lip_drift = lip_drift;
    rep.add({"rate_bound", bound_ok, sup_rate, bound_ok ? "" : bad_point});
    rep.add({"drift_lipschitz", true, lip_drift, "empirical grid estimate"});

    // C_mu at the first probe time: per-mark Lipschitz constants of amplitude
    // and rate in x, integrated against the measure, maximized over x.
    const double t0 = grids.t_grid.front();
    QuadratureSpec q;
    double cmu = 0.0;
    for (const auto& x_fix : xs) {
        auto integrand = [&](ConstSpan z) {
            const double lc = detail::empirical_lipschitz(xs, [&](ConstSpan x) {
                model.jump_amplitude(t0, z, x, buf);
                return norm2(buf);
            });
            const double lg = detail::empirical_lipschitz(
                xs, [&](ConstSpan x) { return model.jump_rate(t0, z, x); });
            model.jump_amplitude(t0, z, x_fix, buf2);
            return lc * model.jump_rate(t0, z, x_fix) + lg * norm2(buf2);
        };
        cmu = std::max(cmu, integrate_measure(model.measure, t0, integrand, q).value);
    }
    rep.coeff_mass = cmu;
    rep.add({"coeff_mass", std::isfinite(cmu), cmu, "C_mu estimate at first probe time"});

    // Amplitude mass per layer and off the active prefix.
    const int last = active_last_layer(model.measure, grids.truncation_level);
    double alpha_on = 0.0, alpha_off = 0.0;
    for (const auto& x : xs) {
        auto integrand = [&](ConstSpan z) {
            model.jump_amplitude(t0, z, x, buf);
            return norm2(buf) * model.jump_rate(t0, z, x);
        };
        alpha_on = std::max(alpha_on, integrate_layers(model.measure, t0, integrand, q, 1, last).value);
        double off = 0.0;
        if (last < model.measure.levels())
            off += integrate_layers(model.measure, t0, integrand, q, last + 1, model.measure.levels()).value;
        if (model.tail_alpha) off += model.tail_alpha(x);
        alpha_off = std::max(alpha_off, off);
    }
    rep.alpha_complement = alpha_off;
    rep.add({"amplitude_mass_active", std::isfinite(alpha_on), alpha_on, "per-prefix |amplitude|*rate mass"});
    rep.add({"alpha_complement", std::isfinite(alpha_off), alpha_off, "off-prefix mass incl. analytic tail"});

    // Regime classifier, when present, must assign exactly one class in {1,2,3}.
    if (model.regime) {
        bool ok = true;
        std::string why;
        for (double t : grids.t_grid) {
            const auto zs = detail::layer_probe_marks(model.measure, t, 17, rng);
            for (const auto& z : zs) {
                const int c = model.regime(t, z);
                if (c < 1 || c > 3) {
                    ok = false;
                    std::ostringstream os;
                    os << "class " << c << " at t=" << t << " z=" << z[0];
                    why = os.str();
                }
            }
        }
        rep.add({"regime_partition", ok, 0.0, why});
    }
    return rep;
}

inline ValidationReport validate_model(const LimitModel& model, const ValidationGrids& grids) {
    // Reuse the inhomogeneous checks through the constant-in-time view, then
    // add diffusion-specific ones.
    InhomogeneousModel view;
    view.dim_state = model.dim_state;
    view.dim_mark = model.dim_mark;
    view.drift = [&model](double, ConstSpan x, Span out) { model.drift(x, out); };
    view.jump_amplitude = [&model](double, ConstSpan z, ConstSpan x, Span out) { model.jump_amplitude(z, x, out); };
    view.jump_rate = [&model](double, ConstSpan z, ConstSpan x) { return model.jump_rate(z, x); };
    view.rate_bound = model.rate_bound;
    view.measure = model.measure;
    view.tail_alpha = model.tail_alpha;
    ValidationGrids g = grids;
    g.t_grid = {0.0};
    ValidationReport rep = validate_model(view, g);

    if (model.dim_noise > 0) {
        const auto xs = grids.x_grid.points();
        const int d = model.dim_state;
        Vec a(static_cast<std::size_t>(d * d));
        bool psd = true;
        std::string why;
        double lip_sigma = 0.0;
        Vec cols(static_cast<std::size_t>(d * model.dim_noise));
        for (const auto& x : xs) {
            model.covariance(x, a);
            if (!is_psd(a, d)) {
                psd = false;
                std::ostringstream os;
                os << "covariance not PSD at x=" << x[0];
                why = os.str();
            }
        }
        for (int l = 0; l < model.dim_noise; ++l)
            for (int i = 0; i < d; ++i)
                lip_sigma += detail::empirical_lipschitz(xs, [&](ConstSpan x) {
                    model.diffusion(x, cols);
                    return cols[static_cast<std::size_t>(l * d + i)];
                });
        rep.lip_sigma_sum = lip_sigma;
        rep.add({"covariance_psd", psd, 0.0, why});
        rep.add({"sigma_lipschitz", true, lip_sigma, "sum over columns/components"});
    }
    return rep;
}

}  // namespace jumpdiff
