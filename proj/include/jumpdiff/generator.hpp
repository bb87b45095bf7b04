#pragma once

// Numerical generator evaluation on test functions, per-regime jump
// functionals, the time-to-limit gap epsilon(x, t0) with its decay fit, and
// Lyapunov drift verification. Jump integrals run over the declared layers of
// the measure; analytic tails enter only through the models' tail bounds.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "dictionary.hpp"
#include "fdiff.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "quad.hpp"
#include "sets.hpp"
#include "stats.hpp"

namespace jumpdiff {

namespace detail {

inline void gradient_of(const ScalarField& f, ConstSpan x, Span out, double rel = 1e-4) {
    if (f.gradient)
        f.gradient(x, out);
    else
        fd_gradient(f.value, x, out, rel);
}

inline void hessian_of(const ScalarField& f, ConstSpan x, Span out, double rel = 1e-4) {
    if (f.hessian)
        f.hessian(x, out);
    else
        fd_hessian(f.value, x, out, rel);
}

}  // namespace detail

// Drift term plus layered jump integral of [f(x + c) - f(x)] * rate.
inline QuadResult apply_generator(const InhomogeneousModel& model, const ScalarField& f, double t, ConstSpan x,
                                  const QuadratureSpec& quad = {}) {
    const int d = model.dim_state;
    Vec grad(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    detail::gradient_of(f, x, grad);
    model.drift(t, x, b);
    QuadResult out;
    for (int i = 0; i < d; ++i) out.value += b[static_cast<std::size_t>(i)] * grad[static_cast<std::size_t>(i)];

    const double fx = f.value(x);
    Vec shifted(x.begin(), x.end());
    Vec disp(static_cast<std::size_t>(d));
    auto integrand = [&](ConstSpan z) {
        const double rate = model.jump_rate(t, z, x);
        if (rate == 0.0) return 0.0;
        model.jump_amplitude(t, z, x, disp);
        for (int i = 0; i < d; ++i) shifted[static_cast<std::size_t>(i)] = x[i] + disp[static_cast<std::size_t>(i)];
        return (f.value(shifted) - fx) * rate;
    };
    out += integrate_measure(model.measure, t, integrand, quad);
    if (out.std_err > quad.mc_se_threshold)
        throw NumericsError("apply_generator: quadrature standard error above threshold");
    return out;
}

inline QuadResult apply_limit_generator(const LimitModel& model, const ScalarField& f, ConstSpan x,
                                        const QuadratureSpec& quad = {}) {
    InhomogeneousModel view;
    view.dim_state = model.dim_state;
    view.dim_mark = model.dim_mark;
    view.drift = [&model](double, ConstSpan xx, Span out) { model.drift(xx, out); };
    view.jump_amplitude = [&model](double, ConstSpan z, ConstSpan xx, Span out) {
        model.jump_amplitude(z, xx, out);
    };
    view.jump_rate = [&model](double, ConstSpan z, ConstSpan xx) { return model.jump_rate(z, xx); };
    view.rate_bound = model.rate_bound;
    view.measure = model.measure;
    QuadResult out = apply_generator(view, f, 0.0, x, quad);
    if (model.dim_noise > 0) {
        const int d = model.dim_state;
        Vec hess(static_cast<std::size_t>(d * d)), a(static_cast<std::size_t>(d * d));
        detail::hessian_of(f, x, hess);
        model.covariance(x, a);
        double diff = 0.0;
        for (int i = 0; i < d * d; ++i) diff += a[static_cast<std::size_t>(i)] * hess[static_cast<std::size_t>(i)];
        out.value += 0.5 * diff;
    }
    return out;
}

struct RegimeFunctionals {
    Vec second_matrix;      // fast-regime c c^T rate integral, d*d row-major
    Vec jump_drift;         // intermediate-regime c rate integral
    double fast_first_norm = 0.0;   // |fast-regime first moment|, should vanish
    double third_moment = 0.0;      // fast regime |c|^3
    double second_moment_mid = 0.0; // intermediate regime |c|^2
    double slow_gap = 0.0;          // regime-3 coefficient gap vs the limit (NaN without a limit model)
    double eps = 0.0;               // epsilon(x, t) vs the limit (NaN without a limit model)
    bool second_matrix_psd = true;
};

namespace detail {

struct EpsParts {
    double fast_third = 0.0;
    double mid_second = 0.0;
    double cov_gap = 0.0;
    double drift_gap = 0.0;
    double slow_gap = 0.0;
    double total() const { return fast_third + mid_second + cov_gap + drift_gap + slow_gap; }
};

inline EpsParts eps_parts(const InhomogeneousModel& model, const LimitModel& limit, double t, ConstSpan x,
                          const QuadratureSpec& quad) {
    check(static_cast<bool>(model.regime), "epsilon: model has no regime classifier");
    const int d = model.dim_state;
    EpsParts parts;
    Vec disp(static_cast<std::size_t>(d)), disp_lim(static_cast<std::size_t>(d));

    auto fast3 = [&](ConstSpan z) {
        if (model.regime(t, z) != 1) return 0.0;
        const double rate = model.jump_rate(t, z, x);
        if (rate == 0.0) return 0.0;
        model.jump_amplitude(t, z, x, disp);
        const double n = norm2(disp);
        return n * n * n * rate;
    };
    parts.fast_third = integrate_measure(model.measure, t, fast3, quad).value;

    auto mid2 = [&](ConstSpan z) {
        if (model.regime(t, z) != 2) return 0.0;
        const double rate = model.jump_rate(t, z, x);
        if (rate == 0.0) return 0.0;
        model.jump_amplitude(t, z, x, disp);
        return sq(norm2(disp)) * rate;
    };
    parts.mid_second = integrate_measure(model.measure, t, mid2, quad).value;

    // covariance gap |a(t,x) - a_lim(x)|_F
    Vec a_t(static_cast<std::size_t>(d * d), 0.0), a_lim(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            auto cij = [&](ConstSpan z) {
                if (model.regime(t, z) != 1) return 0.0;
                const double rate = model.jump_rate(t, z, x);
                if (rate == 0.0) return 0.0;
                model.jump_amplitude(t, z, x, disp);
                return disp[static_cast<std::size_t>(i)] * disp[static_cast<std::size_t>(j)] * rate;
            };
            const double v = integrate_measure(model.measure, t, cij, quad).value;
            a_t[static_cast<std::size_t>(i * d + j)] = v;
            a_t[static_cast<std::size_t>(j * d + i)] = v;
        }
    limit.covariance(x, a_lim);
    double cov2 = 0.0;
    for (int i = 0; i < d * d; ++i) cov2 += sq(a_t[static_cast<std::size_t>(i)] - a_lim[static_cast<std::size_t>(i)]);
    parts.cov_gap = std::sqrt(cov2);

    // drift gap |b(t,x) + jump_drift(t,x) - g(x)|
    Vec b(static_cast<std::size_t>(d)), g(static_cast<std::size_t>(d));
    model.drift(t, x, b);
    limit.drift(x, g);
    for (int i = 0; i < d; ++i) {
        auto ci = [&](ConstSpan z) {
            if (model.regime(t, z) != 2) return 0.0;
            const double rate = model.jump_rate(t, z, x);
            if (rate == 0.0) return 0.0;
            model.jump_amplitude(t, z, x, disp);
            return disp[static_cast<std::size_t>(i)] * rate;
        };
        b[static_cast<std::size_t>(i)] += integrate_measure(model.measure, t, ci, quad).value;
    }
    double dg = 0.0;
    for (int i = 0; i < d; ++i) dg += sq(b[static_cast<std::size_t>(i)] - g[static_cast<std::size_t>(i)]);
    parts.drift_gap = std::sqrt(dg);

    // Slow-regime coefficient gap, integrated over the limit measure's layers.
    // The rate-difference term is restricted to the support of the current
    // rate so the not-yet-grown band is charged once, through the amplitude
    // term with vanishing current amplitude.
    auto slow = [&](ConstSpan z) {
        if (model.regime(t, z) != 3) return 0.0;
        const double rate_t = model.jump_rate(t, z, x);
        const double rate_lim = limit.jump_rate(z, x);
        model.jump_amplitude(t, z, x, disp);
        limit.jump_amplitude(z, x, disp_lim);
        double amp_gap = 0.0;
        for (int i = 0; i < d; ++i) amp_gap += sq(disp[static_cast<std::size_t>(i)] - disp_lim[static_cast<std::size_t>(i)]);
        double v = rate_lim * std::sqrt(amp_gap);
        if (rate_t > 0.0) v += std::fabs(rate_t - rate_lim);
        return v;
    };
    parts.slow_gap = integrate_measure(limit.measure, t, slow, quad).value;
    return parts;
}

}  // namespace detail

inline RegimeFunctionals regime_functionals(const InhomogeneousModel& model, double t, ConstSpan x,
                                            const LimitModel* limit = nullptr,
                                            const QuadratureSpec& quad = {}) {
    check(static_cast<bool>(model.regime), "regime_functionals: model has no regime classifier");
    const int d = model.dim_state;
    RegimeFunctionals out;
    out.second_matrix.assign(static_cast<std::size_t>(d * d), 0.0);
    out.jump_drift.assign(static_cast<std::size_t>(d), 0.0);
    Vec disp(static_cast<std::size_t>(d));

    auto moment = [&](int regime_class, auto&& weight) {
        auto integrand = [&](ConstSpan z) {
            if (model.regime(t, z) != regime_class) return 0.0;
            const double rate = model.jump_rate(t, z, x);
            if (rate == 0.0) return 0.0;
            model.jump_amplitude(t, z, x, disp);
            return weight(disp) * rate;
        };
        return integrate_measure(model.measure, t, integrand, quad).value;
    };

    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = moment(1, [&](ConstSpan c) { return c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(j)]; });
            out.second_matrix[static_cast<std::size_t>(i * d + j)] = v;
            out.second_matrix[static_cast<std::size_t>(j * d + i)] = v;
        }
    out.second_matrix_psd = is_psd(out.second_matrix, d);

    double first2 = 0.0;
    for (int i = 0; i < d; ++i) {
        out.jump_drift[static_cast<std::size_t>(i)] = moment(2, [&](ConstSpan c) { return c[static_cast<std::size_t>(i)]; });
        first2 += sq(moment(1, [&](ConstSpan c) { return c[static_cast<std::size_t>(i)]; }));
    }
    out.fast_first_norm = std::sqrt(first2);
    out.third_moment = moment(1, [&](ConstSpan c) { const double n = norm2(c); return n * n * n; });
    out.second_moment_mid = moment(2, [&](ConstSpan c) { return sq(norm2(c)); });

    if (limit) {
        const auto parts = detail::eps_parts(model, *limit, t, x, quad);
        out.slow_gap = parts.slow_gap;
        out.eps = parts.total();
    } else {
        out.slow_gap = std::numeric_limits<double>::quiet_NaN();
        out.eps = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

// epsilon(x, t0): per-term sup over a probe set of times >= t0.
inline double epsilon_at(const InhomogeneousModel& model, const LimitModel& limit, ConstSpan x, double t0,
                         const QuadratureSpec& quad = {}, int probes = 5) {
    detail::EpsParts sup;
    for (int k = 0; k <= probes; ++k) {
        const double t = t0 * (1.0 + 0.35 * k) + 0.25 * k;
        const auto p = detail::eps_parts(model, limit, t, x, quad);
        sup.fast_third = std::max(sup.fast_third, p.fast_third);
        sup.mid_second = std::max(sup.mid_second, p.mid_second);
        sup.cov_gap = std::max(sup.cov_gap, p.cov_gap);
        sup.drift_gap = std::max(sup.drift_gap, p.drift_gap);
        sup.slow_gap = std::max(sup.slow_gap, p.slow_gap);
    }
    return sup.total();
}

struct EpsilonDecayFit {
    Vec t_grid;
    std::vector<Vec> eps;       // per x row, per t column
    Vec slopes;                 // per x
    double mean_slope = 0.0;
    double fitted_rate = 0.0;   // -mean_slope
    double fitted_scale = 0.0;  // C with eps <= C (1+|x|) exp(-rate t)
    bool decaying = true;
    int dictionary_violations = 0;
    double max_gap_ratio = 0.0;  // max |L_t f - L f| / bound over the dictionary
};

inline EpsilonDecayFit epsilon_decay(const InhomogeneousModel& model, const LimitModel& limit,
                                     const std::vector<Vec>& x_grid, Vec t_grid,
                                     const QuadratureSpec& quad = {}, const Dictionary* dict = nullptr) {
    EpsilonDecayFit fit;
    fit.t_grid = std::move(t_grid);
    for (const auto& x : x_grid) {
        Vec row;
        for (double t : fit.t_grid) row.push_back(epsilon_at(model, limit, x, t, quad));
        fit.eps.push_back(std::move(row));
    }
    double slope_sum = 0.0;
    for (const auto& row : fit.eps) {
        Vec logs;
        Vec ts;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] > 0.0) {
                logs.push_back(std::log(row[i]));
                ts.push_back(fit.t_grid[i]);
            }
        }
        if (logs.size() < 2) {
            fit.slopes.push_back(0.0);  // identically zero gap: no decay to fit
            continue;
        }
        const double s = linear_fit(ts, logs).slope;
        fit.slopes.push_back(s);
        slope_sum += s;
    }
    fit.mean_slope = fit.slopes.empty() ? 0.0 : slope_sum / static_cast<double>(fit.slopes.size());
    fit.fitted_rate = -fit.mean_slope;
    fit.decaying = fit.fitted_rate > 0.0;
    double scale = 0.0;
    for (std::size_t xi = 0; xi < x_grid.size(); ++xi)
        for (std::size_t ti = 0; ti < fit.t_grid.size(); ++ti) {
            const double denom = (1.0 + norm2(x_grid[xi])) * std::exp(-fit.fitted_rate * fit.t_grid[ti]);
            if (denom > 0.0) scale = std::max(scale, fit.eps[xi][ti] / denom);
        }
    fit.fitted_scale = scale;

    if (dict) {
        for (const auto& x : x_grid)
            for (double t : fit.t_grid)
                for (const auto& tf : dict->fns) {
                    ScalarField f(tf.value);
                    const double gap =
                        std::fabs(apply_generator(model, f, t, x, quad).value -
                                  apply_limit_generator(limit, f, x, quad).value);
                    const double bound = fit.fitted_scale * (1.0 + norm2(x)) * std::exp(-fit.fitted_rate * t);
                    if (bound > 0.0) fit.max_gap_ratio = std::max(fit.max_gap_ratio, gap / bound);
                    if (gap > bound * (1.0 + 1e-9)) ++fit.dictionary_violations;
                }
    }
    return fit;
}

struct LyapunovResult {
    bool verified = false;
    double fitted_decay = 0.0;      // largest b with LV <= -b V + c 1_K on the grid
    double fitted_excursion = 0.0;  // smallest such c
    std::vector<Vec> violations;    // grid points where LV > -bV + c1_K for the supplied constants
    double worst_ratio = 0.0;       // max over grid outside K of LV/V
};

// Evaluates the generator on V over the grid; for inhomogeneous models the
// sup over the probe time grid is used pointwise.
inline LyapunovResult lyapunov_check(const std::function<double(ConstSpan)>& generator_on_V,
                                     const LyapunovSpec& spec, const std::vector<Vec>& grid) {
    LyapunovResult out;
    double best_b = std::numeric_limits<double>::infinity();
    bool any_outside = false;
    Vec lv_values;
    lv_values.reserve(grid.size());
    for (const auto& x : grid) {
        const double lv = generator_on_V(x);
        lv_values.push_back(lv);
        const double v = spec.value(x);
        check(v >= 1.0 - 1e-12, "lyapunov_check: V must be >= 1 on the grid");
        if (!spec.compact.contains(x)) {
            any_outside = true;
            best_b = std::min(best_b, -lv / v);
            out.worst_ratio = std::max(out.worst_ratio, lv / v);
        }
    }
    if (!any_outside) throw ModelError("lyapunov_check: grid lies entirely inside the compact");
    out.fitted_decay = best_b;
    out.verified = best_b > 0.0 && std::isfinite(best_b);
    double c = 0.0;
    if (out.verified) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (spec.compact.contains(grid[i]))
                c = std::max(c, lv_values[i] + best_b * spec.value(grid[i]));
        out.fitted_excursion = std::max(0.0, c);
    }
    if (spec.decay_rate > 0.0) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double bound = -spec.decay_rate * spec.value(grid[i]) +
                                 (spec.compact.contains(grid[i]) ? spec.excursion_bound : 0.0);
            if (lv_values[i] > bound + 1e-7 * (1.0 + std::fabs(bound))) out.violations.push_back(grid[i]);
        }
    }
    return out;
}

inline LyapunovResult lyapunov_check(const LimitModel& model, const LyapunovSpec& spec, const GridSpec& grid,
                                     const QuadratureSpec& quad = {}) {
    ScalarField V(spec.value);
    auto gen = [&](ConstSpan x) { return apply_limit_generator(model, V, x, quad).value; };
    return lyapunov_check(gen, spec, grid.points());
}

inline LyapunovResult lyapunov_check(const InhomogeneousModel& model, const LyapunovSpec& spec,
                                     const GridSpec& grid, const Vec& t_grid, const QuadratureSpec& quad = {}) {
    ScalarField V(spec.value);
    auto gen = [&](ConstSpan x) {
        double worst = -std::numeric_limits<double>::infinity();
        for (double t : t_grid) worst = std::max(worst, apply_generator(model, V, t, x, quad).value);
        return worst;
    };
    return lyapunov_check(gen, spec, grid.points());
}

}  // namespace jumpdiff
