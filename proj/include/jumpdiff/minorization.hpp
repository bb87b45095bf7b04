#pragma once

// Big-jump transition kernel and its local Doeblin lower bound. At each tick
// of the rate-Gamma_n clock the kernel either keeps the state (thinning
// rejected) or applies a jump with mark density proportional to rate * h on
// the active prefix. The certificate exhibits a ball C, a constant beta and a
// uniform measure nu on an image ball B with kernel(x, .) >= beta nu for all
// x in C, via the change-of-variables density
//     rate(z, x) h(z) / (Gamma_n |d amplitude/dz|).
// Restricted to 1-d states and marks, mark ball inside one constant-density
// interval layer, amplitude strictly monotone in z on that layer.

#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "fdiff.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "sets.hpp"
#include "simulate.hpp"

namespace jumpdiff {

struct JumpDraw {
    bool jumped = false;
    int layer = 0;      // 1-based, 0 when not jumped
    Vec mark;           // valid when jumped
    Vec post_state;
};

// One application of the big-jump kernel on the prefix G_level.
inline JumpDraw sample_jump_kernel_draw(const LimitModel& model, int level, ConstSpan x, Rng& rng) {
    const auto& measure = model.measure;
    check(level >= 1 && level <= measure.levels(), "sample_jump_kernel: bad level");
    const double clock_rate = measure.rate_bound_at(level);
    JumpDraw out;
    out.post_state.assign(x.begin(), x.end());

    // Layer weights mass*rate_sup; any slack up to the declared bound is
    // an additional no-jump atom.
    double pick = rng.uniform() * clock_rate;
    int layer_idx = 0;
    for (int li = 1; li <= level; ++li) {
        const Layer& l = measure.layers[static_cast<std::size_t>(li - 1)];
        pick -= l.mass(0.0) * l.rate_sup_fn(0.0);
        if (pick <= 0.0) {
            layer_idx = li;
            break;
        }
    }
    if (layer_idx == 0) return out;  // slack: no proposal this tick

    const Layer& layer = measure.layers[static_cast<std::size_t>(layer_idx - 1)];
    Vec z(static_cast<std::size_t>(model.dim_mark));
    layer.sample(0.0, rng, z);
    const double rate = model.jump_rate(z, x);
    const double sup = layer.rate_sup_fn(0.0);
    if (rate > sup * (1.0 + 1e-12)) throw ModelError("sample_jump_kernel: rate exceeds layer bound");
    if (rng.uniform() * sup > rate) return out;  // thinning rejected
    Vec disp(static_cast<std::size_t>(model.dim_state));
    model.jump_amplitude(z, x, disp);
    for (int i = 0; i < model.dim_state; ++i)
        out.post_state[static_cast<std::size_t>(i)] += disp[static_cast<std::size_t>(i)];
    out.jumped = true;
    out.layer = layer_idx;
    out.mark = std::move(z);
    return out;
}

inline Vec sample_jump_kernel(const LimitModel& model, int level, ConstSpan x, Rng& rng) {
    return sample_jump_kernel_draw(model, level, x, rng).post_state;
}

struct MinorizationSeeds {
    double state_center = 0.0;  // x0
    double mark_center = 0.0;   // z0
    double state_radius = 0.5;  // starting eta, halved until a positive beta appears
    double mark_radius = 0.5;   // R
};

struct MinorizationOptions {
    int state_grid = 33;
    int image_grid = 65;
    int mark_grid = 129;
    double safety_factor = 0.9;
    int max_shrink = 12;
    double min_jacobian = 1e-9;
};

struct MinorizationCertificate {
    int level = 1;
    double clock_rate = 0.0;      // Gamma_n the certificate was built against
    BallSet coupling_ball;        // C
    BallSet regen_ball;           // B; nu = Uniform(B)
    double regen_prob = 0.0;      // beta in (0, 1]
    double kernel_density_min = 0.0;  // grid-minimized kernel density over C x B
    int mark_layer = 0;           // 1-based layer holding the mark ball
    double mark_lo = 0.0, mark_hi = 0.0;  // mark ball as an interval
    double mark_density = 1.0;    // h on that layer

    bool in_coupling_ball(ConstSpan x) const { return coupling_ball.contains(x); }

    double regen_density(double y) const {
        const double lo = regen_ball.center[0] - regen_ball.radius;
        const double hi = regen_ball.center[0] + regen_ball.radius;
        return (y > lo && y < hi) ? 1.0 / (hi - lo) : 0.0;
    }

    double sample_regen(Rng& rng) const {
        return rng.uniform(regen_ball.center[0] - regen_ball.radius, regen_ball.center[0] + regen_ball.radius);
    }

    // a.c. kernel density at displacement y - x produced by mark z (the
    // proposal's own mark, so no inversion is needed on the sampling path).
    double kernel_density_at(const LimitModel& model, double x, double z) const {
        const double xs[1] = {x};
        ConstSpan xv(xs, 1);
        double zz = z;
        auto amp = [&](double zq) {
            double out1[1];
            double zbuf[1] = {zq};
            model.jump_amplitude(ConstSpan(zbuf, 1), xv, Span(out1, 1));
            return out1[0];
        };
        const double h = 1e-6 * std::max(1.0, std::fabs(z));
        const double slope = (amp(zz + h) - amp(zz - h)) / (2.0 * h);
        if (std::fabs(slope) < 1e-14) return 0.0;
        double zb[1] = {z};
        const double rate = model.jump_rate(ConstSpan(zb, 1), xv);
        return rate * mark_density / (clock_rate * std::fabs(slope));
    }

    // Inverts the amplitude for a target displacement by bisection on a
    // monotone stretch. Endpoints are clipped slightly inside the interval
    // (amplitudes may carry indicator edges), and a target that misses the
    // range by a relative sliver resolves to the nearest endpoint.
    std::optional<double> invert_displacement(const LimitModel& model, double x, double target,
                                              double layer_lo, double layer_hi) const {
        const double xs[1] = {x};
        ConstSpan xv(xs, 1);
        auto amp = [&](double zq) {
            double out1[1];
            double zbuf[1] = {zq};
            model.jump_amplitude(ConstSpan(zbuf, 1), xv, Span(out1, 1));
            return out1[0];
        };
        const double clip = 1e-9 * (layer_hi - layer_lo);
        double lo = layer_lo + clip;
        double hi = layer_hi - clip;
        double flo = amp(lo) - target, fhi = amp(hi) - target;
        if (flo == 0.0) return lo;
        if (fhi == 0.0) return hi;
        if (flo * fhi > 0.0) {
            const double scale = std::max(std::fabs(amp(hi) - amp(lo)), 1e-300);
            if (std::fabs(flo) <= 1e-6 * scale) return lo;
            if (std::fabs(fhi) <= 1e-6 * scale) return hi;
            return std::nullopt;
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = amp(mid) - target;
            if (std::fabs(fm) < 1e-14 || hi - lo < 1e-15 * std::max(1.0, std::fabs(mid))) return mid;
            if ((fm > 0.0) == (flo > 0.0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    }
};

namespace detail {

inline double amplitude_1d(const LimitModel& model, double z, double x) {
    double out1[1];
    double zb[1] = {z};
    double xb[1] = {x};
    model.jump_amplitude(ConstSpan(zb, 1), ConstSpan(xb, 1), Span(out1, 1));
    return out1[0];
}

}  // namespace detail

inline MinorizationCertificate estimate_minorization(const LimitModel& model, int level,
                                                     const MinorizationSeeds& seeds,
                                                     const MinorizationOptions& opts = {}) {
    check(model.dim_state == 1 && model.dim_mark == 1,
          "estimate_minorization: supported for 1-d state and marks only");
    check(level >= 1 && level <= model.measure.levels(), "estimate_minorization: bad level");

    // Jacobian non-degeneracy at the seeds.
    {
        const double h = 1e-6 * std::max(1.0, std::fabs(seeds.mark_center));
        const double slope = (detail::amplitude_1d(model, seeds.mark_center + h, seeds.state_center) -
                              detail::amplitude_1d(model, seeds.mark_center - h, seeds.state_center)) /
                             (2.0 * h);
        if (std::fabs(slope) < opts.min_jacobian)
            throw ModelError("estimate_minorization: amplitude Jacobian in z is rank-deficient at the seeds");
    }

    // Locate the interval layer containing the mark ball within the prefix.
    const double ball_lo = seeds.mark_center - seeds.mark_radius;
    const double ball_hi = seeds.mark_center + seeds.mark_radius;
    int mark_layer = 0;
    double layer_lo = 0.0, layer_hi = 0.0, h_density = 0.0;
    for (int li = 1; li <= level; ++li) {
        const Layer& l = model.measure.layers[static_cast<std::size_t>(li - 1)];
        if (l.kind != Layer::Kind::IntervalConst) continue;
        const Interval iv = l.interval_at(0.0);
        if (iv.lo <= ball_lo && ball_hi <= iv.hi) {
            mark_layer = li;
            layer_lo = iv.lo;
            layer_hi = iv.hi;
            h_density = l.density_value;
            break;
        }
    }
    check(mark_layer > 0,
          "estimate_minorization: mark ball must sit inside one constant-density interval layer of the prefix");

    // Amplitude must be strictly monotone in z on the whole mark layer for the
    // residual density to be a single-preimage change of variables.
    {
        const Vec zg = linspace(layer_lo + 1e-9 * std::max(1.0, std::fabs(layer_lo)),
                                layer_hi - 1e-9 * std::max(1.0, std::fabs(layer_hi)), opts.mark_grid);
        for (double xprobe :
             {seeds.state_center - seeds.state_radius, seeds.state_center, seeds.state_center + seeds.state_radius}) {
            double prev = detail::amplitude_1d(model, zg[0], xprobe);
            int direction = 0;
            for (std::size_t i = 1; i < zg.size(); ++i) {
                const double cur = detail::amplitude_1d(model, zg[i], xprobe);
                const int step = cur > prev ? 1 : cur < prev ? -1 : 0;
                if (step == 0 || (direction != 0 && step != direction))
                    throw ModelError("estimate_minorization: amplitude not strictly monotone on the mark layer");
                direction = step;
                prev = cur;
            }
        }
    }

    const double clock_rate = model.measure.rate_bound_at(level);
    MinorizationCertificate cert;
    cert.level = level;
    cert.clock_rate = clock_rate;
    cert.mark_layer = mark_layer;
    cert.mark_lo = ball_lo;
    cert.mark_hi = ball_hi;
    cert.mark_density = h_density;

    double eta = seeds.state_radius;
    for (int attempt = 0; attempt < opts.max_shrink; ++attempt, eta *= 0.5) {
        const Vec xg = linspace(seeds.state_center - eta, seeds.state_center + eta, opts.state_grid);
        const Vec zg = linspace(ball_lo, ball_hi, opts.mark_grid);

        // Image displacement range per state, then the intersection over C.
        double inter_lo = -std::numeric_limits<double>::infinity();
        double inter_hi = std::numeric_limits<double>::infinity();
        for (double x : xg) {
            double dmin = std::numeric_limits<double>::infinity(), dmax = -dmin;
            for (double z : zg) {
                const double disp = detail::amplitude_1d(model, z, x);
                dmin = std::min(dmin, disp);
                dmax = std::max(dmax, disp);
            }
            inter_lo = std::max(inter_lo, x + dmin);
            inter_hi = std::min(inter_hi, x + dmax);
        }
        if (!(inter_hi - inter_lo > 1e-12)) continue;

        BallSet image_ball(Vec{0.5 * (inter_lo + inter_hi)}, 0.5 * (inter_hi - inter_lo));
        const double margin = 1e-9 * (inter_hi - inter_lo);
        const Vec yg = linspace(inter_lo + margin, inter_hi - margin, opts.image_grid);
        double dens_min = std::numeric_limits<double>::infinity();
        bool feasible = true;
        for (double x : xg) {
            for (double y : yg) {
                const auto z = cert.invert_displacement(model, x, y - x, layer_lo, layer_hi);
                if (!z || *z < ball_lo - 1e-9 || *z > ball_hi + 1e-9) {
                    feasible = false;
                    break;
                }
                const double dens = cert.kernel_density_at(model, x, *z);
                dens_min = std::min(dens_min, dens);
            }
            if (!feasible) break;
        }
        if (!feasible || !(dens_min > 0.0)) continue;

        const double volume = image_ball.volume();
        double beta = opts.safety_factor * volume * dens_min;
        if (beta <= 0.0) continue;
        beta = std::min(beta, 1.0);
        cert.coupling_ball = BallSet(Vec{seeds.state_center}, eta);
        cert.regen_ball = std::move(image_ball);
        cert.regen_prob = beta;
        cert.kernel_density_min = dens_min;
        return cert;
    }
    throw ModelError("estimate_minorization: no positive lower bound found down to the minimum ball radius");
}

// Post-hoc soundness check on a finer grid: kernel density >= beta * nu
// density everywhere on C x B. Returns the number of violations.
inline int verify_certificate(const MinorizationCertificate& cert, const LimitModel& model, int state_grid = 97,
                              int image_grid = 193) {
    const double eta = cert.coupling_ball.radius;
    const double x0 = cert.coupling_ball.center[0];
    const Vec xg = linspace(x0 - eta, x0 + eta, state_grid);
    const double blo = cert.regen_ball.center[0] - cert.regen_ball.radius;
    const double bhi = cert.regen_ball.center[0] + cert.regen_ball.radius;
    const double margin = 1e-9 * (bhi - blo);
    const Vec yg = linspace(blo + margin, bhi - margin, image_grid);
    const Layer& layer = model.measure.layers[static_cast<std::size_t>(cert.mark_layer - 1)];
    const Interval iv = layer.interval_at(0.0);
    const double nu_density = 1.0 / (bhi - blo);
    int violations = 0;
    for (double x : xg)
        for (double y : yg) {
            const auto z = cert.invert_displacement(model, x, y - x, iv.lo, iv.hi);
            const double dens = z ? cert.kernel_density_at(model, x, *z) : 0.0;
            if (dens + 1e-12 < cert.regen_prob * nu_density) ++violations;
        }
    return violations;
}

}  // namespace jumpdiff
