#pragma once

// Regeneration coupling of two limit-process copies. Both chains share one
// rate-Gamma_n big-jump clock; between ticks they run independent small-jump
// processes. At a tick with both pre-jump states in C, a color U decides:
// U <= beta regenerates both chains from nu (the coupling fires), otherwise
// both draw from the residual kernel. Outside C x C the pair moves by the
// synchronous (shared mark, shared thinning) kernel, which preserves both
// marginals exactly; the maximal pair coupling is intentionally not used.

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "minorization.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "stats.hpp"

namespace jumpdiff {

inline std::uint64_t pair_stream_seed(std::uint64_t seed, std::size_t i) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (i + 1));
    return splitmix64(s);
}

namespace detail {

// One shared proposal of the big-jump kernel applied to both states: a single
// layer pick, mark and thinning uniform, replayed against x and y.
inline std::pair<JumpDraw, JumpDraw> shared_pair_attempt(const LimitModel& model, int level, double x, double y,
                                                         Rng& rng) {
    const auto& measure = model.measure;
    const double clock_rate = measure.rate_bound_at(level);
    JumpDraw dx, dy;
    dx.post_state = Vec{x};
    dy.post_state = Vec{y};
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
    if (layer_idx == 0) return {dx, dy};  // bound slack: no candidate
    const Layer& layer = measure.layers[static_cast<std::size_t>(layer_idx - 1)];
    Vec z(static_cast<std::size_t>(model.dim_mark));
    layer.sample(0.0, rng, z);
    const double u_thin = rng.uniform();
    const double sup = layer.rate_sup_fn(0.0);
    double disp[1];
    double st[1] = {x};
    if (u_thin * sup <= model.jump_rate(z, ConstSpan(st, 1))) {
        model.jump_amplitude(z, ConstSpan(st, 1), Span(disp, 1));
        dx.jumped = true;
        dx.layer = layer_idx;
        dx.mark = z;
        dx.post_state[0] += disp[0];
    }
    st[0] = y;
    if (u_thin * sup <= model.jump_rate(z, ConstSpan(st, 1))) {
        model.jump_amplitude(z, ConstSpan(st, 1), Span(disp, 1));
        dy.jumped = true;
        dy.layer = layer_idx;
        dy.mark = z;
        dy.post_state[0] += disp[0];
    }
    return {dx, dy};
}

inline double residual_accept_prob(const MinorizationCertificate& cert, const LimitModel& model, double x,
                                   const JumpDraw& draw) {
    if (!draw.jumped || draw.layer != cert.mark_layer) return 1.0;
    const double y = draw.post_state[0];
    const double nu_dens = cert.regen_density(y);
    if (nu_dens == 0.0) return 1.0;
    const double kernel_dens = cert.kernel_density_at(model, x, draw.mark[0]);
    if (kernel_dens <= 0.0) throw ModelError("split kernel: vanishing kernel density under the regeneration ball");
    const double a = 1.0 - cert.regen_prob * nu_dens / kernel_dens;
    if (a < -1e-9) throw ModelError("split kernel: acceptance probability outside [0,1]; certificate inconsistent");
    return std::clamp(a, 0.0, 1.0);
}

// Residual draw (Pi - beta nu) / (1 - beta) by rejection against Pi.
inline Vec residual_draw(const MinorizationCertificate& cert, const LimitModel& model, double x, Rng& rng) {
    double xb[1] = {x};
    for (int it = 0; it < 100000; ++it) {
        const JumpDraw draw = sample_jump_kernel_draw(model, cert.level, ConstSpan(xb, 1), rng);
        const double a = residual_accept_prob(cert, model, x, draw);
        if (a >= 1.0 || rng.uniform() <= a) return draw.post_state;
    }
    throw NumericsError("split kernel: residual rejection did not terminate");
}

}  // namespace detail

// Split-kernel transition for a pair of pre-jump states and a color u.
// Branch 1 (both in C, u <= beta): one shared regeneration draw from nu.
// Branch 2 (both in C, u > beta): residual draws. The first attempt shares
// its proposal; acceptance uniforms stay per-chain, so each marginal is the
// exact residual law regardless of the partner. Rejected chains continue on
// their own streams.
// Branch 3 (otherwise): synchronous pair draw.
inline std::pair<Vec, Vec> sample_split_kernel(const MinorizationCertificate& cert, const LimitModel& model,
                                               double x, double y, double u, Rng& rng_shared, Rng& rng_x,
                                               Rng& rng_y, bool* regenerated = nullptr) {
    check(model.dim_state == 1, "sample_split_kernel: 1-d states only");
    if (regenerated) *regenerated = false;
    const double xs[1] = {x}, ys[1] = {y};
    const bool both_in = cert.in_coupling_ball(ConstSpan(xs, 1)) && cert.in_coupling_ball(ConstSpan(ys, 1));
    if (both_in && u <= cert.regen_prob) {
        const double v = cert.sample_regen(rng_shared);
        if (regenerated) *regenerated = true;
        return {Vec{v}, Vec{v}};
    }
    if (both_in) {
        const auto [cand_x, cand_y] = detail::shared_pair_attempt(model, cert.level, x, y, rng_shared);
        const double ax = detail::residual_accept_prob(cert, model, x, cand_x);
        const double ay = detail::residual_accept_prob(cert, model, y, cand_y);
        const bool keep_x = ax >= 1.0 || rng_x.uniform() <= ax;
        const bool keep_y = ay >= 1.0 || rng_y.uniform() <= ay;
        Vec out_x = keep_x ? cand_x.post_state : detail::residual_draw(cert, model, x, rng_x);
        Vec out_y = keep_y ? cand_y.post_state : detail::residual_draw(cert, model, y, rng_y);
        return {std::move(out_x), std::move(out_y)};
    }
    auto [dx, dy] = detail::shared_pair_attempt(model, cert.level, x, y, rng_shared);
    return {std::move(dx.post_state), std::move(dy.post_state)};
}

struct CouplingTick {
    double time = 0.0;
    double color = 1.0;  // U_k; U_0 := 1 by convention (no attempt before the first tick)
    bool both_in_ball = false;
    bool regenerated = false;
    double pre_x = 0.0, pre_y = 0.0;
    double post_x = 0.0, post_y = 0.0;
};

struct CouplingResult {
    std::vector<CouplingTick> ticks;
    double coupling_time = std::numeric_limits<double>::infinity();
    bool censored = true;  // horizon reached before coupling
    double final_x = 0.0, final_y = 0.0;
    std::uint64_t seed = 0;

    void write_csv(const std::string& path) const {
        CsvWriter w(path);
        w.header({"k", "T_k", "U_k", "in_C_both", "regenerated", "tau_c"});
        const double tau = censored ? std::numeric_limits<double>::quiet_NaN() : coupling_time;
        for (std::size_t k = 0; k < ticks.size(); ++k) {
            const auto& tick = ticks[k];
            w.row_strings({std::to_string(k + 1), format_double(tick.time), format_double(tick.color),
                           tick.both_in_ball ? "1" : "0", tick.regenerated ? "1" : "0", CsvWriter::cell(tau)});
        }
    }
};

// Noise regime for the pair between ticks: Independent reruns the small-jump
// process with separate streams (the regeneration construction); Synchronous
// gives the second chain a copy of the first chain's stream, so equal states
// evolve identically while each marginal law is unchanged.
enum class PairNoise { Independent, Synchronous };

// Coupled pair over [0, horizon]. Stream layout per pair: the clock, colors
// and shared kernel draws on one stream; each chain's small-jump noise and
// residual continuations on its own stream. After the coupling time the
// merged chain continues on the shared machinery.
inline CouplingResult coupled_simulate(const LimitModel& model, int level, const MinorizationCertificate& cert,
                                       double x_start, double y_start, const SimConfig& cfg,
                                       PairNoise noise = PairNoise::Independent) {
    check(model.dim_state == 1, "coupled_simulate: 1-d states only");
    check(cert.level == level, "coupled_simulate: certificate level mismatch");
    const double clock_rate = model.measure.rate_bound_at(level);

    SimConfig zcfg = cfg;
    zcfg.record = SimConfig::Record::Endpoint;
    const int last = active_last_layer(model.measure, cfg.truncation_level);
    JumpSimulator small(model, zcfg, level + 1, last);

    Rng rng_shared = Rng::derive(cfg.seed, 0xc091, 0);
    Rng rng_x = Rng::derive(cfg.seed, 0xc091, 1);
    Rng rng_y = noise == PairNoise::Synchronous ? rng_x : Rng::derive(cfg.seed, 0xc091, 2);

    CouplingResult out;
    out.seed = cfg.seed;
    Vec state_x{x_start}, state_y{y_start};
    double t = 0.0;
    bool merged = false;
    while (t < cfg.horizon) {
        const double gap = rng_shared.exponential(clock_rate);
        const double t_next = std::min(t + gap, cfg.horizon);
        small.advance(t, t_next, 0.0, state_x, rng_x);
        if (!merged)
            small.advance(t, t_next, 0.0, state_y, rng_y);
        else
            state_y = state_x;
        t = t_next;
        if (t >= cfg.horizon) break;

        CouplingTick tick;
        tick.time = t;
        tick.pre_x = state_x[0];
        tick.pre_y = state_y[0];
        if (merged) {
            state_x = sample_jump_kernel(model, level, state_x, rng_shared);
            state_y = state_x;
            tick.color = 0.0;
            tick.both_in_ball = true;
        } else {
            tick.color = rng_shared.uniform();
            tick.both_in_ball = cert.in_coupling_ball(ConstSpan(&state_x[0], 1)) &&
                                cert.in_coupling_ball(ConstSpan(&state_y[0], 1));
            bool regen = false;
            auto [nx, ny] = sample_split_kernel(cert, model, state_x[0], state_y[0], tick.color, rng_shared,
                                                rng_x, rng_y, &regen);
            state_x = std::move(nx);
            state_y = std::move(ny);
            tick.regenerated = regen;
            if (regen) {
                out.coupling_time = t;
                out.censored = false;
                merged = true;
            }
        }
        tick.post_x = state_x[0];
        tick.post_y = state_y[0];
        out.ticks.push_back(tick);
    }
    out.final_x = state_x[0];
    out.final_y = state_y[0];
    return out;
}

struct CouplingBatch {
    std::vector<CouplingResult> pairs;
    Vec coupling_times;  // uncensored only
    int censored = 0;
};

inline CouplingBatch coupled_batch(const LimitModel& model, int level, const MinorizationCertificate& cert,
                                   double x_start, double y_start, const SimConfig& cfg, int threads = 0) {
    CouplingBatch batch;
    batch.pairs.resize(static_cast<std::size_t>(cfg.paths));
    parallel_for(
        static_cast<std::size_t>(cfg.paths),
        [&](std::size_t i) {
            SimConfig c = cfg;
            c.seed = pair_stream_seed(cfg.seed, i);
            batch.pairs[i] = coupled_simulate(model, level, cert, x_start, y_start, c);
        },
        threads);
    for (const auto& p : batch.pairs) {
        if (p.censored)
            ++batch.censored;
        else
            batch.coupling_times.push_back(p.coupling_time);
    }
    return batch;
}

struct MomentEntry {
    double order = 1.0;
    double estimate = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct CouplingMoments {
    std::vector<MomentEntry> moments;
    Vec survival_times;  // sorted uncensored times
    Vec survival_prob;   // P(tau > t), censored mass counted as beyond-horizon
    double tail_exponent = 0.0;  // fitted -dlogS/dlogt over the upper half
    int censored = 0;
    int total = 0;
};

inline CouplingMoments coupling_time_moments(const Vec& times, int censored, const Vec& orders,
                                             std::uint64_t seed = 77) {
    if (times.empty()) throw ModelError("coupling_time_moments: no finite coupling times");
    CouplingMoments out;
    out.censored = censored;
    out.total = static_cast<int>(times.size()) + censored;
    Rng rng = Rng::derive(seed, 0xb007);
    for (double p : orders) {
        auto stat = [p](ConstSpan s) {
            double acc = 0.0;
            for (double v : s) acc += std::pow(v, p);
            return acc / static_cast<double>(s.size());
        };
        const auto ci = bootstrap_ci(times, stat, rng, 400);
        out.moments.push_back({p, ci.estimate, ci.lo, ci.hi});
    }
    Vec sorted(times);
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(out.total);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        out.survival_times.push_back(sorted[i]);
        out.survival_prob.push_back((n - static_cast<double>(i + 1)) / n);
    }
    Vec lx, ly;
    for (std::size_t i = sorted.size() / 2; i < sorted.size(); ++i) {
        if (out.survival_prob[i] <= 0.0 || out.survival_times[i] <= 0.0) continue;
        lx.push_back(std::log(out.survival_times[i]));
        ly.push_back(std::log(out.survival_prob[i]));
    }
    const bool spread = lx.size() >= 3 && *std::max_element(lx.begin(), lx.end()) -
                                                  *std::min_element(lx.begin(), lx.end()) >
                                              1e-12;
    if (spread) out.tail_exponent = -linear_fit(lx, ly).slope;
    return out;
}

struct ControlEstimate {
    std::vector<Vec> grid_points;
    Vec estimates;
    Vec wilson_lower;
    double min_estimate = 0.0;
    double min_wilson_lower = 0.0;
};

// Monte Carlo estimate of reaching the target ball by time 1 from every grid
// start under the finite-activity dynamics on G_level. A zero estimate is a
// valid, reported outcome.
inline ControlEstimate control_probability(const LimitModel& model, int level, const std::vector<Vec>& k_grid,
                                           ConstSpan target_center, double target_radius, const SimConfig& cfg,
                                           int threads = 0) {
    ControlEstimate out;
    out.grid_points = k_grid;
    out.estimates.assign(k_grid.size(), 0.0);
    out.wilson_lower.assign(k_grid.size(), 0.0);
    SimConfig c = cfg;
    c.horizon = 1.0;
    c.truncation_level = level;
    c.record = SimConfig::Record::Endpoint;
    for (std::size_t gi = 0; gi < k_grid.size(); ++gi) {
        std::vector<int> hit_flags(static_cast<std::size_t>(cfg.paths), 0);
        parallel_for(
            static_cast<std::size_t>(cfg.paths),
            [&](std::size_t i) {
                SimConfig pc = c;
                pc.seed = pair_stream_seed(cfg.seed ^ (0xabcdULL * (gi + 1)), i);
                const PathRecord rec = simulate_limit(model, k_grid[gi], pc);
                hit_flags[i] = dist2(rec.final_state(), target_center) <= target_radius ? 1 : 0;
            },
            threads);
        int hits = 0;
        for (int f : hit_flags) hits += f;
        out.estimates[gi] = static_cast<double>(hits) / cfg.paths;
        out.wilson_lower[gi] = wilson_lower_bound(static_cast<double>(hits), static_cast<double>(cfg.paths));
    }
    out.min_estimate = *std::min_element(out.estimates.begin(), out.estimates.end());
    out.min_wilson_lower = *std::min_element(out.wilson_lower.begin(), out.wilson_lower.end());
    return out;
}

}  // namespace jumpdiff
