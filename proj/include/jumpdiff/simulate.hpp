#pragma once

// Path simulation by thinning. Jump times are exact: candidate events arrive
// from a dominating Poisson clock built from the layer masses and per-layer
// rate sups; a candidate with mark z at state x is accepted iff
// u * rate_sup <= jump_rate(t,z,x) and z lies in its layer at the event time.
// Drift/diffusion between events is Euler-Maruyama on a fixed grid anchored at
// the path start, with steps split at inserted event times.
//
// For time-varying layer geometry the proposal envelope over a window
// [t, t+W] samples from the hull of each layer's interval over the window;
// layer edges and rate sups must be monotone in t for the hull to dominate.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "common.hpp"
#include "csv.hpp"
#include "measure.hpp"
#include "model.hpp"
#include "quad.hpp"
#include "rng.hpp"
#include "sets.hpp"

namespace jumpdiff {

struct SimConfig {
    double dt = 0.01;
    double horizon = 1.0;
    int truncation_level = 0;  // 0: all declared layers active
    std::uint64_t seed = 1;
    int paths = 1;
    double safety_half_width = 1e6;  // explosion guard, box [-w,w]^d
    double envelope_window = 0.25;   // proposal window for time-varying measures

    enum class Record { Full, Endpoint } record = Record::Full;
};

struct PathEvent {
    double time = 0.0;
    int layer = 0;  // 1-based
    Vec mark;
    double u = 0.0;  // thinning uniform, in [0,1]
    bool accepted = false;
    Vec pre_state;
};

struct PathRecord {
    std::uint64_t seed = 0;
    int dim = 1;
    Vec times;
    Vec states;  // row-major, dim per time
    std::vector<int> row_event;  // index into events, -1 for plain grid rows
    std::vector<PathEvent> events;

    std::size_t rows() const { return times.size(); }
    ConstSpan state_row(std::size_t i) const {
        return ConstSpan(states.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    }
    double final_time() const { return times.empty() ? 0.0 : times.back(); }
    ConstSpan final_state() const { return state_row(rows() - 1); }

    void push_row(double t, ConstSpan x, int event_idx = -1) {
        times.push_back(t);
        states.insert(states.end(), x.begin(), x.end());
        row_event.push_back(event_idx);
    }

    // Schema: t,x_1..x_d,event_layer,z_1..z_m,u,accepted; event fields empty on grid rows.
    void write_csv(const std::string& path, int dim_mark) const {
        CsvWriter w(path);
        std::vector<std::string> head = {"t"};
        for (int i = 1; i <= dim; ++i) head.push_back("x_" + std::to_string(i));
        head.push_back("event_layer");
        for (int i = 1; i <= dim_mark; ++i) head.push_back("z_" + std::to_string(i));
        head.push_back("u");
        head.push_back("accepted");
        w.header(head);
        for (std::size_t r = 0; r < rows(); ++r) {
            std::vector<std::string> cells = {format_double(times[r])};
            const ConstSpan x = state_row(r);
            for (double v : x) cells.push_back(format_double(v));
            const int ei = row_event[r];
            if (ei >= 0) {
                const PathEvent& e = events[static_cast<std::size_t>(ei)];
                cells.push_back(std::to_string(e.layer));
                for (double v : e.mark) cells.push_back(format_double(v));
                cells.push_back(format_double(e.u));
                cells.push_back(e.accepted ? "1" : "0");
            } else {
                for (int i = 0; i < dim_mark + 3; ++i) cells.emplace_back();
            }
            w.row_strings(cells);
        }
    }
};

namespace detail {

// Unified view over the two model flavours.
struct Dynamics {
    const InhomogeneousModel* inhom = nullptr;
    const LimitModel* limit = nullptr;

    int dim_state() const { return inhom ? inhom->dim_state : limit->dim_state; }
    int dim_mark() const { return inhom ? inhom->dim_mark : limit->dim_mark; }
    int dim_noise() const { return inhom ? 0 : limit->dim_noise; }
    const LayeredMeasure& measure() const { return inhom ? inhom->measure : limit->measure; }

    void drift(double t, ConstSpan x, Span out) const {
        if (inhom)
            inhom->drift(t, x, out);
        else
            limit->drift(x, out);
    }
    void amplitude(double t, ConstSpan z, ConstSpan x, Span out) const {
        if (inhom)
            inhom->jump_amplitude(t, z, x, out);
        else
            limit->jump_amplitude(z, x, out);
    }
    double rate(double t, ConstSpan z, ConstSpan x) const {
        return inhom ? inhom->jump_rate(t, z, x) : limit->jump_rate(z, x);
    }
};

}  // namespace detail

// Stepper over a fixed active-layer range. first/last are 1-based inclusive;
// an empty range means pure drift/diffusion.
class JumpSimulator {
public:
    JumpSimulator(const InhomogeneousModel& m, const SimConfig& cfg, int first_layer, int last_layer)
        : cfg_(cfg), first_(first_layer), last_(last_layer) {
        dyn_.inhom = &m;
        init();
    }
    JumpSimulator(const LimitModel& m, const SimConfig& cfg, int first_layer, int last_layer)
        : cfg_(cfg), first_(first_layer), last_(last_layer) {
        dyn_.limit = &m;
        init();
    }

    int dim_state() const { return dyn_.dim_state(); }

    // Advances state in place over [t_from, t_to]; grid_anchor fixes the Euler
    // grid offsets so that segmented calls reproduce a single long call.
    void advance(double t_from, double t_to, double grid_anchor, Vec& state, Rng& rng,
                 PathRecord* rec = nullptr) const {
        const auto& measure = dyn_.measure();
        const int d = dim_state();
        const int m = dyn_.dim_mark();
        Vec zbuf(static_cast<std::size_t>(m));
        Vec cbuf(static_cast<std::size_t>(d));
        Vec gbuf(static_cast<std::size_t>(d));
        Vec noise(static_cast<std::size_t>(std::max(1, d * dyn_.dim_noise())));

        double t = t_from;
        const bool has_layers = first_ <= last_;
        const bool varying = measure.time_varying;
        while (t < t_to - 1e-15) {
            const double window_end = varying ? std::min(t_to, t + cfg_.envelope_window) : t_to;
            // Hull masses and rate sups taken at the window end must dominate
            // throughout the window.
            double envelope = 0.0;
            if (has_layers) {
                for (int li = first_; li <= last_; ++li) {
                    const Layer& l = measure.layers[static_cast<std::size_t>(li - 1)];
                    envelope += l.hull_mass(t, window_end) * l.rate_sup_fn(window_end);
                }
            }
            double t_event = std::numeric_limits<double>::infinity();
            if (envelope > 0.0) t_event = t + rng.exponential(envelope);
            const double segment_end = std::min(window_end, t_event);

            euler_to(t, segment_end, grid_anchor, state, rng, gbuf, noise, rec);
            t = segment_end;
            if (t >= t_to - 1e-15) break;
            if (t_event > window_end) continue;  // window boundary, refresh envelope

            // Candidate event at time t: pick a layer by envelope weight.
            double pick = rng.uniform() * envelope;
            int layer_idx = last_;
            for (int li = first_; li <= last_; ++li) {
                const Layer& l = measure.layers[static_cast<std::size_t>(li - 1)];
                pick -= l.hull_mass(t, window_end) * l.rate_sup_fn(window_end);
                if (pick <= 0.0) {
                    layer_idx = li;
                    break;
                }
            }
            const Layer& layer = measure.layers[static_cast<std::size_t>(layer_idx - 1)];
            layer.sample_hull(t, window_end, rng, zbuf);
            const double u = rng.uniform();
            const double sup = layer.rate_sup_fn(window_end);
            const bool in_layer = layer.contains(t, zbuf);
            const bool accepted = in_layer && u * sup <= dyn_.rate(t, zbuf, state);

            int event_idx = -1;
            if (rec && cfg_.record == SimConfig::Record::Full) {
                PathEvent ev;
                ev.time = t;
                ev.layer = layer_idx;
                ev.mark = zbuf;
                ev.u = u;
                ev.accepted = accepted;
                ev.pre_state = state;
                rec->events.push_back(std::move(ev));
                event_idx = static_cast<int>(rec->events.size()) - 1;
            }
            if (accepted) {
                dyn_.amplitude(t, zbuf, state, cbuf);
                for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] += cbuf[static_cast<std::size_t>(i)];
                guard(t, state);
            }
            if (rec && cfg_.record == SimConfig::Record::Full) rec->push_row(t, state, event_idx);
        }
    }

private:
    void init() {
        const auto& measure = dyn_.measure();
        check(last_ <= measure.levels(), "JumpSimulator: layer range beyond measure");
        safety_ = Box::cube(dim_state(), cfg_.safety_half_width);
    }

    void guard(double t, ConstSpan x) const {
        if (!safety_.contains(x)) throw ExplosionError(t);
    }

    // Euler-Maruyama from a to b with steps at grid_anchor + k*dt.
    void euler_to(double a, double b, double grid_anchor, Vec& state, Rng& rng, Vec& gbuf, Vec& noise,
                  PathRecord* rec) const {
        const int d = dim_state();
        const int k = dyn_.dim_noise();
        double t = a;
        while (t < b - 1e-15) {
            const double steps_done = std::floor((t - grid_anchor) / cfg_.dt + 1e-9);
            double next_grid = grid_anchor + (steps_done + 1.0) * cfg_.dt;
            if (next_grid <= t + 1e-15) next_grid += cfg_.dt;
            const double s = std::min(next_grid, b);
            const double h = s - t;
            dyn_.drift(t, state, gbuf);
            if (k > 0) dyn_.limit->diffusion(state, noise);  // columns at the pre-move state
            for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] += gbuf[static_cast<std::size_t>(i)] * h;
            if (k > 0) {
                const double sqh = std::sqrt(h);
                for (int l = 0; l < k; ++l) {
                    const double dw = sqh * rng.normal();
                    for (int i = 0; i < d; ++i)
                        state[static_cast<std::size_t>(i)] += noise[static_cast<std::size_t>(l * d + i)] * dw;
                }
            }
            t = s;
            guard(t, state);
            if (rec && cfg_.record == SimConfig::Record::Full && std::fabs(s - next_grid) < 1e-12)
                rec->push_row(t, state);
        }
    }

    detail::Dynamics dyn_;
    SimConfig cfg_;
    int first_ = 1, last_ = 0;
    Box safety_;
};

namespace detail {

inline PathRecord run_single(const JumpSimulator& sim, ConstSpan x0, double t_start, double horizon,
                             std::uint64_t seed, const SimConfig& cfg) {
    PathRecord rec;
    rec.seed = seed;
    rec.dim = sim.dim_state();
    Vec state(x0.begin(), x0.end());
    Rng rng(seed);
    rec.push_row(t_start, state);
    sim.advance(t_start, t_start + horizon, t_start, state, rng, &rec);
    if (cfg.record == SimConfig::Record::Endpoint || rec.times.back() < t_start + horizon - 1e-12)
        rec.push_row(t_start + horizon, state);
    return rec;
}

}  // namespace detail

inline int active_last_layer(const LayeredMeasure& m, int truncation_level) {
    return truncation_level <= 0 ? m.levels() : std::min(truncation_level, m.levels());
}

inline PathRecord simulate_inhomogeneous(const InhomogeneousModel& model, ConstSpan x0, double t_start,
                                         const SimConfig& cfg) {
    check(static_cast<int>(x0.size()) == model.dim_state, "simulate_inhomogeneous: x0 dimension");
    JumpSimulator sim(model, cfg, 1, active_last_layer(model.measure, cfg.truncation_level));
    return detail::run_single(sim, x0, t_start, cfg.horizon, cfg.seed, cfg);
}

inline PathRecord simulate_limit(const LimitModel& model, ConstSpan x0, const SimConfig& cfg) {
    check(static_cast<int>(x0.size()) == model.dim_state, "simulate_limit: x0 dimension");
    JumpSimulator sim(model, cfg, 1, active_last_layer(model.measure, cfg.truncation_level));
    return detail::run_single(sim, x0, 0.0, cfg.horizon, cfg.seed, cfg);
}

// Only layers outside G_level are active: the process driven by small jumps.
inline PathRecord simulate_small_jump(const LimitModel& model, ConstSpan x0, int level, const SimConfig& cfg) {
    check(level >= 0 && level <= model.measure.levels(), "simulate_small_jump: bad level");
    const int last = active_last_layer(model.measure, cfg.truncation_level);
    JumpSimulator sim(model, cfg, level + 1, last);
    return detail::run_single(sim, x0, 0.0, cfg.horizon, cfg.seed, cfg);
}

struct TruncatedRun {
    PathRecord path;
    double alpha_complement = 0.0;  // sup_x integral of |amplitude|*rate off G
    double error_bound = 0.0;       // finite-activity approximation bound, 0 if inputs missing
};

// Right-hand side of the finite-activity error bound for given contraction
// data; the leading constant inside the exponential is a reporting choice (1).
inline double truncation_error_bound(double rho, double horizon, double grad_sigma_sum, double grad_drift,
                                     double coeff_mass, double alpha_complement) {
    const double e = 2.718281828459045;
    return horizon * e / rho *
           std::exp(horizon * sq(grad_sigma_sum + grad_drift + coeff_mass)) * alpha_complement;
}

// Finite-activity run on the prefix G_level plus evaluation of the
// approximation bound. Lipschitz/size inputs come from validate_model.
inline TruncatedRun simulate_truncated(const LimitModel& model, ConstSpan x0, int level, const SimConfig& cfg,
                                       double rho, double grad_sigma_sum, double grad_drift,
                                       double coeff_mass, const GridSpec* x_grid = nullptr) {
    SimConfig c = cfg;
    c.truncation_level = level;
    TruncatedRun out;
    out.path = simulate_limit(model, x0, c);
    // alpha over the complement: inactive declared layers plus the analytic tail.
    const int last = active_last_layer(model.measure, level);
    QuadratureSpec q;
    double alpha = 0.0;
    std::vector<Vec> xs;
    if (x_grid)
        xs = x_grid->points();
    else
        xs.push_back(Vec(x0.begin(), x0.end()));
    for (const auto& x : xs) {
        double v = 0.0;
        if (last < model.measure.levels()) {
            Vec cbuf(static_cast<std::size_t>(model.dim_state));
            auto integrand = [&](ConstSpan z) {
                model.jump_amplitude(z, x, cbuf);
                return norm2(cbuf) * model.jump_rate(z, x);
            };
            v += integrate_layers(model.measure, 0.0, integrand, q, last + 1, model.measure.levels()).value;
        }
        if (model.tail_alpha) v += model.tail_alpha(x);
        alpha = std::max(alpha, v);
    }
    out.alpha_complement = alpha;
    out.error_bound = truncation_error_bound(rho, cfg.horizon, grad_sigma_sum, grad_drift, coeff_mass, alpha);
    return out;
}

// Mark draw from the normalized per-candidate kernel on G_level: returns the
// null mark (nullopt) with the residual probability, else a mark with density
// proportional to jump_rate(z, y) on G_level. Proposals come from the measure
// restricted to G_level; acceptance is rate/global bound.
inline std::optional<Vec> sample_real_shock(const LimitModel& model, int level, ConstSpan y, Rng& rng) {
    const auto& measure = model.measure;
    const int last = active_last_layer(measure, level);
    const double total_mass = measure.mass_prefix(0.0, last);
    check(total_mass > 0.0 && std::isfinite(total_mass), "sample_real_shock: measure mass must be finite positive");
    Vec z(static_cast<std::size_t>(model.dim_mark));
    double pick = rng.uniform() * total_mass;
    int layer_idx = last;
    for (int li = 1; li <= last; ++li) {
        pick -= measure.layers[static_cast<std::size_t>(li - 1)].mass(0.0);
        if (pick <= 0.0) {
            layer_idx = li;
            break;
        }
    }
    measure.layers[static_cast<std::size_t>(layer_idx - 1)].sample(0.0, rng, z);
    const double rate = model.jump_rate(z, y);
    if (rate > model.rate_bound * (1.0 + 1e-12))
        throw ModelError("sample_real_shock: jump rate exceeds declared bound");
    if (rng.uniform() * model.rate_bound <= rate) return z;
    return std::nullopt;  // null mark
}

}  // namespace jumpdiff
