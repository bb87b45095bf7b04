#pragma once

// Deterministic control skeletons: the controlled flow driven by the limit
// drift plus diffusion columns weighted by Cameron-Martin control derivatives,
// and the piecewise flow with prescribed jump times and marks.

#include <functional>
#include <utility>
#include <vector>

#include "common.hpp"
#include "model.hpp"
#include "sets.hpp"

namespace jumpdiff {

// Piecewise-constant control derivative table on [0,1]: value k applies on
// [breaks[k], breaks[k+1]). One row per noise column.
struct ControlTable {
    Vec breaks;                // strictly increasing, breaks.front()==0
    std::vector<Vec> values;   // dim_noise rows, each breaks.size() entries (last extends to 1)

    static ControlTable zero(int dim_noise) {
        ControlTable c;
        c.breaks = {0.0};
        c.values.assign(static_cast<std::size_t>(dim_noise), Vec{0.0});
        return c;
    }
    static ControlTable constant(Vec rates) {
        ControlTable c;
        c.breaks = {0.0};
        for (double r : rates) c.values.push_back(Vec{r});
        return c;
    }

    double value(int column, double t) const {
        const Vec& v = values[static_cast<std::size_t>(column)];
        std::size_t k = 0;
        while (k + 1 < breaks.size() && t >= breaks[k + 1]) ++k;
        return v[k];
    }
};

struct ControlSkeletonInput {
    Vec jump_times;                     // strictly increasing inside (0,1)
    std::vector<Vec> marks;             // one mark per jump time
    std::vector<ControlTable> controls; // jump_times.size()+1 segments; may be shorter, zero-padded
};

struct FlowResult {
    Vec times;
    Vec states;  // row-major
    ConstSpan state_row(std::size_t i, int dim) const {
        return ConstSpan(states.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
    }
    Vec terminal(int dim) const {
        const auto s = state_row(times.size() - 1, dim);
        return Vec(s.begin(), s.end());
    }
};

// Fixed time step explicit RK4 on dx/dt = g(x) + sum_l sigma_l(x) hdot_l(t).
inline FlowResult skeleton_flow(const LimitModel& model, ConstSpan x0, const ControlTable& control,
                                double t_from, double t_to, double dt = 1e-3,
                                double blowup_guard = 1e8) {
    const int d = model.dim_state, k = model.dim_noise;
    Vec cols(static_cast<std::size_t>(std::max(1, d * k)));
    auto rhs = [&](double t, ConstSpan x, Span out) {
        model.drift(x, out);
        if (k > 0) {
            model.diffusion(x, cols);
            for (int l = 0; l < k; ++l) {
                const double hl = control.value(l, t);
                if (hl == 0.0) continue;
                for (int i = 0; i < d; ++i)
                    out[static_cast<std::size_t>(i)] += cols[static_cast<std::size_t>(l * d + i)] * hl;
            }
        }
    };
    FlowResult flow;
    Vec x(x0.begin(), x0.end());
    Vec k1(static_cast<std::size_t>(d)), k2(static_cast<std::size_t>(d)), k3(static_cast<std::size_t>(d)),
        k4(static_cast<std::size_t>(d)), tmp(static_cast<std::size_t>(d));
    double t = t_from;
    flow.times.push_back(t);
    flow.states.insert(flow.states.end(), x.begin(), x.end());
    while (t < t_to - 1e-15) {
        const double h = std::min(dt, t_to - t);
        rhs(t, x, k1);
        for (int i = 0; i < d; ++i) tmp[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * h * k1[static_cast<std::size_t>(i)];
        rhs(t + 0.5 * h, tmp, k2);
        for (int i = 0; i < d; ++i) tmp[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + 0.5 * h * k2[static_cast<std::size_t>(i)];
        rhs(t + 0.5 * h, tmp, k3);
        for (int i = 0; i < d; ++i) tmp[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + h * k3[static_cast<std::size_t>(i)];
        rhs(t + h, tmp, k4);
        for (int i = 0; i < d; ++i)
            x[static_cast<std::size_t>(i)] +=
                h / 6.0 *
                (k1[static_cast<std::size_t>(i)] + 2.0 * k2[static_cast<std::size_t>(i)] +
                 2.0 * k3[static_cast<std::size_t>(i)] + k4[static_cast<std::size_t>(i)]);
        t += h;
        if (norm2(x) > blowup_guard) throw NumericsError("skeleton_flow: blow-up guard tripped");
        flow.times.push_back(t);
        flow.states.insert(flow.states.end(), x.begin(), x.end());
    }
    return flow;
}

// Piecewise flow on [0,1] with jumps x -> x + amplitude(z_k, x) at the
// prescribed times; returns the terminal state.
inline Vec skeleton_path(const LimitModel& model, ConstSpan x0, const ControlSkeletonInput& input,
                         double flow_dt = 1e-3) {
    const std::size_t n = input.jump_times.size();
    check(input.marks.size() == n, "skeleton_path: marks/timestamps size mismatch");
    double prev = 0.0;
    for (double t : input.jump_times) {
        check(t > prev && t < 1.0, "skeleton_path: jump times must be strictly increasing inside (0,1)");
        prev = t;
    }
    const int last = model.measure.levels();
    for (const auto& z : input.marks) {
        bool inside = false;
        for (int li = 1; li <= last && !inside; ++li)
            inside = model.measure.layers[static_cast<std::size_t>(li - 1)].contains(0.0, z);
        check(inside, "skeleton_path: mark outside the active set");
    }
    auto control_at = [&](std::size_t seg) -> ControlTable {
        if (seg < input.controls.size()) return input.controls[seg];
        return ControlTable::zero(model.dim_noise);
    };
    Vec x(x0.begin(), x0.end());
    Vec disp(static_cast<std::size_t>(model.dim_state));
    double t = 0.0;
    for (std::size_t kk = 0; kk < n; ++kk) {
        x = skeleton_flow(model, x, control_at(kk), t, input.jump_times[kk], flow_dt).terminal(model.dim_state);
        model.jump_amplitude(input.marks[kk], x, disp);
        for (int i = 0; i < model.dim_state; ++i) x[static_cast<std::size_t>(i)] += disp[static_cast<std::size_t>(i)];
        t = input.jump_times[kk];
    }
    return skeleton_flow(model, x, control_at(n), t, 1.0, flow_dt).terminal(model.dim_state);
}

}  // namespace jumpdiff
