#pragma once

// The convergence experiments: the pseudotrajectory gap between the
// inhomogeneous law and the limit semigroup started from it, equilibrium gaps
// against a long-run reference, and the mean-field gap of the particle system
// against its limit. Branching uses common random numbers so that identical
// dynamics give exactly zero gap.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "distance.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "simulate.hpp"

namespace jumpdiff {

struct PseudoTrajectoryConfig {
    Vec t_list = {2.0, 8.0};
    double window = 2.0;  // branch duration
    int s_points = 4;
    int paths = 10000;
    double dt = 0.01;
    double start = 1.0;
    int truncation_level = 0;
    std::uint64_t seed = 1;
    int threads = 0;
    int dict_size = 64;
    std::uint64_t dict_seed = 99;
    int bootstrap = 120;
};

struct PseudoTrajectoryResult {
    GapCurve curve;                   // max-over-s dictionary gap vs t
    std::vector<GapCurve> per_time;   // gap vs s for each t
    Dictionary dictionary;
};

namespace detail {

struct BranchSamples {
    // snapshot s-index -> law over paths
    std::vector<EmpiricalLaw> inhom_branch;
    std::vector<EmpiricalLaw> limit_branch;
};

inline BranchSamples branch_paths(const InhomogeneousModel& model, const LimitModel& limit, double t,
                                  const PseudoTrajectoryConfig& cfg) {
    const int d = model.dim_state;
    const Vec s_grid = linspace(cfg.window / cfg.s_points, cfg.window, cfg.s_points);
    BranchSamples out;
    out.inhom_branch.assign(s_grid.size(), EmpiricalLaw{});
    out.limit_branch.assign(s_grid.size(), EmpiricalLaw{});
    for (auto& law : out.inhom_branch) {
        law.dim = d;
        law.samples.resize(static_cast<std::size_t>(cfg.paths) * static_cast<std::size_t>(d));
    }
    for (auto& law : out.limit_branch) {
        law.dim = d;
        law.samples.resize(static_cast<std::size_t>(cfg.paths) * static_cast<std::size_t>(d));
    }

    SimConfig scfg;
    scfg.dt = cfg.dt;
    scfg.truncation_level = cfg.truncation_level;
    scfg.record = SimConfig::Record::Endpoint;

    const int last_inhom = active_last_layer(model.measure, cfg.truncation_level);
    const int last_limit = active_last_layer(limit.measure, cfg.truncation_level);
    JumpSimulator base(model, scfg, 1, last_inhom);
    // The continued branch runs in shifted time coordinates so that both
    // branches see identical step offsets; with identical dynamics and a
    // common stream the paths are then equal bit for bit.
    const InhomogeneousModel shifted = shift_time(model, t);
    JumpSimulator cont(shifted, scfg, 1, last_inhom);
    JumpSimulator switched(limit, scfg, 1, last_limit);

    parallel_for(
        static_cast<std::size_t>(cfg.paths),
        [&](std::size_t i) {
            Vec state(static_cast<std::size_t>(d), cfg.start);
            Rng rng_base = Rng::derive(cfg.seed, 0xba5e, i);
            base.advance(0.0, t, 0.0, state, rng_base);

            // Both branches restart from the same state with identical streams.
            Rng rng_a = Rng::derive(cfg.seed, 0xb4a, i);
            Rng rng_b = rng_a;
            Vec state_a = state, state_b = state;
            double from = 0.0;
            for (std::size_t si = 0; si < static_cast<std::size_t>(cfg.s_points); ++si) {
                const double s = s_grid[si];
                cont.advance(from, s, 0.0, state_a, rng_a);
                switched.advance(from, s, 0.0, state_b, rng_b);
                from = s;
                for (int c = 0; c < d; ++c) {
                    out.inhom_branch[si].samples[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
                        state_a[static_cast<std::size_t>(c)];
                    out.limit_branch[si].samples[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
                        state_b[static_cast<std::size_t>(c)];
                }
            }
        },
        cfg.threads);
    return out;
}

// Bootstrap of max over (s, f) of |mean of per-path differences|.
struct MaxGapBootstrap {
    double estimate = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    Vec per_s_gap;
};

inline MaxGapBootstrap max_gap_over_branches(const BranchSamples& branches, const Dictionary& dict, int paths,
                                             int bootstrap, std::uint64_t seed) {
    const std::size_t ns = branches.inhom_branch.size();
    const std::size_t nf = dict.size();
    const auto n = static_cast<std::size_t>(paths);
    // diff[s][f][i]
    std::vector<std::vector<Vec>> diff(ns, std::vector<Vec>(nf, Vec(n)));
    for (std::size_t si = 0; si < ns; ++si)
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const auto& fa = dict.fns[fi].value;
            for (std::size_t i = 0; i < n; ++i)
                diff[si][fi][i] = fa(branches.inhom_branch[si].row(i)) - fa(branches.limit_branch[si].row(i));
        }
    MaxGapBootstrap out;
    out.per_s_gap.assign(ns, 0.0);
    for (std::size_t si = 0; si < ns; ++si)
        for (std::size_t fi = 0; fi < nf; ++fi) {
            const double g = std::fabs(mean(diff[si][fi]));
            out.per_s_gap[si] = std::max(out.per_s_gap[si], g);
            out.estimate = std::max(out.estimate, g);
        }
    Rng rng = Rng::derive(seed, 0x6a9, 0);
    Vec reps;
    reps.reserve(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> idx(n);
    for (int r = 0; r < bootstrap; ++r) {
        for (auto& v : idx) v = rng.uniform_index(n);
        double best = 0.0;
        for (std::size_t si = 0; si < ns; ++si)
            for (std::size_t fi = 0; fi < nf; ++fi) {
                double acc = 0.0;
                const Vec& dvec = diff[si][fi];
                for (std::size_t i : idx) acc += dvec[i];
                best = std::max(best, std::fabs(acc / static_cast<double>(n)));
            }
        reps.push_back(best);
    }
    std::sort(reps.begin(), reps.end());
    out.ci_lo = std::min(out.estimate, quantile_sorted(reps, 0.025));
    out.ci_hi = std::max(out.estimate, quantile_sorted(reps, 0.975));
    return out;
}

}  // namespace detail

inline PseudoTrajectoryResult pseudotrajectory_gap(const InhomogeneousModel& model, const LimitModel& limit,
                                                   const PseudoTrajectoryConfig& cfg) {
    PseudoTrajectoryResult out;
    out.curve.estimator_id = "dictionary_paired";
    bool dict_ready = false;
    const Vec s_grid = linspace(cfg.window / cfg.s_points, cfg.window, cfg.s_points);
    for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti) {
        const double t = cfg.t_list[ti];
        PseudoTrajectoryConfig c = cfg;
        c.seed = cfg.seed + 1000003ULL * ti;
        const auto branches = detail::branch_paths(model, limit, t, c);
        if (!dict_ready) {
            EmpiricalLaw pooled;
            pooled.dim = model.dim_state;
            for (const auto& law : {branches.inhom_branch.back(), branches.limit_branch.back()})
                pooled.samples.insert(pooled.samples.end(), law.samples.begin(), law.samples.end());
            out.dictionary = build_dictionary(model.dim_state, cfg.dict_size, cfg.dict_seed, pooled.data_box());
            dict_ready = true;
        }
        const auto gap = detail::max_gap_over_branches(branches, out.dictionary, cfg.paths, cfg.bootstrap,
                                                       cfg.seed + 7919ULL * ti);
        out.curve.points.push_back({t, gap.estimate, gap.ci_lo, gap.ci_hi});
        GapCurve per_s;
        per_s.estimator_id = "dictionary_paired_s";
        for (std::size_t si = 0; si < s_grid.size(); ++si)
            per_s.points.push_back({s_grid[si], gap.per_s_gap[si], 0.0, 0.0});
        out.per_time.push_back(std::move(per_s));
    }
    return out;
}

struct ReferenceConfig {
    int chains = 200;
    double burn_in = 50.0;
    double spacing = 1.0;
    int n_samples = 60000;
    double dt = 0.01;
    int truncation_level = 0;
    std::uint64_t seed = 17;
    int threads = 0;
    double start = 1.0;
};

struct ReferenceLaw {
    EmpiricalLaw law;
    double selftest_tv = 0.0;
    double selftest_threshold = 0.0;
    bool stationary = true;
};

// Long-run reference: thinned endpoint samples from parallel chains, followed
// by a permutation self-test comparing early and late halves.
inline ReferenceLaw build_reference(const LimitModel& model, const ReferenceConfig& cfg) {
    const int d = model.dim_state;
    const int per_chain = (cfg.n_samples + cfg.chains - 1) / cfg.chains;
    ReferenceLaw out;
    out.law.dim = d;
    out.law.samples.assign(static_cast<std::size_t>(cfg.chains) * static_cast<std::size_t>(per_chain) *
                               static_cast<std::size_t>(d),
                           0.0);
    SimConfig scfg;
    scfg.dt = cfg.dt;
    scfg.truncation_level = cfg.truncation_level;
    scfg.record = SimConfig::Record::Endpoint;
    const int last = active_last_layer(model.measure, cfg.truncation_level);
    JumpSimulator sim(model, scfg, 1, last);
    parallel_for(
        static_cast<std::size_t>(cfg.chains),
        [&](std::size_t ci) {
            Vec state(static_cast<std::size_t>(d), cfg.start);
            Rng rng = Rng::derive(cfg.seed, 0x5ef, ci);
            sim.advance(0.0, cfg.burn_in, 0.0, state, rng);
            double t = cfg.burn_in;
            for (int s = 0; s < per_chain; ++s) {
                sim.advance(t, t + cfg.spacing, 0.0, state, rng);
                t += cfg.spacing;
                const std::size_t row = ci * static_cast<std::size_t>(per_chain) + static_cast<std::size_t>(s);
                for (int c = 0; c < d; ++c)
                    out.law.samples[row * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
                        state[static_cast<std::size_t>(c)];
            }
        },
        cfg.threads);

    // early vs late halves across every chain, against a permutation null
    EmpiricalLaw early, late;
    early.dim = late.dim = d;
    const int half = per_chain / 2;
    for (int ci = 0; ci < cfg.chains; ++ci)
        for (int s = 0; s < per_chain; ++s) {
            const std::size_t row = static_cast<std::size_t>(ci) * static_cast<std::size_t>(per_chain) +
                                    static_cast<std::size_t>(s);
            (s < half ? early : late).push(out.law.row(row));
        }
    const auto actual = tv_estimate(early, late, {}, 60, cfg.seed ^ 0x11);
    out.selftest_tv = actual.estimate;
    Rng rng = Rng::derive(cfg.seed, 0x5e1f, 1);
    Vec null_reps;
    for (int r = 0; r < 40; ++r) {
        EmpiricalLaw pa, pb;
        pa.dim = pb.dim = d;
        for (std::size_t i = 0; i < out.law.size(); ++i) (rng.uniform() < 0.5 ? pa : pb).push(out.law.row(i));
        if (pa.size() < 100 || pb.size() < 100) continue;
        null_reps.push_back(tv_estimate(pa, pb, {}, 1, cfg.seed ^ r).estimate);
    }
    std::sort(null_reps.begin(), null_reps.end());
    out.selftest_threshold = null_reps.empty() ? 0.05 : null_reps.back() * 1.5 + 0.01;
    out.stationary = out.selftest_tv <= out.selftest_threshold;
    if (!out.stationary) throw ModelError("build_reference: non-stationarity detected, reference rejected");
    return out;
}

struct EquilibriumConfig {
    Vec t_list = {5.0, 10.0, 20.0, 40.0};
    int paths = 20000;
    double dt = 0.01;
    double start = 8.0;
    double second_start = 0.0;
    int truncation_level = 0;
    std::uint64_t seed = 23;
    int threads = 0;
    int dict_size = 32;
    std::uint64_t dict_seed = 31;
    int bootstrap = 150;
};

struct EquilibriumResult {
    GapCurve tv_curve;
    GapCurve df_curve;
    GapCurve two_start_curve;  // dictionary gap between the two start laws
    double fitted_exponent = 0.0;  // log-log decay of the TV curve
    bool tv_monotone = true;       // strictly decreasing outside CIs
    ReferenceLaw reference;
};

namespace detail {

inline std::vector<EmpiricalLaw> snapshots_from(const LimitModel& model, double start, const Vec& t_list,
                                                const EquilibriumConfig& cfg, std::uint64_t stream_salt) {
    const int d = model.dim_state;
    std::vector<EmpiricalLaw> laws(t_list.size());
    for (auto& l : laws) {
        l.dim = d;
        l.samples.assign(static_cast<std::size_t>(cfg.paths) * static_cast<std::size_t>(d), 0.0);
    }
    SimConfig scfg;
    scfg.dt = cfg.dt;
    scfg.truncation_level = cfg.truncation_level;
    scfg.record = SimConfig::Record::Endpoint;
    const int last = active_last_layer(model.measure, cfg.truncation_level);
    JumpSimulator sim(model, scfg, 1, last);
    parallel_for(
        static_cast<std::size_t>(cfg.paths),
        [&](std::size_t i) {
            Vec state(static_cast<std::size_t>(d), start);
            Rng rng = Rng::derive(cfg.seed, stream_salt, i);
            double t = 0.0;
            for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
                sim.advance(t, t_list[ti], 0.0, state, rng);
                t = t_list[ti];
                for (int c = 0; c < d; ++c)
                    laws[ti].samples[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
                        state[static_cast<std::size_t>(c)];
            }
        },
        cfg.threads);
    return laws;
}

}  // namespace detail

inline EquilibriumResult equilibrium_gap(const LimitModel& model, const EquilibriumConfig& cfg,
                                         const ReferenceLaw& reference) {
    EquilibriumResult out;
    out.reference = reference;
    Vec sorted_t = cfg.t_list;
    std::sort(sorted_t.begin(), sorted_t.end());
    const auto laws_a = detail::snapshots_from(model, cfg.start, sorted_t, cfg, 0xe91);
    const auto laws_b = detail::snapshots_from(model, cfg.second_start, sorted_t, cfg, 0xe92);

    const Dictionary dict =
        build_dictionary(model.dim_state, cfg.dict_size, cfg.dict_seed, reference.law.data_box());
    out.tv_curve.estimator_id = "tv_binned";
    out.df_curve.estimator_id = "dictionary";
    out.two_start_curve.estimator_id = "dictionary_two_start";
    for (std::size_t ti = 0; ti < sorted_t.size(); ++ti) {
        const auto tv = tv_estimate(laws_a[ti], reference.law, {}, cfg.bootstrap, cfg.seed + 13 * ti);
        out.tv_curve.points.push_back({sorted_t[ti], tv.estimate, tv.ci_lo, tv.ci_hi});
        const auto df = df_estimate(laws_a[ti], reference.law, dict, cfg.bootstrap, cfg.seed + 17 * ti);
        out.df_curve.points.push_back({sorted_t[ti], df.estimate, df.ci_lo, df.ci_hi});
        const auto two = df_estimate(laws_a[ti], laws_b[ti], dict, cfg.bootstrap, cfg.seed + 19 * ti);
        out.two_start_curve.points.push_back({sorted_t[ti], two.estimate, two.ci_lo, two.ci_hi});
    }
    for (std::size_t i = 0; i + 1 < out.tv_curve.points.size(); ++i)
        if (!(out.tv_curve.points[i].ci_lo > out.tv_curve.points[i + 1].ci_hi)) out.tv_monotone = false;
    Vec lx, ly;
    for (const auto& p : out.tv_curve.points)
        if (p.gap > 0.0 && p.x > 0.0) {
            lx.push_back(std::log(p.x));
            ly.push_back(std::log(p.gap));
        }
    if (lx.size() >= 2) out.fitted_exponent = -linear_fit(lx, ly).slope;
    return out;
}

// --- mean-field gap of the Hawkes summary chain against its limit ---

struct MeanFieldConfig {
    std::vector<int> particle_counts = {25, 100, 400};
    double horizon = 5.0;
    int paths = 20000;
    double dt = 0.002;
    Vec start = {0.0, 0.0};
    std::uint64_t seed = 5;
    int threads = 0;
    int dict_size = 48;
    std::uint64_t dict_seed = 41;
    int bootstrap = 150;
};

struct MeanFieldResult {
    GapCurve curve;  // paired dictionary gap vs particle count
    Dictionary dictionary;
};

namespace detail {

// System and limit advanced with a shared reset-candidate stream: identical
// candidate times and thinning uniforms, accepted against each chain's own
// reset rate. Marginals stay exact; only the difference variance shrinks.
struct PairedHawkesPaths {
    EmpiricalLaw system_law;
    EmpiricalLaw limit_law;
};

inline PairedHawkesPaths paired_hawkes(const HawkesParams& params, int particles, const MeanFieldConfig& cfg) {
    HawkesParams p = params;
    p.particles = particles;
    const LimitModel system = make_hawkes_system(p);
    const LimitModel limit = make_hawkes_limit(p);
    const double nm1 = static_cast<double>(particles - 1);
    const double mf_rate_sup = nm1 * p.excite_rate_sup;
    const double reset_sup = p.reset_rate_sup;

    PairedHawkesPaths out;
    out.system_law.dim = 2;
    out.limit_law.dim = 2;
    out.system_law.samples.assign(static_cast<std::size_t>(cfg.paths) * 2, 0.0);
    out.limit_law.samples.assign(static_cast<std::size_t>(cfg.paths) * 2, 0.0);

    parallel_for(
        static_cast<std::size_t>(cfg.paths),
        [&](std::size_t i) {
            Rng rng_shared = Rng::derive(cfg.seed, 0x4a3e * (particles + 1), i);
            Rng rng_mf = Rng::derive(cfg.seed, 0x4a3f * (particles + 1), i);
            Vec xs(cfg.start.begin(), cfg.start.end());
            Vec xl(cfg.start.begin(), cfg.start.end());
            Vec gbuf(2u), disp(2u);
            double zres[1] = {1.5};

            // merged event queue: shared reset candidates + system-only
            // mean-field candidates; drift by Euler between candidates
            double t = 0.0;
            double next_reset = rng_shared.exponential(reset_sup);
            double next_mf = rng_mf.exponential(mf_rate_sup);
            auto euler_both = [&](double from, double to) {
                double tt = from;
                while (tt < to - 1e-15) {
                    const double h = std::min(cfg.dt, to - tt);
                    system.drift(xs, gbuf);
                    xs[0] += gbuf[0] * h;
                    xs[1] += gbuf[1] * h;
                    limit.drift(xl, gbuf);
                    xl[0] += gbuf[0] * h;
                    xl[1] += gbuf[1] * h;
                    tt += h;
                }
            };
            while (t < cfg.horizon) {
                const double t_next = std::min({next_reset, next_mf, cfg.horizon});
                euler_both(t, t_next);
                t = t_next;
                if (t >= cfg.horizon) break;
                if (t_next == next_reset) {
                    const double zmark = rng_shared.uniform(1.0, 2.0);
                    const double u = rng_shared.uniform();
                    zres[0] = zmark;
                    if (u * reset_sup <= system.jump_rate(ConstSpan(zres, 1), xs)) {
                        system.jump_amplitude(ConstSpan(zres, 1), xs, disp);
                        xs[0] += disp[0];
                        xs[1] += disp[1];
                    }
                    if (u * reset_sup <= limit.jump_rate(ConstSpan(zres, 1), xl)) {
                        limit.jump_amplitude(ConstSpan(zres, 1), xl, disp);
                        xl[0] += disp[0];
                        xl[1] += disp[1];
                    }
                    next_reset = t + rng_shared.exponential(reset_sup);
                } else {
                    const double zmark = rng_mf.uniform(0.0, 1.0);
                    const double u = rng_mf.uniform();
                    double zb[1] = {zmark};
                    if (u * mf_rate_sup <= system.jump_rate(ConstSpan(zb, 1), xs)) {
                        system.jump_amplitude(ConstSpan(zb, 1), xs, disp);
                        xs[0] += disp[0];
                        xs[1] += disp[1];
                    }
                    next_mf = t + rng_mf.exponential(mf_rate_sup);
                }
            }
            out.system_law.samples[i * 2] = xs[0];
            out.system_law.samples[i * 2 + 1] = xs[1];
            out.limit_law.samples[i * 2] = xl[0];
            out.limit_law.samples[i * 2 + 1] = xl[1];
        },
        cfg.threads);
    return out;
}

}  // namespace detail

inline MeanFieldResult mean_field_gap(const HawkesParams& params, const MeanFieldConfig& cfg) {
    MeanFieldResult out;
    out.curve.estimator_id = "dictionary_paired";
    bool dict_ready = false;
    for (int n_particles : cfg.particle_counts) {
        const auto paths = detail::paired_hawkes(params, n_particles, cfg);
        if (!dict_ready) {
            EmpiricalLaw pooled = paths.system_law;
            pooled.samples.insert(pooled.samples.end(), paths.limit_law.samples.begin(),
                                  paths.limit_law.samples.end());
            out.dictionary = build_dictionary(2, cfg.dict_size, cfg.dict_seed, pooled.data_box());
            dict_ready = true;
        }
        const auto est = df_estimate_paired(paths.system_law, paths.limit_law, out.dictionary, cfg.bootstrap,
                                            cfg.seed + static_cast<std::uint64_t>(n_particles));
        out.curve.points.push_back({static_cast<double>(n_particles), est.estimate, est.ci_lo, est.ci_hi});
    }
    return out;
}

}  // namespace jumpdiff
