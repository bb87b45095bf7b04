#pragma once

// Config-driven experiment runner behind the CLI. A run ingests a strict JSON
// config (unknown keys rejected), executes one named experiment, and writes
// manifest.json, summary.txt and per-experiment CSV artifacts into its own
// output directory. Exit codes: 0 success, 1 error, 2 declared check failed.
// Reruns with the same config and seed produce byte-identical artifacts.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpdiff.hpp"

namespace jumpdiff {

using nlohmann::json;

struct CheckResult {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> artifacts;
    std::vector<CheckResult> checks;
    std::string summary;
};

namespace cli_detail {

inline void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ModelError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ModelError(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    if (obj.contains(key)) return obj.at(key).get<T>();
    return fallback;
}

inline Vec get_vec(const json& obj, const std::string& key, Vec fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<Vec>();
}

struct ModelBundle {
    std::string name;
    std::optional<CirModels> cir;
    std::optional<LimitModel> limit_only;  // hawkes_system / hawkes_limit
    std::optional<HawkesParams> hawkes;

    const LimitModel& limit() const {
        if (cir) return cir->limit;
        check(static_cast<bool>(limit_only), "experiment: model has no limit form");
        return *limit_only;
    }
    const InhomogeneousModel& inhomogeneous() const {
        check(static_cast<bool>(cir), "experiment: model has no inhomogeneous form");
        return cir->inhomogeneous;
    }
};

inline ModelBundle build_model(const json& spec) {
    require_keys(spec, {"name", "params"}, "model");
    ModelBundle out;
    out.name = spec.at("name").get<std::string>();
    const json params = spec.contains("params") ? spec.at("params") : json::object();
    if (out.name == "cir") {
        require_keys(params,
                     {"sigma", "jump_scale", "reversion", "drift_level", "band_rate", "rate_floor",
                      "rate_ceiling", "truncation", "layer_edges"},
                     "model.params");
        CirParams p;
        p.sigma = get_or(params, "sigma", p.sigma);
        p.jump_scale = get_or(params, "jump_scale", p.jump_scale);
        p.reversion = get_or(params, "reversion", p.reversion);
        p.drift_level = get_or(params, "drift_level", p.drift_level);
        p.band_rate = get_or(params, "band_rate", p.band_rate);
        const double floor = get_or(params, "rate_floor", 0.1);
        const double ceiling = get_or(params, "rate_ceiling", 1.0);
        p.rate_fn = LogisticRate{floor, ceiling};
        p.rate_sup = ceiling;
        p.truncation = get_or(params, "truncation", p.truncation);
        p.layer_edges = get_vec(params, "layer_edges", p.layer_edges);
        out.cir = make_cir_models(p);
        return out;
    }
    if (out.name == "hawkes_system" || out.name == "hawkes_limit") {
        require_keys(params,
                     {"particles", "memory_decay", "base_input", "kernel_weight", "reset_spread",
                      "reset_floor", "reset_ceiling", "excite_floor", "excite_ceiling"},
                     "model.params");
        HawkesParams p;
        p.particles = get_or(params, "particles", p.particles);
        p.memory_decay = get_or(params, "memory_decay", p.memory_decay);
        p.base_input = get_or(params, "base_input", p.base_input);
        p.kernel_weight = get_or(params, "kernel_weight", p.kernel_weight);
        p.reset_spread = get_or(params, "reset_spread", p.reset_spread);
        p.reset_rate = LogisticRate{get_or(params, "reset_floor", 0.1), get_or(params, "reset_ceiling", 1.0)};
        p.reset_rate_sup = get_or(params, "reset_ceiling", 1.0);
        p.excite_rate = LogisticRate{get_or(params, "excite_floor", 0.1), get_or(params, "excite_ceiling", 1.0)};
        p.excite_rate_sup = get_or(params, "excite_ceiling", 1.0);
        out.hawkes = p;
        out.limit_only = out.name == "hawkes_system" ? make_hawkes_system(p) : make_hawkes_limit(p);
        return out;
    }
    throw ModelError("experiment: unknown model '" + out.name + "'");
}

struct SummaryWriter {
    std::string text;
    void line(const std::string& s) { text += s + "\n"; }
    void kv(const std::string& k, double v) { text += k + " = " + format_double(v) + "\n"; }
};

}  // namespace cli_detail

// --- individual experiment runners -------------------------------------

namespace cli_detail {

inline void run_simulate(const ModelBundle& model, const json& exp, std::uint64_t seed, int threads,
                         const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "target", "paths", "dt", "horizon", "start", "t_start", "truncation_level",
                  "record_paths"},
                 "experiment");
    const std::string target = get_or<std::string>(exp, "target", model.cir ? "limit" : "limit");
    SimConfig cfg;
    cfg.paths = get_or(exp, "paths", 10);
    cfg.dt = get_or(exp, "dt", 0.01);
    cfg.horizon = get_or(exp, "horizon", 1.0);
    cfg.truncation_level = get_or(exp, "truncation_level", 0);
    const double t_start = get_or(exp, "t_start", 0.0);
    const int record_paths = std::min(get_or(exp, "record_paths", 10), cfg.paths);
    const int dim = target == "inhomogeneous" ? model.inhomogeneous().dim_state : model.limit().dim_state;
    Vec start = get_vec(exp, "start", Vec(static_cast<std::size_t>(dim), 1.0));
    check(static_cast<int>(start.size()) == dim, "simulate: start dimension mismatch");

    std::vector<PathRecord> recs(static_cast<std::size_t>(cfg.paths));
    parallel_for(
        static_cast<std::size_t>(cfg.paths),
        [&](std::size_t i) {
            SimConfig c = cfg;
            c.seed = pair_stream_seed(seed, i);
            c.record = static_cast<int>(i) < record_paths ? SimConfig::Record::Full : SimConfig::Record::Endpoint;
            recs[i] = target == "inhomogeneous"
                          ? simulate_inhomogeneous(model.inhomogeneous(), start, t_start, c)
                          : simulate_limit(model.limit(), start, c);
        },
        threads);

    const int dim_mark = target == "inhomogeneous" ? model.inhomogeneous().dim_mark : model.limit().dim_mark;
    const auto paths_csv = dir / "paths.csv";
    {
        CsvWriter w(paths_csv.string());
        std::vector<std::string> head = {"path", "t"};
        for (int i = 1; i <= dim; ++i) head.push_back("x_" + std::to_string(i));
        head.push_back("event_layer");
        for (int i = 1; i <= dim_mark; ++i) head.push_back("z_" + std::to_string(i));
        head.push_back("u");
        head.push_back("accepted");
        w.header(head);
        for (int p = 0; p < record_paths; ++p) {
            const PathRecord& rec = recs[static_cast<std::size_t>(p)];
            for (std::size_t r = 0; r < rec.rows(); ++r) {
                std::vector<std::string> cells = {std::to_string(p), format_double(rec.times[r])};
                for (double v : rec.state_row(r)) cells.push_back(format_double(v));
                const int ei = rec.row_event[r];
                if (ei >= 0) {
                    const PathEvent& e = rec.events[static_cast<std::size_t>(ei)];
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
    }
    out.artifacts.push_back(paths_csv.string());

    Vec terminal_first;
    for (const auto& r : recs) terminal_first.push_back(r.final_state()[0]);
    summary.kv("paths", cfg.paths);
    summary.kv("terminal_mean_x1", mean(terminal_first));
    summary.kv("terminal_sd_x1", stddev(terminal_first));
}

inline MinorizationSeeds parse_seeds(const json& exp) {
    MinorizationSeeds seeds;
    if (exp.contains("seeds")) {
        const json& s = exp.at("seeds");
        require_keys(s, {"state_center", "mark_center", "state_radius", "mark_radius"}, "experiment.seeds");
        seeds.state_center = get_or(s, "state_center", seeds.state_center);
        seeds.mark_center = get_or(s, "mark_center", seeds.mark_center);
        seeds.state_radius = get_or(s, "state_radius", seeds.state_radius);
        seeds.mark_radius = get_or(s, "mark_radius", seeds.mark_radius);
    }
    return seeds;
}

inline void run_minorize(const ModelBundle& model, const json& exp, std::uint64_t,
                         const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp, {"kind", "level", "seeds", "safety_factor", "verify"}, "experiment");
    const int level = get_or(exp, "level", 1);
    MinorizationOptions opts;
    opts.safety_factor = get_or(exp, "safety_factor", 0.9);
    const auto cert = estimate_minorization(model.limit(), level, parse_seeds(exp), opts);
    const bool verify = get_or(exp, "verify", true);
    int violations = 0;
    if (verify) violations = verify_certificate(cert, model.limit());

    const auto path = dir / "certificate.csv";
    {
        CsvWriter w(path.string());
        w.header({"level", "ball_center", "ball_radius", "beta", "regen_center", "regen_radius",
                  "density_min", "clock_rate", "verify_violations"});
        w.row({static_cast<double>(cert.level), cert.coupling_ball.center[0], cert.coupling_ball.radius,
               cert.regen_prob, cert.regen_ball.center[0], cert.regen_ball.radius, cert.kernel_density_min,
               cert.clock_rate, static_cast<double>(violations)});
    }
    out.artifacts.push_back(path.string());
    summary.kv("eta", cert.coupling_ball.radius);
    summary.kv("beta", cert.regen_prob);
    summary.kv("verify_violations", violations);
    if (verify)
        out.checks.push_back({"certificate_sound", violations == 0,
                              violations == 0 ? "" : std::to_string(violations) + " grid violations"});
}

inline void run_couple(const ModelBundle& model, const json& exp, std::uint64_t seed, int threads,
                       const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "level", "paths", "dt", "horizon", "start_x", "start_y", "seeds", "safety_factor",
                  "truncation_level", "moment_orders", "record_pairs"},
                 "experiment");
    const int level = get_or(exp, "level", 1);
    MinorizationOptions opts;
    opts.safety_factor = get_or(exp, "safety_factor", 0.9);
    const auto cert = estimate_minorization(model.limit(), level, parse_seeds(exp), opts);

    SimConfig cfg;
    cfg.paths = get_or(exp, "paths", 1000);
    cfg.dt = get_or(exp, "dt", 0.01);
    cfg.horizon = get_or(exp, "horizon", 100.0);
    cfg.truncation_level = get_or(exp, "truncation_level", 0);
    cfg.seed = seed;
    const double x0 = get_or(exp, "start_x", 0.0);
    const double y0 = get_or(exp, "start_y", 2.0);
    const auto batch = coupled_batch(model.limit(), level, cert, x0, y0, cfg, threads);

    const auto tau_path = dir / "tau.csv";
    {
        CsvWriter w(tau_path.string());
        w.header({"pair", "tau_c", "censored"});
        for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
            const auto& p = batch.pairs[i];
            w.row_strings({std::to_string(i), CsvWriter::cell(p.censored ? std::numeric_limits<double>::quiet_NaN()
                                                                         : p.coupling_time),
                           p.censored ? "1" : "0"});
        }
    }
    out.artifacts.push_back(tau_path.string());

    const int record_pairs = std::min(get_or(exp, "record_pairs", 5), cfg.paths);
    const auto ticks_path = dir / "pairs.csv";
    {
        CsvWriter w(ticks_path.string());
        w.header({"pair", "k", "T_k", "U_k", "in_C_both", "regenerated", "tau_c"});
        for (int p = 0; p < record_pairs; ++p) {
            const auto& res = batch.pairs[static_cast<std::size_t>(p)];
            const double tau = res.censored ? std::numeric_limits<double>::quiet_NaN() : res.coupling_time;
            for (std::size_t k = 0; k < res.ticks.size(); ++k)
                w.row_strings({std::to_string(p), std::to_string(k + 1), format_double(res.ticks[k].time),
                               format_double(res.ticks[k].color), res.ticks[k].both_in_ball ? "1" : "0",
                               res.ticks[k].regenerated ? "1" : "0", CsvWriter::cell(tau)});
        }
    }
    out.artifacts.push_back(ticks_path.string());

    const Vec orders = get_vec(exp, "moment_orders", Vec{1.0, 2.0});
    if (!batch.coupling_times.empty()) {
        const auto moments = coupling_time_moments(batch.coupling_times, batch.censored, orders, seed);
        const auto mom_path = dir / "moments.csv";
        CsvWriter w(mom_path.string());
        w.header({"order", "estimate", "ci_lo", "ci_hi"});
        for (const auto& m : moments.moments) w.row({m.order, m.estimate, m.ci_lo, m.ci_hi});
        out.artifacts.push_back(mom_path.string());
        summary.kv("tail_exponent", moments.tail_exponent);
        for (const auto& m : moments.moments)
            summary.line("E[tau^" + format_double(m.order) + "] = " + format_double(m.estimate) + " [" +
                         format_double(m.ci_lo) + ", " + format_double(m.ci_hi) + "]");
    }
    summary.kv("beta", cert.regen_prob);
    summary.kv("censored_fraction", static_cast<double>(batch.censored) / cfg.paths);
}

inline void run_lyapunov(const ModelBundle& model, const json& exp, std::uint64_t,
                         const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "target", "grid_lo", "grid_hi", "grid_points", "compact_radius", "t_grid",
                  "expect_verified"},
                 "experiment");
    const std::string target = get_or<std::string>(exp, "target", "limit");
    const int dim = target == "inhomogeneous" ? model.inhomogeneous().dim_state : model.limit().dim_state;
    GridSpec grid;
    grid.box.lo.assign(static_cast<std::size_t>(dim), get_or(exp, "grid_lo", -5.0));
    grid.box.hi.assign(static_cast<std::size_t>(dim), get_or(exp, "grid_hi", 5.0));
    grid.points_per_dim = get_or(exp, "grid_points", 33);
    LyapunovSpec spec;
    spec.value = [](ConstSpan x) { return 1.0 + sq(norm2(x)); };
    const double cr = get_or(exp, "compact_radius", 3.0);
    spec.compact = CompactSet::from_ball(BallSet(Vec(static_cast<std::size_t>(dim), 0.0), cr));
    const LyapunovResult res =
        target == "inhomogeneous"
            ? lyapunov_check(model.inhomogeneous(), spec, grid, get_vec(exp, "t_grid", Vec{0.0, 1.0, 4.0}))
            : lyapunov_check(model.limit(), spec, grid);
    const auto path = dir / "lyapunov.csv";
    {
        CsvWriter w(path.string());
        w.header({"verified", "fitted_decay", "fitted_excursion", "worst_ratio"});
        w.row({res.verified ? 1.0 : 0.0, res.fitted_decay, res.fitted_excursion, res.worst_ratio});
    }
    out.artifacts.push_back(path.string());
    summary.kv("verified", res.verified ? 1.0 : 0.0);
    summary.kv("fitted_decay", res.fitted_decay);
    summary.kv("fitted_excursion", res.fitted_excursion);
    if (exp.contains("expect_verified")) {
        const bool expect = exp.at("expect_verified").get<bool>();
        out.checks.push_back({"lyapunov_verified_matches", res.verified == expect,
                              res.verified ? "verified" : "not verified"});
    }
}

inline void run_regimes(const ModelBundle& model, const json& exp, std::uint64_t,
                        const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp, {"kind", "t_grid", "x_lo", "x_hi", "x_points", "fit_decay"}, "experiment");
    const auto& inhom = model.inhomogeneous();
    const LimitModel& limit = model.limit();
    const Vec t_grid = get_vec(exp, "t_grid", Vec{4, 6, 8, 10, 12, 14, 16});
    std::vector<Vec> x_grid;
    for (double x : linspace(get_or(exp, "x_lo", 0.2), get_or(exp, "x_hi", 1.0), get_or(exp, "x_points", 3)))
        x_grid.push_back(Vec{x});

    const auto path = dir / "regimes.csv";
    {
        CsvWriter w(path.string());
        w.header({"t", "x", "fast_first", "third_moment", "mid_second", "jump_drift_1", "slow_gap", "eps",
                  "a_computed", "a_quoted"});
        for (double t : t_grid)
            for (const auto& x : x_grid) {
                const auto rf = regime_functionals(inhom, t, x, &limit);
                double a_quoted = std::numeric_limits<double>::quiet_NaN();
                if (model.cir)
                    a_quoted = sq(model.cir->params.sigma) * model.cir->params.rate_fn(x[0]);
                w.row({t, x[0], rf.fast_first_norm, rf.third_moment, rf.second_moment_mid, rf.jump_drift[0],
                       rf.slow_gap, rf.eps, rf.second_matrix[0], a_quoted});
            }
    }
    out.artifacts.push_back(path.string());

    if (get_or(exp, "fit_decay", true)) {
        const auto fit = epsilon_decay(inhom, limit, x_grid, t_grid);
        const auto eps_path = dir / "epsilon.csv";
        CsvWriter w(eps_path.string());
        w.header({"t", "x", "eps", "fitted_rate", "fitted_scale"});
        for (std::size_t xi = 0; xi < x_grid.size(); ++xi)
            for (std::size_t ti = 0; ti < fit.t_grid.size(); ++ti)
                w.row({fit.t_grid[ti], x_grid[xi][0], fit.eps[xi][ti], fit.fitted_rate, fit.fitted_scale});
        out.artifacts.push_back(eps_path.string());
        summary.kv("fitted_decay_rate", fit.fitted_rate);
        summary.kv("fitted_scale", fit.fitted_scale);
    }
}

inline void run_pseudotrajectory(const ModelBundle& model, const json& exp, std::uint64_t seed, int threads,
                                 const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "t_list", "window", "s_points", "paths", "dt", "start", "truncation_level",
                  "dict_size", "bootstrap", "check_decreasing"},
                 "experiment");
    PseudoTrajectoryConfig cfg;
    cfg.t_list = get_vec(exp, "t_list", cfg.t_list);
    cfg.window = get_or(exp, "window", cfg.window);
    cfg.s_points = get_or(exp, "s_points", cfg.s_points);
    cfg.paths = get_or(exp, "paths", cfg.paths);
    cfg.dt = get_or(exp, "dt", cfg.dt);
    cfg.start = get_or(exp, "start", cfg.start);
    cfg.truncation_level = get_or(exp, "truncation_level", 0);
    cfg.dict_size = get_or(exp, "dict_size", cfg.dict_size);
    cfg.bootstrap = get_or(exp, "bootstrap", cfg.bootstrap);
    cfg.seed = seed;
    cfg.threads = threads;
    const auto res = pseudotrajectory_gap(model.inhomogeneous(), model.limit(), cfg);
    const auto path = dir / "pseudo_gaps.csv";
    res.curve.write_csv(path.string());
    out.artifacts.push_back(path.string());
    for (const auto& p : res.curve.points)
        summary.line("gap(t=" + format_double(p.x) + ") = " + format_double(p.gap) + " [" +
                     format_double(p.ci_lo) + ", " + format_double(p.ci_hi) + "]");
    if (get_or(exp, "check_decreasing", false)) {
        const auto& first = res.curve.points.front();
        const auto& last = res.curve.points.back();
        out.checks.push_back({"gap_decreasing", last.ci_hi < first.ci_lo,
                              "gap(" + format_double(last.x) + ") vs gap(" + format_double(first.x) + ")"});
    }
}

inline void run_equilibrium(const ModelBundle& model, const json& exp, std::uint64_t seed, int threads,
                            const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "t_list", "paths", "dt", "start", "second_start", "truncation_level", "dict_size",
                  "bootstrap", "reference", "check_monotone", "min_exponent"},
                 "experiment");
    EquilibriumConfig cfg;
    cfg.t_list = get_vec(exp, "t_list", cfg.t_list);
    cfg.paths = get_or(exp, "paths", cfg.paths);
    cfg.dt = get_or(exp, "dt", cfg.dt);
    cfg.start = get_or(exp, "start", cfg.start);
    cfg.second_start = get_or(exp, "second_start", cfg.second_start);
    cfg.truncation_level = get_or(exp, "truncation_level", 0);
    cfg.dict_size = get_or(exp, "dict_size", cfg.dict_size);
    cfg.bootstrap = get_or(exp, "bootstrap", cfg.bootstrap);
    cfg.seed = seed;
    cfg.threads = threads;
    ReferenceConfig rcfg;
    if (exp.contains("reference")) {
        const json& r = exp.at("reference");
        require_keys(r, {"chains", "burn_in", "spacing", "n_samples", "start"}, "experiment.reference");
        rcfg.chains = get_or(r, "chains", rcfg.chains);
        rcfg.burn_in = get_or(r, "burn_in", rcfg.burn_in);
        rcfg.spacing = get_or(r, "spacing", rcfg.spacing);
        rcfg.n_samples = get_or(r, "n_samples", rcfg.n_samples);
        rcfg.start = get_or(r, "start", rcfg.start);
    }
    rcfg.dt = cfg.dt;
    rcfg.truncation_level = cfg.truncation_level;
    rcfg.seed = seed ^ 0x9e37ULL;
    rcfg.threads = threads;
    const auto reference = build_reference(model.limit(), rcfg);
    const auto res = equilibrium_gap(model.limit(), cfg, reference);

    const auto tv_path = dir / "tv_curve.csv";
    res.tv_curve.write_csv(tv_path.string());
    out.artifacts.push_back(tv_path.string());
    const auto df_path = dir / "df_curve.csv";
    res.df_curve.write_csv(df_path.string());
    out.artifacts.push_back(df_path.string());
    const auto two_path = dir / "two_start.csv";
    res.two_start_curve.write_csv(two_path.string());
    out.artifacts.push_back(two_path.string());

    summary.kv("fitted_exponent", res.fitted_exponent);
    summary.kv("reference_selftest_tv", reference.selftest_tv);
    if (get_or(exp, "check_monotone", true))
        out.checks.push_back({"tv_monotone", res.tv_monotone, res.tv_monotone ? "" : "TV gaps not strictly decreasing outside CIs"});
    const double min_exp = get_or(exp, "min_exponent", 0.0);
    if (min_exp > 0.0)
        out.checks.push_back({"decay_exponent", res.fitted_exponent >= min_exp,
                              "fitted " + format_double(res.fitted_exponent)});
}

inline void run_control(const ModelBundle& model, const json& exp, std::uint64_t seed, int threads,
                        const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp,
                 {"kind", "level", "grid_lo", "grid_hi", "grid_points", "target_center", "target_radius",
                  "paths", "dt", "check_positive"},
                 "experiment");
    SimConfig cfg;
    cfg.paths = get_or(exp, "paths", 2000);
    cfg.dt = get_or(exp, "dt", 0.01);
    cfg.seed = seed;
    const int level = get_or(exp, "level", 0);
    std::vector<Vec> grid;
    for (double x : linspace(get_or(exp, "grid_lo", 0.0), get_or(exp, "grid_hi", 2.0), get_or(exp, "grid_points", 9)))
        grid.push_back(Vec{x});
    const double center = get_or(exp, "target_center", 1.0);
    const double radius = get_or(exp, "target_radius", 0.2);
    const Vec c{center};
    const auto res = control_probability(model.limit(), level == 0 ? model.limit().measure.levels() : level,
                                         grid, c, radius, cfg, threads);
    const auto path = dir / "control.csv";
    {
        CsvWriter w(path.string());
        w.header({"x", "estimate", "wilson_lower"});
        for (std::size_t i = 0; i < grid.size(); ++i) w.row({grid[i][0], res.estimates[i], res.wilson_lower[i]});
    }
    out.artifacts.push_back(path.string());
    summary.kv("min_estimate", res.min_estimate);
    summary.kv("min_wilson_lower", res.min_wilson_lower);
    if (get_or(exp, "check_positive", false))
        out.checks.push_back({"control_positive", res.min_wilson_lower > 0.0,
                              "min Wilson lower bound " + format_double(res.min_wilson_lower)});
}

inline void run_seminorms(const ModelBundle& model, const json& exp, std::uint64_t,
                          const std::filesystem::path& dir, RunResult& out, SummaryWriter& summary) {
    require_keys(exp, {"kind", "horizon", "t0", "x_lo", "x_hi", "x_points", "decay_rate"}, "experiment");
    GridSpec grid;
    const int dim = model.limit().dim_state;
    grid.box.lo.assign(static_cast<std::size_t>(dim), get_or(exp, "x_lo", 0.0));
    grid.box.hi.assign(static_cast<std::size_t>(dim), get_or(exp, "x_hi", 3.0));
    grid.points_per_dim = get_or(exp, "x_points", 9);
    const double horizon = get_or(exp, "horizon", 2.0);
    const double t0 = get_or(exp, "t0", 4.0);
    const double rate = get_or(exp, "decay_rate", model.cir ? model.cir->params.band_rate : 0.5);
    ValidationGrids vgrids;
    vgrids.x_grid = grid;
    const auto validation = validate_model(model.limit(), vgrids);
    const auto rep = seminorm_report(model.limit(), model.inhomogeneous(), horizon, t0, grid, rate, {},
                                     validation.coeff_mass, validation.alpha_complement);
    const auto path = dir / "seminorms.csv";
    {
        CsvWriter w(path.string());
        w.header({"theta", "alpha_12", "alpha_24", "alpha_36", "gamma_q", "log_rate_bracket", "log_q3", "c_t0",
                  "coeff_mass", "alpha_complement", "fitted_m1", "bound_t0_T"});
        w.row({rep.theta, rep.alpha_p[0], rep.alpha_p[1], rep.alpha_p[2], rep.gamma_q, rep.log_rate_bracket,
               rep.log_q3, rep.c_t0, rep.coeff_mass, rep.alpha_complement, rep.fitted_m1,
               rep.bound(t0, horizon)});
    }
    out.artifacts.push_back(path.string());
    summary.kv("theta", rep.theta);
    summary.kv("log_q3", rep.log_q3);
    summary.kv("c_t0", rep.c_t0);
    for (const auto& f : rep.flags) summary.line("flag: " + f);
}

}  // namespace cli_detail

inline RunResult run_experiment(const json& config, std::optional<std::uint64_t> seed_override = {},
                                std::optional<int> threads_override = {},
                                std::optional<std::string> out_override = {}) {
    RunResult result;
    cli_detail::require_keys(config, {"model", "experiment", "seed", "threads", "output_dir"}, "config");
    check(config.contains("model") && config.contains("experiment"), "config: model and experiment required");
    const json& exp = config.at("experiment");
    if (!exp.contains("kind")) throw ModelError("config: experiment.kind required");
    const std::string kind = exp.at("kind").get<std::string>();
    const std::uint64_t seed =
        seed_override ? *seed_override : cli_detail::get_or<std::uint64_t>(config, "seed", 1);
    const int threads = threads_override ? *threads_override : cli_detail::get_or(config, "threads", 0);

    const auto model = cli_detail::build_model(config.at("model"));

    std::string out_dir;
    if (out_override)
        out_dir = *out_override;
    else if (config.contains("output_dir"))
        out_dir = config.at("output_dir").get<std::string>();
    else {
        const char* root = std::getenv("JUMPDIFF_OUT");
        out_dir = (root ? std::string(root) : std::string("out")) + "/" + kind;
    }
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    // manifest: config echo + effective seed/threads + version
    {
        json manifest;
        manifest["config"] = config;
        manifest["seed"] = seed;
        manifest["threads"] = threads;
        manifest["version"] = "jumpdiff 0.1.0";
        std::ofstream mf(dir / "manifest.json", std::ios::binary);
        mf << manifest.dump(2) << "\n";
        result.artifacts.push_back((dir / "manifest.json").string());
    }

    cli_detail::SummaryWriter summary;
    summary.line("experiment: " + kind);
    summary.line("model: " + model.name);
    summary.line("seed: " + std::to_string(seed));

    if (kind == "simulate")
        cli_detail::run_simulate(model, exp, seed, threads, dir, result, summary);
    else if (kind == "minorize")
        cli_detail::run_minorize(model, exp, seed, dir, result, summary);
    else if (kind == "couple")
        cli_detail::run_couple(model, exp, seed, threads, dir, result, summary);
    else if (kind == "lyapunov")
        cli_detail::run_lyapunov(model, exp, seed, dir, result, summary);
    else if (kind == "regimes")
        cli_detail::run_regimes(model, exp, seed, dir, result, summary);
    else if (kind == "pseudotrajectory")
        cli_detail::run_pseudotrajectory(model, exp, seed, threads, dir, result, summary);
    else if (kind == "equilibrium")
        cli_detail::run_equilibrium(model, exp, seed, threads, dir, result, summary);
    else if (kind == "control")
        cli_detail::run_control(model, exp, seed, threads, dir, result, summary);
    else if (kind == "seminorms")
        cli_detail::run_seminorms(model, exp, seed, dir, result, summary);
    else
        throw ModelError("config: unknown experiment kind '" + kind + "'");

    bool all_pass = true;
    for (const auto& c : result.checks) {
        summary.line(std::string("check ") + c.name + ": " + (c.pass ? "pass" : "FAIL") +
                     (c.detail.empty() ? "" : " (" + c.detail + ")"));
        all_pass = all_pass && c.pass;
    }
    {
        std::ofstream sf(dir / "summary.txt", std::ios::binary);
        sf << summary.text;
        result.artifacts.push_back((dir / "summary.txt").string());
    }
    result.summary = summary.text;
    result.exit_code = all_pass ? 0 : 2;
    return result;
}

// Tidy per-figure CSVs derived from experiment artifacts.
inline std::vector<std::string> emit_plot_data(const std::string& artifact_dir,
                                               const std::string& out_dir_opt = "") {
    namespace fs = std::filesystem;
    const fs::path in(artifact_dir);
    const fs::path out = out_dir_opt.empty() ? in : fs::path(out_dir_opt);
    fs::create_directories(out);
    std::vector<std::string> written;

    auto exists = [&](const char* name) { return fs::exists(in / name); };

    if (exists("pseudo_gaps.csv")) {
        std::ifstream src(in / "pseudo_gaps.csv");
        CsvWriter w((out / "gap_curve.csv").string());
        w.header({"t", "gap", "ci_lo", "ci_hi"});
        std::string line;
        std::getline(src, line);  // header
        while (std::getline(src, line)) {
            const auto p1 = line.find(','), p2 = line.find(',', p1 + 1), p3 = line.find(',', p2 + 1),
                       p4 = line.find(',', p3 + 1);
            w.row_strings({line.substr(0, p1), line.substr(p1 + 1, p2 - p1 - 1),
                           line.substr(p2 + 1, p3 - p2 - 1), line.substr(p3 + 1, p4 - p3 - 1)});
        }
        written.push_back((out / "gap_curve.csv").string());
    }
    if (exists("tau.csv")) {
        std::ifstream src(in / "tau.csv");
        std::string line;
        std::getline(src, line);
        Vec taus;
        int censored = 0, total = 0;
        while (std::getline(src, line)) {
            const auto p1 = line.find(','), p2 = line.find(',', p1 + 1);
            const std::string tau = line.substr(p1 + 1, p2 - p1 - 1);
            ++total;
            if (tau.empty())
                ++censored;
            else
                taus.push_back(std::stod(tau));
        }
        std::sort(taus.begin(), taus.end());
        CsvWriter w((out / "tau_survival.csv").string());
        w.header({"t", "survival"});
        for (std::size_t i = 0; i < taus.size(); ++i)
            w.row({taus[i], static_cast<double>(total - static_cast<int>(i) - 1) / total});
        written.push_back((out / "tau_survival.csv").string());
    }
    if (exists("epsilon.csv")) {
        std::ifstream src(in / "epsilon.csv");
        CsvWriter w((out / "eps_decay.csv").string());
        w.header({"t", "x", "eps"});
        std::string line;
        std::getline(src, line);
        while (std::getline(src, line)) {
            const auto p1 = line.find(','), p2 = line.find(',', p1 + 1), p3 = line.find(',', p2 + 1);
            w.row_strings({line.substr(0, p1), line.substr(p1 + 1, p2 - p1 - 1), line.substr(p2 + 1, p3 - p2 - 1)});
        }
        written.push_back((out / "eps_decay.csv").string());
    }
    if (written.empty()) throw ModelError("emit_plot_data: no known artifacts in " + artifact_dir);
    return written;
}

}  // namespace jumpdiff
