// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Every tolerance is pinned here; nothing defers to later calibration.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <jumpdiff/experiment.hpp>
#include <jumpdiff/jumpdiff.hpp>

#include "support/oracles.hpp"

using namespace jumpdiff;
namespace fs = std::filesystem;

namespace {

struct Reporter {
    int failures = 0;
    std::vector<std::string> lines;

    void result(int id, const std::string& name, bool pass, const std::string& detail) {
        std::ostringstream os;
        os << (pass ? "[PASS] " : "[FAIL] ") << "criterion " << id << ": " << name;
        if (!detail.empty()) os << "  (" << detail << ")";
        lines.push_back(os.str());
        std::printf("%s\n", lines.back().c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// shared CIR parameter sets
CirParams cir_coupling_params() {
    CirParams p;
    p.sigma = 0.4;
    p.jump_scale = 2.0;
    p.reversion = 2.0;
    p.drift_level = 2.0;
    p.band_rate = 0.5;
    return p;
}

CirParams cir_regime_params() {
    CirParams p = cir_coupling_params();
    p.sigma = 2.0;
    p.jump_scale = 1.0;
    return p;
}

CirParams cir_slow_mixing_params() {
    CirParams p;
    p.sigma = 0.4;
    p.jump_scale = 0.5;
    p.reversion = 0.15;
    p.drift_level = 0.1;
    p.band_rate = 0.5;
    p.layer_edges = {3.0, 30.0};
    return p;
}

MinorizationSeeds cir_seeds() {
    MinorizationSeeds s;
    s.state_center = 1.8;
    s.mark_center = 1.5;
    s.state_radius = 0.6;
    s.mark_radius = 1.49;
    return s;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

// 1. Coupling marginal exactness: coupled components at T = 10 match the solo
//    law by two-sample KS at p > 0.01, within the stated runtime budget.
static void criterion_1(Reporter& rep) {
    const auto t0 = std::chrono::steady_clock::now();
    auto models = make_cir_models(cir_coupling_params());
    const auto cert = estimate_minorization(models.limit, 1, cir_seeds());
    const double start_x = 1.0, start_y = 2.5;
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.horizon = 10.0;
    cfg.paths = 10000;
    cfg.seed = 101;
    const auto batch = coupled_batch(models.limit, 1, cert, start_x, start_y, cfg);
    Vec coupled_x, coupled_y;
    for (const auto& pr : batch.pairs) {
        coupled_x.push_back(pr.final_x);
        coupled_y.push_back(pr.final_y);
    }
    auto solo = [&](double start, std::uint64_t salt) {
        Vec ends(10000);
        parallel_for(ends.size(), [&](std::size_t i) {
            SimConfig c = cfg;
            c.seed = pair_stream_seed(salt, i);
            c.record = SimConfig::Record::Endpoint;
            ends[i] = simulate_limit(models.limit, Vec{start}, c).final_state()[0];
        });
        return ends;
    };
    const auto ks_x = ks_two_sample(coupled_x, solo(start_x, 555));
    const auto ks_y = ks_two_sample(coupled_y, solo(start_y, 556));
    const double elapsed = seconds_since(t0);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const double budget = 120.0 * 8.0 / std::min(8u, hw);
    const bool pass = ks_x.p_value > 0.01 && ks_y.p_value > 0.01 && elapsed < budget;
    rep.result(1, "coupling marginal exactness", pass,
               "p_x=" + fmt(ks_x.p_value) + " p_y=" + fmt(ks_y.p_value) + " time=" + fmt(elapsed) + "s of " +
                   fmt(budget) + "s");
}

// 2. Regeneration law: post-firing states are nu-distributed and the two
//    components agree exactly at and after every firing.
static void criterion_2(Reporter& rep) {
    auto models = make_cir_models(cir_coupling_params());
    const auto cert = estimate_minorization(models.limit, 1, cir_seeds());
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.horizon = 60.0;
    cfg.paths = 4000;
    cfg.seed = 202;
    const auto batch = coupled_batch(models.limit, 1, cert, 0.5, 3.0, cfg);
    Vec regen_draws;
    int firings = 0, equal = 0;
    bool merged_equal = true;
    for (const auto& pr : batch.pairs) {
        for (const auto& tick : pr.ticks)
            if (tick.regenerated) {
                ++firings;
                regen_draws.push_back(tick.post_x);
                if (tick.post_x == tick.post_y) ++equal;
            }
        if (!pr.censored && pr.final_x != pr.final_y) merged_equal = false;
    }
    const double lo = cert.regen_ball.center[0] - cert.regen_ball.radius;
    const double hi = cert.regen_ball.center[0] + cert.regen_ball.radius;
    const auto ks = ks_one_sample(regen_draws, [&](double v) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); });
    const bool pass = firings > 500 && equal == firings && merged_equal && ks.p_value > 0.01;
    rep.result(2, "regeneration law", pass,
               "firings=" + std::to_string(firings) + " equal=" + std::to_string(equal) +
                   " ks_p=" + fmt(ks.p_value));
}

// 3. Minorization soundness: the uniform toy kernel yields (eta, beta) =
//    (1/2, 1/2) analytically, and the CIR certificate survives a finer grid.
static void criterion_3(Reporter& rep) {
    LimitModel toy;
    toy.dim_state = 1;
    toy.dim_mark = 1;
    toy.drift = [](ConstSpan, Span out) { out[0] = 0.0; };
    toy.jump_amplitude = [](ConstSpan z, ConstSpan, Span out) { out[0] = z[0]; };
    toy.jump_rate = [](ConstSpan, ConstSpan) { return 1.0; };
    toy.rate_bound = 1.0;
    toy.measure = build_layered_measure({Layer::interval(-1.0, 1.0, 0.5)}, 1, 1.0);
    MinorizationSeeds seeds;
    seeds.state_center = 0.0;
    seeds.mark_center = 0.0;
    seeds.state_radius = 0.5;
    seeds.mark_radius = 1.0;
    MinorizationOptions exact;
    exact.safety_factor = 1.0;  // the analytic reproduction check
    const auto toy_cert = estimate_minorization(toy, 1, seeds, exact);
    const bool toy_ok = std::fabs(toy_cert.coupling_ball.radius - 0.5) < 1e-12 &&
                        std::fabs(toy_cert.regen_prob - 0.5) < 1e-9;

    auto models = make_cir_models(cir_coupling_params());
    const auto cert = estimate_minorization(models.limit, 1, cir_seeds());
    const int violations = verify_certificate(cert, models.limit, 193, 385);
    rep.result(3, "minorization soundness", toy_ok && violations == 0,
               "toy eta=" + fmt(toy_cert.coupling_ball.radius) + " beta=" + fmt(toy_cert.regen_prob) +
                   " cir_beta=" + fmt(cert.regen_prob) + " violations=" + std::to_string(violations));
}

// 4. Coupling-time decay: survival drops by at least 4x between t = 10 and
//    t = 40, and the second moment is finite with a tight bootstrap interval.
static void criterion_4(Reporter& rep) {
    auto models = make_cir_models(cir_coupling_params());
    const auto cert = estimate_minorization(models.limit, 1, cir_seeds());
    const double far_start = 5.0 * (models.params.drift_level + models.params.jump_scale) / models.params.reversion;
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.horizon = 150.0;
    cfg.paths = 10000;
    cfg.seed = 404;
    const auto batch = coupled_batch(models.limit, 1, cert, 0.0, far_start, cfg);
    int gt10 = batch.censored, gt40 = batch.censored;
    for (double t : batch.coupling_times) {
        if (t > 10.0) ++gt10;
        if (t > 40.0) ++gt40;
    }
    const double p10 = static_cast<double>(gt10) / cfg.paths;
    const double p40 = static_cast<double>(gt40) / cfg.paths;
    const double ratio = p40 > 0.0 ? p10 / p40 : std::numeric_limits<double>::infinity();
    const auto moments = coupling_time_moments(batch.coupling_times, batch.censored, Vec{2.0}, 404);
    const auto& m2 = moments.moments[0];
    const double rel_width = (m2.ci_hi - m2.ci_lo) / m2.estimate;
    const bool pass = ratio >= 4.0 && std::isfinite(m2.estimate) && rel_width < 0.20;
    rep.result(4, "coupling-time decay", pass,
               "P(tau>10)=" + fmt(p10) + " P(tau>40)=" + fmt(p40) + " ratio=" + fmt(ratio) +
                   " E[tau^2]=" + fmt(m2.estimate) + " rel_ci=" + fmt(rel_width) +
                   " censored=" + std::to_string(batch.censored));
}

// 5. Lyapunov verification: quadratic V verifies for the CIR limit with a
//    positive fitted rate; the repulsive counterexample does not verify.
static void criterion_5(Reporter& rep) {
    auto models = make_cir_models(cir_coupling_params());
    LyapunovSpec spec;
    spec.value = [](ConstSpan x) { return 1.0 + sq(x[0]); };
    spec.compact = CompactSet::from_ball(BallSet(Vec{0.0}, 3.0));
    GridSpec grid;
    grid.box.lo = {-6.0};
    grid.box.hi = {8.0};
    grid.points_per_dim = 57;
    const auto good = lyapunov_check(models.limit, spec, grid);

    LimitModel repulsive = models.limit;
    repulsive.drift = [](ConstSpan x, Span out) { out[0] = x[0]; };
    const auto bad = lyapunov_check(repulsive, spec, grid);
    const bool pass = good.verified && good.fitted_decay > 0.0 && !bad.verified;
    rep.result(5, "lyapunov verification", pass,
               "fitted_decay=" + fmt(good.fitted_decay) + " counterexample_verified=" +
                   (bad.verified ? "true" : "false"));
}

// 6. Regime identities for the three-band family; the fast-band variance
//    factor-2 bookkeeping is resolved by the band integral itself.
static void criterion_6(Reporter& rep) {
    auto models = make_cir_models(cir_regime_params());
    const auto& p = models.params;
    double worst_first = 0.0, worst_drift = 0.0, worst_third = 0.0, worst_var = 0.0;
    double a_computed = 0.0, a_quoted = 0.0;
    for (double t : {2.0, 4.0, 6.0, 8.0}) {
        for (double x : {0.2, 0.6, 1.0}) {
            const auto rf = regime_functionals(models.inhomogeneous, t, Vec{x}, &models.limit);
            worst_first = std::max(worst_first, rf.fast_first_norm);
            worst_drift = std::max(worst_drift, std::fabs(rf.jump_drift[0] + p.reversion * x));
            const double third = 0.25 * std::pow(p.sigma, 3.0) * std::exp(-p.band_rate * t) * p.rate_fn(x);
            worst_third = std::max(worst_third, std::fabs(rf.third_moment - third) / third);
            a_computed = rf.second_matrix[0];
            a_quoted = sq(p.sigma) * p.rate_fn(x);
            worst_var = std::max(worst_var, std::fabs(a_computed - 0.5 * a_quoted) / (0.5 * a_quoted));
        }
    }
    std::vector<Vec> x_grid = {Vec{0.2}, Vec{0.6}, Vec{1.0}};
    const Vec t_grid = {6, 8, 10, 12, 14, 16, 18};
    const auto fit = epsilon_decay(models.inhomogeneous, models.limit, x_grid, t_grid);
    const double slope_err = std::fabs(fit.fitted_rate - p.band_rate) / p.band_rate;
    const bool pass = worst_first <= 1e-10 && worst_drift <= 1e-8 && worst_third <= 1e-6 &&
                      worst_var <= 1e-9 && slope_err <= 0.05;
    rep.result(6, "regime identities", pass,
               "fast_first=" + fmt(worst_first) + " drift_err=" + fmt(worst_drift) + " third_rel=" +
                   fmt(worst_third) + " var: computed=sigma^2 f/2 (quoted sigma^2 f), rel_err=" + fmt(worst_var) +
                   " slope=" + fmt(-fit.fitted_rate) + " vs -" + fmt(p.band_rate));
}

// 7. Pseudotrajectory gap: the dictionary gap shrinks strictly outside
//    bootstrap intervals from t = 2 to t = 8; the identical-dynamics control
//    is exactly zero under common seeds.
static void criterion_7(Reporter& rep) {
    auto models = make_cir_models(cir_coupling_params());
    PseudoTrajectoryConfig cfg;
    cfg.t_list = {2.0, 8.0};
    cfg.window = 2.0;
    cfg.s_points = 4;
    cfg.paths = 10000;
    cfg.dt = 0.01;
    cfg.start = 1.0;
    cfg.dict_size = 64;
    cfg.bootstrap = 150;
    cfg.seed = 707;
    const auto res = pseudotrajectory_gap(models.inhomogeneous, models.limit, cfg);
    const auto& early = res.curve.points[0];
    const auto& late = res.curve.points[1];

    CirParams ctrl = cir_coupling_params();
    ctrl.sigma = 0.0;  // jump-only dynamics representable on both sides
    auto ctrl_limit = make_cir_limit(ctrl);
    PseudoTrajectoryConfig ccfg = cfg;
    ccfg.paths = 2000;
    ccfg.dict_size = 16;
    ccfg.bootstrap = 40;
    const auto control = pseudotrajectory_gap(as_inhomogeneous(ctrl_limit), ctrl_limit, ccfg);
    double control_max = 0.0;
    for (const auto& pt : control.curve.points) control_max = std::max(control_max, std::max(pt.gap, pt.ci_hi));
    const bool pass = late.ci_hi < early.ci_lo && control_max == 0.0;
    rep.result(7, "pseudotrajectory gap", pass,
               "gap(2)=" + fmt(early.gap) + " [" + fmt(early.ci_lo) + "," + fmt(early.ci_hi) + "] gap(8)=" +
                   fmt(late.gap) + " [" + fmt(late.ci_lo) + "," + fmt(late.ci_hi) + "] control=" +
                   fmt(control_max));
}

// 8. Equilibrium gap: TV distance to the long-run reference decreases
//    strictly outside intervals along t = 5, 10, 20, 40 and the log-log decay
//    exponent is at least 1.
static void criterion_8(Reporter& rep) {
    auto limit = make_cir_limit(cir_slow_mixing_params());
    ReferenceConfig rcfg;
    rcfg.chains = 150;
    rcfg.burn_in = 50.0;
    rcfg.spacing = 1.0;
    rcfg.n_samples = 45000;
    rcfg.dt = 0.02;
    rcfg.start = 3.0;
    rcfg.seed = 808;
    const auto reference = build_reference(limit, rcfg);
    EquilibriumConfig cfg;
    cfg.t_list = {5.0, 10.0, 20.0, 40.0};
    cfg.paths = 20000;
    cfg.dt = 0.02;
    cfg.start = 8.0;
    cfg.second_start = 0.0;
    cfg.dict_size = 24;
    cfg.bootstrap = 150;
    cfg.seed = 809;
    const auto res = equilibrium_gap(limit, cfg, reference);
    std::string curve;
    for (const auto& pt : res.tv_curve.points) curve += " tv(" + fmt(pt.x) + ")=" + fmt(pt.gap);
    const bool pass = res.tv_monotone && res.fitted_exponent >= 1.0;
    rep.result(8, "equilibrium gap", pass, curve + " exponent=" + fmt(res.fitted_exponent));
}

// 9. Mean-field consistency: the paired dictionary gap to the limit strictly
//    decreases along N = 25, 100, 400, and the summary chain matches the
//    per-particle oracle at N = 10.
static void criterion_9(Reporter& rep) {
    HawkesParams params;
    params.kernel_weight = 2.0;
    MeanFieldConfig cfg;
    cfg.particle_counts = {25, 100, 400};
    cfg.paths = 12000;
    cfg.dt = 0.002;
    cfg.horizon = 5.0;
    cfg.dict_size = 48;
    cfg.bootstrap = 150;
    cfg.seed = 909;
    const auto res = mean_field_gap(params, cfg);
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < res.curve.points.size(); ++i)
        if (!(res.curve.points[i].ci_lo > res.curve.points[i + 1].ci_hi)) decreasing = false;

    HawkesParams p10 = params;
    p10.particles = 10;
    auto system = make_hawkes_system(p10);
    const int n = 5000;
    Vec sum_x1, sum_x2, part_x1, part_x2;
    oracles::PerParticleHawkes oracle{p10};
    for (int i = 0; i < n; ++i) {
        SimConfig c;
        c.dt = 0.001;
        c.horizon = 3.0;
        c.seed = pair_stream_seed(910, static_cast<std::size_t>(i));
        c.record = SimConfig::Record::Endpoint;
        const auto rec = simulate_limit(system, Vec{0.0, 0.0}, c);
        sum_x1.push_back(rec.final_state()[0]);
        sum_x2.push_back(rec.final_state()[1]);
        Rng rng = Rng::derive(911, 0xacc, static_cast<std::uint64_t>(i));
        const auto [x1, x2] = oracle.run(3.0, rng);
        part_x1.push_back(x1);
        part_x2.push_back(x2);
    }
    const auto ks1 = ks_two_sample(sum_x1, part_x1);
    const auto ks2 = ks_two_sample(sum_x2, part_x2);
    std::string gaps;
    for (const auto& pt : res.curve.points) gaps += " gap(" + fmt(pt.x) + ")=" + fmt(pt.gap);
    const bool pass = decreasing && ks1.p_value > 0.01 && ks2.p_value > 0.01;
    rep.result(9, "mean-field consistency", pass,
               gaps + " oracle_p=(" + fmt(ks1.p_value) + "," + fmt(ks2.p_value) + ")");
}

// 10. Estimator calibration: the Gaussian TV benchmark and the Richardson
//     generator/semigroup consistency check on ten grid points.
static void criterion_10(Reporter& rep) {
    Rng rng(1010);
    const int n = 100000;
    Vec a, b;
    for (int i = 0; i < n; ++i) {
        a.push_back(rng.normal());
        b.push_back(rng.normal() + 1.0);
    }
    const auto tv = tv_estimate(EmpiricalLaw::from_column(std::move(a)), EmpiricalLaw::from_column(std::move(b)),
                                {}, 300, 1011);
    const double exact = 2.0 * normal_cdf(0.5) - 1.0;
    const bool tv_ok = tv.ci_lo <= exact && exact <= tv.ci_hi;

    auto models = make_cir_models(cir_coupling_params());
    ScalarField quad([](ConstSpan x) { return x[0] * x[0]; });
    int consistent = 0;
    const Vec xs = linspace(0.6, 2.4, 10);
    for (double x : xs) {
        auto quotient = [&](double h, std::uint64_t salt) {
            const int paths = 120000;
            Vec vals(static_cast<std::size_t>(paths));
            parallel_for(vals.size(), [&](std::size_t i) {
                SimConfig c;
                c.dt = h / 8.0;
                c.horizon = h;
                c.seed = pair_stream_seed(salt ^ static_cast<std::uint64_t>(x * 4096.0), i);
                c.record = SimConfig::Record::Endpoint;
                vals[i] = (sq(simulate_limit(models.limit, Vec{x}, c).final_state()[0]) - sq(x)) / h;
            });
            return std::make_pair(mean(vals), std_error(vals));
        };
        const auto e_coarse = quotient(0.02, 21);
        const auto e_mid = quotient(0.01, 22);
        const auto e_fine = quotient(0.005, 23);
        const double rich_a = 2.0 * e_mid.first - e_coarse.first;
        const double se_a = std::sqrt(4.0 * sq(e_mid.second) + sq(e_coarse.second));
        const double rich_b = 2.0 * e_fine.first - e_mid.first;
        const double se_b = std::sqrt(4.0 * sq(e_fine.second) + sq(e_mid.second));
        const double lf = apply_limit_generator(models.limit, quad, Vec{x}).value;
        if (std::fabs(rich_a - lf) <= 3.0 * se_a && std::fabs(rich_b - lf) <= 3.0 * se_b) ++consistent;
    }
    const bool pass = tv_ok && consistent == 10;
    rep.result(10, "estimator calibration", pass,
               "tv=" + fmt(tv.estimate) + " [" + fmt(tv.ci_lo) + "," + fmt(tv.ci_hi) + "] exact=" + fmt(exact) +
                   " richardson_ok=" + std::to_string(consistent) + "/10");
}

// 11. Determinism: reruns with identical config and seed produce
//     byte-identical CSV artifacts.
static void criterion_11(Reporter& rep) {
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    const fs::path root = fs::temp_directory_path() / "jumpdiff_acceptance_det";
    fs::remove_all(root);
    bool pass = true;
    std::string detail;

    json sim_cfg;
    sim_cfg["model"] = {{"name", "cir"}, {"params", json::object()}};
    sim_cfg["experiment"] = {{"kind", "simulate"}, {"paths", 50}, {"dt", 0.02}, {"horizon", 2.0}};
    sim_cfg["seed"] = 11;

    json couple_cfg;
    couple_cfg["model"] = {{"name", "cir"},
                           {"params",
                            {{"sigma", 0.4}, {"jump_scale", 2.0}, {"reversion", 2.0}, {"drift_level", 2.0}}}};
    couple_cfg["experiment"] = {{"kind", "couple"},
                                {"level", 1},
                                {"paths", 300},
                                {"dt", 0.02},
                                {"horizon", 40.0},
                                {"start_x", 0.5},
                                {"start_y", 3.0},
                                {"seeds",
                                 {{"state_center", 1.8},
                                  {"mark_center", 1.5},
                                  {"state_radius", 0.6},
                                  {"mark_radius", 1.49}}}};
    couple_cfg["seed"] = 12;

    int run_idx = 0;
    for (json cfg : {sim_cfg, couple_cfg}) {
        const fs::path dir_a = root / ("run" + std::to_string(run_idx) + "_a");
        const fs::path dir_b = root / ("run" + std::to_string(run_idx) + "_b");
        cfg["output_dir"] = dir_a.string();
        (void)run_experiment(cfg);
        cfg["output_dir"] = dir_b.string();
        (void)run_experiment(cfg);
        for (const auto& entry : fs::directory_iterator(dir_a)) {
            if (entry.path().extension() != ".csv") continue;
            const auto other = dir_b / entry.path().filename();
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
                pass = false;
                detail += entry.path().filename().string() + " differs; ";
            }
        }
        ++run_idx;
    }
    rep.result(11, "determinism", pass, detail.empty() ? "all CSV bodies byte-identical" : detail);
}

int run_all() {
    Reporter rep;
    const auto t0 = std::chrono::steady_clock::now();
    criterion_1(rep);
    criterion_2(rep);
    criterion_3(rep);
    criterion_4(rep);
    criterion_5(rep);
    criterion_6(rep);
    criterion_7(rep);
    criterion_8(rep);
    criterion_9(rep);
    criterion_10(rep);
    criterion_11(rep);
    std::printf("----\n%d/11 criteria passed in %.1f s\n", 11 - rep.failures, seconds_since(t0));
    return rep.failures == 0 ? 0 : 1;
}

int main() {
    try {
        return run_all();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
        return 2;
    }
}
