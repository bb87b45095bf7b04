#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <jumpdiff/jumpdiff.hpp>

#include "support/oracles.hpp"

using namespace jumpdiff;

namespace {

CirParams sigma2_params() {
    CirParams p;
    p.sigma = 2.0;
    p.jump_scale = 1.0;
    p.reversion = 2.0;
    p.drift_level = 2.0;
    p.band_rate = 0.5;
    return p;
}

}  // namespace

TEST_CASE("generator: constants are annihilated and drift-only reduces to b.grad") {
    auto models = make_cir_models({});
    ScalarField one([](ConstSpan) { return 1.0; });
    CHECK(apply_generator(models.inhomogeneous, one, 1.0, Vec{0.7}).value == doctest::Approx(0.0).epsilon(1e-12));

    InhomogeneousModel driftish = models.inhomogeneous;
    driftish.jump_amplitude = [](double, ConstSpan, ConstSpan, Span out) { out[0] = 0.0; };
    ScalarField lin([](ConstSpan x) { return 3.0 * x[0]; });
    CHECK(apply_generator(driftish, lin, 1.0, Vec{0.7}).value ==
          doctest::Approx(3.0 * models.params.drift_level).epsilon(1e-9));
}

TEST_CASE("generator: CIR identity function sees drift plus band integrals") {
    auto models = make_cir_models({});
    const auto& p = models.params;
    ScalarField lin([](ConstSpan x) { return x[0]; });
    for (double t : {1.0, 3.0, 6.0}) {
        for (double x : {0.4, 1.3}) {
            const double band = std::min(std::exp(2.0 * p.band_rate * t), p.truncation);
            const double slow_drift = p.rate_fn(x) * p.jump_scale * (1.0 - 1.0 / (1.0 + band));
            const double oracle = p.drift_level - p.reversion * x + slow_drift;
            const double got = apply_generator(models.inhomogeneous, lin, t, Vec{x}).value;
            CHECK(got == doctest::Approx(oracle).epsilon(1e-8));
        }
    }
}

TEST_CASE("limit generator: quadratic test function against the closed form") {
    auto models = make_cir_models({});
    const auto& p = models.params;
    ScalarField quad([](ConstSpan x) { return x[0] * x[0]; });
    for (double x : {0.5, 1.1, 2.0}) {
        const double M = p.truncation;
        const double i2 = 1.0 - 1.0 / (1.0 + M);                      // int (1+z)^-2
        const double i4 = (1.0 - std::pow(1.0 + M, -3.0)) / 3.0;      // int (1+z)^-4
        const double f = p.rate_fn(x);
        const double oracle = 2.0 * x * (p.drift_level - p.reversion * x) + 0.5 * sq(p.sigma) * f +
                              f * (2.0 * x * p.jump_scale * i2 + sq(p.jump_scale) * i4);
        const double got = apply_limit_generator(models.limit, quad, Vec{x}).value;
        CHECK(got == doctest::Approx(oracle).epsilon(1e-8));
    }
}

TEST_CASE("limit generator: centered jumps with linear test function vanish; pure diffusion gives the trace") {
    LimitModel centered;
    centered.dim_state = 1;
    centered.dim_mark = 1;
    centered.drift = [](ConstSpan, Span out) { out[0] = 0.0; };
    centered.jump_amplitude = [](ConstSpan z, ConstSpan, Span out) { out[0] = z[0]; };
    centered.jump_rate = [](ConstSpan, ConstSpan) { return 1.0; };
    centered.rate_bound = 1.0;
    centered.measure = build_layered_measure({Layer::interval(-1.0, 1.0)}, 1, 1.0);
    ScalarField lin([](ConstSpan x) { return 2.0 * x[0]; });
    CHECK(apply_limit_generator(centered, lin, Vec{0.3}).value == doctest::Approx(0.0).epsilon(1e-10));

    LimitModel diffusion = centered;
    diffusion.jump_rate = [](ConstSpan, ConstSpan) { return 0.0; };
    diffusion.dim_noise = 1;
    diffusion.diffusion = [](ConstSpan, Span out) { out[0] = 0.9; };
    ScalarField quad([](ConstSpan x) { return x[0] * x[0]; });
    CHECK(apply_limit_generator(diffusion, quad, Vec{0.3}).value == doctest::Approx(0.81).epsilon(1e-7));
}

TEST_CASE("regime functionals: CIR band identities") {
    auto models = make_cir_models(sigma2_params());
    const auto& p = models.params;
    for (double t : {2.0, 5.0, 8.0}) {
        for (double x : {0.2, 0.6, 1.0}) {
            const auto rf = regime_functionals(models.inhomogeneous, t, Vec{x}, &models.limit);
            // centered fast band
            CHECK(std::fabs(rf.fast_first_norm) <= 1e-10);
            // intermediate band drift is exactly -a x
            CHECK(rf.jump_drift[0] == doctest::Approx(-p.reversion * x).epsilon(1e-8));
            // third moment (sigma^3/4) e^{-rt} f(x)
            const double third = 0.25 * std::pow(p.sigma, 3.0) * std::exp(-p.band_rate * t) * p.rate_fn(x);
            CHECK(rf.third_moment == doctest::Approx(third).epsilon(1e-9));
            // band variance integrates to sigma^2 f / 2 (the factor-2 ledger item)
            CHECK(rf.second_matrix[0] == doctest::Approx(0.5 * sq(p.sigma) * p.rate_fn(x)).epsilon(1e-9));
            CHECK(rf.second_matrix_psd);
        }
    }
}

TEST_CASE("regime functionals: slow-band gap equals the closed-form tail") {
    CirParams p = sigma2_params();
    p.truncation = 1.0e6;
    p.layer_edges = {3.0, 30.0, 1.0e6};
    auto models = make_cir_models(p);
    for (double t : {1.0, 2.0, 3.0}) {
        const double x = 0.8;
        const auto rf = regime_functionals(models.inhomogeneous, t, Vec{x}, &models.limit);
        const double band = std::exp(2.0 * p.band_rate * t);
        const double oracle = p.rate_fn(x) * p.jump_scale * (1.0 / (1.0 + band) - 1.0 / (1.0 + p.truncation));
        CHECK(rf.slow_gap == doctest::Approx(oracle).epsilon(5e-3));
    }
}

TEST_CASE("regime functionals: hawkes jump drift is f2 (1,-c) and is N-free") {
    HawkesParams hp;
    hp.kernel_weight = 2.0;
    const Vec x{0.3, -0.1};
    Vec drift_small, drift_big;
    for (int n : {25, 400}) {
        hp.particles = n;
        auto system = make_hawkes_system(hp);
        InhomogeneousModel view = as_inhomogeneous(system);
        view.regime = [](double, ConstSpan z) { return z[0] < 1.0 ? 2 : 3; };
        const auto rf = regime_functionals(view, 0.0, x);
        const double f2 = hp.excite_rate(x[1]);
        CHECK(rf.jump_drift[0] == doctest::Approx(f2).epsilon(1e-9));
        CHECK(rf.jump_drift[1] == doctest::Approx(-hp.kernel_weight * f2).epsilon(1e-9));
        // intermediate second moment f2 (1 + c^2) / (N - 1)
        const double mid = f2 * (1.0 + sq(hp.kernel_weight)) / (n - 1);
        CHECK(rf.second_moment_mid == doctest::Approx(mid).epsilon(1e-9));
        (drift_small.empty() ? drift_small : drift_big) = rf.jump_drift;
    }
    CHECK(drift_small[0] == doctest::Approx(drift_big[0]).epsilon(1e-12));
    CHECK(drift_small[1] == doctest::Approx(drift_big[1]).epsilon(1e-12));
}

TEST_CASE("epsilon: a model equal to its limit has zero gap") {
    HawkesParams hp;
    auto limit = make_hawkes_limit(hp);
    InhomogeneousModel view = as_inhomogeneous(limit);
    view.regime = [](double, ConstSpan) { return 3; };
    CHECK(epsilon_at(view, limit, Vec{0.4, 0.2}, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("epsilon: CIR gap matches the analytic formula and decays at the band rate") {
    auto models = make_cir_models(sigma2_params());
    const auto& p = models.params;
    auto analytic = [&](double x, double t) {
        const double f = p.rate_fn(x);
        const double fast = 0.25 * std::pow(p.sigma, 3.0) * std::exp(-p.band_rate * t) * f;
        const double mid = sq(p.reversion * x) * std::exp(-2.0 * p.band_rate * t);
        const double band = std::exp(2.0 * p.band_rate * t);
        const double slow = band >= p.truncation
                                ? 0.0
                                : f * p.jump_scale * (1.0 / (1.0 + band) - 1.0 / (1.0 + p.truncation));
        return fast + mid + slow;
    };
    for (double t : {4.0, 8.0}) {
        for (double x : {0.2, 1.0}) {
            CHECK(epsilon_at(models.inhomogeneous, models.limit, Vec{x}, t) ==
                  doctest::Approx(analytic(x, t)).epsilon(1e-6));
        }
    }
    std::vector<Vec> x_grid = {Vec{0.2}, Vec{0.6}, Vec{1.0}};
    const Vec t_grid = {6, 8, 10, 12, 14, 16, 18};
    const auto fit = epsilon_decay(models.inhomogeneous, models.limit, x_grid, t_grid);
    INFO("fitted rate ", fit.fitted_rate);
    CHECK(fit.decaying);
    CHECK(std::fabs(fit.fitted_rate - p.band_rate) <= 0.05 * p.band_rate);
}

TEST_CASE("epsilon: dictionary generator gaps respect the fitted envelope") {
    auto models = make_cir_models(sigma2_params());
    std::vector<Vec> x_grid = {Vec{0.4}, Vec{1.0}};
    const Vec t_grid = {6, 10, 14};
    const auto dict = build_dictionary(1, 8, 7, Box::cube(1, 2.5, 1.0));
    const auto fit = epsilon_decay(models.inhomogeneous, models.limit, x_grid, t_grid, {}, &dict);
    INFO("max gap ratio ", fit.max_gap_ratio);
    CHECK(fit.dictionary_violations == 0);
}

TEST_CASE("epsilon: hawkes particle schedule decays at the schedule rate") {
    HawkesParams hp;
    hp.kernel_weight = 2.0;
    const double rate = 0.5;
    auto nsched = make_hawkes_nschedule(hp, rate, 25.0);
    auto limit = make_hawkes_limit(hp);
    // analytic: f2(x2)(1+c^2)/(N(t)-1), all other terms vanish
    const Vec x{0.3, -0.2};
    for (double t : {8.0, 12.0}) {
        const double nm1 = std::exp(rate * t) - 1.0;
        const double oracle = hp.excite_rate(x[1]) * (1.0 + sq(hp.kernel_weight)) / nm1;
        CHECK(epsilon_at(nsched, limit, x, t) == doctest::Approx(oracle).epsilon(1e-8));
    }
    std::vector<Vec> x_grid = {Vec{0.3, -0.2}, Vec{0.1, 0.4}};
    const Vec t_grid = {8, 10, 12, 14, 16, 18, 20};
    const auto fit = epsilon_decay(nsched, limit, x_grid, t_grid);
    CHECK(std::fabs(fit.fitted_rate - rate) <= 0.02 * rate);
}

TEST_CASE("lyapunov: contraction satisfies the quadratic drift condition with (1,1)") {
    LimitModel m;
    m.dim_state = 1;
    m.dim_mark = 1;
    m.drift = [](ConstSpan x, Span out) { out[0] = -x[0]; };
    m.jump_amplitude = [](ConstSpan, ConstSpan, Span out) { out[0] = 0.0; };
    m.jump_rate = [](ConstSpan, ConstSpan) { return 0.0; };
    m.rate_bound = 1.0;
    m.measure = build_layered_measure({Layer::interval(0.0, 1.0)}, 1, 1.0);
    LyapunovSpec spec;
    spec.value = [](ConstSpan x) { return 1.0 + sq(x[0]); };
    spec.decay_rate = 1.0;
    spec.excursion_bound = 1.0;
    spec.compact = CompactSet::from_ball(BallSet(Vec{0.0}, 1.0));
    const auto res = lyapunov_check(m, spec, {Box::cube(1, 5.0), 41});
    CHECK(res.verified);
    CHECK(res.fitted_decay >= 1.0 - 1e-6);
    CHECK(res.fitted_decay <= 2.0);
    CHECK(res.violations.empty());  // LV = -2x^2 <= -V + 1 everywhere
}

TEST_CASE("lyapunov: repulsive drift is not verified") {
    LimitModel m;
    m.dim_state = 1;
    m.dim_mark = 1;
    m.drift = [](ConstSpan x, Span out) { out[0] = x[0]; };
    m.jump_amplitude = [](ConstSpan, ConstSpan, Span out) { out[0] = 0.0; };
    m.jump_rate = [](ConstSpan, ConstSpan) { return 0.0; };
    m.rate_bound = 1.0;
    m.measure = build_layered_measure({Layer::interval(0.0, 1.0)}, 1, 1.0);
    LyapunovSpec spec;
    spec.value = [](ConstSpan x) { return 1.0 + sq(x[0]); };
    spec.compact = CompactSet::from_ball(BallSet(Vec{0.0}, 1.0));
    CHECK_FALSE(lyapunov_check(m, spec, {Box::cube(1, 5.0), 41}).verified);
}

TEST_CASE("lyapunov: CIR limit verifies with a positive rate") {
    auto models = make_cir_models({});
    LyapunovSpec spec;
    spec.value = [](ConstSpan x) { return 1.0 + sq(x[0]); };
    spec.compact = CompactSet::from_ball(BallSet(Vec{0.0}, 3.0));
    GridSpec grid;
    grid.box.lo = {-6.0};
    grid.box.hi = {8.0};
    grid.points_per_dim = 57;
    const auto res = lyapunov_check(models.limit, spec, grid);
    INFO("fitted decay ", res.fitted_decay, " excursion ", res.fitted_excursion);
    CHECK(res.verified);
    CHECK(res.fitted_decay > 0.0);
}

TEST_CASE("generator consistency: Richardson semigroup quotients match the generator") {
    auto models = make_cir_models({});
    ScalarField quad([](ConstSpan x) { return x[0] * x[0]; });
    for (double x : {0.8, 1.6}) {
        auto quotient = [&](double h, std::uint64_t salt) {
            const int n = 150000;
            Vec vals;
            vals.reserve(n);
            for (int i = 0; i < n; ++i) {
                SimConfig c;
                c.dt = h / 8.0;
                c.horizon = h;
                c.seed = pair_stream_seed(salt, static_cast<std::size_t>(i));
                c.record = SimConfig::Record::Endpoint;
                const auto rec = simulate_limit(models.limit, Vec{x}, c);
                vals.push_back((sq(rec.final_state()[0]) - sq(x)) / h);
            }
            return std::make_pair(mean(vals), std_error(vals));
        };
        const auto e1 = quotient(0.02, 11);
        const auto e2 = quotient(0.01, 12);
        const auto e3 = quotient(0.005, 13);
        const double rich = 2.0 * e3.first - e2.first;
        const double rich_se = std::sqrt(4.0 * sq(e3.second) + sq(e2.second));
        const double lf = apply_limit_generator(models.limit, quad, Vec{x}).value;
        INFO("x=", x, " rich=", rich, " Lf=", lf, " se=", rich_se);
        CHECK(std::fabs(rich - lf) <= 3.0 * rich_se);
        // sanity: the h-sequence is consistent at 4 sigma as well
        CHECK(std::fabs(e1.first - lf) <= 4.0 * e1.second + 0.2);
    }
}

TEST_CASE("finite differences match analytic derivatives to 1e-6 relative") {
    auto f = [](ConstSpan x) { return std::exp(-sq(x[0])) * std::sin(x[1]); };
    const Vec x{0.4, 0.9};
    Vec grad(2);
    fd_gradient(f, x, grad);
    const double gx = -2.0 * x[0] * std::exp(-sq(x[0])) * std::sin(x[1]);
    const double gy = std::exp(-sq(x[0])) * std::cos(x[1]);
    CHECK(grad[0] == doctest::Approx(gx).epsilon(1e-6));
    CHECK(grad[1] == doctest::Approx(gy).epsilon(1e-6));
    Vec hess(4);
    fd_hessian(f, x, hess);
    const double hxy = -2.0 * x[0] * std::exp(-sq(x[0])) * std::cos(x[1]);
    CHECK(hess[1] == doctest::Approx(hxy).epsilon(1e-5));
}

TEST_CASE("seminorms: constant coefficients without jumps collapse to theta = 1") {
    LimitModel m;
    m.dim_state = 1;
    m.dim_mark = 1;
    m.dim_noise = 1;
    m.drift = [](ConstSpan, Span out) { out[0] = 0.4; };
    m.diffusion = [](ConstSpan, Span out) { out[0] = 0.8; };
    m.jump_amplitude = [](ConstSpan, ConstSpan, Span out) { out[0] = 0.0; };
    m.jump_rate = [](ConstSpan, ConstSpan) { return 0.0; };
    m.rate_bound = 1.0;
    m.measure = build_layered_measure({Layer::interval(0.0, 1.0)}, 1, 1.0);
    InhomogeneousModel view;
    view.dim_state = 1;
    view.dim_mark = 1;
    view.drift = [](double, ConstSpan, Span out) { out[0] = 0.4; };
    view.jump_amplitude = [](double, ConstSpan, ConstSpan, Span out) { out[0] = 0.0; };
    view.jump_rate = [](double, ConstSpan, ConstSpan) { return 0.0; };
    view.rate_bound = 1.0;
    view.measure = m.measure;
    view.regime = [](double, ConstSpan) { return 3; };
    GridSpec grid;
    grid.box = Box::cube(1, 2.0);
    grid.points_per_dim = 9;
    const auto rep = seminorm_report(m, view, 1.0, 1.0, grid, 0.5);
    CHECK(rep.theta == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rep.gamma_q == doctest::Approx(0.0));
    CHECK(rep.log_q3 == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("seminorms: CIR regularity mass is finite and decreasing in t0") {
    auto models = make_cir_models({});
    GridSpec grid;
    grid.box.lo = {0.2};
    grid.box.hi = {2.5};
    grid.points_per_dim = 7;
    const auto early = seminorm_report(models.limit, models.inhomogeneous, 2.0, 2.0, grid,
                                       models.params.band_rate);
    const auto late = seminorm_report(models.limit, models.inhomogeneous, 2.0, 4.0, grid,
                                      models.params.band_rate);
    CHECK(std::isfinite(early.c_t0));
    CHECK(std::isfinite(late.c_t0));
    CHECK(late.c_t0 <= early.c_t0 + 1e-9);
    CHECK(early.bound(2.0, 2.0) > late.bound(4.0, 2.0));
    CHECK(early.fitted_m1 >= 0.0);
}

TEST_CASE("seminorms: hawkes reset amplitude bracket matches the closed form") {
    HawkesParams hp;
    auto limit = make_hawkes_limit(hp);
    auto nsched = make_hawkes_nschedule(hp, 0.5, 10.0);
    GridSpec grid;
    grid.box.lo = {-1.0, -1.0};
    grid.box.hi = {1.5, 1.5};
    grid.points_per_dim = 5;
    const auto rep = seminorm_report(limit, nsched, 1.0, 2.0, grid, 0.5);
    // d c / d x1 = (-1, 0) on the reset layer: bracket = max_p' (sup f1)^{1/p'}
    double f1_sup = 0.0;
    for (double x : linspace(-1.0, 1.5, 5)) f1_sup = std::max(f1_sup, hp.reset_rate(x));
    double oracle = 0.0;
    for (int pp : {1, 2, 3, 4, 5, 6, 8, 12}) oracle = std::max(oracle, std::pow(f1_sup, 1.0 / pp));
    CHECK(rep.amp_bracket_by_order[1] == doctest::Approx(oracle).epsilon(1e-5));
}
