#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <jumpdiff/jumpdiff.hpp>

#include "support/oracles.hpp"

using namespace jumpdiff;

TEST_CASE("cir: factory validates and the limit covariance is PSD on a grid") {
    auto models = make_cir_models({});
    ValidationGrids grids;
    grids.x_grid = {Box::cube(1, 4.0), 17};
    grids.t_grid = {0.0, 1.0, 3.0};
    CHECK(validate_model(models.inhomogeneous, grids).all_pass);
    CHECK(validate_model(models.limit, grids).all_pass);
    CHECK_THROWS_AS((void)make_cir_limit(CirParams{.reversion = -1.0}), ModelError);
}

TEST_CASE("hawkes system: moment ODE oracle with constant excitation and no resets") {
    HawkesParams p;
    p.particles = 30;
    p.memory_decay = 1.2;
    p.base_input = 1.0;
    p.kernel_weight = 2.0;
    p.excite_rate = [](double) { return 0.7; };
    p.excite_rate_sup = 0.7;
    p.reset_rate = [](double) { return 0.0; };
    p.reset_rate_sup = 1e-9;
    auto system = make_hawkes_system(p);
    const double horizon = 3.0;
    const int n = 4000;
    Vec x1_ends, x2_ends;
    for (int i = 0; i < n; ++i) {
        SimConfig c;
        c.dt = 0.001;
        c.horizon = horizon;
        c.seed = pair_stream_seed(808, static_cast<std::size_t>(i));
        c.record = SimConfig::Record::Endpoint;
        const auto rec = simulate_limit(system, Vec{0.0, 0.0}, c);
        x1_ends.push_back(rec.final_state()[0]);
        x2_ends.push_back(rec.final_state()[1]);
    }
    // dm1/dt = -alpha m1 + f2; dm2/dt = -alpha m2 + b - c f2 (f2 constant)
    const auto rhs = [&](double, const Vec& m) {
        return Vec{-p.memory_decay * m[0] + 0.7, -p.memory_decay * m[1] + p.base_input - p.kernel_weight * 0.7};
    };
    const Vec oracle = oracles::rk4(rhs, Vec{0.0, 0.0}, 0.0, horizon, 1e-4);
    INFO("m1=", mean(x1_ends), " oracle1=", oracle[0], " m2=", mean(x2_ends), " oracle2=", oracle[1]);
    CHECK(std::fabs(mean(x1_ends) - oracle[0]) <= 3.0 * std_error(x1_ends) + 2e-3);
    CHECK(std::fabs(mean(x2_ends) - oracle[1]) <= 3.0 * std_error(x2_ends) + 2e-3);
    CHECK_THROWS_AS((void)make_hawkes_system(HawkesParams{.particles = 1}), ModelError);
}

TEST_CASE("hawkes: summary chain agrees with the per-particle oracle") {
    HawkesParams p;
    p.particles = 10;
    p.kernel_weight = 2.0;
    auto system = make_hawkes_system(p);
    const double horizon = 3.0;
    const int n = 5000;
    Vec sum_x1, sum_x2, part_x1, part_x2;
    oracles::PerParticleHawkes oracle{p};
    for (int i = 0; i < n; ++i) {
        SimConfig c;
        c.dt = 0.001;
        c.horizon = horizon;
        c.seed = pair_stream_seed(909, static_cast<std::size_t>(i));
        c.record = SimConfig::Record::Endpoint;
        const auto rec = simulate_limit(system, Vec{0.0, 0.0}, c);
        sum_x1.push_back(rec.final_state()[0]);
        sum_x2.push_back(rec.final_state()[1]);
        Rng rng = Rng::derive(1913, 0xabc, static_cast<std::uint64_t>(i));
        const auto [x1, x2] = oracle.run(horizon, rng);
        part_x1.push_back(x1);
        part_x2.push_back(x2);
    }
    const auto ks1 = ks_two_sample(sum_x1, part_x1);
    const auto ks2 = ks_two_sample(sum_x2, part_x2);
    INFO("p1=", ks1.p_value, " p2=", ks2.p_value);
    CHECK(ks1.p_value > 0.01);
    CHECK(ks2.p_value > 0.01);
}

TEST_CASE("hawkes limit: autonomous coordinate settles at the bisection root") {
    HawkesParams p;
    p.kernel_weight = 2.0;
    auto limit = make_hawkes_limit(p);
    const double root = oracles::bisect_root(
        [&](double x) { return -p.memory_decay * x - p.kernel_weight * p.excite_rate(x) + p.base_input; }, -5.0,
        5.0);
    SimConfig c;
    c.dt = 0.002;
    c.horizon = 20.0;
    c.seed = 4;
    c.record = SimConfig::Record::Endpoint;
    const auto rec = simulate_limit(limit, Vec{0.5, 2.0}, c);
    CHECK(rec.final_state()[1] == doctest::Approx(root).epsilon(1e-2));
    CHECK_THROWS_AS((void)make_hawkes_limit(HawkesParams{.memory_decay = 0.0}), ModelError);
}

TEST_CASE("hawkes limit: reset variants") {
    HawkesParams p;
    auto zero_reset = make_hawkes_limit(p);
    Vec disp(2);
    zero_reset.jump_amplitude(Vec{1.5}, Vec{0.8, 0.3}, disp);
    CHECK(0.8 + disp[0] == doctest::Approx(0.0));
    CHECK(disp[1] == doctest::Approx(0.0));

    p.reset_spread = 0.6;
    auto random_reset = make_hawkes_limit(p);
    SimConfig c;
    c.dt = 0.005;
    c.horizon = 400.0;
    c.seed = 10;
    const auto rec = simulate_limit(random_reset, Vec{0.2, 0.2}, c);
    Vec post;
    for (std::size_t r = 0; r < rec.rows(); ++r) {
        const int ei = rec.row_event[r];
        if (ei >= 0 && rec.events[static_cast<std::size_t>(ei)].accepted)
            post.push_back(rec.state_row(r)[0]);
    }
    REQUIRE(post.size() > 100);
    // post-reset values follow the mapped mark law Uniform(0, eps)
    const auto ks = ks_one_sample(post, [&](double v) { return std::clamp(v / p.reset_spread, 0.0, 1.0); });
    INFO("resets=", post.size(), " p=", ks.p_value);
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("hawkes mean-field gap decreases with the particle count") {
    HawkesParams p;
    p.kernel_weight = 2.0;
    MeanFieldConfig cfg;
    cfg.particle_counts = {10, 40};
    cfg.paths = 4000;
    cfg.dt = 0.004;
    cfg.horizon = 4.0;
    cfg.dict_size = 16;
    cfg.bootstrap = 60;
    const auto res = mean_field_gap(p, cfg);
    REQUIRE(res.curve.points.size() == 2);
    INFO("gap(10)=", res.curve.points[0].gap, " gap(40)=", res.curve.points[1].gap);
    CHECK(res.curve.points[1].gap < res.curve.points[0].gap);
}

TEST_CASE("cir positivity is not asserted: paths may cross zero") {
    CirParams p;
    p.sigma = 1.5;
    p.drift_level = 0.1;
    p.reversion = 0.5;
    p.jump_scale = 0.1;
    auto limit = make_cir_limit(p);
    bool crossed = false;
    for (int i = 0; i < 50 && !crossed; ++i) {
        SimConfig c;
        c.dt = 0.01;
        c.horizon = 5.0;
        c.seed = pair_stream_seed(31337, static_cast<std::size_t>(i));
        const auto rec = simulate_limit(limit, Vec{0.05}, c);
        for (std::size_t r = 0; r < rec.rows(); ++r)
            if (rec.state_row(r)[0] < 0.0) crossed = true;
    }
    CHECK(crossed);  // box-guarded only, no positivity clamp
}
