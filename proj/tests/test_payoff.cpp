#include "mfstop/payoff.hpp"

#include "mfstop/consistency.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfstop;
using namespace mfstop::testsupport;

namespace {

struct Fixture {
    ModelSpec model;
    Discretization disc;
    ParticleEnsemble ens;
    MeasureFlow m;
    JointMeasure mu;
    SolverConfig cfg;

    explicit Fixture(ModelSpec mod, int particles = 4000, int steps = 20, std::uint64_t seed = 11)
        : model(std::move(mod)) {
        cfg.time_steps = steps;
        cfg.particles = particles;
        cfg.seed = seed;
        disc.time = TimeGrid(model.horizon, steps);
        disc.space = SpaceGrid(-3.0, 3.0, 60);
        disc.q_levels = 33;
        ens = simulate_paths(model, disc.time, particles, seed);
        fill_linear_control(ens);
        auto gm = gamma(ens, disc);
        m = std::move(gm.first);
        mu = std::move(gm.second);
    }
};

} // namespace

TEST_CASE("entropy_value: convention and bounds") {
    const EntropySpec e = EntropySpec::cumulative_residual();
    CHECK(entropy_value(1.0, e) == 0.0);
    CHECK(entropy_value(0.0, e) == 0.0);
    CHECK(entropy_value(std::exp(-1.0), e) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS(entropy_value(1.5, e));
}

TEST_CASE("eval_singular: degenerate controls") {
    Fixture fx(interaction_free([](double, double) { return 1.0; },
                                [](double t, double x) { return 2.0 + 0.5 * x + 0.0 * t; }));

    // immediate stop at lambda = 0: mean g(0, X_0)
    fill_immediate_stop(fx.ens);
    fx.cfg.lambda = 0.0;
    double mean_g0 = 0.0;
    for (int p = 0; p < fx.ens.particles; ++p) mean_g0 += 2.0 + 0.5 * fx.ens.state_at(p, 0);
    mean_g0 /= fx.ens.particles;
    CHECK(eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg) ==
          doctest::Approx(mean_g0).epsilon(1e-12));

    // never stop: sum f dt + mean g(T, X_T) = T * 1 + mean g
    fill_never_stop(fx.ens);
    double mean_gT = 0.0;
    for (int p = 0; p < fx.ens.particles; ++p)
        mean_gT += 2.0 + 0.5 * fx.ens.state_at(p, fx.disc.time.steps);
    mean_gT /= fx.ens.particles;
    CHECK(eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg) ==
          doctest::Approx(1.0 + mean_gT).epsilon(1e-10));
}

TEST_CASE("eval_singular: pure entropy accumulation at constant level") {
    // f = 0, g = 0, lambda = 1, xi held at z before the terminal jump:
    // value = E(z) * (T - dt) + E(z)*dt = E(z) * T on the left-endpoint grid
    Fixture fx(interaction_free([](double, double) { return 0.0; },
                                [](double, double) { return 0.0; }));
    const double z = 0.3;
    fill_constant_then_jump(fx.ens, z);
    fx.cfg.lambda = 1.0;
    const double ez = -z * std::log(z);
    // left-endpoint sum: nodes 0..M-1 all sit at level z
    const double expected = ez * fx.disc.time.horizon;
    CHECK(eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("eval_stopping matches eval_singular in expectation") {
    SUBCASE("lambda 0, deterministic never-stop") {
        Fixture fx(interaction_free([](double t, double) { return 1.0 + t; },
                                    [](double, double x) { return x; }));
        fill_never_stop(fx.ens);
        fx.cfg.lambda = 0.0;
        RandomizedStops stops = randomize(fx.ens, 4242);
        const double singular = eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg);
        const double stopping = eval_stopping(fx.model, fx.ens, stops, fx.m, fx.mu, fx.cfg);
        CHECK(stopping == doctest::Approx(singular).epsilon(1e-12));
    }

    SUBCASE("lambda 1, linear control, entropy identity at MC accuracy") {
        // f = 0, g = 0: the -(1 + log U) penalty must reproduce the entropy
        // integral (the key identity behind the stopping form)
        Fixture fx(interaction_free([](double, double) { return 0.0; },
                                    [](double, double) { return 0.0; }),
                   60000);
        fill_linear_control(fx.ens);
        fx.cfg.lambda = 1.0;
        RandomizedStops stops = randomize(fx.ens, 555);
        const double singular = eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg);
        const double stopping = eval_stopping(fx.model, fx.ens, stops, fx.m, fx.mu, fx.cfg);
        // paired noise dominated by log U; 4 sigma of the difference
        double var = 0.0;
        {
            // rough bound: per-particle penalty variance <= T^2 Var(log U) = 1
            var = 1.0;
        }
        const double tol = 4.0 * std::sqrt(var / fx.ens.particles);
        CHECK(std::abs(stopping - singular) <= tol);
    }
}

TEST_CASE("eval_ibp: exact rearrangement when g vanishes, O(dt) bias otherwise") {
    SUBCASE("g == 0 makes ibp identical to singular") {
        Fixture fx(interaction_free([](double t, double x) { return std::sin(x) + t; },
                                    [](double, double) { return 0.0; }));
        fill_linear_control(fx.ens);
        fx.cfg.lambda = 0.7;
        const double a = eval_singular(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg);
        const double b = eval_ibp(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg);
        CHECK(a == doctest::Approx(b).epsilon(1e-13));
    }

    SUBCASE("missing terminal_generator rejected") {
        Fixture fx(interaction_free([](double, double) { return 0.0; },
                                    [](double, double) { return 0.0; }));
        fx.model.terminal_generator = nullptr;
        CHECK_THROWS(eval_ibp(fx.model, fx.ens, fx.ens.xi, fx.m, fx.mu, fx.cfg));
    }

    SUBCASE("gbm benchmark: gap shrinks with dt") {
        ModelSpec gbm = make_gbm_model(0.05, 0.3, 1.0);
        double gaps[3];
        int idx = 0;
        for (int steps : {10, 20, 40}) {
            SolverConfig cfg;
            cfg.time_steps = steps;
            cfg.particles = 60000;
            cfg.lambda = 0.5;
            Discretization disc;
            disc.time = TimeGrid(1.0, steps);
            disc.space = SpaceGrid(0.05, 3.0, 60);
            disc.q_levels = 17;
            ParticleEnsemble ens = simulate_paths(gbm, disc.time, cfg.particles, 31);
            fill_linear_control(ens);
            auto [m, mu] = gamma(ens, disc);
            const double a = eval_singular(gbm, ens, ens.xi, m, mu, cfg);
            const double b = eval_ibp(gbm, ens, ens.xi, m, mu, cfg);
            gaps[idx++] = std::abs(a - b);
        }
        // the discrete integration-by-parts remainder is O(dt): fit a line
        // through (dt, gap) and require a roughly proportional shrink
        CHECK(gaps[2] <= 0.75 * gaps[0] + 2e-3);
    }
}

TEST_CASE("midpoint concavity of the control objective") {
    Fixture fx(interaction_free([](double t, double x) { return x - t; },
                                [](double, double x) { return 0.4 * x; }),
               3000);
    fx.cfg.lambda = 1.0;

    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int nodes = fx.disc.time.nodes();
    std::vector<double> a(fx.ens.xi.size()), b(fx.ens.xi.size()), mid(fx.ens.xi.size());
    for (int trial = 0; trial < 10; ++trial) {
        // random monotone controls
        for (int p = 0; p < fx.ens.particles; ++p) {
            double ca = 0.0, cb = 0.0;
            for (int i = 0; i < nodes; ++i) {
                const std::size_t idx = static_cast<std::size_t>(p) * nodes + i;
                ca = std::min(1.0, ca + 0.3 * u(rng));
                cb = std::min(1.0, cb + 0.3 * u(rng));
                a[idx] = i == nodes - 1 ? 1.0 : ca;
                b[idx] = i == nodes - 1 ? 1.0 : cb;
            }
        }
        for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * a[i] + 0.5 * b[i];
        const double ja = eval_singular(fx.model, fx.ens, a, fx.m, fx.mu, fx.cfg);
        const double jb = eval_singular(fx.model, fx.ens, b, fx.m, fx.mu, fx.cfg);
        const double jm = eval_singular(fx.model, fx.ens, mid, fx.m, fx.mu, fx.cfg);
        CHECK(jm >= 0.5 * ja + 0.5 * jb - 1e-9);
    }
}
