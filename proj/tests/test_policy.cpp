#include "mfstop/policy.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace mfstop;

namespace {

ModelSpec still_model() {
    ModelSpec m;
    m.name = "still";
    m.horizon = 1.0;
    m.drift = [](double, double) { return 0.0; };
    m.vol = [](double, double) { return 0.0; };
    m.running_reward = [](double, double, const MeasureSlice&) { return 0.0; };
    m.terminal_reward = [](double, double, const MuView&) { return 0.0; };
    m.initial_law = InitialLaw::point(0.0);
    return m;
}

} // namespace

TEST_CASE("apply_policy: constant policies and stepwise increments") {
    const TimeGrid tg(1.0, 4);
    const SpaceGrid sg(-1.0, 1.0, 4);
    ModelSpec model = still_model();
    ParticleEnsemble ens = simulate_paths(model, tg, 8, 3);

    // immediate stop: xi = 1 from t_0
    apply_policy(ens, FeedbackPolicy::immediate_stop(tg, sg, 5));
    for (int p = 0; p < ens.particles; ++p)
        for (int i = 0; i < tg.nodes(); ++i) CHECK(ens.xi_row(p)[i] == 1.0);

    // never stop: 0 before T, jump at T
    apply_policy(ens, FeedbackPolicy::never_stop(tg, sg, 5));
    for (int p = 0; p < ens.particles; ++p) {
        for (int i = 0; i < tg.steps; ++i) CHECK(ens.xi_row(p)[i] == 0.0);
        CHECK(ens.xi_row(p)[tg.steps] == 1.0);
    }

    // +0.25 per step on a 4-step grid: xi = (0.25, 0.5, 0.75, 1, 1)
    FeedbackPolicy ramp(tg, sg, 5);
    for (int i = 0; i < tg.nodes(); ++i)
        for (int j = 0; j < sg.bins; ++j)
            for (int k = 0; k < 5; ++k)
                ramp.set(i, j, k, i == tg.nodes() - 1 ? 4 : std::min(4, k + 1));
    apply_policy(ens, ramp);
    CHECK(ens.xi_row(0)[0] == doctest::Approx(0.25));
    CHECK(ens.xi_row(0)[1] == doctest::Approx(0.5));
    CHECK(ens.xi_row(0)[2] == doctest::Approx(0.75));
    CHECK(ens.xi_row(0)[3] == doctest::Approx(1.0));
    CHECK(ens.xi_row(0)[4] == doctest::Approx(1.0));
    CHECK_NOTHROW(
        ParticleEnsemble::validate_control(ens.xi, ens.particles, tg.nodes()));
}

TEST_CASE("randomize: degenerate controls and the uniform-CDF oracle") {
    const TimeGrid tg(1.0, 10);
    ModelSpec model = still_model();

    // immediate stop -> all tau = 0; never-stop -> all tau = T
    {
        ParticleEnsemble ens = simulate_paths(model, tg, 64, 3);
        for (int p = 0; p < ens.particles; ++p)
            for (int i = 0; i < tg.nodes(); ++i) ens.xi_row(p)[i] = 1.0;
        RandomizedStops stops = randomize(ens, 17);
        for (int idx : stops.stop_index) CHECK(idx == 0);

        for (int p = 0; p < ens.particles; ++p)
            for (int i = 0; i < tg.nodes(); ++i) ens.xi_row(p)[i] = i == tg.steps ? 1.0 : 0.0;
        stops = randomize(ens, 17);
        for (int idx : stops.stop_index) CHECK(idx == tg.steps);
    }

    // deterministic xi(t) = t/T: empirical CDF of tau uniform on the grid
    // within 3 binomial standard errors per node (binomial oracle)
    {
        const int n = 100000;
        ParticleEnsemble ens = simulate_paths(model, tg, n, 3);
        for (int p = 0; p < ens.particles; ++p)
            for (int i = 0; i < tg.nodes(); ++i) ens.xi_row(p)[i] = tg.node(i) / tg.horizon;
        RandomizedStops stops = randomize(ens, 99);
        for (int i = 0; i < tg.nodes(); ++i) {
            double emp = 0.0;
            for (int p = 0; p < n; ++p) emp += stops.stop_index[p] <= i ? 1.0 : 0.0;
            emp /= n;
            const double target = tg.node(i) / tg.horizon;
            const double se = std::sqrt(std::max(target * (1.0 - target), 1e-12) / n);
            CHECK(std::abs(emp - target) <= 3.0 * se + 1e-9);
        }
    }
}

TEST_CASE("generalized_inverse: pinned examples and round trip") {
    // xi == 1 from t_0
    std::vector<double> ones{1.0, 1.0, 1.0, 1.0, 1.0};
    CHECK(generalized_inverse(ones, 0.7) == 0);

    // linear xi on [0,1] with T = 1, 4 steps: u = 0.5 hits node 2 (t = 0.5)
    std::vector<double> lin{0.0, 0.25, 0.5, 0.75, 1.0};
    CHECK(generalized_inverse(lin, 0.5) == 2);
    CHECK(generalized_inverse(lin, 0.51) == 3);

    // step control: 0 before 0.6, 1 after (grid of 5 nodes, T = 1)
    std::vector<double> step{0.0, 0.0, 0.0, 1.0, 1.0}; // jump at node 3 = t 0.75
    CHECK(generalized_inverse(step, 0.3) == 3);

    CHECK_THROWS(generalized_inverse(lin, 1.5));
    CHECK_THROWS(generalized_inverse(lin, -0.1));

    // {theta(u) <= i} <=> {xi_i >= u} on grid nodes
    for (double u : {0.0, 0.1, 0.25, 0.5, 0.9, 1.0}) {
        const int theta = generalized_inverse(lin, u);
        for (int i = 0; i < 5; ++i) CHECK((theta <= i) == (lin[i] >= u));
    }

    // re-inversion reproduces piecewise-constant grid controls exactly:
    // xi_t = sup{u : theta(1-u) <= t} evaluated on the u-grid of levels
    std::vector<double> pc{0.25, 0.25, 0.75, 0.75, 1.0};
    for (int i = 0; i < 5; ++i) {
        double sup_u = 0.0;
        for (int lev = 0; lev <= 100; ++lev) {
            const double u = lev / 100.0;
            if (generalized_inverse(pc, 1.0 - u) <= i) sup_u = std::max(sup_u, u);
        }
        CHECK(sup_u == doctest::Approx(pc[i]));
    }
}

TEST_CASE("lattice operations and the control order") {
    std::vector<double> a{0.2, 0.4, 0.6, 1.0};
    std::vector<double> b{0.1, 0.5, 0.6, 1.0};
    std::vector<double> meet(4), join(4);
    lattice_meet_join(a, b, meet, join);
    for (int i = 0; i < 4; ++i) {
        CHECK(meet[i] == std::min(a[i], b[i])); // elementwise oracle
        CHECK(join[i] == std::max(a[i], b[i]));
    }
    CHECK_NOTHROW(ParticleEnsemble::validate_control(meet, 1, 4));
    CHECK_NOTHROW(ParticleEnsemble::validate_control(join, 1, 4));

    // ordered pair: meet = lower, join = upper
    std::vector<double> lo{0.0, 0.0, 0.5, 1.0}, hi{0.5, 0.5, 0.5, 1.0};
    lattice_meet_join(lo, hi, meet, join);
    CHECK(meet == lo);
    CHECK(join == hi);

    // policy order
    std::vector<double> ones{1.0, 1.0, 1.0, 1.0};
    auto ord = policy_order(ones, lo);
    CHECK(ord.order == PolicyOrder::earlier);
    CHECK(!ord.tie);
    ord = policy_order(lo, lo);
    CHECK(ord.order == PolicyOrder::earlier);
    CHECK(ord.tie);
    ord = policy_order(a, b); // crossing
    CHECK(ord.order == PolicyOrder::incomparable);
}

TEST_CASE("policy CSV round trip validates invariants") {
    const TimeGrid tg(1.0, 3);
    const SpaceGrid sg(0.0, 1.0, 2);
    FeedbackPolicy pol(tg, sg, 4);
    for (int i = 0; i < tg.nodes(); ++i)
        for (int j = 0; j < sg.bins; ++j)
            for (int k = 0; k < 4; ++k)
                pol.set(i, j, k, i == tg.nodes() - 1 ? 3 : std::max(k, (i + j) % 4));

    const std::string path = "/tmp/mfstop_policy_test.csv";
    export_policy_csv(pol, path);
    FeedbackPolicy back = import_policy_csv(path);
    CHECK(back.next_level == pol.next_level);
    CHECK(back.q_levels == pol.q_levels);

    // corrupt a row so q' < q and confirm the import rejects it
    FeedbackPolicy broken = pol;
    broken.set(1, 0, 3, 0);
    export_policy_csv(broken, path);
    CHECK_THROWS(import_policy_csv(path));
    std::filesystem::remove(path);
}
