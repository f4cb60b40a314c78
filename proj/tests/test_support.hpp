#pragma once
// Shared helpers for the unit suites: small models with known structure and
// fillers for hand-built controls.

#include "mfstop/consistency.hpp"
#include "mfstop/dynamics.hpp"
#include "mfstop/model.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace mfstop::testsupport {

// f and g free of any measure interaction.
inline ModelSpec interaction_free(std::function<double(double, double)> f_tx,
                                  std::function<double(double, double)> g_tx,
                                  double vol = 0.5, double horizon = 1.0) {
    ModelSpec m;
    m.name = "interaction_free";
    m.horizon = horizon;
    m.drift = [](double, double) { return 0.0; };
    m.vol = [vol](double, double) { return vol; };
    m.running_reward = [f_tx](double t, double x, const MeasureSlice&) { return f_tx(t, x); };
    m.terminal_reward = [g_tx](double t, double x, const MuView&) { return g_tx(t, x); };
    m.terminal_generator = [](double, double, const MuView&) { return 0.0; };
    m.initial_law = InitialLaw::normal(0.0, 0.4);
    return m;
}

// Generic smooth rewards for oracle batteries; coefficients from the seed.
inline ModelSpec random_tiny_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const double a0 = n(rng), a1 = n(rng), a2 = n(rng);
    const double b0 = n(rng), b1 = n(rng);
    const double drift = 0.5 * n(rng);
    const double vol = 0.3 + 0.5 * std::abs(n(rng));
    ModelSpec m;
    m.name = "tiny";
    m.horizon = 1.0;
    m.drift = [drift](double, double) { return drift; };
    m.vol = [vol](double, double) { return vol; };
    m.running_reward = [a0, a1, a2](double t, double x, const MeasureSlice&) {
        return a0 + a1 * std::sin(2.0 * x) + a2 * t * x;
    };
    m.terminal_reward = [b0, b1](double, double x, const MuView&) {
        return b0 + b1 * std::tanh(x);
    };
    m.initial_law = InitialLaw::normal(0.0, 0.5);
    return m;
}

// xi(t) = t / T on every particle.
inline void fill_linear_control(ParticleEnsemble& ens) {
    const int nodes = ens.grid.nodes();
    for (int p = 0; p < ens.particles; ++p)
        for (int i = 0; i < nodes; ++i)
            ens.xi_row(p)[i] = ens.grid.node(i) / ens.grid.horizon;
}

inline void fill_constant_then_jump(ParticleEnsemble& ens, double level) {
    const int nodes = ens.grid.nodes();
    for (int p = 0; p < ens.particles; ++p)
        for (int i = 0; i < nodes; ++i) ens.xi_row(p)[i] = i == nodes - 1 ? 1.0 : level;
}

inline void fill_immediate_stop(ParticleEnsemble& ens) { fill_constant_then_jump(ens, 1.0); }

inline void fill_never_stop(ParticleEnsemble& ens) { fill_constant_then_jump(ens, 0.0); }

} // namespace mfstop::testsupport
