#pragma once
// Particle layer: simulate the uncontrolled state once per run under common
// random numbers, then reuse the noise panel across every solver iteration.

#include "mfstop/grid.hpp"
#include "mfstop/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mfstop {

struct ParticleEnsemble {
    TimeGrid grid;
    int particles = 0;
    std::uint64_t seed = 0;

    // particle-major: row p holds nodes 0..M (state, xi, xi_bar) or steps 0..M-1 (noise)
    std::vector<double> state;
    std::vector<double> xi;
    std::vector<double> xi_bar;
    std::vector<double> noise;

    std::size_t row_len() const { return static_cast<std::size_t>(grid.nodes()); }
    std::span<const double> state_row(int p) const {
        return {state.data() + p * row_len(), row_len()};
    }
    std::span<const double> xi_row(int p) const { return {xi.data() + p * row_len(), row_len()}; }
    std::span<double> xi_row(int p) { return {xi.data() + p * row_len(), row_len()}; }
    std::span<const double> xi_bar_row(int p) const {
        return {xi_bar.data() + p * row_len(), row_len()};
    }
    std::span<double> xi_bar_row(int p) { return {xi_bar.data() + p * row_len(), row_len()}; }

    double state_at(int p, int i) const { return state[p * row_len() + i]; }

    // xi invariants: values in [0,1], nondecreasing per particle, terminal 1.
    static void validate_control(std::span<const double> xi_matrix, int particles, int nodes);
};

// Euler-Maruyama paths from the seeded generator; xi and xi_bar start as the
// never-stop control (0 before T, jump to 1 at T). Deterministic in
// (seed, n, grid, model); aborts on non-finite coefficient evaluations.
ParticleEnsemble simulate_paths(const ModelSpec& model, const TimeGrid& grid, int n,
                                std::uint64_t seed);

// Empirical sup_t mean |X_t|^p.
double moment_check(const ParticleEnsemble& ens, double p);

// Little-endian raw dump of the noise panel (row-major particle x step),
// for exact cross-language reproduction.
void dump_noise_panel(const ParticleEnsemble& ens, const std::string& path);

} // namespace mfstop
