#pragma once
// The entropy-regularized objective in its three equivalent forms:
// the singular-control form (dt + d xi sums), the randomized-stopping form
// (realized tau and the -lambda(1 + log U) penalty), and the
// integration-by-parts form built on f_hat = f + Lg.

#include "mfstop/dynamics.hpp"
#include "mfstop/measures.hpp"
#include "mfstop/model.hpp"
#include "mfstop/policy.hpp"

#include <cstdint>
#include <span>

namespace mfstop {

struct SolverConfig {
    double lambda = 0.5;

    int time_steps = 50;  // M
    int space_bins = 200; // J
    int q_levels = 33;    // Q

    int particles = 20000;
    std::uint64_t seed = 1;

    double fp_tol = 1e-3; // exploitability stopping threshold
    double mc_tol = 2e-3; // Monte Carlo noise allowance in cross-form checks
    int n_max = 200;

    int ot_max_atoms = 512; // exact-transport budget per side
    int threads = 0;        // 0 = library default

    void validate() const;
};

// Per-slice reward features for a flow, precomputed once per (model, flow).
struct FlowFeatures {
    std::vector<double> centers;
    std::vector<std::vector<double>> per_slice;
    static FlowFeatures build(const ModelSpec& model, const MeasureFlow& flow);
    MeasureSlice slice(const MeasureFlow& flow, int i) const;
};

// Feature view of a stopping measure.
struct MuFeatures {
    std::vector<double> values;
    static MuFeatures build(const ModelSpec& model, const JointMeasure& mu);
    MuView view(const JointMeasure& mu) const;
};

double entropy_value(double z, const EntropySpec& spec);

// Monte Carlo average over particles of
//   sum_i [ f(t_i, X_i, m_i)(1 - xi_i) + lambda E(xi_i) ] dt
//   + sum_i g(t_i, X_i, mu) dxi_i,
// with dxi_0 = xi_0 (the jump at 0- -> 0) and left-endpoint dt quadrature.
double eval_singular(const ModelSpec& model, const ParticleEnsemble& ens,
                     std::span<const double> xi_matrix, const MeasureFlow& m,
                     const JointMeasure& mu, const SolverConfig& cfg);

// Same with preassembled features (avoids re-deriving them in inner loops).
double eval_singular(const ModelSpec& model, const ParticleEnsemble& ens,
                     std::span<const double> xi_matrix, const MeasureFlow& m,
                     const FlowFeatures& mf, const JointMeasure& mu, const MuFeatures& muf,
                     const SolverConfig& cfg);

// Monte Carlo average of
//   sum_{t_i < tau} [ f(t_i, X_i, m_i) - lambda (1 + log U) ] dt + g(tau, X_tau, mu).
// For lambda = 0 this is the raw stopped payoff.
double eval_stopping(const ModelSpec& model, const ParticleEnsemble& ens,
                     const RandomizedStops& stops, const MeasureFlow& m, const JointMeasure& mu,
                     const SolverConfig& cfg);

// Monte Carlo average of
//   sum_i [ -f_hat(t_i, X_i, m_i, mu) xi_i + f(t_i, X_i, m_i) + lambda E(xi_i) ] dt
//   + g(T, X_T, mu),   f_hat = f + Lg.
// Requires the model's terminal_generator.
double eval_ibp(const ModelSpec& model, const ParticleEnsemble& ens,
                std::span<const double> xi_matrix, const MeasureFlow& m, const JointMeasure& mu,
                const SolverConfig& cfg);

} // namespace mfstop
