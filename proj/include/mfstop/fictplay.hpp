#pragma once
// Fictitious play: the averaged-control iteration, its exploitability and
// step diagnostics, the supermodular monotone variant, the vanishing-entropy
// sweep, and the Lasry-Lions cross-difference probe.

#include "mfstop/bestresponse.hpp"
#include "mfstop/consistency.hpp"
#include "mfstop/dynamics.hpp"
#include "mfstop/measures.hpp"
#include "mfstop/model.hpp"
#include "mfstop/payoff.hpp"
#include "mfstop/policy.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mfstop {

// Space domain from the model hint or a deterministic pilot simulation
// (initial-law mean +- 6 empirical standard deviations of X_T).
Discretization make_discretization(const ModelSpec& model, const SolverConfig& cfg);

struct IterationStats {
    int iter = 0;
    double epsilon = 0.0;       // J(best response) - J(averaged control), frozen measures
    double d1_mu_step = 0.0;    // d_1 between consecutive best-response stopping measures
    double dM_m_step = 0.0;     // d^M_1 between consecutive best-response flows
    double payoff = 0.0;        // J(averaged control) at its own measures
    double residual_gap = 0.0;  // the optimality component of the residual triple
    double residual_m = 0.0;
    double residual_mu = 0.0;
    double seconds = 0.0;       // wall time of the iteration
};

struct EquilibriumResult {
    FeedbackPolicy policy;              // final best-response policy
    std::vector<double> xi_bar;         // final averaged control, particles x nodes
    std::vector<double> mean_xi_bar;    // per-node average of the control
    MeasureFlow m;                      // final averaged flow
    JointMeasure mu;                    // final averaged stopping measure
    std::vector<IterationStats> diagnostics;
    bool converged = false;
    int iterations = 0;
    double final_epsilon = 0.0;
    double avg_consistency_gap = 0.0;   // worst gap between running averages and gamma(xi_bar)
    SolverConfig config_echo;
};

enum class MonotoneDirection { none, earliest, latest };

// Algorithm: iterate best response against the running averages, average the
// control pathwise and the measures by linearity, stop when the
// exploitability drops below fp_tol or n_max is reached.
EquilibriumResult fictitious_play(const ModelSpec& model, const SolverConfig& cfg,
                                  const FeedbackPolicy& init);

// Variant reusing a prepared ensemble/discretization (the sweep and the
// acceptance suite share one noise panel across solves).
EquilibriumResult fictitious_play(const ModelSpec& model, const SolverConfig& cfg,
                                  const FeedbackPolicy& init, const Discretization& disc,
                                  ParticleEnsemble& ens,
                                  MonotoneDirection monotone = MonotoneDirection::none);

// epsilon = J(pol_br applied) - J(pol_bar applied) at frozen (m, mu).
double exploitability(const ModelSpec& model, const ParticleEnsemble& ens,
                      const FeedbackPolicy& pol_br, const FeedbackPolicy& pol_bar,
                      const MeasureFlow& m, const JointMeasure& mu, const SolverConfig& cfg);

// Monotone iteration from the extreme initializations. Asserts the pathwise
// monotonicity of the averaged control at every iteration and aborts with
// the offending (particle, node) on violation.
EquilibriumResult supermodular_play(const ModelSpec& model, const SolverConfig& cfg,
                                    MonotoneDirection direction);
EquilibriumResult supermodular_play(const ModelSpec& model, const SolverConfig& cfg,
                                    MonotoneDirection direction, const Discretization& disc,
                                    ParticleEnsemble& ens);

struct SweepRow {
    double lambda = 0.0;
    double d1_mu_to_zero = 0.0; // d_1(mu^lambda, mu^0)
    double dM_m_to_zero = 0.0;  // d^M_1(m^lambda, m^0)
    ResidualTriple residual_at_zero;
    int iterations = 0;
    bool converged = false;
    double final_epsilon = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    EquilibriumResult zero_result; // the lambda = 0 solve
};

// Solves the game along a decreasing lambda list ending at 0, warm-starting
// each solve from the previous policy and reusing one noise panel.
SweepReport lambda_sweep(const ModelSpec& model, const SolverConfig& cfg,
                         const std::vector<double>& lambdas);

struct LLProbeReport {
    double max_combination = 0.0;
    std::vector<double> values; // one cross-difference per trial
};

// Samples random feedback-policy pairs and evaluates the Lasry-Lions
// cross-difference; for monotone-flagged models the max should sit below
// the Monte Carlo allowance.
LLProbeReport ll_monotonicity_probe(const ModelSpec& model, const SolverConfig& cfg, int trials);

// Random reflecting-type policy (smooth random target field snapped up to
// the q-grid); used by the probe and by tests.
FeedbackPolicy random_policy(const Discretization& disc, std::uint64_t seed);

} // namespace mfstop
