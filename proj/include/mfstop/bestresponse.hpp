#pragma once
// Best response to a frozen population: backward dynamic programming on the
// (t, x, q) grid against the Euler-Maruyama one-step kernel projected onto
// the space bins, plus an exhaustive oracle for tiny instances and the
// pointwise reflecting-structure report.

#include "mfstop/grid.hpp"
#include "mfstop/measures.hpp"
#include "mfstop/model.hpp"
#include "mfstop/payoff.hpp"
#include "mfstop/policy.hpp"

#include <string>
#include <vector>

namespace mfstop {

struct ValueTable {
    TimeGrid tgrid;
    SpaceGrid sgrid;
    int q_levels = 0;
    // nodes x q_levels x bins (q-major per node so expectation dots run over
    // contiguous bins)
    std::vector<double> v;

    double at(int i, int k, int j) const {
        return v[(static_cast<std::size_t>(i) * q_levels + k) * sgrid.bins + j];
    }
    double& at(int i, int k, int j) {
        return v[(static_cast<std::size_t>(i) * q_levels + k) * sgrid.bins + j];
    }
};

struct BestResponse {
    FeedbackPolicy policy;
    ValueTable value;
};

// One-step transition weights: Gaussian increment from (t_i, x_j) integrated
// over bin intervals, tails absorbed into the boundary bins, renormalized.
struct TransitionKernel {
    SpaceGrid grid;
    int steps = 0;
    std::vector<int> first;        // (steps x bins): first bin of the band
    std::vector<int> count;        // (steps x bins): band length
    std::vector<double> weights;   // concatenated bands
    std::vector<std::size_t> offset;

    std::span<const double> band(int i, int j, int& first_bin) const {
        const std::size_t idx = static_cast<std::size_t>(i) * grid.bins + j;
        first_bin = first[idx];
        return {weights.data() + offset[idx], static_cast<std::size_t>(count[idx])};
    }

    static TransitionKernel build(const ModelSpec& model, const TimeGrid& t, const SpaceGrid& s);
};

// Bellman recursion for R_lambda(m, mu). Ties at lambda = 0 break toward the
// largest q' (earliest stopping); for lambda > 0 the maximizer is unique.
BestResponse solve_best_response(const ModelSpec& model, const MeasureFlow& m,
                                 const JointMeasure& mu, const SolverConfig& cfg,
                                 const Discretization& disc);

// Same with a prebuilt kernel and features (the fictitious-play loop reuses
// the kernel across iterations).
BestResponse solve_best_response(const ModelSpec& model, const MeasureFlow& m,
                                 const FlowFeatures& mf, const JointMeasure& mu,
                                 const MuFeatures& muf, const SolverConfig& cfg,
                                 const Discretization& disc, const TransitionKernel& kernel);

// Exhaustive adapted-strategy enumeration on the bin-trajectory prefix tree:
// the same discrete objective with no Markov state reuse. Budget-guarded
// (throws if bins^steps * q_levels^2 exceeds `budget`).
struct OracleResult {
    FeedbackPolicy policy;                 // filled on states the tree visits
    std::vector<double> root_value;        // optimum per starting bin, q = 0
    std::vector<std::uint8_t> visited;     // marks (i, j, k) states the tree reached
    std::size_t index(int i, int j, int k) const;
    int q_levels = 0;
    int bins = 0;
};
OracleResult brute_force_oracle(const ModelSpec& model, const MeasureFlow& m,
                                const JointMeasure& mu, const SolverConfig& cfg,
                                const Discretization& disc, std::size_t budget = 1000000);

// Reflecting-structure report: fraction of (particle, node) pairs where the
// DP-applied control equals the running maximum of the unconstrained
// pointwise maximizer z*(t, x) = clip(exp(-1 - f_hat / lambda), 0, 1),
// within one q-level. Default entropy and lambda > 0 only.
struct ReflectionReport {
    double fraction_within_one_level = 0.0;
    double worst_gap = 0.0;
    int worst_particle = -1;
    int worst_node = -1;
};
ReflectionReport pointwise_reflection_check(const ModelSpec& model, const MeasureFlow& m,
                                            const JointMeasure& mu, const SolverConfig& cfg,
                                            const Discretization& disc,
                                            const ParticleEnsemble& ens);

// Unconstrained pointwise maximizer of -f_hat z + lambda E(z) for the
// default entropy.
double reflection_target(double f_hat, double lambda);

// Export (t, x, q, V, q') rows.
void export_value_table_csv(const ValueTable& table, const FeedbackPolicy& policy,
                            const std::string& path);

} // namespace mfstop
