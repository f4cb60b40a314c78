#pragma once
// Feedback policies (the computational form of a singular control), their
// application to ensembles, randomized stopping, generalized inverses and
// the lattice operations used by the monotone iteration.

#include "mfstop/dynamics.hpp"
#include "mfstop/grid.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mfstop {

// Table q'(t_i, x_j, q_k): index of the post-decision cumulative stopping
// level, one of {0, 1/(Q-1), ..., 1}. Terminal rule q'(t_M, ., .) = 1.
struct FeedbackPolicy {
    TimeGrid tgrid;
    SpaceGrid sgrid;
    int q_levels = 33;
    std::vector<std::uint16_t> next_level; // nodes x bins x q_levels

    FeedbackPolicy() = default;
    FeedbackPolicy(const TimeGrid& t, const SpaceGrid& s, int q);

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * sgrid.bins + j) * q_levels + k;
    }
    std::uint16_t at(int i, int j, int k) const { return next_level[index(i, j, k)]; }
    void set(int i, int j, int k, int level) {
        next_level[index(i, j, k)] = static_cast<std::uint16_t>(level);
    }
    double q_value(int k) const { return static_cast<double>(k) / (q_levels - 1); }

    // q' >= q, q' in range, terminal row all ones.
    void validate() const;

    // Constant policies used as fictitious-play initializations.
    static FeedbackPolicy immediate_stop(const TimeGrid& t, const SpaceGrid& s, int q);
    static FeedbackPolicy never_stop(const TimeGrid& t, const SpaceGrid& s, int q);
};

// Per-particle randomized stops: tau = first grid time with xi_t > U.
struct RandomizedStops {
    std::vector<double> u;        // uniform draws, one per particle (resampled away from 0)
    std::vector<int> stop_index;  // grid index of tau (convention inf empty = T)
};

// Writes the controlled xi into ens.xi: xi(t_0) = q'(t_0, bin(X_0), 0),
// xi(t_{i+1}) = q'(t_{i+1}, bin(X_{i+1}), xi(t_i)). Aborts if the policy
// violates q' >= q.
void apply_policy(ParticleEnsemble& ens, const FeedbackPolicy& pol);

// Same recursion into a caller-provided matrix (particles x nodes), leaving
// the ensemble untouched.
void apply_policy_to(const ParticleEnsemble& ens, const FeedbackPolicy& pol,
                     std::span<double> xi_out);

// Randomized stopping times of the ensemble's xi paths. The U stream is
// seeded independently of the noise panel.
RandomizedStops randomize(const ParticleEnsemble& ens, std::uint64_t seed);
RandomizedStops randomize(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                          std::uint64_t seed);

// Right-continuous generalized inverse on the grid:
// theta(u) = inf{ t_i : xi(t_i) >= u } (index returned; xi_T = 1 makes it total).
int generalized_inverse(std::span<const double> xi_path, double u);

// Pointwise lattice operations; outputs are valid controls.
void lattice_meet_join(std::span<const double> a, std::span<const double> b,
                       std::span<double> meet, std::span<double> join);

enum class PolicyOrder { earlier, later, incomparable };
struct PolicyOrderResult {
    PolicyOrder order;
    bool tie = false; // identical within tolerance
};
// a is "earlier" than b iff a >= b at every node of every particle (1e-12).
PolicyOrderResult policy_order(std::span<const double> a, std::span<const double> b);

// CSV export/import of the policy table; import validates invariants.
void export_policy_csv(const FeedbackPolicy& pol, const std::string& path);
FeedbackPolicy import_policy_csv(const std::string& path);

} // namespace mfstop
