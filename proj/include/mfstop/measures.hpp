#pragma once
// Discrete representations of the two population objects the game couples
// through: the pre-stopping flow m (sub-probability histogram per time node)
// and the stopping distribution mu (atoms on [0,T] x R), plus the distances
// used as convergence diagnostics.

#include "mfstop/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mfstop {

// Flow of sub-probability histograms on the shared grids. Slice i is the
// histogram at time node t_i; total mass per slice is in [0,1] and
// nonincreasing in i (mass only leaves by stopping).
struct MeasureFlow {
    TimeGrid tgrid;
    SpaceGrid sgrid;
    std::vector<double> mass; // nodes() x bins, row-major per node
    std::int64_t spill = 0;   // particle-node pairs clamped into boundary bins

    MeasureFlow() = default;
    MeasureFlow(const TimeGrid& t, const SpaceGrid& s)
        : tgrid(t), sgrid(s), mass(static_cast<std::size_t>(t.nodes()) * s.bins, 0.0) {}

    std::span<const double> slice(int i) const {
        return {mass.data() + static_cast<std::size_t>(i) * sgrid.bins,
                static_cast<std::size_t>(sgrid.bins)};
    }
    std::span<double> slice(int i) {
        return {mass.data() + static_cast<std::size_t>(i) * sgrid.bins,
                static_cast<std::size_t>(sgrid.bins)};
    }
    double slice_total(int i) const;

    // Invariant check: masses in [0,1], nonincreasing in time, finite moments.
    void validate(double moment_order = 1.0) const;
};

// Atom list on [0,T] x R (struct of arrays). Total mass is 1 for the
// distribution of a full control (xi_T = 1) and may be < 1 mid-computation.
struct JointMeasure {
    std::vector<double> s; // stopping times
    std::vector<double> x; // stopped locations
    std::vector<double> w; // masses, > 0

    std::size_t size() const { return w.size(); }
    double total() const;
    void push(double si, double xi, double wi) {
        s.push_back(si);
        x.push_back(xi);
        w.push_back(wi);
    }
    void validate() const; // w > 0, total <= 1 + eps, cumulative-in-t trivially monotone
};

// Cemetery conventions for metrizing sub-probabilities: the missing mass
// sits on a point at distance d(z, cemetery) = |z - base_point| + 1.
struct CemeteryConfig {
    double base_point = 0.0;
};

// --- distances ------------------------------------------------------------

// Exact 1-d Wasserstein-1 between probability measures given as atom lists
// (quantile coupling on the sorted merge). Masses must agree within 1e-9.
double wasserstein1(std::span<const double> pos_a, std::span<const double> mass_a,
                    std::span<const double> pos_b, std::span<const double> mass_b);

// W1 between two histogram slices interpreted as probabilities on bin centers.
double wasserstein1(const SpaceGrid& grid, std::span<const double> a, std::span<const double> b);

// W1 between joint measures on [0,T] x R under the l1 ground metric
// |ds| + |dx|. Exact optimal transport when both sides have at most
// `max_atoms` distinct atoms; larger inputs are first coarsened onto an
// adaptive product grid with at most `max_atoms` cells.
double wasserstein1(const JointMeasure& a, const JointMeasure& b, int max_atoms = 512);

// Sub-probability distance d'_1: W1 after augmenting both sides with the
// missing mass on the cemetery point. Computed in closed form through the
// Lipschitz dual; equals cemetery-augmented transport exactly.
double wasserstein1_sub(std::span<const double> pos_a, std::span<const double> mass_a,
                        std::span<const double> pos_b, std::span<const double> mass_b,
                        const CemeteryConfig& cfg = {});
double wasserstein1_sub(const SpaceGrid& grid, std::span<const double> a,
                        std::span<const double> b, const CemeteryConfig& cfg = {});

// Discrete convergence-in-measure metric: left-endpoint Riemann sum of
// min(1, d'_1(m1_t, m2_t)) over the time grid. Grids must match.
double flow_distance(const MeasureFlow& a, const MeasureFlow& b, const CemeteryConfig& cfg = {});

// p-th moments used by the boundedness checks.
double pth_moment(const SpaceGrid& grid, std::span<const double> mass, double p);
double pth_moment(const JointMeasure& mu, double p); // integral of (t^p + |x|^p)

} // namespace mfstop
