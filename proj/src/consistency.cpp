#include "mfstop/consistency.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace mfstop {

MeasureFlow gamma_flow(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                       const Discretization& disc) {
    MeasureFlow flow(disc.time, disc.space);
    const int nodes = disc.time.nodes();
    const double inv_n = 1.0 / ens.particles;
    // Serial accumulation: bin sums stay independent of the thread count and
    // summing pointwise-ordered nonnegative terms in a fixed order preserves
    // setwise orderings of controls exactly.
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* xi = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        for (int i = 0; i < nodes; ++i) {
            bool spilled = false;
            const int j = disc.space.bin_of(x[i], &spilled);
            if (spilled) ++flow.spill;
            flow.slice(i)[j] += (1.0 - xi[i]) * inv_n;
        }
    }
    return flow;
}

std::pair<MeasureFlow, JointMeasure> gamma(const ParticleEnsemble& ens,
                                           std::span<const double> xi_matrix,
                                           const Discretization& disc) {
    MeasureFlow flow = gamma_flow(ens, xi_matrix, disc);

    JointMeasure mu;
    const int nodes = disc.time.nodes();
    const double inv_n = 1.0 / ens.particles;
    mu.s.reserve(static_cast<std::size_t>(ens.particles) * 2);
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* xi = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        double prev = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double dxi = xi[i] - prev;
            if (dxi > 0.0) mu.push(disc.time.node(i), x[i], dxi * inv_n);
            prev = xi[i];
        }
    }
    return {std::move(flow), std::move(mu)};
}

std::pair<MeasureFlow, JointMeasure> gamma(const ParticleEnsemble& ens,
                                           const Discretization& disc) {
    return gamma(ens, ens.xi, disc);
}

double psi_pairing(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                   const std::function<double(double, double)>& psi) {
    const int nodes = ens.grid.nodes();
    std::vector<double> per_particle(ens.particles);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* xi = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        double acc = psi(ens.grid.horizon, x[nodes - 1]);
        for (int i = 0; i < nodes - 1; ++i) {
            const double dpsi = psi(ens.grid.node(i + 1), x[i + 1]) - psi(ens.grid.node(i), x[i]);
            acc -= xi[i] * dpsi;
        }
        per_particle[p] = acc;
    }
    return kernels::sum(per_particle) / ens.particles;
}

ResidualTriple equilibrium_residual(const ModelSpec& model, const FeedbackPolicy& pol,
                                    const ParticleEnsemble& ens, const SolverConfig& cfg,
                                    const Discretization& disc) {
    std::vector<double> xi(static_cast<std::size_t>(ens.particles) * ens.grid.nodes());
    apply_policy_to(ens, pol, xi);
    auto [m, mu] = gamma(ens, xi, disc);

    BestResponse br = solve_best_response(model, m, mu, cfg, disc);
    std::vector<double> xi_br(xi.size());
    apply_policy_to(ens, br.policy, xi_br);
    auto [m_br, mu_br] = gamma(ens, xi_br, disc);

    ResidualTriple r;
    r.optimality_gap =
        eval_singular(model, ens, xi_br, m, mu, cfg) - eval_singular(model, ens, xi, m, mu, cfg);
    r.flow_gap = flow_distance(m, m_br);
    r.mu_gap = wasserstein1(mu, mu_br, cfg.ot_max_atoms);
    return r;
}

bool moment_bound_check(const MeasureFlow& m, const JointMeasure& mu, double p,
                        const ParticleEnsemble& ens) {
    const double cap = std::pow(ens.grid.horizon, p) + moment_check(ens, p);
    double worst_flow = 0.0;
    for (int i = 0; i < m.tgrid.nodes(); ++i)
        worst_flow = std::max(worst_flow, pth_moment(m.sgrid, m.slice(i), p));
    const double mu_moment = pth_moment(mu, p);
    return worst_flow <= cap + 1e-12 && mu_moment <= cap + 1e-12;
}

} // namespace mfstop
