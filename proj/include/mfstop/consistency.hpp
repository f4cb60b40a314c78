#pragma once
// The consistency map Gamma(xi) = (m, mu) on particle ensembles, the
// fixed-point residual of the equilibrium definition, and the moment
// boundedness check.

#include "mfstop/bestresponse.hpp"
#include "mfstop/dynamics.hpp"
#include "mfstop/measures.hpp"
#include "mfstop/payoff.hpp"
#include "mfstop/policy.hpp"

#include <span>
#include <utility>

namespace mfstop {

// m_t(bin) = (1/N) sum_p 1{X_t in bin} (1 - xi_t); mu collects atoms
// (t_i, X_i, dxi_i / N) over all particles and nodes with dxi_i > 0,
// including the forced terminal jump. Mass conservation
// m_t(R) + mu(R x [0,t]) = 1 holds to particle bookkeeping accuracy.
std::pair<MeasureFlow, JointMeasure> gamma(const ParticleEnsemble& ens,
                                           std::span<const double> xi_matrix,
                                           const Discretization& disc);
std::pair<MeasureFlow, JointMeasure> gamma(const ParticleEnsemble& ens,
                                           const Discretization& disc);

// Flow part only (cheap path for the averaging consistency check).
MeasureFlow gamma_flow(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                       const Discretization& disc);

// Pairing <psi, mu^xi> evaluated pathwise through Abel summation
//   sum_i psi(t_i, X_i) dxi_i = psi(T, X_T) - sum_i xi_i (psi(t_{i+1}, X_{i+1}) - psi(t_i, X_i)),
// which preserves the control ordering exactly for monotone-in-t psi.
double psi_pairing(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                   const std::function<double(double, double)>& psi);

struct ResidualTriple {
    double optimality_gap = 0.0; // J(xi') - J(xi) >= 0 at frozen measures
    double flow_gap = 0.0;       // d^M_1(m, m^{xi'})
    double mu_gap = 0.0;         // d_1(mu, mu^{xi'})
};

// Applies pol, computes Gamma, re-solves the best response, and reports how
// far pol is from a fixed point.
ResidualTriple equilibrium_residual(const ModelSpec& model, const FeedbackPolicy& pol,
                                    const ParticleEnsemble& ens, const SolverConfig& cfg,
                                    const Discretization& disc);

// True iff both moments are bounded by C_p = T^p + empirical sup-moment of
// the same ensemble.
bool moment_bound_check(const MeasureFlow& m, const JointMeasure& mu, double p,
                        const ParticleEnsemble& ens);

} // namespace mfstop
