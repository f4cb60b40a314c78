#include "mfstop/payoff.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mfstop {

void SolverConfig::validate() const {
    if (lambda < 0.0) throw std::invalid_argument("SolverConfig: lambda must be >= 0");
    if (particles < 1) throw std::invalid_argument("SolverConfig: need particles >= 1");
    if (time_steps < 2) throw std::invalid_argument("SolverConfig: need time_steps >= 2");
    if (space_bins < 1) throw std::invalid_argument("SolverConfig: need space_bins >= 1");
    if (q_levels < 2) throw std::invalid_argument("SolverConfig: need q_levels >= 2");
    if (!(fp_tol > 0.0) || !(mc_tol > 0.0))
        throw std::invalid_argument("SolverConfig: tolerances must be > 0");
    if (n_max < 0) throw std::invalid_argument("SolverConfig: n_max must be >= 0");
}

double entropy_value(double z, const EntropySpec& spec) {
    if (!(z >= 0.0 && z <= 1.0)) throw std::invalid_argument("entropy_value: z outside [0,1]");
    return spec.value(z);
}

FlowFeatures FlowFeatures::build(const ModelSpec& model, const MeasureFlow& flow) {
    FlowFeatures f;
    f.centers = flow.sgrid.centers();
    f.per_slice.resize(flow.tgrid.nodes());
    if (model.m_features) {
        for (int i = 0; i < flow.tgrid.nodes(); ++i) {
            MeasureSlice raw = make_slice(flow, i, f.centers, {});
            f.per_slice[i] = model.m_features(raw);
        }
    }
    return f;
}

MeasureSlice FlowFeatures::slice(const MeasureFlow& flow, int i) const {
    return make_slice(flow, i, centers, per_slice[i]);
}

MuFeatures MuFeatures::build(const ModelSpec& model, const JointMeasure& mu) {
    MuFeatures f;
    if (model.mu_features) f.values = model.mu_features(mu);
    return f;
}

MuView MuFeatures::view(const JointMeasure& mu) const { return make_mu_view(mu, values); }

namespace {


// f and g sampled on the (node, particle) lattice would be the obvious
// layout, but all three forms only need per-particle passes, so each form
// walks rows and reduces one buffer with the fixed-order kernel sum.

} // namespace

double eval_singular(const ModelSpec& model, const ParticleEnsemble& ens,
                     std::span<const double> xi_matrix, const MeasureFlow& m,
                     const FlowFeatures& mf, const JointMeasure& mu, const MuFeatures& muf,
                     const SolverConfig& cfg) {
    if (!(ens.grid == m.tgrid)) throw std::invalid_argument("eval_singular: time grid mismatch");
    const int nodes = ens.grid.nodes();
    const double dt = ens.grid.dt();
    const MuView mu_view = muf.view(mu);

    std::vector<MeasureSlice> slices(nodes);
    for (int i = 0; i < nodes; ++i) slices[i] = mf.slice(m, i);

    std::vector<double> per_particle(ens.particles);
    bool bad = false;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* xi = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        double acc = 0.0;
        double prev_xi = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double t = ens.grid.node(i);
            if (i < nodes - 1) {
                const double f = model.running_reward(t, x[i], slices[i]);
                acc += (f * (1.0 - xi[i]) + cfg.lambda * model.entropy.value(xi[i])) * dt;
            }
            const double dxi = xi[i] - prev_xi;
            if (dxi != 0.0) acc += model.terminal_reward(t, x[i], mu_view) * dxi;
            prev_xi = xi[i];
        }
        if (!std::isfinite(acc)) bad = true;
        per_particle[p] = acc;
    }
    if (bad) throw std::runtime_error("eval_singular: non-finite reward evaluation");
    return kernels::sum(per_particle) / ens.particles;
}

double eval_singular(const ModelSpec& model, const ParticleEnsemble& ens,
                     std::span<const double> xi_matrix, const MeasureFlow& m,
                     const JointMeasure& mu, const SolverConfig& cfg) {
    return eval_singular(model, ens, xi_matrix, m, FlowFeatures::build(model, m), mu,
                         MuFeatures::build(model, mu), cfg);
}

double eval_stopping(const ModelSpec& model, const ParticleEnsemble& ens,
                     const RandomizedStops& stops, const MeasureFlow& m, const JointMeasure& mu,
                     const SolverConfig& cfg) {
    if (!(ens.grid == m.tgrid)) throw std::invalid_argument("eval_stopping: time grid mismatch");
    if (static_cast<int>(stops.stop_index.size()) != ens.particles)
        throw std::invalid_argument("eval_stopping: stops/ensemble mismatch");
    const int nodes = ens.grid.nodes();
    const double dt = ens.grid.dt();
    const FlowFeatures mf = FlowFeatures::build(model, m);
    const MuFeatures muf = MuFeatures::build(model, mu);
    const MuView mu_view = muf.view(mu);

    std::vector<MeasureSlice> slices(nodes);
    for (int i = 0; i < nodes; ++i) slices[i] = mf.slice(m, i);

    std::vector<double> per_particle(ens.particles);
    bool bad = false;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const int stop = stops.stop_index[p];
        const double penalty = cfg.lambda * (1.0 + std::log(stops.u[p]));
        double acc = 0.0;
        for (int i = 0; i < stop; ++i) {
            const double t = ens.grid.node(i);
            acc += (model.running_reward(t, x[i], slices[i]) - penalty) * dt;
        }
        acc += model.terminal_reward(ens.grid.node(stop), x[stop], mu_view);
        if (!std::isfinite(acc)) bad = true;
        per_particle[p] = acc;
    }
    if (bad) throw std::runtime_error("eval_stopping: non-finite reward evaluation");
    return kernels::sum(per_particle) / ens.particles;
}

double eval_ibp(const ModelSpec& model, const ParticleEnsemble& ens,
                std::span<const double> xi_matrix, const MeasureFlow& m, const JointMeasure& mu,
                const SolverConfig& cfg) {
    if (!model.has_terminal_generator())
        throw std::invalid_argument("eval_ibp: model lacks terminal_generator");
    if (!(ens.grid == m.tgrid)) throw std::invalid_argument("eval_ibp: time grid mismatch");
    const int nodes = ens.grid.nodes();
    const double dt = ens.grid.dt();
    const FlowFeatures mf = FlowFeatures::build(model, m);
    const MuFeatures muf = MuFeatures::build(model, mu);
    const MuView mu_view = muf.view(mu);

    std::vector<MeasureSlice> slices(nodes);
    for (int i = 0; i < nodes; ++i) slices[i] = mf.slice(m, i);

    std::vector<double> per_particle(ens.particles);
    bool bad = false;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* xi = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        double acc = 0.0;
        for (int i = 0; i < nodes - 1; ++i) {
            const double t = ens.grid.node(i);
            const double f = model.running_reward(t, x[i], slices[i]);
            const double f_hat = f + model.terminal_generator(t, x[i], mu_view);
            acc += (-f_hat * xi[i] + f + cfg.lambda * model.entropy.value(xi[i])) * dt;
        }
        acc += model.terminal_reward(ens.grid.horizon, x[nodes - 1], mu_view);
        if (!std::isfinite(acc)) bad = true;
        per_particle[p] = acc;
    }
    if (bad) throw std::runtime_error("eval_ibp: non-finite reward evaluation");
    return kernels::sum(per_particle) / ens.particles;
}

} // namespace mfstop
