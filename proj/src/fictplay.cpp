#include "mfstop/fictplay.hpp"

#include "mfstop/kernels.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mfstop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// dxi rows from xi rows (dxi_0 = xi_0, the mass of the 0- -> 0 jump).
void control_increments(std::span<const double> xi, int particles, int nodes,
                        std::span<double> dxi) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < particles; ++p) {
        const double* row = xi.data() + static_cast<std::size_t>(p) * nodes;
        double* out = dxi.data() + static_cast<std::size_t>(p) * nodes;
        double prev = 0.0;
        for (int i = 0; i < nodes; ++i) {
            out[i] = row[i] - prev;
            prev = row[i];
        }
    }
}

// Stopping measure from an increment matrix on the fixed ensemble support.
JointMeasure measure_from_increments(const ParticleEnsemble& ens, std::span<const double> dxi) {
    JointMeasure mu;
    const int nodes = ens.grid.nodes();
    const double inv_n = 1.0 / ens.particles;
    mu.s.reserve(static_cast<std::size_t>(ens.particles) * 2);
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* d = dxi.data() + static_cast<std::size_t>(p) * nodes;
        for (int i = 0; i < nodes; ++i)
            if (d[i] > 0.0) mu.push(ens.grid.node(i), x[i], d[i] * inv_n);
    }
    return mu;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    return std::max(kernels::max_signed_diff(a, b), kernels::max_signed_diff(b, a));
}

[[noreturn]] void report_monotonicity_violation(std::span<const double> now,
                                                std::span<const double> before, int nodes,
                                                double tol, bool expect_decrease) {
    for (std::size_t idx = 0; idx < now.size(); ++idx) {
        const double d = expect_decrease ? now[idx] - before[idx] : before[idx] - now[idx];
        if (d > tol) {
            std::ostringstream msg;
            msg << "supermodular_play: averaged control not "
                << (expect_decrease ? "nonincreasing" : "nondecreasing") << " at particle "
                << idx / nodes << ", node " << idx % nodes << " (" << before[idx] << " -> "
                << now[idx] << ")";
            throw std::runtime_error(msg.str());
        }
    }
    throw std::logic_error("supermodular_play: violation vanished on relocation");
}

} // namespace

Discretization make_discretization(const ModelSpec& model, const SolverConfig& cfg) {
    Discretization disc;
    disc.time = TimeGrid(model.horizon, cfg.time_steps);
    disc.q_levels = cfg.q_levels;

    double lo, hi;
    if (model.domain_hint) {
        lo = model.domain_hint->first;
        hi = model.domain_hint->second;
    } else {
        // Deterministic pilot run sizes the truncated domain.
        const int n_pilot = 4096;
        ParticleEnsemble pilot =
            simulate_paths(model, disc.time, n_pilot, cfg.seed ^ 0xa5a5a5a5a5a5a5a5ull);
        const int nodes = disc.time.nodes();
        std::vector<double> xt(n_pilot);
        double mean0 = 0.0;
        for (int p = 0; p < n_pilot; ++p) {
            mean0 += pilot.state_at(p, 0);
            xt[p] = pilot.state_at(p, nodes - 1);
        }
        mean0 /= n_pilot;
        const double mean_t = kernels::sum(xt) / n_pilot;
        double var = 0.0;
        for (double v : xt) var += (v - mean_t) * (v - mean_t);
        const double sd = std::sqrt(var / n_pilot);
        const double half = 6.0 * std::max(sd, 1e-3);
        lo = mean0 - half;
        hi = mean0 + half;
    }
    disc.space = SpaceGrid(lo, hi, cfg.space_bins);
    return disc;
}

double exploitability(const ModelSpec& model, const ParticleEnsemble& ens,
                      const FeedbackPolicy& pol_br, const FeedbackPolicy& pol_bar,
                      const MeasureFlow& m, const JointMeasure& mu, const SolverConfig& cfg) {
    const std::size_t len = static_cast<std::size_t>(ens.particles) * ens.grid.nodes();
    std::vector<double> xi_br(len), xi_bar(len);
    apply_policy_to(ens, pol_br, xi_br);
    apply_policy_to(ens, pol_bar, xi_bar);
    const FlowFeatures mf = FlowFeatures::build(model, m);
    const MuFeatures muf = MuFeatures::build(model, mu);
    return eval_singular(model, ens, xi_br, m, mf, mu, muf, cfg) -
           eval_singular(model, ens, xi_bar, m, mf, mu, muf, cfg);
}

EquilibriumResult fictitious_play(const ModelSpec& model, const SolverConfig& cfg,
                                  const FeedbackPolicy& init, const Discretization& disc,
                                  ParticleEnsemble& ens, MonotoneDirection monotone) {
    cfg.validate();
    const int nodes = disc.time.nodes();
    const std::size_t len = static_cast<std::size_t>(ens.particles) * nodes;
    const TransitionKernel kernel = TransitionKernel::build(model, disc.time, disc.space);

    EquilibriumResult result;
    result.config_echo = cfg;

    // Initialization: xi_bar^0 = applied init policy, averages = Gamma of it.
    apply_policy_to(ens, init, ens.xi_bar);
    MeasureFlow m_bar = gamma_flow(ens, ens.xi_bar, disc);
    std::vector<double> dxi_bar(len);
    control_increments(ens.xi_bar, ens.particles, nodes, dxi_bar);
    JointMeasure mu_bar = measure_from_increments(ens, dxi_bar);

    // Previous best-response measures for the step diagnostics.
    MeasureFlow m_prev = m_bar;
    JointMeasure mu_prev = mu_bar;

    std::vector<double> dxi_new(len);
    std::vector<double> xi_bar_before; // only kept when monotonicity is asserted
    if (monotone != MonotoneDirection::none) xi_bar_before.resize(len);

    double max_avg_gap = 0.0;
    bool converged = false;
    int iter = 0;

    for (; iter < cfg.n_max; ++iter) {
        const auto t0 = Clock::now();
        IterationStats row;
        row.iter = iter;

        const FlowFeatures mf = FlowFeatures::build(model, m_bar);
        const MuFeatures muf = MuFeatures::build(model, mu_bar);

        // Best response against the running averages.
        BestResponse br = solve_best_response(model, m_bar, mf, mu_bar, muf, cfg, disc, kernel);
        apply_policy_to(ens, br.policy, ens.xi);
        result.policy = std::move(br.policy);

        // Exploitability and current payoff, both on the common ensemble so
        // the discretization bias cancels in the difference.
        const double j_br = eval_singular(model, ens, ens.xi, m_bar, mf, mu_bar, muf, cfg);
        const double j_bar = eval_singular(model, ens, ens.xi_bar, m_bar, mf, mu_bar, muf, cfg);
        row.epsilon = j_br - j_bar;
        row.payoff = j_bar;

        // Measures generated by the new best response.
        MeasureFlow m_new = gamma_flow(ens, ens.xi, disc);
        control_increments(ens.xi, ens.particles, nodes, dxi_new);
        JointMeasure mu_new = measure_from_increments(ens, dxi_new);

        row.d1_mu_step = wasserstein1(mu_prev, mu_new, cfg.ot_max_atoms);
        row.dM_m_step = flow_distance(m_prev, m_new);
        row.residual_gap = row.epsilon;
        row.residual_m = flow_distance(m_bar, m_new);
        row.residual_mu = wasserstein1(mu_bar, mu_new, cfg.ot_max_atoms);

        if (!std::isfinite(row.epsilon) || !std::isfinite(row.payoff)) {
            std::ostringstream msg;
            msg << "fictitious_play: non-finite payoff at iteration " << iter;
            throw std::runtime_error(msg.str());
        }

        // Averaging step: controls pathwise, measures by linearity.
        const double w_new = 1.0 / (iter + 1.0);
        const double w_old = iter / (iter + 1.0);
        if (monotone != MonotoneDirection::none)
            std::copy(ens.xi_bar.begin(), ens.xi_bar.end(), xi_bar_before.begin());
        kernels::axpby(w_new, ens.xi, w_old, ens.xi_bar);
        kernels::axpby(w_new, m_new.mass, w_old, m_bar.mass);
        kernels::axpby(w_new, dxi_new, w_old, dxi_bar);
        mu_bar = measure_from_increments(ens, dxi_bar);

        if (monotone != MonotoneDirection::none) {
            constexpr double tol = 1e-10;
            const bool decrease = monotone == MonotoneDirection::earliest;
            const double worst = decrease
                                     ? kernels::max_signed_diff(ens.xi_bar, xi_bar_before)
                                     : kernels::max_signed_diff(xi_bar_before, ens.xi_bar);
            if (worst > tol)
                report_monotonicity_violation(ens.xi_bar, xi_bar_before, nodes, tol, decrease);
        }

        // Averaging consistency: Gamma of the averaged control must equal the
        // averaged measures (linearity of Gamma, up to accumulated rounding).
        {
            MeasureFlow check = gamma_flow(ens, ens.xi_bar, disc);
            max_avg_gap = std::max(max_avg_gap, max_abs_diff(check.mass, m_bar.mass));
        }

        m_prev = std::move(m_new);
        mu_prev = std::move(mu_new);

        row.seconds = seconds_since(t0);
        result.diagnostics.push_back(row);
        result.final_epsilon = row.epsilon;

        if (row.epsilon < cfg.fp_tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    result.converged = converged;
    result.iterations = iter;
    result.avg_consistency_gap = max_avg_gap;
    result.m = std::move(m_bar);
    result.mu = std::move(mu_bar);
    result.xi_bar = ens.xi_bar;
    result.mean_xi_bar.assign(nodes, 0.0);
    {
        std::vector<double> buf(ens.particles);
        for (int i = 0; i < nodes; ++i) {
            for (int p = 0; p < ens.particles; ++p) buf[p] = ens.xi_bar[p * static_cast<std::size_t>(nodes) + i];
            result.mean_xi_bar[i] = kernels::sum(buf) / ens.particles;
        }
    }
    if (result.policy.next_level.empty()) {
        // n_max = 0: no iteration ran; return the initialization as policy.
        result.policy = init;
    }
    return result;
}

EquilibriumResult fictitious_play(const ModelSpec& model, const SolverConfig& cfg,
                                  const FeedbackPolicy& init) {
    const Discretization disc = make_discretization(model, cfg);
    ParticleEnsemble ens = simulate_paths(model, disc.time, cfg.particles, cfg.seed);
    return fictitious_play(model, cfg, init, disc, ens, MonotoneDirection::none);
}

EquilibriumResult supermodular_play(const ModelSpec& model, const SolverConfig& cfg,
                                    MonotoneDirection direction, const Discretization& disc,
                                    ParticleEnsemble& ens) {
    if (!model.structure_flags.supermodular || !model.supermodular)
        throw std::invalid_argument("supermodular_play: model is not flagged supermodular");
    if (direction == MonotoneDirection::none)
        throw std::invalid_argument("supermodular_play: pick a direction");
    const FeedbackPolicy init =
        direction == MonotoneDirection::earliest
            ? FeedbackPolicy::immediate_stop(disc.time, disc.space, disc.q_levels)
            : FeedbackPolicy::never_stop(disc.time, disc.space, disc.q_levels);
    return fictitious_play(model, cfg, init, disc, ens, direction);
}

EquilibriumResult supermodular_play(const ModelSpec& model, const SolverConfig& cfg,
                                    MonotoneDirection direction) {
    const Discretization disc = make_discretization(model, cfg);
    ParticleEnsemble ens = simulate_paths(model, disc.time, cfg.particles, cfg.seed);
    return supermodular_play(model, cfg, direction, disc, ens);
}

SweepReport lambda_sweep(const ModelSpec& model, const SolverConfig& cfg,
                         const std::vector<double>& lambdas) {
    if (lambdas.empty() || lambdas.back() != 0.0)
        throw std::invalid_argument("lambda_sweep: list must be decreasing and end at 0");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (lambdas[i] >= lambdas[i - 1])
            throw std::invalid_argument("lambda_sweep: list must be strictly decreasing");

    const Discretization disc = make_discretization(model, cfg);
    ParticleEnsemble ens = simulate_paths(model, disc.time, cfg.particles, cfg.seed);

    std::vector<EquilibriumResult> results;
    FeedbackPolicy init = FeedbackPolicy::never_stop(disc.time, disc.space, disc.q_levels);
    for (double lam : lambdas) {
        SolverConfig run_cfg = cfg;
        run_cfg.lambda = lam;
        results.push_back(fictitious_play(model, run_cfg, init, disc, ens));
        init = results.back().policy; // warm start the next temperature
    }

    SweepReport report;
    const EquilibriumResult& zero = results.back();
    for (std::size_t idx = 0; idx < lambdas.size(); ++idx) {
        const EquilibriumResult& r = results[idx];
        SweepRow row;
        row.lambda = lambdas[idx];
        row.d1_mu_to_zero = wasserstein1(r.mu, zero.mu, cfg.ot_max_atoms);
        row.dM_m_to_zero = flow_distance(r.m, zero.m);
        SolverConfig zero_cfg = cfg;
        zero_cfg.lambda = 0.0;
        row.residual_at_zero = equilibrium_residual(model, r.policy, ens, zero_cfg, disc);
        row.iterations = r.iterations;
        row.converged = r.converged;
        row.final_epsilon = r.final_epsilon;
        report.rows.push_back(row);
    }
    report.zero_result = results.back();
    return report;
}

FeedbackPolicy random_policy(const Discretization& disc, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double c0 = 0.6 * normal(rng);
    const double c1 = 0.8 * normal(rng);
    const double c2 = 0.8 * normal(rng);
    const double c3 = 0.5 * normal(rng);
    const double c4 = 0.5 * normal(rng);
    auto target = [&](double t, double x) {
        const double u = c0 + c1 * x + c2 * t + c3 * std::sin(2.0 * x + c4 * 3.0 * t);
        return 1.0 / (1.0 + std::exp(-u));
    };

    FeedbackPolicy pol(disc.time, disc.space, disc.q_levels);
    const int nodes = disc.time.nodes();
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < disc.space.bins; ++j) {
            const int lvl =
                i == nodes - 1 ? disc.q_levels - 1
                               : disc.q_index_up(target(disc.time.node(i), disc.space.center(j)));
            for (int k = 0; k < disc.q_levels; ++k) pol.set(i, j, k, std::max(k, lvl));
        }
    return pol;
}

LLProbeReport ll_monotonicity_probe(const ModelSpec& model, const SolverConfig& cfg, int trials) {
    if (trials < 1) throw std::invalid_argument("ll_monotonicity_probe: need trials >= 1");
    const Discretization disc = make_discretization(model, cfg);
    ParticleEnsemble ens = simulate_paths(model, disc.time, cfg.particles, cfg.seed);
    const std::size_t len = static_cast<std::size_t>(ens.particles) * ens.grid.nodes();

    LLProbeReport report;
    std::vector<double> xi_a(len), xi_b(len);
    for (int trial = 0; trial < trials; ++trial) {
        const FeedbackPolicy pa = random_policy(disc, cfg.seed * 1000003ull + 2 * trial);
        const FeedbackPolicy pb = random_policy(disc, cfg.seed * 1000003ull + 2 * trial + 1);
        apply_policy_to(ens, pa, xi_a);
        apply_policy_to(ens, pb, xi_b);
        auto [m_a, mu_a] = gamma(ens, xi_a, disc);
        auto [m_b, mu_b] = gamma(ens, xi_b, disc);

        const FlowFeatures mfa = FlowFeatures::build(model, m_a);
        const FlowFeatures mfb = FlowFeatures::build(model, m_b);
        const MuFeatures mua = MuFeatures::build(model, mu_a);
        const MuFeatures mub = MuFeatures::build(model, mu_b);

        const double j_aa = eval_singular(model, ens, xi_a, m_a, mfa, mu_a, mua, cfg);
        const double j_ba = eval_singular(model, ens, xi_b, m_a, mfa, mu_a, mua, cfg);
        const double j_ab = eval_singular(model, ens, xi_a, m_b, mfb, mu_b, mub, cfg);
        const double j_bb = eval_singular(model, ens, xi_b, m_b, mfb, mu_b, mub, cfg);

        report.values.push_back((j_aa - j_ba) - (j_ab - j_bb));
    }
    report.max_combination = report.values.front();
    for (double v : report.values) report.max_combination = std::max(report.max_combination, v);
    return report;
}

} // namespace mfstop
