#include "mfstop/bestresponse.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mfstop {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check(bool cond, const char* msg) {
    if (!cond) throw std::runtime_error(msg);
}

// Stage value shared by the table DP and the tree oracle. Keeping one
// expression (and one reduction kernel for the expectation) makes the two
// routes agree bit for bit, so the oracle-equality test can demand exact
// equality instead of a tolerance.
inline double stage_value(double g, double q_next, double f, double lam_ent, double dt,
                          double continuation) {
    return g * q_next + (f * (1.0 - q_next) + lam_ent) * dt + continuation;
}

inline double terminal_value(double g, double q) { return g * (1.0 - q); }

} // namespace

TransitionKernel TransitionKernel::build(const ModelSpec& model, const TimeGrid& t,
                                         const SpaceGrid& s) {
    TransitionKernel k;
    k.grid = s;
    k.steps = t.steps;
    const std::size_t cells = static_cast<std::size_t>(t.steps) * s.bins;
    k.first.resize(cells);
    k.count.resize(cells);
    k.offset.resize(cells);

    const double dt = t.dt();
    const double sqdt = std::sqrt(dt);
    const double band_sigmas = 8.0;

    for (int i = 0; i < t.steps; ++i) {
        const double ti = t.node(i);
        for (int j = 0; j < s.bins; ++j) {
            const double x = s.center(j);
            const double b = model.drift(ti, x);
            const double sig = std::abs(model.vol(ti, x));
            check(std::isfinite(b) && std::isfinite(sig),
                  "TransitionKernel: non-finite coefficient");
            const double mean = x + b * dt;
            const double sd = sig * sqdt;
            const std::size_t idx = static_cast<std::size_t>(i) * s.bins + j;
            k.offset[idx] = k.weights.size();
            if (sd <= 0.0) {
                // deterministic step: all mass on the bin containing the mean
                k.first[idx] = s.bin_of(mean);
                k.count[idx] = 1;
                k.weights.push_back(1.0);
                continue;
            }
            int lo = s.bin_of(mean - band_sigmas * sd);
            int hi = s.bin_of(mean + band_sigmas * sd);
            k.first[idx] = lo;
            k.count[idx] = hi - lo + 1;
            double total = 0.0;
            for (int jj = lo; jj <= hi; ++jj) {
                // boundary bins absorb the tails
                const double a = jj == 0 ? -std::numeric_limits<double>::infinity()
                                         : (s.left_edge(jj) - mean) / sd;
                const double bb = jj == s.bins - 1 ? std::numeric_limits<double>::infinity()
                                                   : (s.left_edge(jj + 1) - mean) / sd;
                const double w = norm_cdf(bb) - norm_cdf(a);
                k.weights.push_back(w);
                total += w;
            }
            check(total > 0.0, "TransitionKernel: degenerate row");
            for (int jj = 0; jj < k.count[idx]; ++jj) k.weights[k.offset[idx] + jj] /= total;
        }
    }
    return k;
}

BestResponse solve_best_response(const ModelSpec& model, const MeasureFlow& m,
                                 const FlowFeatures& mf, const JointMeasure& mu,
                                 const MuFeatures& muf, const SolverConfig& cfg,
                                 const Discretization& disc, const TransitionKernel& kernel) {
    const TimeGrid& tg = disc.time;
    const SpaceGrid& sg = disc.space;
    const int Q = disc.q_levels;
    const int J = sg.bins;
    const int nodes = tg.nodes();
    const double dt = tg.dt();
    check(Q >= 2, "solve_best_response: empty q-grid");
    check(m.tgrid == tg && m.sgrid == sg, "solve_best_response: flow grid mismatch");

    const MuView mu_view = muf.view(mu);

    std::vector<double> qval(Q), lam_ent(Q);
    for (int k = 0; k < Q; ++k) {
        qval[k] = disc.q_value(k);
        lam_ent[k] = cfg.lambda * model.entropy.value(qval[k]);
    }

    BestResponse out;
    out.policy = FeedbackPolicy(tg, sg, Q);
    out.value.tgrid = tg;
    out.value.sgrid = sg;
    out.value.q_levels = Q;
    out.value.v.assign(static_cast<std::size_t>(nodes) * Q * J, 0.0);

    // Terminal condition: forced jump to xi = 1 collects g (1 - q).
    for (int j = 0; j < J; ++j) {
        const double g = model.terminal_reward(tg.horizon, sg.center(j), mu_view);
        check(std::isfinite(g), "solve_best_response: non-finite terminal reward");
        for (int k = 0; k < Q; ++k) {
            out.value.at(nodes - 1, k, j) = terminal_value(g, qval[k]);
            out.policy.set(nodes - 1, j, k, Q - 1);
        }
    }

    bool bad = false;
    for (int i = nodes - 2; i >= 0; --i) {
        const double t = tg.node(i);
        const MeasureSlice slice = mf.slice(m, i);
        const double* v_next = out.value.v.data() + (static_cast<std::size_t>(i) + 1) * Q * J;

#pragma omp parallel for schedule(static)
        for (int j = 0; j < J; ++j) {
            std::vector<double> w_row(Q), exp_next(Q);
            const double x = sg.center(j);
            const double f = model.running_reward(t, x, slice);
            const double g = model.terminal_reward(t, x, mu_view);
            if (!std::isfinite(f) || !std::isfinite(g)) {
                bad = true;
                continue;
            }

            int first_bin = 0;
            const auto band = kernel.band(i, j, first_bin);
            for (int k = 0; k < Q; ++k) {
                const double* col = v_next + static_cast<std::size_t>(k) * J + first_bin;
                exp_next[k] = kernels::dot(band, {col, band.size()});
            }

            for (int k = 0; k < Q; ++k)
                w_row[k] = stage_value(g, qval[k], f, lam_ent[k], dt, exp_next[k]);

            // Suffix max over q' >= q. Scanning down keeps the largest
            // maximizer on ties (earliest stopping at lambda = 0).
            double best = -std::numeric_limits<double>::infinity();
            int best_k = Q - 1;
            for (int k = Q - 1; k >= 0; --k) {
                if (w_row[k] > best) {
                    best = w_row[k];
                    best_k = k;
                }
                out.value.at(i, k, j) = best - g * qval[k];
                out.policy.set(i, j, k, best_k);
            }
            if (!std::isfinite(best)) bad = true;
        }
        if (bad) throw std::runtime_error("solve_best_response: non-finite value encountered");
    }
    return out;
}

BestResponse solve_best_response(const ModelSpec& model, const MeasureFlow& m,
                                 const JointMeasure& mu, const SolverConfig& cfg,
                                 const Discretization& disc) {
    const TransitionKernel kernel = TransitionKernel::build(model, disc.time, disc.space);
    return solve_best_response(model, m, FlowFeatures::build(model, m), mu,
                               MuFeatures::build(model, mu), cfg, disc, kernel);
}

std::size_t OracleResult::index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * bins + j) * q_levels + k;
}

namespace {

struct OracleContext {
    const ModelSpec* model;
    const MeasureFlow* m;
    const FlowFeatures* mf;
    MuView mu_view;
    const Discretization* disc;
    const TransitionKernel* kernel;
    std::vector<double> qval, lam_ent;
    OracleResult* out;
};

// Adapted-strategy enumeration on the trajectory prefix tree: at each prefix
// the feasible post-decision levels are scanned (largest first, the DP's tie
// rule) and every child subtree is explored afresh. Nothing is shared
// between prefixes that happen to agree in (bin, level); agreement with the
// memoized table is exactly what the oracle test establishes.
double oracle_node(const OracleContext& ctx, int i, int j, int k) {
    const TimeGrid& tg = ctx.disc->time;
    const SpaceGrid& sg = ctx.disc->space;
    const int nodes = tg.nodes();
    const int Q = ctx.disc->q_levels;
    const double x = sg.center(j);

    ctx.out->visited[ctx.out->index(i, j, k)] = 1;
    if (i == nodes - 1) {
        const double g = ctx.model->terminal_reward(tg.horizon, x, ctx.mu_view);
        ctx.out->policy.set(i, j, k, Q - 1);
        return terminal_value(g, ctx.qval[k]);
    }

    const double t = tg.node(i);
    const MeasureSlice slice = ctx.mf->slice(*ctx.m, i);
    const double f = ctx.model->running_reward(t, x, slice);
    const double g = ctx.model->terminal_reward(t, x, ctx.mu_view);
    const double dt = tg.dt();

    int first_bin = 0;
    const auto band = ctx.kernel->band(i, j, first_bin);
    std::vector<double> children(band.size());

    double best = -std::numeric_limits<double>::infinity();
    int best_k = Q - 1;
    for (int kp = Q - 1; kp >= k; --kp) {
        for (std::size_t b = 0; b < band.size(); ++b)
            children[b] = oracle_node(ctx, i + 1, first_bin + static_cast<int>(b), kp);
        const double w =
            stage_value(g, ctx.qval[kp], f, ctx.lam_ent[kp], dt, kernels::dot(band, children));
        if (w > best) {
            best = w;
            best_k = kp;
        }
    }
    ctx.out->policy.set(i, j, k, best_k);
    return best - g * ctx.qval[k];
}

} // namespace

OracleResult brute_force_oracle(const ModelSpec& model, const MeasureFlow& m,
                                const JointMeasure& mu, const SolverConfig& cfg,
                                const Discretization& disc, std::size_t budget) {
    const int Q = disc.q_levels;
    const int J = disc.space.bins;
    const int M = disc.time.steps;

    double tree = static_cast<double>(Q);
    for (int i = 0; i < M; ++i) {
        tree *= static_cast<double>(J) * Q;
        if (tree > static_cast<double>(budget))
            throw std::invalid_argument("brute_force_oracle: enumeration budget exceeded");
    }

    const TransitionKernel kernel = TransitionKernel::build(model, disc.time, disc.space);
    const FlowFeatures mf = FlowFeatures::build(model, m);
    const MuFeatures muf = MuFeatures::build(model, mu);

    OracleResult out;
    out.q_levels = Q;
    out.bins = J;
    out.policy = FeedbackPolicy(disc.time, disc.space, Q);
    out.visited.assign(static_cast<std::size_t>(disc.time.nodes()) * J * Q, 0);
    out.root_value.resize(J);
    for (int k = 0; k < Q; ++k)
        for (int j = 0; j < J; ++j) out.policy.set(disc.time.nodes() - 1, j, k, Q - 1);

    OracleContext ctx;
    ctx.model = &model;
    ctx.m = &m;
    ctx.mf = &mf;
    ctx.mu_view = muf.view(mu);
    ctx.disc = &disc;
    ctx.kernel = &kernel;
    ctx.qval.resize(Q);
    ctx.lam_ent.resize(Q);
    for (int k = 0; k < Q; ++k) {
        ctx.qval[k] = disc.q_value(k);
        ctx.lam_ent[k] = cfg.lambda * model.entropy.value(ctx.qval[k]);
    }
    ctx.out = &out;

    for (int j = 0; j < J; ++j) out.root_value[j] = oracle_node(ctx, 0, j, 0);
    return out;
}

double reflection_target(double f_hat, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("reflection_target: lambda must be > 0");
    const double z = std::exp(-1.0 - f_hat / lambda);
    return std::min(1.0, std::max(0.0, z));
}

ReflectionReport pointwise_reflection_check(const ModelSpec& model, const MeasureFlow& m,
                                            const JointMeasure& mu, const SolverConfig& cfg,
                                            const Discretization& disc,
                                            const ParticleEnsemble& ens) {
    if (!model.has_terminal_generator())
        throw std::invalid_argument("pointwise_reflection_check: model lacks terminal_generator");
    if (cfg.lambda <= 0.0)
        throw std::invalid_argument("pointwise_reflection_check: lambda must be > 0");
    if (model.entropy.kind != EntropySpec::Kind::cumulative_residual)
        throw std::invalid_argument("pointwise_reflection_check: default entropy only");

    BestResponse br = solve_best_response(model, m, mu, cfg, disc);
    std::vector<double> xi(static_cast<std::size_t>(ens.particles) * ens.grid.nodes());
    apply_policy_to(ens, br.policy, xi);

    const FlowFeatures mf = FlowFeatures::build(model, m);
    const MuFeatures muf = MuFeatures::build(model, mu);
    const MuView mu_view = muf.view(mu);
    const int nodes = ens.grid.nodes();
    const double level = 1.0 / (disc.q_levels - 1);

    std::vector<MeasureSlice> slices(nodes);
    for (int i = 0; i < nodes; ++i) slices[i] = mf.slice(m, i);

    ReflectionReport rep;
    std::size_t hits = 0, pairs = 0;
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* c = xi.data() + static_cast<std::size_t>(p) * nodes;
        double running = 0.0;
        for (int i = 0; i < nodes - 1; ++i) { // terminal node is a forced jump
            const double t = ens.grid.node(i);
            const double f_hat = model.running_reward(t, x[i], slices[i]) +
                                 model.terminal_generator(t, x[i], mu_view);
            running = std::max(running, reflection_target(f_hat, cfg.lambda));
            const double gap = std::abs(c[i] - running);
            ++pairs;
            if (gap <= level + 1e-12) ++hits;
            if (gap > rep.worst_gap) {
                rep.worst_gap = gap;
                rep.worst_particle = p;
                rep.worst_node = i;
            }
        }
    }
    rep.fraction_within_one_level = pairs > 0 ? static_cast<double>(hits) / pairs : 1.0;
    return rep;
}

void export_value_table_csv(const ValueTable& table, const FeedbackPolicy& policy,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_value_table_csv: cannot open " + path);
    out << "t,x,q,value,q_next\n";
    char line[160];
    for (int i = 0; i < table.tgrid.nodes(); ++i)
        for (int j = 0; j < table.sgrid.bins; ++j)
            for (int k = 0; k < table.q_levels; ++k) {
                std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                              table.tgrid.node(i), table.sgrid.center(j),
                              static_cast<double>(k) / (table.q_levels - 1), table.at(i, k, j),
                              policy.q_value(policy.at(i, j, k)));
                out << line;
            }
}

} // namespace mfstop
