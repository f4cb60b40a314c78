#include "mfstop/policy.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mfstop {

FeedbackPolicy::FeedbackPolicy(const TimeGrid& t, const SpaceGrid& s, int q)
    : tgrid(t), sgrid(s), q_levels(q),
      next_level(static_cast<std::size_t>(t.nodes()) * s.bins * q, 0) {
    if (q < 2) throw std::invalid_argument("FeedbackPolicy: need at least 2 q-levels");
}

void FeedbackPolicy::validate() const {
    const int nodes = tgrid.nodes();
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < sgrid.bins; ++j)
            for (int k = 0; k < q_levels; ++k) {
                const int lvl = at(i, j, k);
                if (lvl < k || lvl >= q_levels)
                    throw std::runtime_error("FeedbackPolicy: q' must lie in [q, 1]");
                if (i == nodes - 1 && lvl != q_levels - 1)
                    throw std::runtime_error("FeedbackPolicy: terminal rule must stop fully");
            }
}

FeedbackPolicy FeedbackPolicy::immediate_stop(const TimeGrid& t, const SpaceGrid& s, int q) {
    FeedbackPolicy pol(t, s, q);
    for (auto& v : pol.next_level) v = static_cast<std::uint16_t>(q - 1);
    return pol;
}

FeedbackPolicy FeedbackPolicy::never_stop(const TimeGrid& t, const SpaceGrid& s, int q) {
    FeedbackPolicy pol(t, s, q);
    const int nodes = t.nodes();
    for (int i = 0; i < nodes; ++i)
        for (int j = 0; j < s.bins; ++j)
            for (int k = 0; k < q; ++k)
                pol.set(i, j, k, i == nodes - 1 ? q - 1 : k);
    return pol;
}

void apply_policy_to(const ParticleEnsemble& ens, const FeedbackPolicy& pol,
                     std::span<double> xi_out) {
    if (!(ens.grid == pol.tgrid)) throw std::invalid_argument("apply_policy: grid mismatch");
    const int nodes = ens.grid.nodes();
    if (xi_out.size() != static_cast<std::size_t>(ens.particles) * nodes)
        throw std::invalid_argument("apply_policy: output size mismatch");

    bool bad = false;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* x = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        double* out = xi_out.data() + static_cast<std::size_t>(p) * nodes;
        int level = 0;
        for (int i = 0; i < nodes; ++i) {
            const int j = pol.sgrid.bin_of(x[i]);
            const int next = pol.at(i, j, level);
            if (next < level) {
                bad = true;
                break;
            }
            level = next;
            out[i] = pol.q_value(level);
        }
    }
    if (bad) throw std::runtime_error("apply_policy: policy decreases the stopping level");
}

void apply_policy(ParticleEnsemble& ens, const FeedbackPolicy& pol) {
    apply_policy_to(ens, pol, ens.xi);
}

RandomizedStops randomize(const ParticleEnsemble& ens, std::span<const double> xi_matrix,
                          std::uint64_t seed) {
    const int nodes = ens.grid.nodes();
    RandomizedStops stops;
    stops.u.resize(ens.particles);
    stops.stop_index.resize(ens.particles);

    // Dedicated stream, decoupled from the noise panel; U = 0 is resampled
    // (the log U penalty in the stopping-form payoff is singular there).
    std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ull);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int p = 0; p < ens.particles; ++p) {
        double u = unif(rng);
        while (u <= 0.0) u = unif(rng);
        stops.u[p] = u;
    }

#pragma omp parallel for schedule(static)
    for (int p = 0; p < ens.particles; ++p) {
        const double* row = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        int idx = nodes - 1; // inf over empty set = T
        for (int i = 0; i < nodes; ++i)
            if (row[i] > stops.u[p]) {
                idx = i;
                break;
            }
        stops.stop_index[p] = idx;
    }
    return stops;
}

RandomizedStops randomize(const ParticleEnsemble& ens, std::uint64_t seed) {
    return randomize(ens, ens.xi, seed);
}

int generalized_inverse(std::span<const double> xi_path, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::invalid_argument("generalized_inverse: u outside [0,1]");
    for (std::size_t i = 0; i < xi_path.size(); ++i)
        if (xi_path[i] >= u) return static_cast<int>(i);
    return static_cast<int>(xi_path.size()) - 1; // unreachable for valid controls
}

void lattice_meet_join(std::span<const double> a, std::span<const double> b,
                       std::span<double> meet, std::span<double> join) {
    if (a.size() != b.size() || meet.size() != a.size() || join.size() != a.size())
        throw std::invalid_argument("lattice_meet_join: size mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        meet[i] = std::min(a[i], b[i]);
        join[i] = std::max(a[i], b[i]);
    }
}

PolicyOrderResult policy_order(std::span<const double> a, std::span<const double> b) {
    constexpr double tol = 1e-12;
    // max(b - a) <= tol  <=>  a >= b everywhere  <=>  a earlier
    const double a_def = kernels::max_signed_diff(b, a);
    const double b_def = kernels::max_signed_diff(a, b);
    const bool a_earlier = a_def <= tol;
    const bool b_earlier = b_def <= tol;
    if (a_earlier && b_earlier) return {PolicyOrder::earlier, true};
    if (a_earlier) return {PolicyOrder::earlier, false};
    if (b_earlier) return {PolicyOrder::later, false};
    return {PolicyOrder::incomparable, false};
}

void export_policy_csv(const FeedbackPolicy& pol, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_policy_csv: cannot open " + path);
    out << "t,x,q,q_next\n";
    char line[128];
    for (int i = 0; i < pol.tgrid.nodes(); ++i)
        for (int j = 0; j < pol.sgrid.bins; ++j)
            for (int k = 0; k < pol.q_levels; ++k) {
                std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", pol.tgrid.node(i),
                              pol.sgrid.center(j), pol.q_value(k), pol.q_value(pol.at(i, j, k)));
                out << line;
            }
}

FeedbackPolicy import_policy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("import_policy_csv: cannot open " + path);
    std::string header;
    std::getline(in, header);

    struct Row {
        double t, x, q, qn;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg", &r.t, &r.x, &r.q, &r.qn) != 4)
            throw std::runtime_error("import_policy_csv: malformed row: " + line);
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error("import_policy_csv: empty table");

    // Reconstruct the grids from the sorted unique coordinates.
    std::vector<double> ts, xs, qs;
    for (const Row& r : rows) {
        if (ts.empty() || r.t > ts.back()) ts.push_back(r.t);
    }
    for (const Row& r : rows) {
        if (r.t != rows.front().t) break;
        if (xs.empty() || r.x > xs.back()) xs.push_back(r.x);
    }
    qs.resize(rows.size() / (ts.size() * xs.size()));
    if (ts.size() < 3 || xs.empty() || qs.size() < 2 ||
        rows.size() != ts.size() * xs.size() * qs.size())
        throw std::runtime_error("import_policy_csv: inconsistent table shape");

    const int steps = static_cast<int>(ts.size()) - 1;
    TimeGrid tg(ts.back(), steps);
    const double dx = xs.size() > 1 ? xs[1] - xs[0] : 1.0;
    SpaceGrid sg(xs.front() - dx / 2, xs.back() + dx / 2, static_cast<int>(xs.size()));
    FeedbackPolicy pol(tg, sg, static_cast<int>(qs.size()));

    std::size_t r = 0;
    for (int i = 0; i < tg.nodes(); ++i)
        for (int j = 0; j < sg.bins; ++j)
            for (int k = 0; k < pol.q_levels; ++k, ++r) {
                const double qn = rows[r].qn;
                const int lvl = static_cast<int>(std::lround(qn * (pol.q_levels - 1)));
                pol.set(i, j, k, lvl);
            }
    pol.validate();
    return pol;
}

} // namespace mfstop
