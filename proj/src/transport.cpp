#include "mfstop/transport.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace mfstop::transport {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// Transportation problem as min-cost flow on the complete bipartite graph.
// Node potentials keep reduced costs nonnegative so plain Dijkstra works;
// each augmentation saturates at least one source or sink, so there are at
// most n + m phases.
double min_cost(std::span<const double> supply, std::span<const double> demand,
                const std::function<double(int, int)>& cost) {
    const int n = static_cast<int>(supply.size());
    const int m = static_cast<int>(demand.size());

    double total_a = 0.0, total_b = 0.0;
    for (double v : supply) {
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("transport: bad supply");
        total_a += v;
    }
    for (double v : demand) {
        if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("transport: bad demand");
        total_b += v;
    }
    if (std::abs(total_a - total_b) > 1e-9)
        throw std::invalid_argument("transport: mass mismatch exceeds 1e-9");
    if (total_a <= 0.0) return 0.0;

    std::vector<double> a(supply.begin(), supply.end());
    std::vector<double> b(demand.begin(), demand.end());
    // Normalize the tiny mass mismatch onto the larger side.
    const double scale = total_b > 0 ? total_a / total_b : 1.0;
    for (double& v : b) v *= scale;

    // Cost matrix cached once; sizes are <= max_atoms per side by contract.
    std::vector<double> c(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) c[static_cast<std::size_t>(i) * m + j] = cost(i, j);

    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> pot_a(n, 0.0), pot_b(m, 0.0);
    double pot_t = 0.0; // super-sink potential (sink -> t arcs have cost 0)
    std::vector<double> rest_a = a, rest_b = b;

    // Mass remaining to route; bail out below an absolute floor to avoid
    // chasing rounding residue around the graph.
    double remaining = total_a;
    const double mass_floor = total_a * 1e-15;

    std::vector<double> dist_a(n), dist_b(m);
    std::vector<int> prev_b(m);   // source index used to reach sink j
    std::vector<int> prev_a(n);   // sink index used to reach source i (-1 = root)
    std::vector<char> done_a(n), done_b(m);

    while (remaining > mass_floor) {
        // Dijkstra over the residual graph from all sources with supply left
        // (their potentials are 0 while supply remains, so a multi-source
        // start at distance 0 is exact).
        for (int i = 0; i < n; ++i) {
            dist_a[i] = rest_a[i] > 0.0 ? 0.0 : kInf;
            prev_a[i] = -1;
            done_a[i] = 0;
        }
        for (int j = 0; j < m; ++j) {
            dist_b[j] = kInf;
            prev_b[j] = -1;
            done_b[j] = 0;
        }

        using Item = std::pair<double, int>; // (dist, node); node < n => source
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (int i = 0; i < n; ++i)
            if (dist_a[i] == 0.0) pq.push({0.0, i});

        // The super-sink is reached through sink j at reduced distance
        // dist_b[j] + (pot_b[j] - pot_t); comparing raw dist_b would pick a
        // non-shortest augmenting path once sink potentials diverge.
        int reached_sink = -1;
        double best_t_dist = kInf;
        auto offer_sink = [&](int j) {
            if (rest_b[j] <= 0.0) return;
            const double cand = dist_b[j] + (pot_b[j] - pot_t);
            if (cand < best_t_dist) {
                best_t_dist = cand;
                reached_sink = j;
            }
        };

        while (!pq.empty()) {
            auto [d, node] = pq.top();
            pq.pop();
            if (d >= best_t_dist) break;
            if (node < n) {
                if (done_a[node] || d > dist_a[node]) continue;
                done_a[node] = 1;
                const double* crow = c.data() + static_cast<std::size_t>(node) * m;
                for (int j = 0; j < m; ++j) {
                    if (done_b[j]) continue;
                    const double rc = crow[j] + pot_a[node] - pot_b[j];
                    const double nd = d + rc;
                    if (nd < dist_b[j] - 1e-18) {
                        dist_b[j] = nd;
                        prev_b[j] = node;
                        pq.push({nd, n + j});
                        offer_sink(j);
                    }
                }
            } else {
                const int j = node - n;
                if (done_b[j] || d > dist_b[j]) continue;
                done_b[j] = 1;
                // backward arcs j -> i where flow(i, j) > 0
                for (int i = 0; i < n; ++i) {
                    if (done_a[i] || flow[static_cast<std::size_t>(i) * m + j] <= 0.0) continue;
                    const double rc = -(c[static_cast<std::size_t>(i) * m + j] + pot_a[i] - pot_b[j]);
                    const double nd = d + rc;
                    if (nd < dist_a[i] - 1e-18) {
                        dist_a[i] = nd;
                        prev_a[i] = j;
                        pq.push({nd, i});
                    }
                }
            }
        }

        if (reached_sink < 0) throw std::runtime_error("transport: no augmenting path");

        // Update potentials, capping at the target distance so reduced costs
        // stay nonnegative for nodes the pruned Dijkstra never finalized.
        for (int i = 0; i < n; ++i) pot_a[i] += std::min(dist_a[i], best_t_dist);
        for (int j = 0; j < m; ++j) pot_b[j] += std::min(dist_b[j], best_t_dist);
        pot_t += best_t_dist;

        // Trace the path sink <- ... <- source and find its bottleneck.
        double push = rest_b[reached_sink];
        {
            int j = reached_sink;
            while (true) {
                const int i = prev_b[j];
                if (rest_a[i] > 0.0 && prev_a[i] == -1) {
                    push = std::min(push, rest_a[i]);
                    break;
                }
                const int jb = prev_a[i];
                push = std::min(push, flow[static_cast<std::size_t>(i) * m + jb]);
                j = jb;
            }
        }

        // Apply the augmentation.
        {
            int j = reached_sink;
            while (true) {
                const int i = prev_b[j];
                flow[static_cast<std::size_t>(i) * m + j] += push;
                if (rest_a[i] > 0.0 && prev_a[i] == -1) {
                    rest_a[i] -= push;
                    break;
                }
                const int jb = prev_a[i];
                flow[static_cast<std::size_t>(i) * m + jb] -= push;
                j = jb;
            }
            rest_b[reached_sink] -= push;
        }
        remaining -= push;
    }

    double value = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            const double f = flow[static_cast<std::size_t>(i) * m + j];
            if (f > 0.0) value += f * c[static_cast<std::size_t>(i) * m + j];
        }
    return value;
}

} // namespace mfstop::transport
