#pragma once
// Exact discrete optimal transport on small atom sets: successive shortest
// augmenting paths with node potentials (Dijkstra on reduced costs). Used by
// the joint-measure W1 and, in tests, to cross-check the closed-form
// sub-probability distance against its cemetery-augmented definition.

#include <functional>
#include <span>

namespace mfstop::transport {

// Minimal total cost of transporting `supply` onto `demand` with unit cost
// cost(i, j). Requires sum(supply) == sum(demand) within 1e-9 (inputs are
// normalized internally) and all masses >= 0.
double min_cost(std::span<const double> supply, std::span<const double> demand,
                const std::function<double(int, int)>& cost);

} // namespace mfstop::transport
