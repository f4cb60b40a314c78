#include "mfstop/measures.hpp"

#include "mfstop/kernels.hpp"
#include "mfstop/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mfstop {

namespace {

constexpr double kMassTol = 1e-9;

struct Atom {
    double pos;
    double mass;
};

// Sorted atom list with duplicates merged.
std::vector<Atom> sorted_atoms(std::span<const double> pos, std::span<const double> mass) {
    std::vector<Atom> atoms;
    atoms.reserve(pos.size());
    for (std::size_t k = 0; k < pos.size(); ++k)
        if (mass[k] != 0.0) atoms.push_back({pos[k], mass[k]});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.pos < b.pos; });
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
        if (!merged.empty() && merged.back().pos == a.pos)
            merged.back().mass += a.mass;
        else
            merged.push_back(a);
    }
    return merged;
}

double total_mass(std::span<const double> mass) { return kernels::sum(mass); }

// W1 between two sorted atom lists of equal total mass: integral over the
// merged support of |CDF_a - CDF_b|.
double w1_sorted(const std::vector<Atom>& a, const std::vector<Atom>& b) {
    std::size_t ia = 0, ib = 0;
    double cdf_a = 0.0, cdf_b = 0.0;
    double prev = 0.0;
    bool have_prev = false;
    double value = 0.0;
    while (ia < a.size() || ib < b.size()) {
        double z;
        if (ia < a.size() && (ib >= b.size() || a[ia].pos <= b[ib].pos))
            z = a[ia].pos;
        else
            z = b[ib].pos;
        if (have_prev) value += std::abs(cdf_a - cdf_b) * (z - prev);
        while (ia < a.size() && a[ia].pos == z) cdf_a += a[ia++].mass;
        while (ib < b.size() && b[ib].pos == z) cdf_b += b[ib++].mass;
        prev = z;
        have_prev = true;
    }
    return value;
}

} // namespace

double MeasureFlow::slice_total(int i) const { return kernels::sum(slice(i)); }

void MeasureFlow::validate(double moment_order) const {
    double prev = 2.0;
    for (int i = 0; i < tgrid.nodes(); ++i) {
        const double total = slice_total(i);
        if (total < -kMassTol || total > 1.0 + kMassTol)
            throw std::runtime_error("MeasureFlow: slice mass outside [0,1]");
        if (total > prev + kMassTol)
            throw std::runtime_error("MeasureFlow: slice mass increased over time");
        prev = total;
        if (!std::isfinite(pth_moment(sgrid, slice(i), moment_order)))
            throw std::runtime_error("MeasureFlow: non-finite moment");
    }
}

double JointMeasure::total() const { return kernels::sum(std::span<const double>(w)); }

void JointMeasure::validate() const {
    for (double wi : w)
        if (!(wi > 0.0) || !std::isfinite(wi)) throw std::runtime_error("JointMeasure: masses must be > 0");
    const double t = total();
    if (t > 1.0 + kMassTol) throw std::runtime_error("JointMeasure: total mass exceeds 1");
    for (std::size_t k = 0; k < size(); ++k)
        if (!std::isfinite(s[k]) || !std::isfinite(x[k]))
            throw std::runtime_error("JointMeasure: non-finite atom");
}

double wasserstein1(std::span<const double> pos_a, std::span<const double> mass_a,
                    std::span<const double> pos_b, std::span<const double> mass_b) {
    const double ta = total_mass(mass_a);
    const double tb = total_mass(mass_b);
    if (std::abs(ta - tb) > kMassTol)
        throw std::invalid_argument("wasserstein1: mass mismatch exceeds 1e-9");
    if (ta <= 0.0) return 0.0;
    return w1_sorted(sorted_atoms(pos_a, mass_a), sorted_atoms(pos_b, mass_b));
}

double wasserstein1(const SpaceGrid& grid, std::span<const double> a, std::span<const double> b) {
    const auto centers = grid.centers();
    return wasserstein1(centers, a, centers, b);
}

namespace {

// Coarsen a joint measure onto an adaptive product grid with at most
// `cells` occupied cells; atom positions become cell mass centroids, which
// keeps the coarsening error below half a cell diameter.
JointMeasure coarsen(const JointMeasure& mu, int cells) {
    double s_lo = mu.s[0], s_hi = mu.s[0], x_lo = mu.x[0], x_hi = mu.x[0];
    for (std::size_t k = 0; k < mu.size(); ++k) {
        s_lo = std::min(s_lo, mu.s[k]);
        s_hi = std::max(s_hi, mu.s[k]);
        x_lo = std::min(x_lo, mu.x[k]);
        x_hi = std::max(x_hi, mu.x[k]);
    }
    const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(cells))));
    const double ds = (s_hi - s_lo) / side;
    const double dx = (x_hi - x_lo) / side;
    auto cell_of = [&](double sv, double xv) {
        int is = ds > 0 ? std::min(side - 1, static_cast<int>((sv - s_lo) / ds)) : 0;
        int ix = dx > 0 ? std::min(side - 1, static_cast<int>((xv - x_lo) / dx)) : 0;
        return is * side + ix;
    };
    std::vector<double> cw(static_cast<std::size_t>(side) * side, 0.0);
    std::vector<double> cs(cw.size(), 0.0), cx(cw.size(), 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const int c = cell_of(mu.s[k], mu.x[k]);
        cw[c] += mu.w[k];
        cs[c] += mu.w[k] * mu.s[k];
        cx[c] += mu.w[k] * mu.x[k];
    }
    JointMeasure out;
    for (std::size_t c = 0; c < cw.size(); ++c)
        if (cw[c] > 0.0) out.push(cs[c] / cw[c], cx[c] / cw[c], cw[c]);
    return out;
}

JointMeasure dedup(const JointMeasure& mu) {
    std::vector<std::size_t> order(mu.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mu.s[a] != mu.s[b]) return mu.s[a] < mu.s[b];
        return mu.x[a] < mu.x[b];
    });
    JointMeasure out;
    for (std::size_t k : order) {
        if (mu.w[k] == 0.0) continue;
        if (!out.w.empty() && out.s.back() == mu.s[k] && out.x.back() == mu.x[k])
            out.w.back() += mu.w[k];
        else
            out.push(mu.s[k], mu.x[k], mu.w[k]);
    }
    return out;
}

} // namespace

double wasserstein1(const JointMeasure& a, const JointMeasure& b, int max_atoms) {
    const double ta = a.total();
    const double tb = b.total();
    if (std::abs(ta - tb) > kMassTol)
        throw std::invalid_argument("wasserstein1: mass mismatch exceeds 1e-9");
    if (ta <= 0.0 || a.size() == 0 || b.size() == 0) return 0.0;

    JointMeasure ca = dedup(a);
    JointMeasure cb = dedup(b);
    if (static_cast<int>(ca.size()) > max_atoms) ca = coarsen(ca, max_atoms);
    if (static_cast<int>(cb.size()) > max_atoms) cb = coarsen(cb, max_atoms);

    // Zero-cost pre-match on shared atoms: shrinks the flow problem a lot
    // when the two measures largely overlap (consecutive iterates do).
    JointMeasure ra, rb;
    {
        std::size_t ia = 0, ib = 0;
        auto less = [](double s1, double x1, double s2, double x2) {
            if (s1 != s2) return s1 < s2;
            return x1 < x2;
        };
        while (ia < ca.size() && ib < cb.size()) {
            if (ca.s[ia] == cb.s[ib] && ca.x[ia] == cb.x[ib]) {
                const double common = std::min(ca.w[ia], cb.w[ib]);
                if (ca.w[ia] > common) ra.push(ca.s[ia], ca.x[ia], ca.w[ia] - common);
                if (cb.w[ib] > common) rb.push(cb.s[ib], cb.x[ib], cb.w[ib] - common);
                ++ia;
                ++ib;
            } else if (less(ca.s[ia], ca.x[ia], cb.s[ib], cb.x[ib])) {
                ra.push(ca.s[ia], ca.x[ia], ca.w[ia]);
                ++ia;
            } else {
                rb.push(cb.s[ib], cb.x[ib], cb.w[ib]);
                ++ib;
            }
        }
        for (; ia < ca.size(); ++ia) ra.push(ca.s[ia], ca.x[ia], ca.w[ia]);
        for (; ib < cb.size(); ++ib) rb.push(cb.s[ib], cb.x[ib], cb.w[ib]);
    }
    if (ra.size() == 0 || rb.size() == 0) return 0.0;

    auto cost = [&](int i, int j) {
        return std::abs(ra.s[i] - rb.s[j]) + std::abs(ra.x[i] - rb.x[j]);
    };
    return transport::min_cost(ra.w, rb.w, cost);
}

double wasserstein1_sub(std::span<const double> pos_a, std::span<const double> mass_a,
                        std::span<const double> pos_b, std::span<const double> mass_b,
                        const CemeteryConfig& cfg) {
    const double ta = total_mass(mass_a);
    const double tb = total_mass(mass_b);
    if (ta < -kMassTol || ta > 1.0 + kMassTol || tb < -kMassTol || tb > 1.0 + kMassTol)
        throw std::invalid_argument("wasserstein1_sub: mass outside [0,1]");

    // Kantorovich–Rubinstein dual of the cemetery-augmented problem:
    //   sup over 1-Lipschitz phi with phi(z0) = 0 of (mu - nu)(phi)
    //     = int_{z0}^{inf} |eta([s, inf))| ds + int_{-inf}^{z0} |eta((-inf, s])| ds
    // with eta = mu - nu, plus |mu(E) - nu(E)| for the cemetery leg.
    const auto a = sorted_atoms(pos_a, mass_a);
    const auto b = sorted_atoms(pos_b, mass_b);
    const double z0 = cfg.base_point;

    // Merge the two supports with signed masses.
    std::vector<Atom> eta;
    eta.reserve(a.size() + b.size());
    {
        std::size_t ia = 0, ib = 0;
        while (ia < a.size() || ib < b.size()) {
            if (ib >= b.size() || (ia < a.size() && a[ia].pos < b[ib].pos)) {
                eta.push_back(a[ia]);
                ++ia;
            } else if (ia >= a.size() || b[ib].pos < a[ia].pos) {
                eta.push_back({b[ib].pos, -b[ib].mass});
                ++ib;
            } else {
                eta.push_back({a[ia].pos, a[ia].mass - b[ib].mass});
                ++ia;
                ++ib;
            }
        }
    }

    double value = std::abs(ta - tb);

    // Right of z0: tail masses eta([s, inf)) are piecewise constant between
    // atoms; integrate |tail| from max(z0, atom interval).
    {
        double tail = 0.0;
        for (std::size_t k = eta.size(); k-- > 0;) {
            const double lo = k > 0 ? eta[k - 1].pos : z0; // piece (prev_atom, atom]
            tail += eta[k].mass;
            const double seg_lo = std::max(z0, lo);
            const double seg_hi = eta[k].pos;
            if (seg_hi > seg_lo) value += std::abs(tail) * (seg_hi - seg_lo);
            if (eta[k].pos <= z0) break;
        }
    }
    // Left of z0: head masses eta((-inf, s]) on pieces [atom, next_atom).
    {
        double head = 0.0;
        for (std::size_t k = 0; k < eta.size(); ++k) {
            const double hi = k + 1 < eta.size() ? eta[k + 1].pos : z0;
            head += eta[k].mass;
            const double seg_lo = eta[k].pos;
            const double seg_hi = std::min(z0, hi);
            if (seg_hi > seg_lo) value += std::abs(head) * (seg_hi - seg_lo);
            if (seg_lo >= z0) break;
        }
    }
    return value;
}

double wasserstein1_sub(const SpaceGrid& grid, std::span<const double> a,
                        std::span<const double> b, const CemeteryConfig& cfg) {
    const auto centers = grid.centers();
    return wasserstein1_sub(centers, a, centers, b, cfg);
}

double flow_distance(const MeasureFlow& a, const MeasureFlow& b, const CemeteryConfig& cfg) {
    if (!(a.tgrid == b.tgrid) || !(a.sgrid == b.sgrid))
        throw std::invalid_argument("flow_distance: grid mismatch");
    // Left-endpoint sum: the value at t_M carries no dt weight, consistent
    // with flows being identified dt-a.e.
    double acc = 0.0;
    for (int i = 0; i < a.tgrid.steps; ++i)
        acc += std::min(1.0, wasserstein1_sub(a.sgrid, a.slice(i), b.slice(i), cfg));
    return acc * a.tgrid.dt();
}

double pth_moment(const SpaceGrid& grid, std::span<const double> mass, double p) {
    if (p < 1.0) throw std::invalid_argument("pth_moment: p must be >= 1");
    double acc = 0.0;
    for (int j = 0; j < grid.bins; ++j) acc += std::pow(std::abs(grid.center(j)), p) * mass[j];
    return acc;
}

double pth_moment(const JointMeasure& mu, double p) {
    if (p < 1.0) throw std::invalid_argument("pth_moment: p must be >= 1");
    double acc = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k)
        acc += (std::pow(std::abs(mu.s[k]), p) + std::pow(std::abs(mu.x[k]), p)) * mu.w[k];
    return acc;
}

} // namespace mfstop
