#pragma once
// Uniform time and space grids shared by the particle layer, the measures
// and the dynamic program. One TimeGrid instance per run; everything else
// interpolates nothing and looks up nearest bins.

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mfstop {

struct TimeGrid {
    double horizon = 1.0; // T
    int steps = 1;        // M

    TimeGrid() = default;
    TimeGrid(double horizon_, int steps_) : horizon(horizon_), steps(steps_) {
        if (horizon <= 0.0) throw std::invalid_argument("TimeGrid: horizon must be > 0");
        if (steps < 2) throw std::invalid_argument("TimeGrid: need at least 2 steps");
    }

    double dt() const { return horizon / steps; }
    int nodes() const { return steps + 1; }
    // node(steps) == horizon exactly
    double node(int i) const { return i == steps ? horizon : i * dt(); }

    bool operator==(const TimeGrid&) const = default;
};

struct SpaceGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    int bins = 1;

    SpaceGrid() = default;
    SpaceGrid(double lo, double hi, int bins_) : x_min(lo), x_max(hi), bins(bins_) {
        if (!(x_max > x_min)) throw std::invalid_argument("SpaceGrid: empty domain");
        if (bins < 1) throw std::invalid_argument("SpaceGrid: need at least one bin");
    }

    double dx() const { return (x_max - x_min) / bins; }
    double center(int j) const { return x_min + (j + 0.5) * dx(); }
    double left_edge(int j) const { return x_min + j * dx(); }

    // Nearest bin, clamped to the domain. `spilled` reports the clamp.
    int bin_of(double x, bool* spilled = nullptr) const {
        if (x < x_min) {
            if (spilled) *spilled = true;
            return 0;
        }
        if (x >= x_max) {
            if (spilled) *spilled = x >= x_max + dx() * 1e-12 || x > x_max;
            return bins - 1;
        }
        if (spilled) *spilled = false;
        int j = static_cast<int>((x - x_min) / dx());
        if (j >= bins) j = bins - 1;
        return j;
    }

    std::vector<double> centers() const {
        std::vector<double> c(bins);
        for (int j = 0; j < bins; ++j) c[j] = center(j);
        return c;
    }

    bool operator==(const SpaceGrid&) const = default;
};

// The (t, x, q) discretization a whole run agrees on.
struct Discretization {
    TimeGrid time;
    SpaceGrid space;
    int q_levels = 33;

    double q_value(int k) const { return static_cast<double>(k) / (q_levels - 1); }
    // Index of a q value that is an exact grid level.
    int q_index(double q) const {
        int k = static_cast<int>(q * (q_levels - 1) + 0.5);
        if (k < 0) k = 0;
        if (k >= q_levels) k = q_levels - 1;
        return k;
    }
    // Smallest level >= z (optima between levels snap upward).
    int q_index_up(double z) const {
        if (z <= 0.0) return 0;
        if (z >= 1.0) return q_levels - 1;
        const double scaled = z * (q_levels - 1);
        int k = static_cast<int>(scaled);
        if (static_cast<double>(k) < scaled) ++k;
        if (k >= q_levels) k = q_levels - 1;
        return k;
    }
};

} // namespace mfstop
