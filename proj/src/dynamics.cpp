#include "mfstop/dynamics.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace mfstop {

void ParticleEnsemble::validate_control(std::span<const double> xi_matrix, int particles,
                                        int nodes) {
    for (int p = 0; p < particles; ++p) {
        const double* row = xi_matrix.data() + static_cast<std::size_t>(p) * nodes;
        double prev = 0.0;
        for (int i = 0; i < nodes; ++i) {
            const double v = row[i];
            if (!(v >= -1e-12 && v <= 1.0 + 1e-12))
                throw std::runtime_error("control outside [0,1]");
            if (v < prev - 1e-12) throw std::runtime_error("control not nondecreasing");
            prev = v;
        }
        if (std::abs(row[nodes - 1] - 1.0) > 1e-12)
            throw std::runtime_error("control does not end at 1");
    }
}

ParticleEnsemble simulate_paths(const ModelSpec& model, const TimeGrid& grid, int n,
                                std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("simulate_paths: need n >= 1");

    ParticleEnsemble ens;
    ens.grid = grid;
    ens.particles = n;
    ens.seed = seed;
    const int nodes = grid.nodes();
    const int steps = grid.steps;
    ens.state.resize(static_cast<std::size_t>(n) * nodes);
    ens.xi.assign(static_cast<std::size_t>(n) * nodes, 0.0);
    ens.xi_bar.assign(static_cast<std::size_t>(n) * nodes, 0.0);
    ens.noise.resize(static_cast<std::size_t>(n) * steps);

    // One serial pass for the noise panel and initial draws keeps the layout
    // independent of the thread count.
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (double& z : ens.noise) z = normal(rng);
        std::mt19937_64 rng0(seed ^ 0x9e3779b97f4a7c15ull);
        for (int p = 0; p < n; ++p) ens.state[static_cast<std::size_t>(p) * nodes] =
            model.initial_law.sampler(rng0);
    }

    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    bool failed = false;
    double fail_t = 0.0, fail_x = 0.0;

#pragma omp parallel for schedule(static)
    for (int p = 0; p < n; ++p) {
        double* row = ens.state.data() + static_cast<std::size_t>(p) * nodes;
        const double* z = ens.noise.data() + static_cast<std::size_t>(p) * steps;
        for (int i = 0; i < steps; ++i) {
            const double t = grid.node(i);
            const double x = row[i];
            const double b = model.drift(t, x);
            const double s = model.vol(t, x);
            if (!std::isfinite(b) || !std::isfinite(s)) {
#pragma omp critical
                {
                    failed = true;
                    fail_t = t;
                    fail_x = x;
                }
                break;
            }
            row[i + 1] = x + b * dt + s * sqdt * z[i];
        }
        // never-stop control: 0 before T, jump to 1 at T
        ens.xi[static_cast<std::size_t>(p) * nodes + nodes - 1] = 1.0;
        ens.xi_bar[static_cast<std::size_t>(p) * nodes + nodes - 1] = 1.0;
    }

    if (failed) {
        std::ostringstream msg;
        msg << "simulate_paths: non-finite coefficient at (t=" << fail_t << ", x=" << fail_x << ")";
        throw std::runtime_error(msg.str());
    }
    return ens;
}

double moment_check(const ParticleEnsemble& ens, double p) {
    const int nodes = ens.grid.nodes();
    std::vector<double> buf(ens.particles);
    double worst = 0.0;
    for (int i = 0; i < nodes; ++i) {
        for (int q = 0; q < ens.particles; ++q)
            buf[q] = std::pow(std::abs(ens.state_at(q, i)), p);
        const double mean = kernels::sum(buf) / ens.particles;
        if (mean > worst) worst = mean;
    }
    return worst;
}

void dump_noise_panel(const ParticleEnsemble& ens, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("dump_noise_panel: cannot open " + path);
    const std::size_t n = ens.noise.size();
    const std::size_t written = std::fwrite(ens.noise.data(), sizeof(double), n, f);
    std::fclose(f);
    if (written != n) throw std::runtime_error("dump_noise_panel: short write");
}

} // namespace mfstop
