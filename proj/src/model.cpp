#include "mfstop/model.hpp"

#include "mfstop/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace mfstop {

namespace {

double xlogx(double z) { return z > 0.0 ? z * std::log(z) : 0.0; }

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

} // namespace

EntropySpec EntropySpec::cumulative_residual() {
    EntropySpec e;
    e.kind = Kind::cumulative_residual;
    e.value = [](double z) { return -xlogx(z); };
    e.argmax_hint = std::exp(-1.0);
    return e;
}

EntropySpec EntropySpec::user(std::function<double(double)> value, double argmax_hint) {
    EntropySpec e;
    e.kind = Kind::user_table;
    e.value = std::move(value);
    e.argmax_hint = argmax_hint;
    return e;
}

void EntropySpec::validate(int grid_points) const {
    require(static_cast<bool>(value), "EntropySpec: missing value function");
    require(grid_points >= 8, "EntropySpec: probe grid too small");
    const double h = 1.0 / (grid_points - 1);
    double best = -1.0, best_z = 0.0;
    for (int k = 0; k < grid_points; ++k) {
        const double z = k * h;
        const double v = value(z);
        require(std::isfinite(v) && v >= -1e-12, "EntropySpec: E must be >= 0 on [0,1]");
        if (v > best) {
            best = v;
            best_z = z;
        }
        // strict concavity through sampled second differences on the interior
        if (k >= 1 && k + 1 < grid_points) {
            const double dd = value(z + h) - 2.0 * v + value(z - h);
            require(dd < 0.0, "EntropySpec: sampled second difference not negative");
        }
    }
    require(best_z > h / 2 && best_z < 1.0 - h / 2, "EntropySpec: argmax not interior");
}

InitialLaw InitialLaw::point(double x0) {
    InitialLaw law;
    law.sampler = [x0](std::mt19937_64&) { return x0; };
    law.mean = x0;
    law.stddev = 0.0;
    return law;
}

InitialLaw InitialLaw::normal(double mean, double stddev) {
    InitialLaw law;
    law.sampler = [mean, stddev](std::mt19937_64& rng) {
        std::normal_distribution<double> n(mean, stddev);
        return n(rng);
    };
    law.mean = mean;
    law.stddev = stddev;
    return law;
}

MeasureSlice make_slice(const MeasureFlow& flow, int i, std::span<const double> centers,
                        std::span<const double> features) {
    MeasureSlice s;
    s.mass = flow.slice(i);
    s.centers = centers;
    s.features = features;
    s.total = kernels::sum(s.mass);
    return s;
}

MuView make_mu_view(const JointMeasure& mu, std::span<const double> features) {
    MuView v;
    v.atoms = &mu;
    v.features = features;
    v.total = mu.total();
    return v;
}

void ModelSpec::validate(int n_t, int n_x) const {
    require(horizon > 0.0, "ModelSpec: horizon must be > 0");
    require(moment_order >= 1.0, "ModelSpec: moment_order must be >= 1");
    require(static_cast<bool>(drift) && static_cast<bool>(vol), "ModelSpec: missing coefficients");
    require(static_cast<bool>(running_reward) && static_cast<bool>(terminal_reward),
            "ModelSpec: missing rewards");
    entropy.validate();

    const double lo = domain_hint ? domain_hint->first : initial_law.mean - 3.0 * (initial_law.stddev + 1.0);
    const double hi = domain_hint ? domain_hint->second : initial_law.mean + 3.0 * (initial_law.stddev + 1.0);
    for (int it = 0; it < n_t; ++it) {
        const double t = horizon * it / (n_t - 1);
        for (int ix = 0; ix < n_x; ++ix) {
            const double x = lo + (hi - lo) * ix / (n_x - 1);
            require(std::isfinite(drift(t, x)), "ModelSpec: drift not finite on probe grid");
            require(std::isfinite(vol(t, x)), "ModelSpec: vol not finite on probe grid");
        }
    }

    if (structure_flags.supermodular) {
        require(has_terminal_generator(),
                "ModelSpec: supermodular flag requires terminal_generator");
        require(supermodular.has_value(), "ModelSpec: supermodular flag requires SupermodularData");
        // (d_t + L) psi >= 0 and y -> Lg~(x, y) nondecreasing, sampled.
        for (int it = 0; it < n_t; ++it) {
            const double t = horizon * it / (n_t - 1);
            for (int ix = 0; ix < n_x; ++ix) {
                const double x = lo + (hi - lo) * ix / (n_x - 1);
                require(supermodular->psi_generator(t, x) >= -1e-12,
                        "ModelSpec: (d_t + L) psi < 0 on probe grid");
            }
        }
    }
}

// --- bank run ---------------------------------------------------------------

ModelSpec make_bank_run_model(const BankRunParams& params) {
    require(static_cast<bool>(params.f0), "bank_run: missing f0");
    require(static_cast<bool>(params.g), "bank_run: missing g");
    require(static_cast<bool>(params.g_generator), "bank_run: missing g_generator");

    // Sampled monotonicity: y -> f0(t, x, y) nonincreasing.
    const auto [lo, hi] = params.check_domain;
    for (int it = 0; it < 20; ++it) {
        const double t = params.horizon * it / 19.0;
        for (int ix = 0; ix < 20; ++ix) {
            const double x = lo + (hi - lo) * ix / 19.0;
            double prev = params.f0(t, x, 0.0);
            for (int iy = 1; iy <= 20; ++iy) {
                const double y = iy / 20.0;
                const double v = params.f0(t, x, y);
                require(v <= prev + 1e-12, "bank_run: f0 not nonincreasing in stopped fraction");
                prev = v;
            }
        }
    }

    ModelSpec m;
    m.name = "bank_run";
    m.horizon = params.horizon;
    m.drift = params.drift;
    m.vol = params.vol;
    m.initial_law = params.initial_law;
    m.moment_order = params.moment_order;

    auto f0 = params.f0;
    m.running_reward = [f0](double t, double x, const MeasureSlice& slice) {
        return f0(t, x, 1.0 - slice.total);
    };
    auto g = params.g;
    m.terminal_reward = [g](double, double x, const MuView&) { return g(x); };
    auto lg = params.g_generator;
    m.terminal_generator = [lg](double t, double x, const MuView&) { return lg(t, x); };

    m.structure_flags.supermodular = true;
    SupermodularData sd;
    sd.psi = [](double t, double) { return t; };
    sd.psi_generator = [](double, double) { return 1.0; };
    sd.g_tilde = [g](double x, double) { return g(x); };
    m.supermodular = sd;
    return m;
}

// --- geometric Brownian motion ----------------------------------------------

ModelSpec make_gbm_model(double b0, double sigma0, double z0, double horizon) {
    require(sigma0 > 0.0, "gbm: sigma0 must be > 0");
    require(z0 > 0.0, "gbm: z0 must be > 0");

    ModelSpec m;
    m.name = "gbm";
    m.horizon = horizon;
    m.drift = [b0](double, double z) { return b0 * z; };
    m.vol = [sigma0](double, double z) { return sigma0 * z; };
    m.initial_law = InitialLaw::point(z0);
    m.moment_order = 1.0;

    // f(t,z,m) = int (z + y) m(dy) = z * |m| + int y m(dy)
    m.m_features = [](const MeasureSlice& slice) {
        return std::vector<double>{kernels::dot(slice.centers, slice.mass)};
    };
    m.running_reward = [](double, double z, const MeasureSlice& slice) {
        const double first_moment =
            slice.features.empty() ? kernels::dot(slice.centers, slice.mass) : slice.features[0];
        return z * slice.total + first_moment;
    };

    // g(t,z,mu) = int (t + s) mu(ds,dy) = t * |mu| + int s dmu
    m.mu_features = [](const JointMeasure& mu) {
        return std::vector<double>{kernels::dot(mu.s, mu.w)};
    };
    m.terminal_reward = [](double t, double, const MuView& mu) {
        const double s_int = mu.features.empty()
                                 ? (mu.atoms ? kernels::dot(mu.atoms->s, mu.atoms->w) : 0.0)
                                 : mu.features[0];
        return t * mu.total + s_int;
    };
    // (d_t + L) g = |mu| (g is linear in t and flat in z)
    m.terminal_generator = [](double, double, const MuView& mu) { return mu.total; };

    m.structure_flags.supermodular = true;
    SupermodularData sd;
    sd.psi = [](double t, double) { return t; };
    sd.psi_generator = [](double, double) { return 1.0; };
    sd.g_tilde = [](double, double y) { return y; };
    m.supermodular = sd;

    // Positive state: keep the grid inside (0, ~z0 * exp(6 sigma sqrt(T))).
    const double spread = sigma0 * std::sqrt(horizon);
    m.domain_hint = {z0 * std::exp(std::min(0.0, b0) * horizon - 6.0 * spread),
                     z0 * std::exp(std::max(0.0, b0) * horizon + 6.0 * spread)};
    return m;
}

// --- monotone separable -----------------------------------------------------

ModelSpec make_monotone_separable_model(const MonotoneSeparableParams& params) {
    require(static_cast<bool>(params.kbar) && static_cast<bool>(params.fbar) &&
                static_cast<bool>(params.lbar) && static_cast<bool>(params.hbar),
            "monotone: missing interaction pieces");

    // Sampled checks: fbar(t, .) nonincreasing, hbar nondecreasing.
    for (int it = 0; it < 20; ++it) {
        const double t = params.horizon * it / 19.0;
        double prev = params.fbar(t, -2.0);
        for (int iy = 1; iy <= 40; ++iy) {
            const double y = -2.0 + iy * 0.1;
            const double v = params.fbar(t, y);
            require(v <= prev + 1e-12, "monotone: fbar not nonincreasing in second argument");
            prev = v;
        }
    }
    {
        double prev = params.hbar(-2.0);
        for (int iy = 1; iy <= 40; ++iy) {
            const double y = -2.0 + iy * 0.1;
            const double v = params.hbar(y);
            require(v >= prev - 1e-12, "monotone: hbar not nondecreasing");
            prev = v;
        }
    }

    ModelSpec m;
    m.name = "monotone";
    m.horizon = params.horizon;
    m.drift = params.drift;
    m.vol = params.vol;
    m.initial_law = params.initial_law;
    m.moment_order = params.moment_order;

    auto kbar = params.kbar;
    auto fbar = params.fbar;
    m.m_features = [kbar](const MeasureSlice& slice) {
        double acc = 0.0;
        for (std::size_t j = 0; j < slice.mass.size(); ++j)
            acc += kbar(slice.centers[j]) * slice.mass[j];
        return std::vector<double>{acc};
    };
    m.running_reward = [kbar, fbar](double t, double x, const MeasureSlice& slice) {
        double kint;
        if (!slice.features.empty()) {
            kint = slice.features[0];
        } else {
            kint = 0.0;
            for (std::size_t j = 0; j < slice.mass.size(); ++j)
                kint += kbar(slice.centers[j]) * slice.mass[j];
        }
        return kbar(x) * fbar(t, kint);
    };

    auto lbar = params.lbar;
    auto hbar = params.hbar;
    m.mu_features = [lbar](const JointMeasure& mu) {
        double acc = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) acc += lbar(mu.x[k]) * mu.w[k];
        return std::vector<double>{acc};
    };
    m.terminal_reward = [lbar, hbar](double, double x, const MuView& mu) {
        double lint;
        if (!mu.features.empty()) {
            lint = mu.features[0];
        } else {
            lint = 0.0;
            if (mu.atoms)
                for (std::size_t k = 0; k < mu.atoms->size(); ++k)
                    lint += lbar(mu.atoms->x[k]) * mu.atoms->w[k];
        }
        return lbar(x) * hbar(lint);
    };
    if (params.lbar_generator) {
        auto lgen = params.lbar_generator;
        m.terminal_generator = [lgen, lbar, hbar](double t, double x, const MuView& mu) {
            double lint;
            if (!mu.features.empty()) {
                lint = mu.features[0];
            } else {
                lint = 0.0;
                if (mu.atoms)
                    for (std::size_t k = 0; k < mu.atoms->size(); ++k)
                        lint += lbar(mu.atoms->x[k]) * mu.atoms->w[k];
            }
            return lgen(t, x) * hbar(lint);
        };
    }

    m.structure_flags.lasry_lions = true;
    return m;
}

// --- reference instances ------------------------------------------------------

namespace bench {

ModelSpec bank_run() {
    BankRunParams p;
    p.horizon = 1.0;
    // Mean-reverting solvency signal.
    p.drift = [](double, double x) { return -0.3 * x; };
    p.vol = [](double, double) { return 0.6; };
    // Additive timing payoff: healthy banks reward waiting, a crowd that has
    // already run erodes it.
    p.f0 = [](double, double x, double y) { return x - 1.2 * y; };
    p.g = [](double x) { return 0.4 + 0.1 * std::tanh(x); };
    p.g_generator = [](double t, double x) {
        const double sech2 = 1.0 / (std::cosh(x) * std::cosh(x));
        const double gp = 0.1 * sech2;                      // g'
        const double gpp = -0.2 * sech2 * std::tanh(x);     // g''
        const double b = -0.3 * x;
        const double sig = 0.6;
        (void)t;
        return b * gp + 0.5 * sig * sig * gpp;
    };
    p.initial_law = InitialLaw::normal(0.3, 0.4);
    ModelSpec m = make_bank_run_model(p);
    m.name = "bank_run";
    return m;
}

ModelSpec gbm() { return make_gbm_model(0.05, 0.3, 1.0, 1.0); }

ModelSpec monotone() {
    MonotoneSeparableParams p;
    p.horizon = 1.0;
    p.drift = [](double, double x) { return -0.5 * x; };
    p.vol = [](double, double) { return 0.7; };
    p.kbar = [](double x) { return 1.0 + 0.5 * std::tanh(x); };
    p.fbar = [](double t, double y) { return 0.6 + 0.2 * t - y; };
    // lbar constant: the stop reward sees mu only through its (unit) mass,
    // which keeps the Lasry-Lions cross term identically zero.
    p.lbar = [](double) { return 1.0; };
    p.hbar = [](double y) { return 0.5 * y; };
    p.lbar_generator = [](double, double) { return 0.0; };
    p.initial_law = InitialLaw::normal(0.0, 0.5);
    ModelSpec m = make_monotone_separable_model(p);
    m.name = "monotone";
    return m;
}

} // namespace bench

} // namespace mfstop
