#pragma once
// Game instances: coefficients, rewards, entropy choice, initial law, and
// the shipped benchmark families (bank-run timing game, geometric Brownian
// motion, monotone separable interaction).
//
// Rewards see population measures through light views. The raw histogram /
// atom data is always present; models that interact through a handful of
// integrals declare feature extractors so that per-particle reward calls
// stay O(1) at Monte Carlo scale.

#include "mfstop/grid.hpp"
#include "mfstop/measures.hpp"

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mfstop {

// One time slice of the flow m, as seen by a running reward.
struct MeasureSlice {
    std::span<const double> mass;
    std::span<const double> centers;
    std::span<const double> features; // model-declared integrals, may be empty
    double total = 0.0;
};

// The stopping distribution mu, as seen by a terminal reward.
struct MuView {
    const JointMeasure* atoms = nullptr;
    std::span<const double> features;
    double total = 0.0;
};

struct EntropySpec {
    enum class Kind { cumulative_residual, user_table };
    Kind kind = Kind::cumulative_residual;
    std::function<double(double)> value; // E(z) on [0,1]
    double argmax_hint = 0.36787944117144233; // 1/e

    // Default E(z) = -z log z with the 0 log 0 = 0 convention.
    static EntropySpec cumulative_residual();
    static EntropySpec user(std::function<double(double)> value, double argmax_hint);

    // Sampled checks: E >= 0, strictly concave second differences, interior argmax.
    void validate(int grid_points = 257) const;
};

struct SupermodularData {
    std::function<double(double, double)> psi;           // psi(t, x)
    std::function<double(double, double)> psi_generator; // (d_t + L) psi
    std::function<double(double, double)> g_tilde;       // g~(x, y), g(x,mu) = g~(x, <psi,mu>)
};

struct InitialLaw {
    std::function<double(std::mt19937_64&)> sampler;
    double mean = 0.0;
    double stddev = 0.0;

    static InitialLaw point(double x0);
    static InitialLaw normal(double mean, double stddev);
};

struct StructureFlags {
    bool lasry_lions = false;
    bool supermodular = false;
};

struct ModelSpec {
    std::string name;
    double horizon = 1.0;
    int dim = 1; // grid DP is one-dimensional; the particle layer never branches on this

    std::function<double(double, double)> drift; // b(t, x)
    std::function<double(double, double)> vol;   // sigma(t, x)

    std::function<double(double, double, const MeasureSlice&)> running_reward;  // f(t, x, m_t)
    std::function<double(double, double, const MuView&)> terminal_reward;       // g(t, x, mu)
    std::function<double(double, double, const MuView&)> terminal_generator;    // Lg(t, x, mu), optional

    std::function<std::vector<double>(const MeasureSlice&)> m_features;   // optional
    std::function<std::vector<double>(const JointMeasure&)> mu_features;  // optional

    InitialLaw initial_law;
    EntropySpec entropy = EntropySpec::cumulative_residual();
    double moment_order = 1.0;
    StructureFlags structure_flags;
    std::optional<SupermodularData> supermodular;
    std::optional<std::pair<double, double>> domain_hint; // [x_min, x_max] override

    bool has_terminal_generator() const { return static_cast<bool>(terminal_generator); }

    // Basic invariants plus the sampled structural checks implied by
    // structure_flags, on an n_t x n_x probe grid over [0,T] x domain.
    void validate(int n_t = 50, int n_x = 50) const;
};

// --- shipped model families -------------------------------------------------

struct BankRunParams {
    double horizon = 1.0;
    std::function<double(double, double)> drift;
    std::function<double(double, double)> vol;
    // f0(t, x, y) with y in [0,1] the fraction already stopped; must be
    // nonincreasing in y (sampled check).
    std::function<double(double, double, double)> f0;
    std::function<double(double)> g;           // state-only stop reward
    std::function<double(double, double)> g_generator; // Lg(t, x)
    InitialLaw initial_law;
    double moment_order = 1.0;
    std::pair<double, double> check_domain{-3.0, 3.0};
};

// Timing game: f(t,x,m) = f0(t, x, 1 - m(R)); supermodular by construction.
ModelSpec make_bank_run_model(const BankRunParams& params);

// dZ = Z(b0 dt + sigma0 dW), f(t,z,m) = int (z+y) m(dy),
// g(t,z,mu) = int (t+s) mu(ds,dy); time-dependence of g lives in the t
// argument (the augmented-state convention).
ModelSpec make_gbm_model(double b0, double sigma0, double z0, double horizon = 1.0);

struct MonotoneSeparableParams {
    double horizon = 1.0;
    std::function<double(double, double)> drift;
    std::function<double(double, double)> vol;
    std::function<double(double)> kbar;
    std::function<double(double, double)> fbar; // fbar(t, y), nonincreasing in y
    std::function<double(double)> lbar;
    std::function<double(double)> hbar;         // nondecreasing
    std::function<double(double, double)> lbar_generator; // L lbar (t, x), optional
    InitialLaw initial_law;
    double moment_order = 1.0;
    std::pair<double, double> check_domain{-3.0, 3.0};
};

// f(t,x,m) = kbar(x) fbar(t, <kbar, m>), g(x,mu) = lbar(x) hbar(<lbar, mu>).
ModelSpec make_monotone_separable_model(const MonotoneSeparableParams& params);

// Reference benchmark instances used by the CLI and the acceptance suite.
namespace bench {
ModelSpec bank_run();
ModelSpec gbm();
ModelSpec monotone();
} // namespace bench

// Helpers shared by factories and tests. `centers` must outlive the slice.
MeasureSlice make_slice(const MeasureFlow& flow, int i, std::span<const double> centers,
                        std::span<const double> features);
MuView make_mu_view(const JointMeasure& mu, std::span<const double> features);

} // namespace mfstop
