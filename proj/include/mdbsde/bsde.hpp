#pragma once

#include "mdbsde/calculus.hpp"
#include "mdbsde/dividend.hpp"
#include "mdbsde/parallel.hpp"
#include "mdbsde/scenario.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mdbsde {

/// g(t, state, y, z, k^1..k^p). State carries the intensity of the active level only,
/// so k of inactive levels carries no weight.
using DriverFn = std::function<double(const State&, double y, double z, std::span<const double> k)>;

struct DriverSpec {
    DriverFn g;
    double lipschitz = 0.0;
    std::optional<CoefficientSet> linear;

    double operator()(const State& s, double y, double z, std::span<const double> k) const;
};

DriverSpec zero_driver();
/// alpha y + beta z + gamma^{active} k^{active} lambda + delta; C = max of the declared bounds.
DriverSpec linear_driver(const CoefficientSet& c);

struct ProbeReport {
    bool lipschitz_ok = true;
    bool ignores_defaulted_levels = true;
    bool finite_at_zero = true;
    double worst_ratio = 0.0;  // max |dg| / (C (|dy| + |dz| + sum sqrt(lambda)|dk|))
    bool passed() const { return lipschitz_ok && ignores_defaulted_levels && finite_at_zero; }
};

/// Randomized check of the Lipschitz bound and of independence from k^j after tau_j.
ProbeReport probe_driver(const DriverSpec& driver, const ScenarioBatch& b, int probes = 200,
                         std::uint64_t seed = 7);

/// eta(W_T, N_T, tau). `markov` claims ignore tau.
struct TerminalClaim {
    std::function<double(double w, int defaults, std::span<const double> tau)> payoff;
    bool markov = true;

    double value(const ScenarioBatch& b, Eigen::Index path) const;

    static TerminalClaim constant(double c);
    /// payout on A_k = {N_T = k}
    static TerminalClaim event(int defaults, double payout);
    /// sum_j c_j W_T^j, times weights[N_T] when weights are given
    static TerminalClaim polynomial(std::vector<double> coefficients, std::vector<double> weights = {});
    /// scale * max(T - tau_level, 0)
    static TerminalClaim time_after_default(int level, double scale, double horizon);
};

struct ExplicitOptions {
    /// Pay theta with weight Gamma_{tau-}(1 + gamma) instead of Gamma_tau.
    bool jump_weighted_payouts = false;
    int threads = 1;
};

/// Y_0 = E[Gamma_{0,T} eta + int Gamma_{s-} dD' + sum Gamma_{tau_i} theta^i 1{tau_i <= T}], delta folded into d'.
Estimate solve_linear_explicit(const ScenarioBatch& b, const CoefficientSet& c, const TerminalClaim& claim,
                               const DividendSpec& dividend, const ExplicitOptions& options = {});

/// Per-path contributions of the explicit estimator (the mean is Y_0).
Eigen::ArrayXd explicit_contributions(const ScenarioBatch& b, const CoefficientSet& c, const TerminalClaim& claim,
                                      const DividendSpec& dividend, const ExplicitOptions& options = {});

enum class Transitions {
    realized,   // strata are the realized default configurations
    integrated  // every configuration fitted on all paths, in-step default integrated given W
};

struct LsmcOptions {
    int degree = 3;
    Transitions transitions = Transitions::realized;
    bool keep_paths = true;
    int inner_iterations = 2;
    int min_paths_per_coefficient = 10;
    int threads = 1;
};

struct StepFit {
    int degree = -1;  // -1: configuration not fitted at this step
    Eigen::VectorXd value, z, k;
};

struct RegressionDiagnostics {
    int basis_size = 0;
    double max_condition = 1.0;
    int ridge_fallbacks = 0;
    int reduced_fits = 0;
};

struct BsdeSolution {
    double y0 = 0.0;
    double se = 0.0;
    Eigen::ArrayXXd y;               // paths x (n+1), kept on request
    Eigen::ArrayXXd z;               // paths x n
    std::vector<Eigen::ArrayXXd> k;  // per level, paths x n, 0 off the active level
    Eigen::ArrayXd y_mean, y_se;     // cross-path statistics per grid point
    std::vector<std::vector<StepFit>> fits;  // [step][configuration]
    RegressionDiagnostics diagnostics;
};

/// Driver seen by the backward sweep; `path` and `step` let frozen drivers read stored processes.
using SweepDriver =
    std::function<double(Eigen::Index path, int step, const State&, double y, double z, std::span<const double> k)>;

/// Terminal values: a claim, or per-path values (realized transitions only).
struct Terminal {
    const TerminalClaim* claim = nullptr;
    const Eigen::ArrayXd* values = nullptr;
};

BsdeSolution backward_sweep(const ScenarioBatch& b, const SweepDriver& driver, const Terminal& terminal,
                            const DividendSpec& dividend, const LsmcOptions& options);

BsdeSolution solve_backward_lsmc(const ScenarioBatch& b, const DriverSpec& driver, const TerminalClaim& claim,
                                 const DividendSpec& dividend, const LsmcOptions& options = {});

struct PicardResult {
    BsdeSolution solution;
    double beta_w = 0.0;
    std::vector<double> distances;  // distance of iterate j+1 to iterate j
    std::vector<double> ratios;     // distances[j+1] / distances[j]
    std::vector<double> y0;         // Y_0 per iterate
};

/// beta_w = 2 (p+2)^2 (T+1) C^2 unless overridden (1 when C = 0).
PicardResult solve_picard(const ScenarioBatch& b, const DriverSpec& driver, const TerminalClaim& claim,
                          const DividendSpec& dividend, int iterations, const LsmcOptions& options = {},
                          std::optional<double> beta_w = std::nullopt);

/// Distance ||dY||^2_beta + ||dZ||^2_beta + sum ||dK^i||^2_{lambda^i,beta} between two kept solutions.
double solution_distance(const ScenarioBatch& b, const BsdeSolution& x, const BsdeSolution& y, double beta_w);

/// Batch restricted to [0, t_steps].
ScenarioBatch truncate(const ScenarioBatch& b, int steps);

/// CSV of t, configuration, Y-mean, Y-SE, Z- and K-coefficients.
void write_solution_csv(const ScenarioBatch& b, const BsdeSolution& s, std::ostream& out);

}  // namespace mdbsde
