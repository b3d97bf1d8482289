#pragma once

#include "mdbsde/parallel.hpp"
#include "mdbsde/scenario.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <vector>

namespace mdbsde {

using CoefficientFn = std::function<double(const State&)>;

/// Coefficients of a linear driver alpha y + beta z + sum gamma^i k^i lambda^i + delta.
/// Empty functions read as 0. Bounds are checked whenever a coefficient is evaluated.
struct CoefficientSet {
    CoefficientFn alpha, beta, delta;
    std::vector<CoefficientFn> gamma;  // level i at index i-1
    double bound_alpha = std::numeric_limits<double>::infinity();
    double bound_beta = std::numeric_limits<double>::infinity();
    double bound_gamma = std::numeric_limits<double>::infinity();  // on |gamma^i| sqrt(lambda^i)

    double a(const State& s) const;
    double b(const State& s) const;
    double d(const State& s) const;
    /// gamma of `level` (1-based); 0 when the level has no function.
    double g(int level, const State& s) const;
    /// gamma of the level active in s, 0 after the last default.
    double active_gamma(const State& s) const { return g(s.defaults + 1, s); }

    static CoefficientFn constant(double v);
};

/// Gamma_{t,s} for s on the grid from `start_step` on (column 0 is s = t),
/// plus the values right before and after each default in (t, T].
struct AdjointPath {
    int start_step = 0;
    Eigen::ArrayXXd values;
    Eigen::ArrayXXd before_default;  // NaN where tau_i is not in (t, T]
    Eigen::ArrayXXd at_default;
};

/// exp(int alpha + int beta dW - 1/2 int beta^2 - sum int gamma lambda) * prod (1 + gamma^i_{tau_i}).
/// Increments of the log over a segment; dr-integrals by trapezoid, dW by left point.
double log_increment(const ScenarioBatch& b, const CoefficientSet& c, const Segment& s);

AdjointPath stochastic_exponential_closed_form(const ScenarioBatch& b, const CoefficientSet& c,
                                               int start_step = 0, int threads = 1);

/// Forward Euler for dGamma = Gamma_-(alpha dt + beta dW + sum gamma dM), jumps applied at tau.
/// With `milstein` the term beta^2 (dW^2 - dt) / 2 is added, which makes the scheme first order
/// in the strong sense when beta != 0.
AdjointPath stochastic_exponential_euler(const ScenarioBatch& b, const CoefficientSet& c, int start_step = 0,
                                         bool milstein = true, int threads = 1);

/// E[int_0^T e^{beta_w t} phi_t^2 dt]. A process with n+1 columns is integrated by trapezoid,
/// one with n columns (values on [t_k, t_{k+1})) by left rectangles.
Estimate beta_norm(const TimeGrid& grid, const Eigen::ArrayXXd& process, double beta_w);
/// Intensity-weighted variant E[int e^{beta_w t} k_t^2 lambda_t dt]; `intensity` is a grid path.
Estimate beta_norm(const TimeGrid& grid, const Eigen::ArrayXXd& process, const Eigen::ArrayXXd& intensity,
                   double beta_w);

}  // namespace mdbsde
