#include "mdbsde/calculus.hpp"

#include "mdbsde/errors.hpp"

#include <cmath>
#include <string>

namespace mdbsde {

namespace {

double checked(const CoefficientFn& f, const State& s, double bound, double scale, const char* name) {
    if (!f) return 0.0;
    const double v = f(s);
    if (!std::isfinite(v)) throw ModelError(std::string("coefficient ") + name + " is not finite");
    if (std::abs(v) * scale > bound)
        throw ModelError(std::string("coefficient ") + name + " exceeds its declared bound at t=" +
                         std::to_string(s.t));
    return v;
}

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

}  // namespace

double CoefficientSet::a(const State& s) const { return checked(alpha, s, bound_alpha, 1.0, "alpha"); }
double CoefficientSet::b(const State& s) const { return checked(beta, s, bound_beta, 1.0, "beta"); }
double CoefficientSet::d(const State& s) const {
    return checked(delta, s, std::numeric_limits<double>::infinity(), 1.0, "delta");
}

double CoefficientSet::g(int level, const State& s) const {
    if (level < 1 || level > static_cast<int>(gamma.size())) return 0.0;
    return checked(gamma[static_cast<std::size_t>(level - 1)], s, bound_gamma, std::sqrt(s.intensity), "gamma");
}

CoefficientFn CoefficientSet::constant(double v) {
    return [v](const State&) { return v; };
}

double log_increment(const ScenarioBatch& b, const CoefficientSet& c, const Segment& s) {
    const State s0 = b.state(s.t0, s.w0, s.defaults);
    const State s1 = b.state(s.t1, s.w1, s.defaults);
    const double len = s.length();
    const double b0 = c.b(s0), b1 = c.b(s1);
    double v = 0.5 * len * (c.a(s0) + c.a(s1)) - 0.25 * len * (b0 * b0 + b1 * b1) + b0 * (s.w1 - s.w0);
    if (s.lambda_bar > 0.0) v -= 0.5 * len * s.lambda_bar * (c.active_gamma(s0) + c.active_gamma(s1));
    return v;
}

namespace {

template <class Step>
AdjointPath run_adjoint(const ScenarioBatch& b, const CoefficientSet& c, int start_step, int threads, Step&& step) {
    const int n = b.grid.steps();
    if (start_step < 0 || start_step > n) throw ModelError("adjoint: start step outside the grid");
    const int p = b.levels();
    AdjointPath out;
    out.start_step = start_step;
    out.values.resize(b.paths(), n - start_step + 1);
    out.before_default.setConstant(b.paths(), p, nan_value);
    out.at_default.setConstant(b.paths(), p, nan_value);
    parallel_for(b.paths(), threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            double gam = 1.0;
            out.values(j, 0) = 1.0;
            for (int k = start_step; k < n; ++k) {
                walk_step(
                    b, j, k, {}, [&](const Segment& s) { gam = step(gam, s); },
                    [&](int level, double t, double w) {
                        out.before_default(j, level - 1) = gam;
                        gam *= 1.0 + c.g(level, b.state(t, w, level - 1));
                        out.at_default(j, level - 1) = gam;
                    });
                if (!std::isfinite(gam)) throw SolverError("stochastic exponential is not finite");
                out.values(j, k - start_step + 1) = gam;
            }
        }
    });
    return out;
}

}  // namespace

AdjointPath stochastic_exponential_closed_form(const ScenarioBatch& b, const CoefficientSet& c, int start_step,
                                               int threads) {
    return run_adjoint(b, c, start_step, threads,
                       [&](double gam, const Segment& s) { return gam * std::exp(log_increment(b, c, s)); });
}

AdjointPath stochastic_exponential_euler(const ScenarioBatch& b, const CoefficientSet& c, int start_step,
                                         bool milstein, int threads) {
    return run_adjoint(b, c, start_step, threads, [&](double gam, const Segment& s) {
        const State s0 = b.state(s.t0, s.w0, s.defaults);
        const double len = s.length();
        const double dw = s.w1 - s.w0;
        const double beta = c.b(s0);
        double f = 1.0 + c.a(s0) * len + beta * dw;
        if (milstein) f += 0.5 * beta * beta * (dw * dw - len);
        if (s.lambda_bar > 0.0) f -= c.active_gamma(s0) * s.lambda_bar * len;
        return gam * f;
    });
}

namespace {

Estimate weighted_norm(const TimeGrid& grid, const Eigen::ArrayXXd& process, const Eigen::ArrayXXd* intensity,
                       double beta_w) {
    if (!(beta_w > 0.0)) throw ModelError("beta norm: weight exponent must be positive");
    const int n = grid.steps();
    const bool trapezoid = process.cols() == n + 1;
    if (!trapezoid && process.cols() != n) throw ModelError("beta norm: process does not match the grid");
    const double dt = grid.dt();
    Eigen::ArrayXd per_path = Eigen::ArrayXd::Zero(process.rows());
    for (int k = 0; k < process.cols(); ++k) {
        double wk = std::exp(beta_w * grid.time(k)) * dt;
        if (trapezoid && (k == 0 || k == n)) wk *= 0.5;
        Eigen::ArrayXd v = process.col(k).square();
        if (intensity) v *= intensity->col(k);
        per_path += wk * v;
    }
    return estimate(per_path);
}

}  // namespace

Estimate beta_norm(const TimeGrid& grid, const Eigen::ArrayXXd& process, double beta_w) {
    return weighted_norm(grid, process, nullptr, beta_w);
}

Estimate beta_norm(const TimeGrid& grid, const Eigen::ArrayXXd& process, const Eigen::ArrayXXd& intensity,
                   double beta_w) {
    if (intensity.rows() != process.rows() || intensity.cols() < process.cols())
        throw ModelError("beta norm: intensity does not match the process");
    return weighted_norm(grid, process, &intensity, beta_w);
}

}  // namespace mdbsde
