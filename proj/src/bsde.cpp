#include "mdbsde/bsde.hpp"

#include "mdbsde/errors.hpp"
#include "mdbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace mdbsde {

double DriverSpec::operator()(const State& s, double y, double z, std::span<const double> k) const {
    const double v = g(s, y, z, k);
    if (!std::isfinite(v)) throw SolverError("driver returned a non-finite value at t=" + std::to_string(s.t));
    return v;
}

DriverSpec zero_driver() {
    DriverSpec d;
    d.g = [](const State&, double, double, std::span<const double>) { return 0.0; };
    d.lipschitz = 0.0;
    return d;
}

DriverSpec linear_driver(const CoefficientSet& c) {
    DriverSpec d;
    d.linear = c;
    d.g = [c](const State& s, double y, double z, std::span<const double> k) {
        double v = c.a(s) * y + c.b(s) * z + c.d(s);
        if (s.defaults < static_cast<int>(k.size()) && s.intensity > 0.0)
            v += c.active_gamma(s) * k[static_cast<std::size_t>(s.defaults)] * s.intensity;
        return v;
    };
    double bound = 0.0;
    for (double x : {c.bound_alpha, c.bound_beta, c.bound_gamma})
        if (std::isfinite(x)) bound = std::max(bound, x);
    d.lipschitz = bound;
    return d;
}

ProbeReport probe_driver(const DriverSpec& driver, const ScenarioBatch& b, int probes, std::uint64_t seed) {
    ProbeReport rep;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_int_distribution<Eigen::Index> pick_path(0, b.paths() - 1);
    std::uniform_int_distribution<int> pick_step(0, b.grid.steps());
    const int p = b.levels();
    std::vector<double> k1(static_cast<std::size_t>(p)), k2(static_cast<std::size_t>(p)), zero(static_cast<std::size_t>(p), 0.0);
    for (int it = 0; it < probes; ++it) {
        const State s = b.grid_state(pick_path(gen), pick_step(gen));
        const double y1 = normal(gen), y2 = normal(gen), z1 = normal(gen), z2 = normal(gen);
        for (int i = 0; i < p; ++i) {
            k1[static_cast<std::size_t>(i)] = normal(gen);
            k2[static_cast<std::size_t>(i)] = normal(gen);
        }
        const double g1 = driver(s, y1, z1, k1);
        const double g2 = driver(s, y2, z2, k2);
        double dist = std::abs(y1 - y2) + std::abs(z1 - z2);
        if (s.defaults < p) dist += std::sqrt(s.intensity) * std::abs(k1[static_cast<std::size_t>(s.defaults)] - k2[static_cast<std::size_t>(s.defaults)]);
        const double diff = std::abs(g1 - g2);
        const double slack = 1e-12 * (1.0 + std::abs(g1) + std::abs(g2));
        if (dist > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, diff / dist);
        if (diff > driver.lipschitz * dist * (1.0 + 1e-9) + slack) rep.lipschitz_ok = false;

        if (s.defaults > 0) {
            auto k3 = k1;
            for (int i = 0; i < s.defaults; ++i) k3[static_cast<std::size_t>(i)] += 1.0 + normal(gen);
            if (std::abs(driver(s, y1, z1, k3) - g1) > slack) rep.ignores_defaulted_levels = false;
        }
        if (!std::isfinite(driver.g(s, 0.0, 0.0, zero))) rep.finite_at_zero = false;
    }
    return rep;
}

double TerminalClaim::value(const ScenarioBatch& b, Eigen::Index path) const {
    const int n = b.grid.steps();
    std::vector<double> tau(static_cast<std::size_t>(b.levels()));
    for (int i = 0; i < b.levels(); ++i) tau[static_cast<std::size_t>(i)] = b.tau(path, i);
    const double v = payoff(b.w(path, n), b.defaults_at(path, b.grid.horizon()), tau);
    if (!std::isfinite(v)) throw ModelError("terminal claim is not finite");
    return v;
}

TerminalClaim TerminalClaim::constant(double c) {
    return {[c](double, int, std::span<const double>) { return c; }, true};
}

TerminalClaim TerminalClaim::event(int defaults, double payout) {
    return {[=](double, int n, std::span<const double>) { return n == defaults ? payout : 0.0; }, true};
}

TerminalClaim TerminalClaim::polynomial(std::vector<double> coefficients, std::vector<double> weights) {
    return {[coefficients = std::move(coefficients), weights = std::move(weights)](double w, int n,
                                                                                   std::span<const double>) {
                double v = 0.0;
                for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) v = v * w + *it;
                if (!weights.empty()) v *= weights[static_cast<std::size_t>(std::min<int>(n, static_cast<int>(weights.size()) - 1))];
                return v;
            },
            true};
}

TerminalClaim TerminalClaim::time_after_default(int level, double scale, double horizon) {
    return {[=](double, int, std::span<const double> tau) {
                const double t = tau[static_cast<std::size_t>(level - 1)];
                return t <= horizon ? scale * (horizon - t) : 0.0;
            },
            false};
}

// ---------------------------------------------------------------- explicit linear solver

Eigen::ArrayXd explicit_contributions(const ScenarioBatch& b, const CoefficientSet& c, const TerminalClaim& claim,
                                      const DividendSpec& dividend, const ExplicitOptions& options) {
    const int n = b.grid.steps();
    const auto dates = dividend.dates(b.grid.horizon());
    Eigen::ArrayXd out(b.paths());
    parallel_for(b.paths(), options.threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            double gam = 1.0;
            double flows = 0.0;
            for (int k = 0; k < n; ++k) {
                walk_step(
                    b, j, k, dates,
                    [&](const Segment& s) {
                        const State s0 = b.state(s.t0, s.w0, s.defaults);
                        const State s1 = b.state(s.t1, s.w1, s.defaults);
                        const double next = gam * std::exp(log_increment(b, c, s));
                        const double r0 = dividend.rate_at(s0) + c.d(s0);
                        const double r1 = dividend.rate_at(s1) + c.d(s1);
                        flows += 0.5 * s.length() * (gam * r0 + next * r1);
                        gam = next;
                        if (!dividend.jumps.empty()) flows += gam * dividend.scheduled_between(s.t0, s.t1);
                    },
                    [&](int level, double t, double w) {
                        const State pre = b.state(t, w, level - 1);
                        const double theta = dividend.payout(level, pre);
                        const double factor = 1.0 + c.g(level, pre);
                        if (options.jump_weighted_payouts) {
                            flows += gam * theta * factor;
                            gam *= factor;
                        } else {
                            gam *= factor;
                            flows += gam * theta;
                        }
                    });
            }
            const double v = gam * claim.value(b, j) + flows;
            if (!std::isfinite(v)) throw SolverError("explicit estimator produced a non-finite value");
            out[j] = v;
        }
    });
    return out;
}

Estimate solve_linear_explicit(const ScenarioBatch& b, const CoefficientSet& c, const TerminalClaim& claim,
                               const DividendSpec& dividend, const ExplicitOptions& options) {
    return estimate(explicit_contributions(b, c, claim, dividend, options));
}

// ---------------------------------------------------------------- backward scheme

namespace {

struct StepData {
    Eigen::ArrayXi config;
    Eigen::ArrayXd target, dw, dm, lambda;
};

int fit_degree(Eigen::Index count, const LsmcOptions& o) {
    int deg = o.degree;
    while (deg > 0 && count < static_cast<Eigen::Index>(o.min_paths_per_coefficient) * (deg + 1)) --deg;
    return deg;
}

void note_fit(RegressionDiagnostics& d, const Projection& proj, int degree, int requested, double t) {
    d.max_condition = std::max(d.max_condition, proj.condition());
    if (proj.ridge()) ++d.ridge_fallbacks;
    if (t > 0.0 && degree < requested) ++d.reduced_fits;
}

// Implicit-in-y pass: y = f + dt g(y, z, k), two fixed-point iterations by default.
double implicit_value(const SweepDriver& driver, Eigen::Index j, int k, const State& s, double f, double z,
                      std::span<const double> kv, double dt, int iterations) {
    double y = f;
    for (int it = 0; it < iterations; ++it) y = f + dt * driver(j, k, s, y, z, kv);
    return y;
}

void init_solution(BsdeSolution& sol, const ScenarioBatch& b, const LsmcOptions& o) {
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    sol.fits.assign(static_cast<std::size_t>(n), std::vector<StepFit>(static_cast<std::size_t>(p + 1)));
    sol.y_mean.resize(n + 1);
    sol.y_se.resize(n + 1);
    sol.diagnostics.basis_size = o.degree + 1;
    if (o.keep_paths) {
        sol.y.resize(m, n + 1);
        sol.z = Eigen::ArrayXXd::Zero(m, n);
        sol.k.assign(static_cast<std::size_t>(p), Eigen::ArrayXXd::Zero(m, n));
    }
}

void record_layer(BsdeSolution& sol, int k, const Eigen::ArrayXd& y, bool keep) {
    const Estimate e = estimate(y);
    sol.y_mean[k] = e.mean;
    sol.y_se[k] = e.se;
    if (keep) sol.y.col(k) = y;
}

BsdeSolution sweep_realized(const ScenarioBatch& b, const SweepDriver& driver, const Eigen::ArrayXd& terminal,
                            const DividendSpec& dividend, const LsmcOptions& o) {
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double dt = b.grid.dt();
    const auto dates = dividend.dates(b.grid.horizon());
    BsdeSolution sol;
    init_solution(sol, b, o);

    Eigen::ArrayXd next = terminal;
    record_layer(sol, n, next, o.keep_paths);
    StepData sd;
    sd.config.resize(m);
    sd.target.resize(m);
    sd.dw.resize(m);
    sd.dm.resize(m);
    sd.lambda.resize(m);
    Eigen::ArrayXd current(m), pathwise = terminal;

    for (int k = n - 1; k >= 0; --k) {
        const double t = b.grid.time(k);
        parallel_for(m, o.threads, [&](Eigen::Index begin, Eigen::Index end) {
            for (Eigen::Index j = begin; j < end; ++j) {
                const int c = b.defaults_at(j, t);
                double dd = 0.0, dl = 0.0, dn = 0.0;
                walk_step(
                    b, j, k, dates,
                    [&](const Segment& s) {
                        if (dividend.rate)
                            dd += 0.5 * s.length() *
                                  (dividend.rate_at(b.state(s.t0, s.w0, s.defaults)) +
                                   dividend.rate_at(b.state(s.t1, s.w1, s.defaults)));
                        if (!dividend.jumps.empty()) dd += dividend.scheduled_between(s.t0, s.t1);
                        if (s.defaults == c) dl += s.length() * s.lambda_bar;
                    },
                    [&](int level, double tt, double w) {
                        dd += dividend.payout(level, b.state(tt, w, level - 1));
                        if (level == c + 1) dn = 1.0;
                    });
                sd.config[j] = c;
                sd.target[j] = next[j] + dd;
                pathwise[j] += dd;
                sd.dw[j] = b.w(j, k + 1) - b.w(j, k);
                sd.dm[j] = dn - dl;
                sd.lambda[j] = c < p ? b.model.rate(c + 1, t, b.w(j, k)) : 0.0;
            }
        });

        for (int c = 0; c <= p; ++c) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < m; ++j)
                if (sd.config[j] == c) idx.push_back(j);
            if (idx.empty()) continue;
            const auto ms = static_cast<Eigen::Index>(idx.size());
            const int deg = fit_degree(ms, o);
            Eigen::ArrayXd w(ms), target(ms);
            for (Eigen::Index q = 0; q < ms; ++q) {
                w[q] = b.w(idx[static_cast<std::size_t>(q)], k);
                target[q] = sd.target[idx[static_cast<std::size_t>(q)]];
            }
            const Eigen::MatrixXd x = polynomial_basis(w, t, deg);
            const Projection proj(x);
            note_fit(sol.diagnostics, proj, static_cast<int>(x.cols()) - 1, o.degree, t);
            StepFit fit;
            fit.degree = static_cast<int>(x.cols()) - 1;
            fit.value = proj.coefficients(Eigen::MatrixXd(target.matrix())).col(0);
            const Eigen::ArrayXd f = (x * fit.value).array();
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ms, 2);
            for (Eigen::Index q = 0; q < ms; ++q) {
                const Eigen::Index j = idx[static_cast<std::size_t>(q)];
                const double resid = target[q] - f[q];
                rhs(q, 0) = resid * sd.dw[j] / dt;
                if (c < p && sd.lambda[j] > 0.0) rhs(q, 1) = resid * sd.dm[j] / (sd.lambda[j] * dt);
            }
            const Eigen::MatrixXd coef = proj.coefficients(rhs);
            fit.z = coef.col(0);
            fit.k = c < p ? Eigen::VectorXd(coef.col(1)) : Eigen::VectorXd::Zero(x.cols());
            const Eigen::ArrayXd zv = (x * fit.z).array();
            const Eigen::ArrayXd kv = (x * fit.k).array();
            parallel_for(ms, o.threads, [&](Eigen::Index begin, Eigen::Index end) {
                std::vector<double> kvec(static_cast<std::size_t>(p), 0.0);
                for (Eigen::Index q = begin; q < end; ++q) {
                    const Eigen::Index j = idx[static_cast<std::size_t>(q)];
                    const State s{t, b.w(j, k), c, sd.lambda[j]};
                    if (c < p) kvec[static_cast<std::size_t>(c)] = kv[q];
                    current[j] = implicit_value(driver, j, k, s, f[q], zv[q], kvec, dt, o.inner_iterations);
                    pathwise[j] += dt * driver(j, k, s, current[j], zv[q], kvec);
                    if (o.keep_paths) {
                        sol.z(j, k) = zv[q];
                        if (c < p) sol.k[static_cast<std::size_t>(c)](j, k) = kv[q];
                    }
                }
            });
            sol.fits[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = std::move(fit);
        }
        next = current;
        record_layer(sol, k, next, o.keep_paths);
    }
    sol.y0 = sol.y_mean[0];
    sol.se = estimate(pathwise).se;
    return sol;
}

BsdeSolution sweep_integrated(const ScenarioBatch& b, const SweepDriver& driver, const TerminalClaim& claim,
                              const DividendSpec& dividend, const LsmcOptions& o) {
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double dt = b.grid.dt();
    const double horizon = b.grid.horizon();
    dividend.dates(horizon);  // validates the dates
    BsdeSolution sol;
    init_solution(sol, b, o);

    std::vector<Eigen::ArrayXd> value(static_cast<std::size_t>(p + 1), Eigen::ArrayXd(m));
    for (int c = 0; c <= p; ++c)
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = claim.payoff(b.w(j, n), c, {});
            if (!std::isfinite(v)) throw ModelError("terminal claim is not finite");
            value[static_cast<std::size_t>(c)][j] = v;
        }
    {
        Eigen::ArrayXd realized(m);
        for (Eigen::Index j = 0; j < m; ++j) realized[j] = value[static_cast<std::size_t>(b.defaults_at(j, horizon))][j];
        record_layer(sol, n, realized, o.keep_paths);
    }
    std::vector<Eigen::ArrayXd> fresh = value;
    Eigen::ArrayXd target(m), jump(m), realized(m);
    Eigen::ArrayXd pathwise = evaluate_D(b, dividend, o.threads).col(n);
    for (Eigen::Index j = 0; j < m; ++j) pathwise[j] += value[static_cast<std::size_t>(b.defaults_at(j, horizon))][j];
    Eigen::ArrayXi config(m);

    for (int k = n - 1; k >= 0; --k) {
        const double t = b.grid.time(k), t1 = b.grid.time(k + 1);
        const double scheduled = dividend.scheduled_between(t, t1);
        const int deg = fit_degree(m, o);
        const Eigen::MatrixXd x = polynomial_basis(b.w.col(k), t, deg);
        const Projection proj(x);
        const Eigen::ArrayXd dw = b.w.col(k + 1) - b.w.col(k);
        for (int c = 0; c <= p; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            parallel_for(m, o.threads, [&](Eigen::Index begin, Eigen::Index end) {
                for (Eigen::Index j = begin; j < end; ++j) {
                    const State s0 = b.state(t, b.w(j, k), c);
                    const State s1 = b.state(t1, b.w(j, k + 1), c);
                    const double flow = 0.5 * dt * (dividend.rate_at(s0) + dividend.rate_at(s1)) + scheduled;
                    if (c < p) {
                        const double stay = std::exp(-0.5 * dt * (s0.intensity + s1.intensity));
                        jump[j] = value[cu + 1][j] + dividend.payout(c + 1, s1);
                        target[j] = stay * value[cu][j] + (1.0 - stay) * jump[j] + flow;
                    } else {
                        jump[j] = 0.0;
                        target[j] = value[cu][j] + flow;
                    }
                }
            });
            note_fit(sol.diagnostics, proj, deg, o.degree, t);
            StepFit fit;
            fit.degree = static_cast<int>(x.cols()) - 1;
            fit.value = proj.coefficients(Eigen::MatrixXd(target.matrix())).col(0);
            const Eigen::ArrayXd f = (x * fit.value).array();
            Eigen::MatrixXd rhs(m, 2);
            rhs.col(0) = ((target - f) * dw / dt).matrix();
            rhs.col(1) = c < p ? Eigen::VectorXd((jump - value[cu]).matrix()) : Eigen::VectorXd::Zero(m);
            const Eigen::MatrixXd coef = proj.coefficients(rhs);
            fit.z = coef.col(0);
            fit.k = coef.col(1);
            const Eigen::ArrayXd zv = (x * fit.z).array();
            const Eigen::ArrayXd kv = (x * fit.k).array();
            parallel_for(m, o.threads, [&](Eigen::Index begin, Eigen::Index end) {
                std::vector<double> kvec(static_cast<std::size_t>(p), 0.0);
                for (Eigen::Index j = begin; j < end; ++j) {
                    const State s = b.state(t, b.w(j, k), c);
                    if (c < p) kvec[cu] = kv[j];
                    fresh[cu][j] = implicit_value(driver, j, k, s, f[j], zv[j], kvec, dt, o.inner_iterations);
                    if (b.defaults_at(j, t) != c) continue;
                    pathwise[j] += dt * driver(j, k, s, fresh[cu][j], zv[j], kvec);
                    if (o.keep_paths) {
                        sol.z(j, k) = zv[j];
                        if (c < p) sol.k[cu](j, k) = kv[j];
                    }
                }
            });
            sol.fits[static_cast<std::size_t>(k)][cu] = std::move(fit);
        }
        std::swap(value, fresh);
        for (Eigen::Index j = 0; j < m; ++j) realized[j] = value[static_cast<std::size_t>(b.defaults_at(j, t))][j];
        record_layer(sol, k, realized, o.keep_paths);
    }
    sol.y0 = sol.y_mean[0];
    sol.se = estimate(pathwise).se;
    return sol;
}

}  // namespace

BsdeSolution backward_sweep(const ScenarioBatch& b, const SweepDriver& driver, const Terminal& terminal,
                            const DividendSpec& dividend, const LsmcOptions& options) {
    if (options.degree < 0) throw ModelError("lsmc: basis degree must be nonnegative");
    if (options.inner_iterations < 1) throw ModelError("lsmc: need at least one inner iteration");
    if (options.transitions == Transitions::integrated) {
        if (!terminal.claim) throw ModelError("lsmc: integrated transitions need a terminal claim");
        if (!terminal.claim->markov)
            throw ModelError("lsmc: integrated transitions need a claim depending on (W_T, N_T) only");
        return sweep_integrated(b, driver, *terminal.claim, dividend, options);
    }
    Eigen::ArrayXd values;
    if (terminal.values) {
        if (terminal.values->size() != b.paths()) throw ModelError("lsmc: terminal values do not match the batch");
        values = *terminal.values;
    } else if (terminal.claim) {
        values.resize(b.paths());
        for (Eigen::Index j = 0; j < b.paths(); ++j) values[j] = terminal.claim->value(b, j);
    } else {
        throw ModelError("lsmc: no terminal condition");
    }
    return sweep_realized(b, driver, values, dividend, options);
}

BsdeSolution solve_backward_lsmc(const ScenarioBatch& b, const DriverSpec& driver, const TerminalClaim& claim,
                                 const DividendSpec& dividend, const LsmcOptions& options) {
    const SweepDriver sweep = [&driver](Eigen::Index, int, const State& s, double y, double z,
                                        std::span<const double> k) { return driver(s, y, z, k); };
    return backward_sweep(b, sweep, Terminal{&claim, nullptr}, dividend, options);
}

double solution_distance(const ScenarioBatch& b, const BsdeSolution& x, const BsdeSolution& y, double beta_w) {
    if (x.y.size() == 0 || y.y.size() == 0) throw ModelError("solution distance needs kept path values");
    double d = beta_norm(b.grid, x.y - y.y, beta_w).mean + beta_norm(b.grid, x.z - y.z, beta_w).mean;
    for (int i = 1; i <= b.levels(); ++i)
        d += beta_norm(b.grid, x.k[static_cast<std::size_t>(i - 1)] - y.k[static_cast<std::size_t>(i - 1)],
                       intensity_path(b, i), beta_w)
                 .mean;
    return d;
}

PicardResult solve_picard(const ScenarioBatch& b, const DriverSpec& driver, const TerminalClaim& claim,
                          const DividendSpec& dividend, int iterations, const LsmcOptions& options,
                          std::optional<double> beta_w) {
    if (iterations < 2) throw ModelError("picard: need at least two iterations");
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double c = driver.lipschitz;
    PicardResult res;
    res.beta_w = beta_w ? *beta_w : 2.0 * (p + 2) * (p + 2) * (b.grid.horizon() + 1.0) * c * c;
    if (!(res.beta_w > 0.0)) res.beta_w = 1.0;

    LsmcOptions o = options;
    o.keep_paths = true;
    o.transitions = Transitions::realized;
    std::vector<Eigen::ArrayXXd> lambda;
    for (int i = 1; i <= p; ++i) lambda.push_back(intensity_path(b, i));

    BsdeSolution prev;
    prev.y = Eigen::ArrayXXd::Zero(m, n + 1);
    prev.z = Eigen::ArrayXXd::Zero(m, n);
    prev.k.assign(static_cast<std::size_t>(p), Eigen::ArrayXXd::Zero(m, n));
    for (int it = 0; it < iterations; ++it) {
        const SweepDriver frozen = [&](Eigen::Index j, int k, const State& s, double, double,
                                       std::span<const double>) {
            thread_local std::vector<double> kv;
            kv.resize(static_cast<std::size_t>(p));
            for (int i = 0; i < p; ++i) kv[static_cast<std::size_t>(i)] = prev.k[static_cast<std::size_t>(i)](j, k);
            return driver(s, prev.y(j, k), prev.z(j, k), kv);
        };
        BsdeSolution sol = backward_sweep(b, frozen, Terminal{&claim, nullptr}, dividend, o);
        double d = beta_norm(b.grid, sol.y - prev.y, res.beta_w).mean + beta_norm(b.grid, sol.z - prev.z, res.beta_w).mean;
        for (int i = 0; i < p; ++i)
            d += beta_norm(b.grid, sol.k[static_cast<std::size_t>(i)] - prev.k[static_cast<std::size_t>(i)],
                           lambda[static_cast<std::size_t>(i)], res.beta_w)
                     .mean;
        res.distances.push_back(d);
        res.y0.push_back(sol.y0);
        if (res.distances.size() > 1) {
            const double before = res.distances[res.distances.size() - 2];
            res.ratios.push_back(before > 0.0 ? d / before : 0.0);
        }
        prev = std::move(sol);
        if (d <= 1e-24 * res.distances.front()) break;
    }
    res.solution = std::move(prev);
    return res;
}

ScenarioBatch truncate(const ScenarioBatch& b, int steps) {
    if (steps < 1 || steps > b.grid.steps()) throw ModelError("truncate: step outside the grid");
    ScenarioBatch out;
    out.grid = TimeGrid(b.grid.time(steps), steps);
    out.model = b.model;
    out.seed = b.seed;
    out.resamples = b.resamples;
    out.w = b.w.leftCols(steps + 1);
    out.tau = b.tau;
    out.w_tau = b.w_tau;
    const double h = out.grid.horizon();
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        for (int i = 0; i < b.levels(); ++i)
            if (out.tau(j, i) > h) {
                out.tau(j, i) = std::numeric_limits<double>::infinity();
                out.w_tau(j, i) = std::numeric_limits<double>::quiet_NaN();
            }
    return out;
}

void write_solution_csv(const ScenarioBatch& b, const BsdeSolution& s, std::ostream& out) {
    int width = 1;
    for (const auto& layer : s.fits)
        for (const auto& f : layer) width = std::max(width, f.degree + 1);
    out << "t,configuration,y_mean,y_se";
    for (int i = 0; i < width; ++i) out << ",z" << i;
    for (int i = 0; i < width; ++i) out << ",k" << i;
    out << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (std::size_t k = 0; k < s.fits.size(); ++k) {
        for (std::size_t c = 0; c < s.fits[k].size(); ++c) {
            const auto& f = s.fits[k][c];
            if (f.degree < 0) continue;
            out << num(b.grid.time(static_cast<int>(k))) << ',' << c << ',' << num(s.y_mean[static_cast<Eigen::Index>(k)]) << ','
                << num(s.y_se[static_cast<Eigen::Index>(k)]);
            for (int i = 0; i < width; ++i) out << ',' << (i < f.z.size() ? num(f.z[i]) : "");
            for (int i = 0; i < width; ++i) out << ',' << (i < f.k.size() ? num(f.k[i]) : "");
            out << '\n';
        }
    }
    const int n = b.grid.steps();
    out << num(b.grid.time(n)) << ",-," << num(s.y_mean[n]) << ',' << num(s.y_se[n]);
    for (int i = 0; i < 2 * width; ++i) out << ',';
    out << '\n';
}

}  // namespace mdbsde
