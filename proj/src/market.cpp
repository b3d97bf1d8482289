#include "mdbsde/market.hpp"

#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdbsde {

namespace {

double eval(const CoefficientFn& f, const State& s, const char* name) {
    if (!f) throw ModelError(std::string("market: missing coefficient ") + name);
    const double v = f(s);
    if (!std::isfinite(v)) throw ModelError(std::string("market: coefficient ") + name + " is not finite");
    return v;
}

void check_bound(double v, double bound, const char* name, const State& s) {
    if (std::abs(v) > bound)
        throw ModelError(std::string("market: ") + name + " exceeds its declared bound at t=" + std::to_string(s.t));
}

double active_intensity(const State& s, int level) { return s.defaults == level - 1 ? s.intensity : 0.0; }

}  // namespace

double MarketSpec::r(const State& s) const {
    const double v = rate ? eval(rate, s, "r") : 0.0;
    check_bound(v, bound_rate, "r", s);
    return v;
}

double MarketSpec::mu(int asset, const State& s) const {
    const double v = asset == 0 ? eval(mu0, s, "mu0") : eval(assets.at(static_cast<std::size_t>(asset - 1)).mu, s, "mu");
    check_bound(v, bound_mu, "mu", s);
    return v;
}

double MarketSpec::sigma(int asset, const State& s) const {
    const double v =
        asset == 0 ? eval(sigma0, s, "sigma0") : eval(assets.at(static_cast<std::size_t>(asset - 1)).sigma, s, "sigma");
    if (!(v > 0.0)) throw ModelError("market: volatilities must be positive");
    check_bound(v, bound_sigma, "sigma", s);
    check_bound(1.0 / v, bound_sigma_inverse, "1/sigma", s);
    return v;
}

double MarketSpec::jump(int asset, const State& s) const {
    const double v = eval(assets.at(static_cast<std::size_t>(asset - 1)).jump, s, "b");
    if (v == 0.0) throw ModelError("market: jump sizes must be nonzero");
    if (v < -1.0) throw ModelError("market: jump sizes must be at least -1");
    return v;
}

SharpeRatios sharpe_ratios(const MarketSpec& market, const State& s) {
    SharpeRatios out;
    const double r = market.r(s);
    const double excess = market.mu(0, s) - r;
    if (excess == 0.0) throw ModelError("market: mu0 must differ from r");
    out.theta0 = excess / market.sigma(0, s);
    out.theta.assign(static_cast<std::size_t>(market.levels()), 0.0);
    for (int i = 1; i <= market.levels(); ++i) {
        const double lambda = active_intensity(s, i);
        if (lambda <= 0.0) continue;
        const double b = market.jump(i, s);
        const double th = (market.mu(i, s) - r - market.sigma(i, s) * out.theta0) / (b * lambda);
        check_bound(th * std::sqrt(lambda), market.bound_theta, "Theta sqrt(lambda)", s);
        out.theta[static_cast<std::size_t>(i - 1)] = th;
    }
    return out;
}

void validate_market(const MarketSpec& market, const ScenarioBatch& b) {
    if (market.levels() != b.levels()) throw ModelError("market: asset count does not match the default levels");
    auto check = [&](const State& s) {
        sharpe_ratios(market, s);
        for (int i = 1; i <= market.levels(); ++i) {
            market.sigma(i, s);
            market.jump(i, s);
        }
    };
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        for (int k = 0; k <= b.grid.steps(); ++k) check(b.grid_state(j, k));
        for (int i = 0; i < b.levels(); ++i)
            if (b.tau(j, i) <= b.grid.horizon()) check(b.state(b.tau(j, i), b.w_tau(j, i), i));
    }
}

std::vector<Eigen::ArrayXXd> simulate_assets(const ScenarioBatch& b, const MarketSpec& market, int threads) {
    validate_market(market, b);
    std::vector<Eigen::ArrayXXd> out;
    CoefficientSet c0;
    c0.alpha = [&](const State& s) { return market.mu(0, s); };
    c0.beta = [&](const State& s) { return market.sigma(0, s); };
    out.push_back(stochastic_exponential_closed_form(b, c0, 0, threads).values);
    for (int i = 1; i <= market.levels(); ++i) {
        CoefficientSet c;
        c.alpha = [&, i](const State& s) { return market.mu(i, s); };
        c.beta = [&, i](const State& s) { return market.sigma(i, s); };
        c.gamma.resize(static_cast<std::size_t>(i));
        c.gamma.back() = [&, i](const State& s) { return market.jump(i, s); };
        out.push_back(stochastic_exponential_closed_form(b, c, 0, threads).values);
    }
    return out;
}

CoefficientSet pricing_coefficients(const MarketSpec& market) {
    CoefficientSet c;
    c.alpha = [market](const State& s) { return -market.r(s); };
    c.beta = [market](const State& s) { return -sharpe_ratios(market, s).theta0; };
    for (int i = 1; i <= market.levels(); ++i)
        c.gamma.push_back([market, i](const State& s) { return -sharpe_ratios(market, s).theta[static_cast<std::size_t>(i - 1)]; });
    c.bound_alpha = market.bound_rate;
    c.bound_beta = (market.bound_mu + market.bound_rate) * market.bound_sigma_inverse;
    c.bound_gamma = market.bound_theta;
    return c;
}

DriverSpec linear_pricing_driver(const MarketSpec& market) {
    DriverSpec d = linear_driver(pricing_coefficients(market));
    const int p = market.levels();
    d.g = [market, p](const State& s, double y, double z, std::span<const double> k) {
        const SharpeRatios q = sharpe_ratios(market, s);
        double v = -market.r(s) * y - q.theta0 * z;
        if (s.defaults < p && s.intensity > 0.0)
            v -= q.theta[static_cast<std::size_t>(s.defaults)] * s.intensity * k[static_cast<std::size_t>(s.defaults)];
        return v;
    };
    return d;
}

PriceReport price_linear(const ScenarioBatch& b, const MarketSpec& market, const TerminalClaim& claim,
                         const DividendSpec& dividend, int threads) {
    const CoefficientSet c = pricing_coefficients(market);
    PriceReport rep;
    rep.price = solve_linear_explicit(b, c, claim, dividend, {false, threads});

    CoefficientSet zeta = c;
    zeta.alpha = nullptr;
    const int n = b.grid.steps();
    const Eigen::ArrayXd gam = stochastic_exponential_closed_form(b, c, 0, threads).values.col(n);
    const Eigen::ArrayXd z = stochastic_exponential_closed_form(b, zeta, 0, threads).values.col(n);
    rep.zeta_mean = estimate(z);
    Eigen::ArrayXd disc(b.paths());
    parallel_for(b.paths(), threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            double integral = 0.0;
            for (int k = 0; k < n; ++k)
                walk_step(
                    b, j, k, {},
                    [&](const Segment& s) {
                        integral += 0.5 * s.length() *
                                    (market.r(b.state(s.t0, s.w0, s.defaults)) + market.r(b.state(s.t1, s.w1, s.defaults)));
                    },
                    [](int, double, double) {});
            disc[j] = std::exp(-integral);
        }
    });
    rep.factorization_error = ((gam - disc * z).abs() / gam.abs().max(1.0)).maxCoeff();
    return rep;
}

Eigen::ArrayXd price_linear_Q_contributions(const ScenarioBatch& b, const MarketSpec& market,
                                            const TerminalClaim& claim, const DividendSpec& dividend, int threads) {
    const int n = b.grid.steps();
    const auto dates = dividend.dates(b.grid.horizon());
    Eigen::ArrayXd out(b.paths());
    parallel_for(b.paths(), threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            double log_disc = 0.0, log_zeta = 0.0, jumps = 1.0, flows = 0.0;
            auto weight = [&] { return std::exp(log_disc) * std::exp(log_zeta) * jumps; };
            for (int k = 0; k < n; ++k) {
                walk_step(
                    b, j, k, dates,
                    [&](const Segment& s) {
                        const State s0 = b.state(s.t0, s.w0, s.defaults), s1 = b.state(s.t1, s.w1, s.defaults);
                        const SharpeRatios q0 = sharpe_ratios(market, s0), q1 = sharpe_ratios(market, s1);
                        const double len = s.length();
                        const double before = weight();
                        log_disc -= 0.5 * len * (market.r(s0) + market.r(s1));
                        log_zeta += -q0.theta0 * (s.w1 - s.w0) - 0.25 * len * (q0.theta0 * q0.theta0 + q1.theta0 * q1.theta0);
                        if (s.lambda_bar > 0.0) {
                            const auto a = static_cast<std::size_t>(s.defaults);
                            log_zeta += 0.5 * len * s.lambda_bar * (q0.theta[a] + q1.theta[a]);
                        }
                        const double after = weight();
                        flows += 0.5 * len * (before * dividend.rate_at(s0) + after * dividend.rate_at(s1));
                        if (!dividend.jumps.empty()) flows += after * dividend.scheduled_between(s.t0, s.t1);
                    },
                    [&](int level, double t, double w) {
                        const State pre = b.state(t, w, level - 1);
                        const double factor = 1.0 - sharpe_ratios(market, pre).theta[static_cast<std::size_t>(level - 1)];
                        if (!(factor > 0.0))
                            throw ModelError("price under Q: 1 - Theta^" + std::to_string(level) + " = " +
                                             std::to_string(factor) + " at tau=" + std::to_string(t) + " on path " +
                                             std::to_string(j));
                        jumps *= factor;
                        flows += weight() * dividend.payout(level, pre);
                    });
            }
            out[j] = weight() * claim.value(b, j) + flows;
        }
    });
    return out;
}

Estimate price_linear_Q(const ScenarioBatch& b, const MarketSpec& market, const TerminalClaim& claim,
                        const DividendSpec& dividend, int threads) {
    return estimate(price_linear_Q_contributions(b, market, claim, dividend, threads));
}

Strategy extract_strategy(const ScenarioBatch& b, const BsdeSolution& solution, const MarketSpec& market) {
    if (solution.z.size() == 0) throw ModelError("strategy: the solution must keep its path values");
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    Strategy st;
    st.phi0 = Eigen::ArrayXXd::Zero(m, n);
    st.phi.assign(static_cast<std::size_t>(p), Eigen::ArrayXXd::Zero(m, n));
    for (Eigen::Index j = 0; j < m; ++j)
        for (int k = 0; k < n; ++k) {
            const State s = b.grid_state(j, k);
            double rest = solution.z(j, k);
            if (s.defaults < p) {
                const int i = s.defaults + 1;
                const double kv = solution.k[static_cast<std::size_t>(i - 1)](j, k);
                const double phi = kv / market.jump(i, s);
                st.phi[static_cast<std::size_t>(i - 1)](j, k) = phi;
                rest -= phi * market.sigma(i, s);
            }
            st.phi0(j, k) = rest / market.sigma(0, s);
        }
    return st;
}

ReplicationReport replicate(const ScenarioBatch& b, const MarketSpec& market, const Strategy& strategy, double x,
                            const TerminalClaim& claim, const DividendSpec& dividend) {
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double dt = b.grid.dt();
    const Eigen::ArrayXXd d = evaluate_D(b, dividend);
    std::vector<Eigen::ArrayXXd> mart;
    for (int i = 1; i <= p; ++i) mart.push_back(compensated_martingale(b, i));
    ReplicationReport rep;
    rep.wealth.resize(m);
    rep.error.resize(m);
    Eigen::ArrayXd claims(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double v = x;
        for (int k = 0; k < n; ++k) {
            const State s = b.grid_state(j, k);
            const double r = market.r(s);
            const double phi0 = strategy.phi0(j, k);
            double drift = r * v + phi0 * (market.mu(0, s) - r);
            double diffusion = phi0 * market.sigma(0, s);
            double jumps = 0.0;
            for (int i = 1; i <= p; ++i) {
                const double phi = strategy.phi[static_cast<std::size_t>(i - 1)](j, k);
                if (phi == 0.0) continue;
                drift += phi * (market.mu(i, s) - r);
                diffusion += phi * market.sigma(i, s);
                jumps += phi * market.jump(i, s) * (mart[static_cast<std::size_t>(i - 1)](j, k + 1) - mart[static_cast<std::size_t>(i - 1)](j, k));
            }
            v += drift * dt + diffusion * (b.w(j, k + 1) - b.w(j, k)) + jumps - (d(j, k + 1) - d(j, k));
        }
        claims[j] = claim.value(b, j);
        rep.wealth[j] = v;
        rep.error[j] = v - claims[j];
    }
    rep.mae = rep.error.abs().mean();
    rep.mean_abs_claim = claims.abs().mean();
    return rep;
}

FeedbackTerm FeedbackTerm::constant(int level, double c) {
    if (!(c > -1.0)) throw ModelError("feedback: gamma must exceed -1");
    FeedbackTerm t;
    t.level = level;
    t.gamma = [c](const State&, double) { return c; };
    t.bound = std::abs(c);
    t.k_lipschitz = std::abs(c);
    return t;
}

FeedbackTerm FeedbackTerm::position(int level, double amplitude, double scale) {
    if (!(std::abs(amplitude) < 1.0)) throw ModelError("feedback: amplitude must lie in (-1, 1)");
    FeedbackTerm t;
    t.level = level;
    t.gamma = [amplitude, scale](const State&, double phi) { return amplitude * std::tanh(scale * phi); };
    t.bound = std::abs(amplitude);
    // sup_x |tanh x + x sech^2 x| = 1 + 0.4479
    t.k_lipschitz = 1.448 * std::abs(amplitude);
    return t;
}

namespace {

const FeedbackTerm* term_for(const FeedbackSpec& f, int level) {
    for (const auto& t : f.terms)
        if (t.level == level) return &t;
    return nullptr;
}

void validate_feedback(const FeedbackSpec& f, int p) {
    for (const auto& t : f.terms) {
        if (t.level < 1 || t.level > p) throw ModelError("feedback: level out of range");
        if (!t.gamma) throw ModelError("feedback: missing gamma");
        if (std::count_if(f.terms.begin(), f.terms.end(), [&](const FeedbackTerm& u) { return u.level == t.level; }) > 1)
            throw ModelError("feedback: level listed twice");
    }
}

}  // namespace

double large_seller_lipschitz(const MarketSpec& market, const FeedbackSpec& feedback, const ScenarioBatch& b) {
    validate_feedback(feedback, b.levels());
    double c = 0.0;
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        for (int k = 0; k <= b.grid.steps(); ++k) {
            const State s = b.grid_state(j, k);
            const SharpeRatios q = sharpe_ratios(market, s);
            c = std::max({c, std::abs(market.r(s)), std::abs(q.theta0)});
            if (s.defaults < b.levels() && s.intensity > 0.0) {
                const FeedbackTerm* t = term_for(feedback, s.defaults + 1);
                const double slope = std::abs(q.theta[static_cast<std::size_t>(s.defaults)]) + (t ? t->k_lipschitz : 0.0);
                c = std::max(c, slope * std::sqrt(s.intensity));
            }
        }
    return c;
}

DriverSpec large_seller_driver(const MarketSpec& market, const FeedbackSpec& feedback, const ScenarioBatch& b) {
    validate_market(market, b);
    const int p = b.levels();
    DriverSpec d;
    d.lipschitz = large_seller_lipschitz(market, feedback, b);
    d.g = [market, feedback, p](const State& s, double y, double z, std::span<const double> k) {
        const SharpeRatios q = sharpe_ratios(market, s);
        double v = -market.r(s) * y - q.theta0 * z;
        if (s.defaults < p && s.intensity > 0.0) {
            const int i = s.defaults + 1;
            const double kv = k[static_cast<std::size_t>(i - 1)];
            double slope = q.theta[static_cast<std::size_t>(i - 1)];
            if (const FeedbackTerm* t = term_for(feedback, i)) slope += t->gamma(s, kv / market.jump(i, s));
            v -= slope * s.intensity * kv;
        }
        return v;
    };
    if (feedback.terms.empty()) d.linear = pricing_coefficients(market);
    const ProbeReport probe = probe_driver(d, b);
    if (!probe.passed())
        throw ModelError("large seller driver failed the admissibility probe (worst ratio " +
                         std::to_string(probe.worst_ratio) + ")");
    return d;
}

FlowReport gD_evaluation(const ScenarioBatch& b, const DriverSpec& driver, const DividendSpec& dividend,
                         const TerminalClaim& claim, int stop, const LsmcOptions& options, double tolerance) {
    LsmcOptions o = options;
    o.keep_paths = true;
    o.transitions = Transitions::realized;
    const BsdeSolution full = solve_backward_lsmc(b, driver, claim, dividend, o);
    const ScenarioBatch head = truncate(b, stop);
    DividendSpec early = dividend;
    early.jumps.clear();
    for (const auto& jmp : dividend.jumps)
        if (jmp.time <= head.grid.horizon()) early.jumps.push_back(jmp);
    const Eigen::ArrayXd ys = full.y.col(stop);
    const SweepDriver sweep = [&driver](Eigen::Index, int, const State& s, double y, double z,
                                        std::span<const double> k) { return driver(s, y, z, k); };
    o.keep_paths = false;
    const BsdeSolution restarted = backward_sweep(head, sweep, Terminal{nullptr, &ys}, early, o);
    FlowReport rep;
    rep.full = {full.y0, full.se};
    rep.restarted = {restarted.y0, restarted.se};
    rep.difference = restarted.y0 - full.y0;
    rep.consistent = std::abs(rep.difference) <= 3.0 * (full.se + restarted.se) + tolerance;
    return rep;
}

}  // namespace mdbsde
