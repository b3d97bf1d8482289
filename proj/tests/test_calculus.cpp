#include "mdbsde/calculus.hpp"
#include "mdbsde/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mdbsde;

namespace {

IntensityModel constant_model(std::vector<double> rates) {
    IntensityModel m;
    for (double r : rates) m.hazards.push_back(IntensityModel::constant(r));
    return m;
}

CoefficientSet constants(double a, double b, std::vector<double> g) {
    CoefficientSet c;
    c.alpha = CoefficientSet::constant(a);
    c.beta = CoefficientSet::constant(b);
    for (double x : g) c.gamma.push_back(CoefficientSet::constant(x));
    return c;
}

double sup_error(const AdjointPath& x, const AdjointPath& y) {
    return (x.values - y.values).abs().rowwise().maxCoeff().mean();
}

}  // namespace

TEST(ClosedForm, ZeroCoefficientsGiveOne) {
    const auto b = simulate_batch(TimeGrid(1.0, 10), constant_model({1.0, 2.0}), 200, 1);
    const auto g = stochastic_exponential_closed_form(b, constants(0, 0, {0, 0}));
    EXPECT_TRUE((g.values == 1.0).all());
    const auto e = stochastic_exponential_euler(b, constants(0, 0, {0, 0}));
    EXPECT_TRUE((e.values == 1.0).all());
}

TEST(ClosedForm, FactorMinusOneKills) {
    const auto b = simulate_batch(TimeGrid(1.0, 10), constant_model({1.0}), 500, 2);
    const auto g = stochastic_exponential_closed_form(b, constants(0, 0, {-1.0}));
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        const double tau = b.tau(j, 0);
        for (int k = 0; k <= 10; ++k) {
            const double s = b.grid.time(k);
            const double expected = tau <= s ? 0.0 : std::exp(s);
            EXPECT_NEAR(g.values(j, k), expected, 1e-12 * std::exp(1.0));
        }
        if (tau <= 1.0) EXPECT_NEAR(g.before_default(j, 0), std::exp(tau), 1e-12);
    }
}

TEST(ClosedForm, DeterministicExponential) {
    const auto b = simulate_batch(TimeGrid(2.0, 8), constant_model({1.0}), 50, 3);
    const auto g = stochastic_exponential_closed_form(b, constants(0.3, 0, {0}), 2);
    for (int k = 0; k <= 6; ++k) EXPECT_NEAR(g.values(7, k), std::exp(0.3 * 0.25 * k), 1e-13);
}

TEST(ClosedForm, BoundViolationIsReported) {
    const auto b = simulate_batch(TimeGrid(1.0, 4), constant_model({1.0}), 10, 3);
    auto c = constants(2.0, 0, {0});
    c.bound_alpha = 1.0;
    EXPECT_THROW(stochastic_exponential_closed_form(b, c), ModelError);
}

TEST(Euler, FirstOrderAgainstClosedForm) {
    IntensityModel m = constant_model({1.0, 1.5});
    const auto fine = simulate_batch(TimeGrid(1.0, 160), m, 4000, 4);
    const auto c = constants(0.1, 0.4, {0.5, -0.3});
    const auto b1 = coarsen(fine, 4), b2 = coarsen(fine, 2);
    const double e1 = sup_error(stochastic_exponential_closed_form(b1, c), stochastic_exponential_euler(b1, c));
    const double e2 = sup_error(stochastic_exponential_closed_form(b2, c), stochastic_exponential_euler(b2, c));
    EXPECT_GT(e1 / e2, 1.7);
    EXPECT_LT(e1 / e2, 2.3);
}

TEST(Euler, PlainEulerIsHalfOrderWithBrownianCoefficient) {
    const auto fine = simulate_batch(TimeGrid(1.0, 160), constant_model({}), 4000, 4);
    const auto c = constants(0.0, 0.5, {});
    const auto b1 = coarsen(fine, 4), b2 = coarsen(fine, 2);
    const double e1 = sup_error(stochastic_exponential_closed_form(b1, c), stochastic_exponential_euler(b1, c, 0, false));
    const double e2 = sup_error(stochastic_exponential_closed_form(b2, c), stochastic_exponential_euler(b2, c, 0, false));
    EXPECT_NEAR(e1 / e2, std::sqrt(2.0), 0.2);
}

TEST(Martingale, ExpectationIsOne) {
    IntensityModel m;
    m.hazards = {IntensityModel::logistic(0.5, 1.0, 1.0), IntensityModel::constant(1.0)};
    const auto b = simulate_batch(TimeGrid(1.0, 50), m, 50000, 5);
    CoefficientSet c;
    c.beta = [](const State& s) { return 0.3 * std::tanh(s.w) + 0.1 * s.defaults; };
    c.gamma = {CoefficientSet::constant(0.8), [](const State& s) { return -0.5 + 0.2 * std::tanh(s.w); }};
    for (const auto& g : {stochastic_exponential_closed_form(b, c), stochastic_exponential_euler(b, c)}) {
        const Estimate e = estimate(g.values.col(50));
        EXPECT_NEAR(e.mean, 1.0, 3.0 * e.se);
    }
}

TEST(Positivity, NonnegativeFactorsKeepGammaNonnegative) {
    const auto b = simulate_batch(TimeGrid(1.0, 20), constant_model({2.0, 2.0}), 2000, 6);
    const auto g = stochastic_exponential_closed_form(b, constants(0, 0.7, {-1.0, 3.0}));
    EXPECT_TRUE((g.values >= 0.0).all());
    const auto h = stochastic_exponential_closed_form(b, constants(0, 0.7, {-0.9, 3.0}));
    EXPECT_TRUE((h.values > 0.0).all());
}

// Gamma^2 = zeta * exp(int beta^2 + sum gamma^2 lambda), zeta with coefficients (2 alpha, 2 beta, 2 gamma + gamma^2).
TEST(SquaredExponential, Identity) {
    IntensityModel m;
    m.hazards = {IntensityModel::logistic(0.5, 1.0, 1.0), IntensityModel::constant(1.5)};
    const auto b = simulate_batch(TimeGrid(1.0, 30), m, 500, 7);
    CoefficientSet c;
    c.alpha = [](const State& s) { return 0.1 * s.t; };
    c.beta = [](const State& s) { return 0.3 * std::tanh(s.w); };
    c.gamma = {[](const State& s) { return 0.4 + 0.1 * std::sin(s.w); }, CoefficientSet::constant(-0.6)};
    CoefficientSet z;
    z.alpha = [&](const State& s) { return 2.0 * c.a(s); };
    z.beta = [&](const State& s) { return 2.0 * c.b(s); };
    for (int i = 1; i <= 2; ++i)
        z.gamma.push_back([&, i](const State& s) {
            const double g = c.g(i, s);
            return 2.0 * g + g * g;
        });
    const auto gam = stochastic_exponential_closed_form(b, c);
    const auto zeta = stochastic_exponential_closed_form(b, z);
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        double qv = 0.0;
        for (int k = 0; k < 30; ++k) {
            walk_step(
                b, j, k, {},
                [&](const Segment& s) {
                    const State s0 = b.state(s.t0, s.w0, s.defaults), s1 = b.state(s.t1, s.w1, s.defaults);
                    qv += 0.5 * s.length() * (std::pow(c.b(s0), 2) + std::pow(c.b(s1), 2));
                    qv += 0.5 * s.length() * s.lambda_bar *
                          (std::pow(c.active_gamma(s0), 2) + std::pow(c.active_gamma(s1), 2));
                },
                [](int, double, double) {});
            const double lhs = gam.values(j, k + 1) * gam.values(j, k + 1);
            EXPECT_NEAR(lhs, zeta.values(j, k + 1) * std::exp(qv), 1e-11 * (1.0 + lhs));
        }
    }
}

TEST(BetaNorm, Cases) {
    const auto b = simulate_batch(TimeGrid(1.0, 100), constant_model({1.0}), 20, 8);
    EXPECT_EQ(beta_norm(b.grid, Eigen::ArrayXXd::Zero(20, 101), 1.0).mean, 0.0);
    EXPECT_NEAR(beta_norm(b.grid, Eigen::ArrayXXd::Ones(20, 101), 1.0).mean, std::exp(1.0) - 1.0, 2e-4);
    EXPECT_NEAR(beta_norm(b.grid, Eigen::ArrayXXd::Ones(20, 100), 1.0).mean, std::exp(1.0) - 1.0, 2e-2);
    EXPECT_EQ(beta_norm(b.grid, Eigen::ArrayXXd::Ones(20, 101), Eigen::ArrayXXd::Zero(20, 101), 1.0).mean, 0.0);
    EXPECT_THROW(beta_norm(b.grid, Eigen::ArrayXXd::Ones(20, 101), 0.0), ModelError);
}
