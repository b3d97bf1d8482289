#include "mdbsde/checks.hpp"
#include "mdbsde/errors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mdbsde;

namespace {

ScenarioBatch batch(Eigen::Index paths, std::uint64_t seed, int steps = 20) {
    IntensityModel m;
    m.hazards = {IntensityModel::constant(1.0), IntensityModel::constant(1.0)};
    return simulate_batch(TimeGrid(1.0, steps), m, paths, seed);
}

CoefficientSet coefficients(double gamma1, double delta) {
    CoefficientSet c;
    c.alpha = CoefficientSet::constant(-0.1);
    c.beta = CoefficientSet::constant(0.2);
    c.gamma = {CoefficientSet::constant(gamma1), CoefficientSet::constant(0.3)};
    c.delta = CoefficientSet::constant(delta);
    c.bound_alpha = 0.1;
    c.bound_beta = 0.2;
    c.bound_gamma = std::max(std::abs(gamma1), 0.3);
    return c;
}

DividendSpec dividend() {
    DividendSpec d;
    d.rate = CoefficientSet::constant(0.1);
    d.payouts = {CoefficientSet::constant(0.2), CoefficientSet::constant(0.1)};
    return d;
}

BsdeSolution solve(const ScenarioBatch& b, const Problem& pr) {
    return solve_backward_lsmc(b, pr.driver, pr.claim, pr.dividend);
}

BsdeSolution explicit_only(const ScenarioBatch& b, const CoefficientSet& c, const Problem& pr) {
    BsdeSolution s;
    const Estimate e = solve_linear_explicit(b, c, pr.claim, pr.dividend);
    s.y0 = e.mean;
    s.se = e.se;
    return s;
}

}  // namespace

TEST(Apriori, IdenticalProblems) {
    const auto b = batch(4000, 1);
    const Problem pr{linear_driver(coefficients(0.5, 0.1)), TerminalClaim::polynomial({0.0, 1.0}), dividend()};
    const auto s = solve(b, pr);
    const auto r = check_apriori(b, pr, s, pr, s);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.at_zero.lhs, 0.0);
    EXPECT_EQ(r.at_zero.rhs, 0.0);
    EXPECT_EQ(r.y_norm.lhs, 0.0);
    EXPECT_EQ(r.martingale.rhs, 0.0);
    EXPECT_DOUBLE_EQ(r.lipschitz, 0.5);
    EXPECT_DOUBLE_EQ(r.xi, 2.0);
    EXPECT_DOUBLE_EQ(r.beta_w, 4.0 / 2.0 + 1.0);
}

TEST(Apriori, DriverProcessesHoldForAnyXi) {
    const auto b = batch(4000, 2);
    DriverSpec g;
    g.g = [](const State& s, double, double, std::span<const double>) { return 0.3 * std::sin(s.w); };
    const Problem a{g, TerminalClaim::polynomial({0.0, 1.0}), dividend()};
    const Problem h{g, TerminalClaim::event(1, 0.5), dividend()};
    const auto sa = solve(b, a), sh = solve(b, h);
    for (double xi : {0.1, 1.0, 10.0}) {
        AprioriOptions o;
        o.xi = xi;
        o.beta_w = 4.0 / xi;
        const auto r = check_apriori(b, a, sa, h, sh, o);
        EXPECT_TRUE(r.passed()) << xi;
        EXPECT_GT(r.at_zero.slack(), 0.0);
    }
}

TEST(Apriori, LinearPair) {
    const auto b = batch(4000, 3);
    const Problem a{linear_driver(coefficients(0.5, 0.1)), TerminalClaim::polynomial({0.0, 1.0}), dividend()};
    const Problem h{linear_driver(coefficients(-0.5, 0.3)), TerminalClaim::event(1, 0.5), dividend()};
    const auto r = check_apriori(b, a, solve(b, a), h, solve(b, h));
    EXPECT_TRUE(r.passed());
    EXPECT_TRUE(r.martingale_checked);
    EXPECT_GT(r.y_norm.slack(), 0.0);
}

TEST(Apriori, RejectsDifferentDividends) {
    const auto b = batch(500, 4, 5);
    const Problem a{zero_driver(), TerminalClaim::constant(1.0), dividend()};
    const Problem h{zero_driver(), TerminalClaim::constant(1.0), {}};
    const auto sa = solve(b, a), sh = solve(b, h);
    EXPECT_THROW(check_apriori(b, a, sa, h, sh), ModelError);
    AprioriOptions o;
    o.beta_w = 0.5;
    EXPECT_THROW(check_apriori(b, a, sa, a, sa, o), ModelError);
}

TEST(Comparison, EqualProblems) {
    const auto b = batch(3000, 5);
    const auto c = coefficients(0.5, 0.1);
    const Problem pr{linear_driver(c), TerminalClaim::event(1, 1.0), dividend()};
    const auto s = solve(b, pr);
    const auto r = check_comparison(b, pr, s, pr, s, linear_gamma_map(c));
    EXPECT_TRUE(r.hypotheses());
    EXPECT_TRUE(r.ordered);
    EXPECT_TRUE(r.passed());
    EXPECT_TRUE(r.strict_applicable);
    EXPECT_TRUE(r.strict_claims_equal);
    EXPECT_TRUE(r.strict_dividend_constant);
}

TEST(Comparison, OrderedLinearPair) {
    const auto b = batch(20000, 6);
    const auto c = coefficients(-0.8, 0.1);
    DividendSpec more = dividend();
    more.rate = CoefficientSet::constant(0.3);
    const Problem a{linear_driver(c), TerminalClaim::polynomial({1.0, 0.0, 0.5}), more};
    const Problem h{linear_driver(coefficients(-0.8, 0.0)), TerminalClaim::polynomial({0.5, 0.0, 0.5}), dividend()};
    const auto r = check_comparison(b, a, solve(b, a), h, solve(b, h), linear_gamma_map(c));
    EXPECT_TRUE(r.hypotheses());
    EXPECT_TRUE(r.ordered);
    EXPECT_GT(r.y0, r.y0_hat);
    EXPECT_FALSE(r.strict_applicable);
}

TEST(Comparison, CounterexampleIsExpectedFailure) {
    IntensityModel m;
    m.hazards = {IntensityModel::constant(1.0), IntensityModel::constant(1.0)};
    const auto b = simulate_batch(TimeGrid(1.0, 20), m, 50000, 7);
    CoefficientSet c;
    c.gamma = {CoefficientSet::constant(-2.0), CoefficientSet::constant(0.0)};
    const Problem a{linear_driver(c), TerminalClaim::event(1, 1.0), {}};
    const Problem h{linear_driver(c), TerminalClaim::constant(0.0), {}};
    const auto r = check_comparison(b, a, explicit_only(b, c, a), h, explicit_only(b, c, h), linear_gamma_map(c));
    EXPECT_FALSE(r.jump_condition);
    EXPECT_TRUE(r.claims_ordered);
    EXPECT_TRUE(r.probed);
    EXPECT_EQ(r.jump_violations, r.partition[1] + r.partition[2]);
    EXPECT_LT(r.y0, 0.0);
    EXPECT_FALSE(r.ordered);
    EXPECT_TRUE(r.expected_failure());
    EXPECT_TRUE(r.passed());
}

TEST(Comparison, DifferenceQuotientMapSatisfiesKCondition) {
    const auto b = batch(3000, 8);
    DriverSpec g;
    g.g = [](const State& s, double y, double, std::span<const double> k) {
        const double active = s.defaults < static_cast<int>(k.size()) ? k[static_cast<std::size_t>(s.defaults)] : 0.0;
        return -0.1 * y + 0.5 * std::tanh(active) * s.intensity;
    };
    g.lipschitz = 0.5;
    const Problem a{g, TerminalClaim::event(1, 1.0), dividend()};
    const Problem h{g, TerminalClaim::event(1, 0.5), dividend()};
    const auto r = check_comparison(b, a, solve(b, a), h, solve(b, h), difference_quotient_gamma_map(g));
    EXPECT_TRUE(r.k_condition);
    EXPECT_TRUE(r.jump_condition);
    EXPECT_TRUE(r.hypotheses());
    EXPECT_TRUE(r.ordered);
}

TEST(Comparison, DriverConditionViolationIsReported) {
    const auto b = batch(500, 9, 5);
    const auto c = coefficients(0.2, 0.0);
    const Problem a{linear_driver(c), TerminalClaim::constant(1.0), {}};
    const Problem h{linear_driver(coefficients(0.2, 0.5)), TerminalClaim::constant(1.0), {}};
    const auto r = check_comparison(b, a, solve(b, a), h, solve(b, h), linear_gamma_map(c));
    EXPECT_FALSE(r.driver_condition);
    EXPECT_LT(r.driver_worst, 0.0);
    EXPECT_FALSE(r.hypotheses());
}
