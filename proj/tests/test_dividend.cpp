#include "mdbsde/dividend.hpp"
#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mdbsde;

namespace {

ScenarioBatch batch(int p, double rate, Eigen::Index paths, std::uint64_t seed, int steps = 20) {
    IntensityModel m;
    for (int i = 0; i < p; ++i) m.hazards.push_back(IntensityModel::constant(rate));
    return simulate_batch(TimeGrid(1.0, steps), m, paths, seed);
}

DividendSpec mixed() {
    DividendSpec d;
    d.rate = [](const State& s) { return 0.5 + 0.2 * std::tanh(s.w) + 0.1 * s.defaults; };
    d.jumps = {{0.25, 0.3}, {0.6, -0.1}, {1.0, 0.2}};
    d.payouts = {[](const State& s) { return 1.0 + s.w; }, CoefficientSet::constant(-0.4)};
    return d;
}

}  // namespace

TEST(EvaluateD, ZeroSpec) {
    const auto b = batch(2, 1.0, 100, 1);
    EXPECT_TRUE((evaluate_D(b, DividendSpec{}) == 0.0).all());
}

TEST(EvaluateD, UnitRate) {
    const auto b = batch(1, 1.0, 100, 2);
    DividendSpec d;
    d.rate = CoefficientSet::constant(1.0);
    const auto D = evaluate_D(b, d);
    EXPECT_TRUE((D.col(0) == 0.0).all());
    EXPECT_TRUE(((D.col(20) - 1.0).abs() < 1e-14).all());
}

TEST(EvaluateD, DefaultPayoutLaw) {
    const auto b = batch(1, 1.0, 40000, 3);
    DividendSpec d;
    d.payouts = {CoefficientSet::constant(5.0)};
    const Estimate e = estimate(evaluate_D(b, d).col(20));
    EXPECT_NEAR(e.mean, 5.0 * (1.0 - std::exp(-1.0)), 3.0 * e.se);
}

TEST(EvaluateD, ScheduledJumpsAreRightContinuous) {
    const auto b = batch(0, 0.0, 5, 4, 4);
    DividendSpec d;
    d.jumps = {{0.5, 2.0}, {0.6, 1.0}};
    const auto D = evaluate_D(b, d);
    EXPECT_EQ(D(0, 1), 0.0);
    EXPECT_EQ(D(0, 2), 2.0);
    EXPECT_EQ(D(0, 3), 3.0);
    d.jumps = {{0.0, 1.0}};
    EXPECT_THROW(evaluate_D(b, d), ModelError);
    d.jumps = {{1.5, 1.0}};
    EXPECT_THROW(evaluate_D(b, d), ModelError);
}

TEST(EvaluateD, NonFinitePayoutThrows) {
    const auto b = batch(1, 5.0, 100, 5);
    DividendSpec d;
    d.payouts = {CoefficientSet::constant(NAN)};
    EXPECT_THROW(evaluate_D(b, d), ModelError);
}

TEST(EvaluateD, IncrementsSumToLevel) {
    const auto b = batch(2, 1.5, 300, 6);
    const auto d = mixed();
    const auto D = evaluate_D(b, d, 3);
    const auto dates = d.dates(1.0);
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        double acc = 0.0;
        for (int k = 0; k < 20; ++k) acc += dividend_increment(b, d, dates, j, k);
        EXPECT_NEAR(acc, D(j, 20), 1e-12);
    }
}

TEST(Decompose, Examples) {
    auto parts = decompose(DividendSpec{});
    EXPECT_TRUE(parts.payouts.empty());
    DividendSpec pure;
    pure.payouts = {CoefficientSet::constant(1.0)};
    parts = decompose(pure);
    const auto b = batch(1, 2.0, 200, 7);
    EXPECT_TRUE((evaluate_D(b, parts.predictable) == 0.0).all());
    ASSERT_EQ(parts.payouts.size(), 1u);
}

TEST(Decompose, PartsReassembleExactly) {
    const auto b = batch(2, 1.5, 500, 8);
    const auto spec = mixed();
    const auto parts = decompose(spec);
    DividendSpec jumps_only;
    jumps_only.payouts = parts.payouts;
    const Eigen::ArrayXXd sum = evaluate_D(b, parts.predictable) + evaluate_D(b, jumps_only);
    EXPECT_TRUE((sum == evaluate_D(b, spec)).all());
}

TEST(Dominates, Equal) {
    const auto b = batch(2, 1.5, 300, 9);
    const auto r = dominates(mixed(), mixed(), b);
    EXPECT_TRUE(r.dominates && r.predictable_nondecreasing && r.payouts_ordered && r.difference_constant);
    EXPECT_EQ(r.violating_paths, 0);
}

TEST(Dominates, LargerRate) {
    const auto b = batch(1, 1.0, 300, 10);
    DividendSpec a, c;
    a.rate = CoefficientSet::constant(1.0);
    a.payouts = c.payouts = {CoefficientSet::constant(0.5)};
    const auto r = dominates(a, c, b);
    EXPECT_TRUE(r.dominates && r.predictable_nondecreasing && r.payouts_ordered);
    EXPECT_FALSE(r.difference_constant);
    EXPECT_FALSE(dominates(c, a, b).dominates);
}

TEST(Dominates, SmallerPayoutFlagged) {
    const auto b = batch(1, 1.0, 1000, 11);
    DividendSpec a, c;
    a.payouts = {CoefficientSet::constant(0.0)};
    c.payouts = {CoefficientSet::constant(1.0)};
    const auto r = dominates(a, c, b);
    EXPECT_FALSE(r.dominates);
    EXPECT_FALSE(r.payouts_ordered);
    EXPECT_TRUE(r.predictable_nondecreasing);
    Eigen::Index defaulted = 0;
    for (Eigen::Index j = 0; j < b.paths(); ++j) defaulted += b.tau(j, 0) <= 1.0;
    EXPECT_EQ(r.violating_paths, defaulted);
    ASSERT_FALSE(r.violations.empty());
    EXPECT_EQ(r.violations.front().kind, OrderingViolation::payout);
}

TEST(Dominates, ImpliesComponentConditions) {
    const auto b = batch(2, 1.5, 300, 12);
    const auto base = mixed();
    for (double shift : {-0.2, 0.0, 0.3}) {
        for (double extra : {-0.1, 0.0, 0.2}) {
            DividendSpec a = base;
            a.rate = [&base, shift](const State& s) { return base.rate_at(s) + shift; };
            a.payouts[1] = [extra](const State&) { return -0.4 + extra; };
            const auto r = dominates(a, base, b);
            if (r.dominates) EXPECT_TRUE(r.predictable_nondecreasing && r.payouts_ordered);
            EXPECT_EQ(r.dominates, shift >= 0.0 && extra >= 0.0);
        }
    }
}
