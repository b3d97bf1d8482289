#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"
#include "mdbsde/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace mdbsde;

namespace {

IntensityModel constant_model(std::vector<double> rates) {
    IntensityModel m;
    for (double r : rates) m.hazards.push_back(IntensityModel::constant(r));
    return m;
}

Estimate indicator_mean(const Eigen::ArrayXd& x) { return estimate(x); }

}  // namespace

TEST(TimeGrid, Points) {
    const TimeGrid g(2.0, 4);
    EXPECT_DOUBLE_EQ(g.time(0), 0.0);
    EXPECT_DOUBLE_EQ(g.time(4), 2.0);
    EXPECT_DOUBLE_EQ(g.dt(), 0.5);
    EXPECT_THROW(TimeGrid(1.0, 0), ModelError);
    EXPECT_THROW(TimeGrid(-1.0, 3), ModelError);
}

TEST(Simulate, ZeroIntensityNeverFires) {
    const auto b = simulate_batch(TimeGrid(1.0, 20), constant_model({0.0}), 500, 1);
    EXPECT_TRUE(b.tau.isInf().all());
    EXPECT_TRUE((counting_process(b, 1) == 0.0).all());
    EXPECT_TRUE((compensated_martingale(b, 1) == 0.0).all());
}

TEST(Simulate, RejectsBadInput) {
    EXPECT_THROW(simulate_batch(TimeGrid(1.0, 10), constant_model({1.0}), 0, 1), ModelError);
    EXPECT_THROW(simulate_batch(TimeGrid(1.0, 10), constant_model({-1.0}), 10, 1), ModelError);
    IntensityModel m = constant_model({3.0});
    m.bounded = true;
    m.bound = 2.0;
    EXPECT_THROW(simulate_batch(TimeGrid(1.0, 10), m, 10, 1), ModelError);
    IntensityModel nan_model;
    nan_model.hazards.push_back([](double, double) { return std::nan(""); });
    EXPECT_THROW(simulate_batch(TimeGrid(1.0, 10), nan_model, 10, 1), ModelError);
}

TEST(Simulate, FirstDefaultFollowsExponentialLaw) {
    const auto b = simulate_batch(TimeGrid(1.0, 50), constant_model({1.0}), 100000, 11);
    const Estimate e = indicator_mean((b.tau.col(0) <= 1.0).cast<double>());
    EXPECT_NEAR(e.mean, 1.0 - std::exp(-1.0), 3.0 * e.se);
}

TEST(Simulate, ExactlyOneOfTwoDefaults) {
    const auto b = simulate_batch(TimeGrid(1.0, 50), constant_model({1.0, 1.0}), 100000, 12);
    const Estimate e = indicator_mean(((b.tau.col(0) <= 1.0) && (b.tau.col(1) > 1.0)).cast<double>());
    EXPECT_NEAR(e.mean, std::exp(-1.0), 3.0 * e.se);
}

TEST(Simulate, StrictOrderingAndIndicators) {
    const auto b = simulate_batch(TimeGrid(1.0, 10), constant_model({5.0, 8.0, 3.0}), 5000, 3);
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        for (int i = 1; i < 3; ++i)
            if (std::isfinite(b.tau(j, i))) EXPECT_LT(b.tau(j, i - 1), b.tau(j, i));
    const auto n2 = counting_process(b, 2);
    const auto l2 = intensity_path(b, 2);
    const auto l1 = intensity_path(b, 1);
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        for (int k = 0; k <= 10; ++k) {
            const double t = b.grid.time(k);
            EXPECT_EQ(n2(j, k) == 1.0, b.tau(j, 1) <= t);
            if (t >= b.tau(j, 0)) EXPECT_EQ(l1(j, k), 0.0);
            if (t <= b.tau(j, 0)) EXPECT_EQ(l2(j, k), 0.0);
        }
}

TEST(Simulate, DefaultTimesAreNotOnTheGrid) {
    const auto b = simulate_batch(TimeGrid(1.0, 10), constant_model({2.0}), 2000, 5);
    int off_grid = 0;
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        const double t = b.tau(j, 0);
        if (std::isfinite(t) && std::abs(t * 10 - std::round(t * 10)) > 1e-9) ++off_grid;
    }
    EXPECT_GT(off_grid, 1000);
}

TEST(Simulate, DeterministicAcrossThreads) {
    IntensityModel m;
    m.hazards = {IntensityModel::logistic(0.2, 1.5, 2.0), IntensityModel::constant(0.7)};
    const auto a = simulate_batch(TimeGrid(1.0, 40), m, 3001, 99, 1);
    const auto c = simulate_batch(TimeGrid(1.0, 40), m, 3001, 99, 4);
    const auto d = simulate_batch(TimeGrid(1.0, 40), m, 3001, 99, 8);
    EXPECT_TRUE((a.w == c.w).all() && (a.w == d.w).all());
    EXPECT_TRUE(((a.tau == c.tau) || (a.tau.isInf() && c.tau.isInf())).all());
    EXPECT_TRUE(((a.tau == d.tau) || (a.tau.isInf() && d.tau.isInf())).all());
    // path j depends only on (seed, j)
    const auto small = simulate_batch(TimeGrid(1.0, 40), m, 10, 99, 1);
    EXPECT_TRUE((small.w == a.w.topRows(10)).all());
}

TEST(Simulate, BrownianIncrementMoments) {
    const auto b = simulate_batch(TimeGrid(1.0, 8), constant_model({}), 50000, 21);
    const double dt = b.grid.dt();
    for (int k = 0; k < 8; ++k) {
        const Eigen::ArrayXd dw = b.w.col(k + 1) - b.w.col(k);
        const Estimate m1 = estimate(dw);
        const Estimate m2 = estimate(dw.square());
        EXPECT_NEAR(m1.mean, 0.0, 4.0 * m1.se);
        EXPECT_NEAR(m2.mean, dt, 4.0 * m2.se);
    }
}

TEST(Martingale, MeanOfCompensatedMartingaleVanishes) {
    IntensityModel m;
    m.hazards = {IntensityModel::logistic(0.3, 1.2, 1.5), IntensityModel::linear_in_time(0.5, 1.0)};
    m.bounded = true;
    m.bound = 2.0;
    const auto b = simulate_batch(TimeGrid(1.0, 25), m, 40000, 8);
    for (int i = 1; i <= 2; ++i) {
        const auto mart = compensated_martingale(b, i);
        const Estimate e = estimate(mart.col(25));
        EXPECT_LE(std::abs(e.mean), 4.0 * e.se) << "level " << i;
    }
}

TEST(Martingale, NoDefaultMeansNegativeCompensator) {
    const auto b = simulate_batch(TimeGrid(1.0, 10), constant_model({0.5}), 200, 4);
    const auto mart = compensated_martingale(b, 1);
    const auto comp = compensator(b, 1);
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        if (b.tau(j, 0) > 1.0) {
            EXPECT_NEAR(mart(j, 10), -comp(j, 10), 1e-15);
            EXPECT_LE(mart(j, 10), 0.0);
            EXPECT_NEAR(comp(j, 10), 0.5, 1e-12);
        } else {
            EXPECT_NEAR(comp(j, 10), 0.5 * b.tau(j, 0), 1e-12);
        }
}

TEST(Coarsen, KeepsPathsAndDefaults) {
    const auto fine = simulate_batch(TimeGrid(1.0, 40), constant_model({1.0}), 100, 6);
    const auto coarse = coarsen(fine, 4);
    EXPECT_EQ(coarse.grid.steps(), 10);
    EXPECT_TRUE((coarse.w.col(10) == fine.w.col(40)).all());
    EXPECT_THROW(coarsen(fine, 3), ModelError);
}

TEST(Export, CsvShapeAndDeterminism) {
    const auto b = simulate_batch(TimeGrid(1.0, 4), constant_model({1.0, 2.0}), 3, 6);
    std::ostringstream a, c;
    write_batch_csv(b, a);
    write_batch_csv(simulate_batch(TimeGrid(1.0, 4), constant_model({1.0, 2.0}), 3, 6, 4), c);
    EXPECT_EQ(a.str(), c.str());
    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "path,t,W,N1,N2,lambda1,lambda2");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 15);
}
