#pragma once

#include "mdbsde/calculus.hpp"
#include "mdbsde/scenario.hpp"

#include <Eigen/Core>

#include <vector>

namespace mdbsde {

struct ScheduledJump {
    double time = 0.0;
    double amount = 0.0;
};

/// D = int d'(s) ds + sum of scheduled jumps + sum_i theta^i(tau_i) 1{tau_i <= t}.
/// theta^i is evaluated at the pre-default state of level i.
struct DividendSpec {
    CoefficientFn rate;
    std::vector<ScheduledJump> jumps;
    std::vector<CoefficientFn> payouts;  // level i at index i-1

    double rate_at(const State& s) const;
    double payout(int level, const State& s) const;
    /// Sorted distinct jump dates. Throws ModelError for dates outside (0, horizon].
    std::vector<double> dates(double horizon) const;
    /// Sum of scheduled amounts with t0 < date <= t1.
    double scheduled_between(double t0, double t1) const;
    bool has_payouts() const;
};

struct DividendParts {
    DividendSpec predictable;              // rate and scheduled jumps only
    std::vector<CoefficientFn> payouts;    // theta^1..theta^p
};

DividendParts decompose(const DividendSpec& spec);

/// D on the grid, paths x (n+1).
Eigen::ArrayXXd evaluate_D(const ScenarioBatch& b, const DividendSpec& spec, int threads = 1);

/// D_{t_{k+1}} - D_{t_k} for one path and step.
double dividend_increment(const ScenarioBatch& b, const DividendSpec& spec, std::span<const double> dates,
                          Eigen::Index path, int k);

struct OrderingViolation {
    Eigen::Index path = 0;
    double time = 0.0;
    enum Kind { rate, scheduled, payout } kind = rate;
    double difference = 0.0;
};

struct OrderingReport {
    bool dominates = true;                   // D_A - D_B non-decreasing on every path
    bool predictable_nondecreasing = true;   // D'_A - D'_B non-decreasing
    bool payouts_ordered = true;             // theta_A >= theta_B at every tau_i <= T
    bool difference_constant = true;         // D_A - D_B constant on [0, T]
    Eigen::Index violating_paths = 0;
    std::vector<OrderingViolation> violations;  // first few only
};

OrderingReport dominates(const DividendSpec& a, const DividendSpec& b, const ScenarioBatch& batch,
                         double tolerance = 1e-12);

}  // namespace mdbsde
