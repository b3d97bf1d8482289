#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace mdbsde {

/// Uniform grid t_k = kT/n.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps);

    double horizon() const { return horizon_; }
    int steps() const { return steps_; }
    double dt() const { return horizon_ / steps_; }
    double time(int k) const { return k == steps_ ? horizon_ : horizon_ * k / steps_; }

private:
    double horizon_;
    int steps_;
};

/// Point of the Markov state seen by coefficient and driver callbacks.
/// `defaults` counts defaults strictly before the point (left limit at a default time);
/// `intensity` is the hazard of the active level, 0 once every level has defaulted.
struct State {
    double t = 0.0;
    double w = 0.0;
    int defaults = 0;
    double intensity = 0.0;
};

using HazardFn = std::function<double(double t, double w)>;

struct IntensityModel {
    std::vector<HazardFn> hazards;  // level i at index i-1
    bool bounded = false;
    double bound = std::numeric_limits<double>::infinity();

    int levels() const { return static_cast<int>(hazards.size()); }

    /// h_level(t, w), validated. Throws ModelError on a negative, non-finite or out-of-bound value.
    double rate(int level, double t, double w) const;

    static HazardFn constant(double rate);
    /// base + amplitude / (1 + exp(-slope w))
    static HazardFn logistic(double base, double amplitude, double slope);
    /// rate + slope t
    static HazardFn linear_in_time(double rate, double slope);
};

struct ScenarioBatch {
    TimeGrid grid{1.0, 1};
    IntensityModel model;
    std::uint64_t seed = 0;
    Eigen::ArrayXXd w;      // paths x (n+1), w(j, 0) = 0
    Eigen::ArrayXXd tau;    // paths x p, +inf when no default up to T
    Eigen::ArrayXXd w_tau;  // W at the default time, NaN when tau = +inf
    std::uint64_t resamples = 0;

    Eigen::Index paths() const { return w.rows(); }
    int levels() const { return static_cast<int>(tau.cols()); }

    /// Number of i with tau_i <= t.
    int defaults_at(Eigen::Index path, double t) const;
    State state(double t, double w_value, int defaults) const;
    State grid_state(Eigen::Index path, int k) const;
};

ScenarioBatch simulate_batch(const TimeGrid& grid, const IntensityModel& model, Eigen::Index paths,
                             std::uint64_t seed, int threads = 1);

/// Same paths on the grid with steps/factor points; default times are kept exact.
ScenarioBatch coarsen(const ScenarioBatch& fine, int factor);

/// Piece of a grid step between consecutive breakpoints (grid points, default times, dividend dates).
/// `lambda_bar` is the constant intensity of the active level the sampler used on this piece.
struct Segment {
    int step = 0;
    double t0 = 0.0, t1 = 0.0;
    double w0 = 0.0, w1 = 0.0;
    int defaults = 0;
    double lambda_bar = 0.0;

    double length() const { return t1 - t0; }
};

/// Visits the segments of step k on one path. on_segment(const Segment&) is called in time order;
/// on_default(level, t, w) right after the segment that ends at that default.
/// `dates` (sorted) only add breakpoints; callers detect a date d by t0 < d <= t1.
template <class OnSegment, class OnDefault>
void walk_step(const ScenarioBatch& b, Eigen::Index j, int k, std::span<const double> dates,
               OnSegment&& on_segment, OnDefault&& on_default) {
    const double ta = b.grid.time(k);
    const double tb = b.grid.time(k + 1);
    const double wa = b.w(j, k);
    const double wb = b.w(j, k + 1);
    const int p = b.levels();
    int c = b.defaults_at(j, ta);
    double start_t = ta, start_w = wa;  // where the active level's intensity piece starts
    double a = ta, w_a = wa;
    std::size_t di = 0;
    while (true) {
        double e = tb;
        int kind = 0;
        if (c < p && b.tau(j, c) <= tb) {
            e = b.tau(j, c);
            kind = 1;
        }
        while (di < dates.size() && dates[di] <= a) ++di;
        if (di < dates.size() && dates[di] < e) {
            e = dates[di];
            kind = 2;
        }
        double w_e;
        if (kind == 1)
            w_e = b.w_tau(j, c);
        else if (e == tb)
            w_e = wb;
        else
            w_e = wa + (wb - wa) * (e - ta) / (tb - ta);
        const double lam =
            c < p ? 0.5 * (b.model.rate(c + 1, start_t, start_w) + b.model.rate(c + 1, tb, wb)) : 0.0;
        on_segment(Segment{k, a, e, w_a, w_e, c, lam});
        if (kind == 1) {
            on_default(c + 1, e, w_e);
            ++c;
            start_t = e;
            start_w = w_e;
        }
        a = e;
        w_a = w_e;
        if (kind == 0 || a >= tb) break;
    }
}

/// Default counts #{i : tau_i <= t_k}, paths x (n+1).
Eigen::ArrayXXi default_counts(const ScenarioBatch& b);
/// N^i on the grid.
Eigen::ArrayXXd counting_process(const ScenarioBatch& b, int level);
/// lambda^i on the grid under the sequential convention.
Eigen::ArrayXXd intensity_path(const ScenarioBatch& b, int level);
/// Lambda^i on the grid, integrated piecewise exactly as the sampler did.
Eigen::ArrayXXd compensator(const ScenarioBatch& b, int level);
/// M^i = N^i - Lambda^i on the grid.
Eigen::ArrayXXd compensated_martingale(const ScenarioBatch& b, int level);

/// Columns path,t,W,N1..Np,lambda1..lambdap; one row per (path, grid point).
void write_batch_csv(const ScenarioBatch& b, std::ostream& out);

}  // namespace mdbsde
