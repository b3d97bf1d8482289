#include "mdbsde/scenario.hpp"

#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"
#include "mdbsde/random.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace mdbsde {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ModelError("time grid: horizon must be positive");
    if (steps < 1) throw ModelError("time grid: need at least one step");
}

double IntensityModel::rate(int level, double t, double w) const {
    const double h = hazards[static_cast<std::size_t>(level - 1)](t, w);
    if (!std::isfinite(h) || h < 0.0)
        throw ModelError("hazard of level " + std::to_string(level) + " is negative or not finite at t=" +
                         std::to_string(t));
    if (bounded && h > bound)
        throw ModelError("hazard of level " + std::to_string(level) + " exceeds the declared bound");
    return h;
}

HazardFn IntensityModel::constant(double rate) {
    return [rate](double, double) { return rate; };
}

HazardFn IntensityModel::logistic(double base, double amplitude, double slope) {
    return [=](double, double w) { return base + amplitude / (1.0 + std::exp(-slope * w)); };
}

HazardFn IntensityModel::linear_in_time(double rate, double slope) {
    return [=](double t, double) { return rate + slope * t; };
}

int ScenarioBatch::defaults_at(Eigen::Index path, double t) const {
    int c = 0;
    while (c < levels() && tau(path, c) <= t) ++c;
    return c;
}

State ScenarioBatch::state(double t, double w_value, int defaults) const {
    const double lam = defaults < levels() ? model.rate(defaults + 1, t, w_value) : 0.0;
    return State{t, w_value, defaults, lam};
}

State ScenarioBatch::grid_state(Eigen::Index path, int k) const {
    const double t = grid.time(k);
    return state(t, w(path, k), defaults_at(path, t));
}

namespace {

void simulate_path(ScenarioBatch& b, Eigen::Index j, std::uint64_t& resamples) {
    const PathRandom rng(b.seed, static_cast<std::uint64_t>(j));
    const int n = b.grid.steps();
    const int p = b.levels();
    const double sdt = std::sqrt(b.grid.dt());

    b.w(j, 0) = 0.0;
    for (int k = 0; k < n; k += 2) {
        const auto z = rng.normal_pair(PathRandom::brownian, static_cast<std::uint32_t>(k / 2));
        b.w(j, k + 1) = b.w(j, k) + sdt * z[0];
        if (k + 1 < n) b.w(j, k + 2) = b.w(j, k + 1) + sdt * z[1];
    }

    std::uint32_t draw = 0;
    int c = 0;
    double threshold = p > 0 ? rng.exponential(PathRandom::threshold, draw++) : 0.0;
    double acc = 0.0;
    for (int k = 0; k < n && c < p; ++k) {
        const double tb = b.grid.time(k + 1);
        const double wb = b.w(j, k + 1);
        double start_t = b.grid.time(k), start_w = b.w(j, k);
        while (c < p) {
            const double len = tb - start_t;
            const double inc = len * 0.5 * (b.model.rate(c + 1, start_t, start_w) + b.model.rate(c + 1, tb, wb));
            if (!(inc > 0.0) || acc + inc < threshold) {
                acc += inc;
                break;
            }
            double t = start_t + (threshold - acc) / inc * len;
            if (t > tb) t = tb;
            if (t <= start_t) {  // would tie with the previous default
                threshold = rng.exponential(PathRandom::threshold, draw++);
                ++resamples;
                continue;
            }
            const double wt = start_w + (wb - start_w) * (t - start_t) / len;
            b.tau(j, c) = t;
            b.w_tau(j, c) = wt;
            ++c;
            acc = 0.0;
            if (c < p) threshold = rng.exponential(PathRandom::threshold, draw++);
            start_t = t;
            start_w = wt;
        }
    }
}

}  // namespace

ScenarioBatch simulate_batch(const TimeGrid& grid, const IntensityModel& model, Eigen::Index paths,
                             std::uint64_t seed, int threads) {
    if (paths < 1) throw ModelError("simulate_batch: number of paths must be positive");
    for (const auto& h : model.hazards)
        if (!h) throw ModelError("simulate_batch: empty hazard function");
    ScenarioBatch b;
    b.grid = grid;
    b.model = model;
    b.seed = seed;
    const int p = model.levels();
    b.w.resize(paths, grid.steps() + 1);
    b.tau.setConstant(paths, p, std::numeric_limits<double>::infinity());
    b.w_tau.setConstant(paths, p, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::uint64_t> resamples(static_cast<std::size_t>(paths), 0);
    parallel_for(paths, threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) simulate_path(b, j, resamples[static_cast<std::size_t>(j)]);
    });
    for (auto r : resamples) b.resamples += r;
    return b;
}

ScenarioBatch coarsen(const ScenarioBatch& fine, int factor) {
    const int n = fine.grid.steps();
    if (factor < 1 || n % factor != 0) throw ModelError("coarsen: factor must divide the number of steps");
    ScenarioBatch b;
    b.grid = TimeGrid(fine.grid.horizon(), n / factor);
    b.model = fine.model;
    b.seed = fine.seed;
    b.resamples = fine.resamples;
    b.tau = fine.tau;
    b.w_tau = fine.w_tau;
    b.w.resize(fine.paths(), n / factor + 1);
    for (int k = 0; k <= n / factor; ++k) b.w.col(k) = fine.w.col(k * factor);
    return b;
}

Eigen::ArrayXXi default_counts(const ScenarioBatch& b) {
    const int n = b.grid.steps();
    Eigen::ArrayXXi c(b.paths(), n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = b.grid.time(k);
        for (Eigen::Index j = 0; j < b.paths(); ++j) c(j, k) = b.defaults_at(j, t);
    }
    return c;
}

Eigen::ArrayXXd counting_process(const ScenarioBatch& b, int level) {
    if (level < 1 || level > b.levels()) throw ModelError("counting_process: level out of range");
    const int n = b.grid.steps();
    Eigen::ArrayXXd out(b.paths(), n + 1);
    for (int k = 0; k <= n; ++k)
        out.col(k) = (b.tau.col(level - 1) <= b.grid.time(k)).cast<double>();
    return out;
}

Eigen::ArrayXXd intensity_path(const ScenarioBatch& b, int level) {
    if (level < 1 || level > b.levels()) throw ModelError("intensity_path: level out of range");
    const int n = b.grid.steps();
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(b.paths(), n + 1);
    for (Eigen::Index j = 0; j < b.paths(); ++j)
        for (int k = 0; k <= n; ++k) {
            const double t = b.grid.time(k);
            if (b.defaults_at(j, t) == level - 1) out(j, k) = b.model.rate(level, t, b.w(j, k));
        }
    return out;
}

Eigen::ArrayXXd compensator(const ScenarioBatch& b, int level) {
    if (level < 1 || level > b.levels()) throw ModelError("compensator: level out of range");
    const int n = b.grid.steps();
    Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(b.paths(), n + 1);
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            if (b.defaults_at(j, b.grid.time(k)) < level)
                walk_step(
                    b, j, k, {},
                    [&](const Segment& s) {
                        if (s.defaults == level - 1) acc += s.length() * s.lambda_bar;
                    },
                    [](int, double, double) {});
            out(j, k + 1) = acc;
        }
    }
    return out;
}

Eigen::ArrayXXd compensated_martingale(const ScenarioBatch& b, int level) {
    return counting_process(b, level) - compensator(b, level);
}

void write_batch_csv(const ScenarioBatch& b, std::ostream& out) {
    const int p = b.levels();
    const int n = b.grid.steps();
    out << "path,t,W";
    for (int i = 1; i <= p; ++i) out << ",N" << i;
    for (int i = 1; i <= p; ++i) out << ",lambda" << i;
    out << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    };
    for (Eigen::Index j = 0; j < b.paths(); ++j) {
        for (int k = 0; k <= n; ++k) {
            const double t = b.grid.time(k);
            const int c = b.defaults_at(j, t);
            out << j << ',' << num(t) << ',' << num(b.w(j, k));
            for (int i = 1; i <= p; ++i) out << ',' << (i <= c ? 1 : 0);
            for (int i = 1; i <= p; ++i) {
                out << ',';
                out << num(c == i - 1 ? b.model.rate(i, t, b.w(j, k)) : 0.0);
            }
            out << '\n';
        }
    }
}

}  // namespace mdbsde
