#include "mdbsde/dividend.hpp"

#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdbsde {

double DividendSpec::rate_at(const State& s) const {
    if (!rate) return 0.0;
    const double v = rate(s);
    if (!std::isfinite(v)) throw ModelError("dividend rate is not finite");
    return v;
}

double DividendSpec::payout(int level, const State& s) const {
    if (level < 1 || level > static_cast<int>(payouts.size())) return 0.0;
    const auto& f = payouts[static_cast<std::size_t>(level - 1)];
    if (!f) return 0.0;
    const double v = f(s);
    if (!std::isfinite(v)) throw ModelError("default payout of level " + std::to_string(level) + " is not finite");
    return v;
}

std::vector<double> DividendSpec::dates(double horizon) const {
    std::vector<double> out;
    for (const auto& j : jumps) {
        if (!(j.time > 0.0) || j.time > horizon)
            throw ModelError("scheduled dividend date must lie in (0, T]");
        if (!std::isfinite(j.amount)) throw ModelError("scheduled dividend amount is not finite");
        out.push_back(j.time);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double DividendSpec::scheduled_between(double t0, double t1) const {
    double s = 0.0;
    for (const auto& j : jumps)
        if (t0 < j.time && j.time <= t1) s += j.amount;
    return s;
}

bool DividendSpec::has_payouts() const {
    return std::any_of(payouts.begin(), payouts.end(), [](const auto& f) { return static_cast<bool>(f); });
}

DividendParts decompose(const DividendSpec& spec) {
    DividendParts parts;
    parts.predictable.rate = spec.rate;
    parts.predictable.jumps = spec.jumps;
    parts.payouts = spec.payouts;
    return parts;
}

namespace {

// Predictable and default parts of the increment over step k, accumulated separately.
void step_parts(const ScenarioBatch& b, const DividendSpec& spec, std::span<const double> dates, Eigen::Index j,
                int k, double& predictable, double& at_default) {
    walk_step(
        b, j, k, dates,
        [&](const Segment& s) {
            if (spec.rate)
                predictable += 0.5 * s.length() *
                               (spec.rate_at(b.state(s.t0, s.w0, s.defaults)) +
                                spec.rate_at(b.state(s.t1, s.w1, s.defaults)));
            if (!spec.jumps.empty()) predictable += spec.scheduled_between(s.t0, s.t1);
        },
        [&](int level, double t, double w) { at_default += spec.payout(level, b.state(t, w, level - 1)); });
}

}  // namespace

double dividend_increment(const ScenarioBatch& b, const DividendSpec& spec, std::span<const double> dates,
                          Eigen::Index path, int k) {
    double pred = 0.0, def = 0.0;
    step_parts(b, spec, dates, path, k, pred, def);
    return pred + def;
}

Eigen::ArrayXXd evaluate_D(const ScenarioBatch& b, const DividendSpec& spec, int threads) {
    const int n = b.grid.steps();
    const auto dates = spec.dates(b.grid.horizon());
    Eigen::ArrayXXd out(b.paths(), n + 1);
    parallel_for(b.paths(), threads, [&](Eigen::Index begin, Eigen::Index end) {
        for (Eigen::Index j = begin; j < end; ++j) {
            double pred = 0.0, def = 0.0;
            out(j, 0) = 0.0;
            for (int k = 0; k < n; ++k) {
                step_parts(b, spec, dates, j, k, pred, def);
                out(j, k + 1) = pred + def;
            }
        }
    });
    return out;
}

OrderingReport dominates(const DividendSpec& a, const DividendSpec& b, const ScenarioBatch& batch,
                         double tolerance) {
    OrderingReport rep;
    const int n = batch.grid.steps();
    std::vector<double> dates = a.dates(batch.grid.horizon());
    for (double d : b.dates(batch.grid.horizon())) dates.push_back(d);
    std::sort(dates.begin(), dates.end());
    dates.erase(std::unique(dates.begin(), dates.end()), dates.end());

    auto record = [&](bool& flag, Eigen::Index j, double t, OrderingViolation::Kind kind, double diff, bool& path_bad) {
        flag = false;
        path_bad = true;
        if (rep.violations.size() < 20) rep.violations.push_back({j, t, kind, diff});
    };
    for (Eigen::Index j = 0; j < batch.paths(); ++j) {
        bool path_bad = false;
        for (int k = 0; k < n; ++k) {
            walk_step(
                batch, j, k, dates,
                [&](const Segment& s) {
                    for (const State& st :
                         {batch.state(s.t0, s.w0, s.defaults), batch.state(s.t1, s.w1, s.defaults)}) {
                        const double diff = a.rate_at(st) - b.rate_at(st);
                        if (std::abs(diff) > tolerance) rep.difference_constant = false;
                        if (diff < -tolerance)
                            record(rep.predictable_nondecreasing, j, st.t, OrderingViolation::rate, diff, path_bad);
                    }
                    for (double d : dates) {
                        if (!(s.t0 < d && d <= s.t1)) continue;
                        const double diff = a.scheduled_between(s.t0, d) - b.scheduled_between(s.t0, d);
                        if (std::abs(diff) > tolerance) rep.difference_constant = false;
                        if (diff < -tolerance)
                            record(rep.predictable_nondecreasing, j, d, OrderingViolation::scheduled, diff, path_bad);
                    }
                },
                [&](int level, double t, double w) {
                    const State st = batch.state(t, w, level - 1);
                    const double diff = a.payout(level, st) - b.payout(level, st);
                    if (std::abs(diff) > tolerance) rep.difference_constant = false;
                    if (diff < -tolerance) record(rep.payouts_ordered, j, t, OrderingViolation::payout, diff, path_bad);
                });
        }
        if (path_bad) ++rep.violating_paths;
    }
    rep.dominates = rep.predictable_nondecreasing && rep.payouts_ordered;
    return rep;
}

}  // namespace mdbsde
