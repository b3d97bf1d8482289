#include "mdbsde/checks.hpp"

#include "mdbsde/errors.hpp"
#include "mdbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mdbsde {

namespace {

bool kept(const BsdeSolution& s) { return s.y.size() > 0 && s.z.size() > 0; }

std::vector<double> k_values(const BsdeSolution& s, Eigen::Index j, int k, int p) {
    std::vector<double> v(static_cast<std::size_t>(p), 0.0);
    if (!kept(s)) return v;
    for (int i = 0; i < p; ++i) v[static_cast<std::size_t>(i)] = s.k[static_cast<std::size_t>(i)](j, k);
    return v;
}

bool within(double lhs, double lhs_se, double rhs, double rhs_se, double z) {
    return lhs - rhs <= z * std::hypot(lhs_se, rhs_se) + 1e-14 * (1.0 + std::abs(rhs));
}

// Grid step whose interval (t_k, t_{k+1}] contains t.
int step_of(const TimeGrid& g, double t) {
    const int k = static_cast<int>(std::ceil(t / g.dt() - 1e-12)) - 1;
    return std::clamp(k, 0, g.steps() - 1);
}

}  // namespace

EstimateReport check_apriori(const ScenarioBatch& b, const Problem& a, const BsdeSolution& sa, const Problem& hat,
                             const BsdeSolution& shat, const AprioriOptions& options) {
    if (!kept(sa) || !kept(shat)) throw ModelError("apriori: both solutions must keep their path values");
    const Eigen::ArrayXXd da = evaluate_D(b, a.dividend), dh = evaluate_D(b, hat.dividend);
    if ((da - dh).abs().maxCoeff() > 1e-12 * (1.0 + da.abs().maxCoeff()))
        throw ModelError("apriori: the two problems must share the same dividend process");

    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double horizon = b.grid.horizon(), dt = b.grid.dt();
    const double c = a.driver.lipschitz;

    EstimateReport rep;
    rep.lipschitz = c;
    rep.xi = options.xi ? *options.xi : (c > 0.0 ? 0.5 / (c * c) : 1.0);
    const double floor_beta = (p + 2) / rep.xi + 2.0 * c;
    rep.beta_w = options.beta_w ? *options.beta_w : floor_beta;
    if (!(rep.xi > 0.0) || (c > 0.0 && rep.xi > 1.0 / (c * c)))
        throw ModelError("apriori: xi must lie in (0, 1/C^2]");
    if (rep.beta_w < floor_beta * (1.0 - 1e-12)) throw ModelError("apriori: beta below (p+2)/xi + 2C");

    Eigen::ArrayXd bound(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double eta = a.claim.value(b, j) - hat.claim.value(b, j);
        double gsum = 0.0;
        for (int k = 0; k < n; ++k) {
            const State s = b.grid_state(j, k);
            const auto kh = k_values(shat, j, k, p);
            const double y = shat.y(j, k), z = shat.z(j, k);
            const double gbar = a.driver(s, y, z, kh) - hat.driver(s, y, z, kh);
            gsum += std::exp(rep.beta_w * b.grid.time(k)) * gbar * gbar * dt;
        }
        bound[j] = std::exp(rep.beta_w * horizon) * eta * eta + rep.xi * gsum;
    }
    const Estimate rhs = estimate(bound);

    const double ybar = sa.y0 - shat.y0;
    rep.at_zero = {ybar * ybar, 2.0 * std::abs(ybar) * (sa.se + shat.se), rhs.mean, rhs.se, true};
    rep.at_zero.holds = within(rep.at_zero.lhs, rep.at_zero.lhs_se, rep.at_zero.rhs, rep.at_zero.rhs_se, options.z_score);

    const Estimate yn = beta_norm(b.grid, sa.y - shat.y, rep.beta_w);
    rep.y_norm = {yn.mean, yn.se, horizon * rhs.mean, horizon * rhs.se, true};
    rep.y_norm.holds = within(rep.y_norm.lhs, rep.y_norm.lhs_se, rep.y_norm.rhs, rep.y_norm.rhs_se, options.z_score);

    rep.martingale_checked = c * c * rep.xi < 1.0;
    if (rep.martingale_checked) {
        const Estimate zn = beta_norm(b.grid, sa.z - shat.z, rep.beta_w);
        double lhs = zn.mean, var = zn.se * zn.se;
        for (int i = 1; i <= p; ++i) {
            const auto iu = static_cast<std::size_t>(i - 1);
            const Estimate kn = beta_norm(b.grid, sa.k[iu] - shat.k[iu], intensity_path(b, i), rep.beta_w);
            lhs += kn.mean;
            var += kn.se * kn.se;
        }
        const double scale = 1.0 / (1.0 - c * c * rep.xi);
        rep.martingale = {lhs, std::sqrt(var), scale * rhs.mean, scale * rhs.se, true};
        rep.martingale.holds =
            within(rep.martingale.lhs, rep.martingale.lhs_se, rep.martingale.rhs, rep.martingale.rhs_se, options.z_score);
    }
    return rep;
}

GammaMap linear_gamma_map(const CoefficientSet& c) {
    return [c](int level, const State& s, double, double, std::span<const double>, std::span<const double>) {
        return c.g(level, s);
    };
}

GammaMap difference_quotient_gamma_map(const DriverSpec& g, double width) {
    return [g, width](int level, const State& s, double y, double z, std::span<const double> k,
                      std::span<const double> khat) {
        if (level != s.defaults + 1 || !(s.intensity > 0.0)) return 0.0;
        const auto i = static_cast<std::size_t>(level - 1);
        std::vector<double> kk(khat.begin(), khat.end());
        double dk = k[i] - khat[i];
        if (std::abs(dk) < width) dk = width;
        kk[i] = khat[i] + dk;
        return (g(s, y, z, kk) - g(s, y, z, khat)) / (dk * s.intensity);
    };
}

ComparisonReport check_comparison(const ScenarioBatch& b, const Problem& a, const BsdeSolution& sa,
                                  const Problem& hat, const BsdeSolution& shat, const GammaMap& gamma,
                                  const ComparisonOptions& options) {
    const int n = b.grid.steps(), p = b.levels();
    const Eigen::Index m = b.paths();
    const double horizon = b.grid.horizon();
    const double tol = options.tolerance;
    ComparisonReport rep;

    rep.dividends = dominates(a.dividend, hat.dividend, b);
    Eigen::ArrayXd diff(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double x = a.claim.value(b, j), y = hat.claim.value(b, j);
        diff[j] = x - y;
        if (x - y < -tol * (1.0 + std::abs(x) + std::abs(y))) rep.claims_ordered = false;
    }

    const bool paths = kept(sa) && kept(shat);
    rep.partition.assign(static_cast<std::size_t>(p + 1), 0);
    double min_factor = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
        const int fired = b.defaults_at(j, horizon);
        ++rep.partition[static_cast<std::size_t>(fired)];
        bool bad = false;
        for (int i = 1; i <= fired; ++i) {
            const double tau = b.tau(j, i - 1);
            const State pre = b.state(tau, b.w_tau(j, i - 1), i - 1);
            const int k = step_of(b.grid, tau);
            const auto kv = k_values(sa, j, k, p), kh = k_values(shat, j, k, p);
            const double y = paths ? shat.y(j, k) : 0.0, z = paths ? shat.z(j, k) : 0.0;
            const double factor = 1.0 + gamma(i, pre, y, z, kv, kh);
            min_factor = std::min(min_factor, factor);
            if (factor < -tol) bad = true;
        }
        if (bad) ++rep.jump_violations;
    }
    rep.jump_condition = rep.jump_violations == 0;

    auto probe = [&](const State& s, double y, double z, std::span<const double> kv, std::span<const double> kh) {
        const double lhs = a.driver(s, y, z, kv) - a.driver(s, y, z, kh);
        double rhs = 0.0;
        if (s.defaults < p) {
            const auto i = static_cast<std::size_t>(s.defaults);
            rhs = gamma(s.defaults + 1, s, y, z, kv, kh) * (kv[i] - kh[i]) * s.intensity;
        }
        const double kgap = lhs - rhs;
        rep.k_worst = std::min(rep.k_worst, kgap);
        if (kgap < -tol * (1.0 + std::abs(lhs) + std::abs(rhs))) rep.k_condition = false;
        const double g1 = a.driver(s, y, z, kh), g2 = hat.driver(s, y, z, kh);
        rep.driver_worst = std::min(rep.driver_worst, g1 - g2);
        if (g1 - g2 < -tol * (1.0 + std::abs(g1) + std::abs(g2))) rep.driver_condition = false;
    };
    if (paths) {
        for (Eigen::Index j = 0; j < m; ++j)
            for (int k = 0; k < n; ++k)
                probe(b.grid_state(j, k), shat.y(j, k), shat.z(j, k), k_values(sa, j, k, p), k_values(shat, j, k, p));
    } else {
        rep.probed = true;
        std::mt19937_64 gen(options.seed);
        std::normal_distribution<double> normal(0.0, 2.0);
        std::uniform_int_distribution<Eigen::Index> pick_path(0, m - 1);
        std::uniform_int_distribution<int> pick_step(0, n - 1);
        std::vector<double> kv(static_cast<std::size_t>(p)), kh(static_cast<std::size_t>(p));
        for (int it = 0; it < options.probes; ++it) {
            const State s = b.grid_state(pick_path(gen), pick_step(gen));
            const double y = normal(gen), z = normal(gen);
            for (int i = 0; i < p; ++i) {
                kv[static_cast<std::size_t>(i)] = normal(gen);
                kh[static_cast<std::size_t>(i)] = normal(gen);
            }
            probe(s, y, z, kv, kh);
        }
    }

    rep.y0 = sa.y0;
    rep.se = sa.se;
    rep.y0_hat = shat.y0;
    rep.se_hat = shat.se;
    const double noise = options.z_score * (sa.se + shat.se);
    rep.ordered = sa.y0 >= shat.y0 - noise - 1e-14 * (1.0 + std::abs(shat.y0));

    rep.strict_applicable = min_factor > tol && std::abs(sa.y0 - shat.y0) <= noise + 1e-14 * (1.0 + std::abs(sa.y0));
    if (rep.strict_applicable) {
        rep.strict_claims_equal = diff.abs().maxCoeff() <= tol;
        rep.strict_dividend_constant = rep.dividends.difference_constant;
    }
    return rep;
}

}  // namespace mdbsde
