#include "mdbsde/app.hpp"

#include "mdbsde/checks.hpp"
#include "mdbsde/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mdbsde {

using json = nlohmann::json;

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ScenarioBatch make_batch(const RunConfig& cfg, int threads, int refine = 1) {
    const TimeGrid grid(cfg.grid.horizon(), cfg.grid.steps() * refine);
    return simulate_batch(grid, cfg.model, cfg.paths, cfg.seed, threads);
}

const char* method_name(Method m) {
    switch (m) {
        case Method::explicit_linear: return "explicit";
        case Method::lsmc: return "lsmc";
        case Method::picard: return "picard";
    }
    return "";
}

CoefficientSet require_linear(const RunConfig& cfg, const DriverConfig& d, const std::string& what) {
    auto c = linear_coefficients(cfg, d);
    if (!c) throw ConfigError(what + " needs a linear driver");
    return *c;
}

const ProblemConfig& require_hat(const RunConfig& cfg, const std::string& suite) {
    if (!cfg.hat) throw ConfigError("suite '" + suite + "' needs a 'hat' section");
    return *cfg.hat;
}

LsmcOptions lsmc_options(const RunConfig& cfg, int threads, bool keep_paths) {
    LsmcOptions o = cfg.solver.lsmc;
    o.threads = threads;
    o.keep_paths = keep_paths;
    return o;
}

ExplicitOptions explicit_options(const RunConfig& cfg, int threads) {
    return {cfg.solver.jump_weighted_payouts, threads};
}

BsdeSolution explicit_solution(const ScenarioBatch& b, const RunConfig& cfg, const ProblemConfig& p, int threads) {
    const Estimate e = solve_linear_explicit(b, require_linear(cfg, p.driver, "the explicit method"), p.claim,
                                             p.dividend, explicit_options(cfg, threads));
    BsdeSolution s;
    s.y0 = e.mean;
    s.se = e.se;
    return s;
}

Problem make_problem(const RunConfig& cfg, const ProblemConfig& p, const ScenarioBatch& b) {
    return {build_driver(cfg, p.driver, b), p.claim, p.dividend};
}

json estimate_json(double mean, double se) { return {{"mean", mean}, {"se", se}}; }

json inequality_json(const Inequality& q) {
    return {{"lhs", q.lhs}, {"lhs_se", q.lhs_se}, {"rhs", q.rhs}, {"rhs_se", q.rhs_se}, {"holds", q.holds}};
}

std::string csv_of(const std::function<void(std::ostream&)>& fill) {
    std::ostringstream out;
    out.precision(17);
    fill(out);
    return out.str();
}

RunResult finish(json record, bool passed, const Stopwatch& clock) {
    record["runtime"] = clock.seconds();
    return {record.dump(), passed, {}};
}

RunResult suite_martingale(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    CoefficientSet c = require_linear(cfg, cfg.problem.driver, "suite 'martingale'");
    c.alpha = nullptr;
    const ScenarioBatch b = make_batch(cfg, threads);
    const int n = b.grid.steps();
    const Estimate closed = estimate(stochastic_exponential_closed_form(b, c, 0, threads).values.col(n));
    const Estimate euler = estimate(stochastic_exponential_euler(b, c, 0, true, threads).values.col(n));
    const double z = cfg.verify.z_score;
    const bool passed = std::abs(closed.mean - 1.0) <= z * closed.se + 1e-12;
    json r = {{"config_hash", cfg.hash},
              {"suite", "martingale"},
              {"gamma_T", estimate_json(closed.mean, closed.se)},
              {"gamma_T_euler", estimate_json(euler.mean, euler.se)},
              {"passed", passed}};
    return finish(r, passed, clock);
}

RunResult suite_comparison(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    const ProblemConfig& hat = require_hat(cfg, "comparison");
    const ScenarioBatch b = make_batch(cfg, threads);
    const Problem pa = make_problem(cfg, cfg.problem, b);
    const Problem ph = make_problem(cfg, hat, b);
    BsdeSolution sa, sh;
    if (cfg.solver.method == Method::explicit_linear) {
        sa = explicit_solution(b, cfg, cfg.problem, threads);
        sh = explicit_solution(b, cfg, hat, threads);
    } else {
        sa = solve_backward_lsmc(b, pa.driver, pa.claim, pa.dividend, lsmc_options(cfg, threads, true));
        sh = solve_backward_lsmc(b, ph.driver, ph.claim, ph.dividend, lsmc_options(cfg, threads, true));
    }
    std::string map = cfg.verify.gamma_map;
    const auto linear = linear_coefficients(cfg, cfg.problem.driver);
    if (map.empty()) map = linear ? "linear" : "difference_quotient";
    GammaMap gamma;
    if (map == "linear") {
        if (!linear) throw ConfigError("gamma_map 'linear' needs a linear driver");
        gamma = linear_gamma_map(*linear);
    } else {
        gamma = difference_quotient_gamma_map(pa.driver);
    }
    ComparisonOptions o;
    o.z_score = cfg.verify.z_score;
    const ComparisonReport rep = check_comparison(b, pa, sa, ph, sh, gamma, o);
    const char* verdict = rep.hypotheses() ? (rep.ordered ? "ordered" : "violated")
                                           : (rep.expected_failure() ? "expected_failure" : "hypotheses_violated");
    json r = {{"config_hash", cfg.hash},
              {"suite", "comparison"},
              {"gamma_map", map},
              {"hypotheses",
               {{"claims_ordered", rep.claims_ordered},
                {"dividends_dominate", rep.dividends.dominates},
                {"jump_condition", rep.jump_condition},
                {"jump_violations", rep.jump_violations},
                {"k_condition", rep.k_condition},
                {"k_worst", rep.k_worst},
                {"driver_condition", rep.driver_condition},
                {"driver_worst", rep.driver_worst},
                {"probed", rep.probed},
                {"partition", rep.partition},
                {"hold", rep.hypotheses()}}},
              {"Y0", rep.y0},
              {"SE", rep.se},
              {"Y0_hat", rep.y0_hat},
              {"SE_hat", rep.se_hat},
              {"ordered", rep.ordered},
              {"negative_price", rep.y0 < -o.z_score * rep.se},
              {"strict",
               {{"applicable", rep.strict_applicable},
                {"claims_equal", rep.strict_claims_equal},
                {"dividend_difference_constant", rep.strict_dividend_constant}}},
              {"verdict", verdict},
              {"passed", rep.passed()}};
    return finish(r, rep.passed(), clock);
}

RunResult suite_contraction(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    const ScenarioBatch b = make_batch(cfg, threads);
    const Problem p = make_problem(cfg, cfg.problem, b);
    const PicardResult res = solve_picard(b, p.driver, p.claim, p.dividend, cfg.solver.iterations,
                                          lsmc_options(cfg, threads, true), cfg.solver.beta_w);
    bool passed = !res.ratios.empty();
    for (double q : res.ratios) passed = passed && q <= cfg.verify.contraction_bound;
    json r = {{"config_hash", cfg.hash},
              {"suite", "contraction"},
              {"lipschitz", p.driver.lipschitz},
              {"beta_w", res.beta_w},
              {"distances", res.distances},
              {"ratios", res.ratios},
              {"y0", res.y0},
              {"bound", cfg.verify.contraction_bound},
              {"passed", passed}};
    RunResult out = finish(r, passed, clock);
    if (!cfg.output.trace_csv.empty())
        out.files.emplace_back(cfg.output.trace_csv, csv_of([&](std::ostream& os) {
                                   os << "iteration,y0,distance,ratio\n";
                                   for (std::size_t i = 0; i < res.y0.size(); ++i) {
                                       os << i << ',' << res.y0[i] << ',';
                                       if (i >= 1 && i - 1 < res.distances.size()) os << res.distances[i - 1];
                                       os << ',';
                                       if (i >= 2 && i - 2 < res.ratios.size()) os << res.ratios[i - 2];
                                       os << '\n';
                                   }
                               }));
    return out;
}

RunResult suite_apriori(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    const ProblemConfig& hat = require_hat(cfg, "apriori");
    const ScenarioBatch b = make_batch(cfg, threads);
    const Problem pa = make_problem(cfg, cfg.problem, b);
    const Problem ph = make_problem(cfg, hat, b);
    const LsmcOptions o = lsmc_options(cfg, threads, true);
    const BsdeSolution sa = solve_backward_lsmc(b, pa.driver, pa.claim, pa.dividend, o);
    const BsdeSolution sh = solve_backward_lsmc(b, ph.driver, ph.claim, ph.dividend, o);
    AprioriOptions ao;
    ao.xi = cfg.solver.xi;
    ao.beta_w = cfg.solver.beta_w;
    ao.z_score = cfg.verify.z_score;
    const EstimateReport rep = check_apriori(b, pa, sa, ph, sh, ao);
    json r = {{"config_hash", cfg.hash},
              {"suite", "apriori"},
              {"lipschitz", rep.lipschitz},
              {"xi", rep.xi},
              {"beta_w", rep.beta_w},
              {"at_zero", inequality_json(rep.at_zero)},
              {"y_norm", inequality_json(rep.y_norm)},
              {"martingale", inequality_json(rep.martingale)},
              {"martingale_checked", rep.martingale_checked},
              {"passed", rep.passed()}};
    return finish(r, rep.passed(), clock);
}

RunResult suite_replication(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    if (!cfg.market || cfg.problem.driver.kind != DriverKind::market)
        throw ConfigError("suite 'replication' needs a market driver");
    if (cfg.grid.steps() % 2 != 0) throw ConfigError("suite 'replication' needs an even number of steps");
    const MarketSpec& market = *cfg.market;
    const ScenarioBatch fine = make_batch(cfg, threads);
    const ScenarioBatch coarse = coarsen(fine, 2);
    json levels = json::array();
    std::vector<ReplicationReport> reps;
    for (const ScenarioBatch* b : {&coarse, &fine}) {
        validate_market(market, *b);
        const DriverSpec d = build_driver(cfg, cfg.problem.driver, *b);
        const BsdeSolution s =
            solve_backward_lsmc(*b, d, cfg.problem.claim, cfg.problem.dividend, lsmc_options(cfg, threads, true));
        const Strategy phi = extract_strategy(*b, s, market);
        reps.push_back(replicate(*b, market, phi, s.y0, cfg.problem.claim, cfg.problem.dividend));
        levels.push_back({{"steps", b->grid.steps()},
                          {"Y0", s.y0},
                          {"mae", reps.back().mae},
                          {"relative", reps.back().relative()}});
    }
    const double ratio = reps[1].mae > 0.0 ? reps[0].mae / reps[1].mae : 0.0;
    const VerifyConfig& v = cfg.verify;
    const bool passed = ratio >= v.ratio_low && ratio <= v.ratio_high && reps[1].relative() <= v.relative_max;
    json r = {{"config_hash", cfg.hash},
              {"suite", "replication"},
              {"levels", levels},
              {"mae_ratio", ratio},
              {"mean_abs_claim", reps[1].mean_abs_claim},
              {"passed", passed}};
    return finish(r, passed, clock);
}

RunResult suite_crosscheck(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    const CoefficientSet c = require_linear(cfg, cfg.problem.driver, "suite 'crosscheck'");
    const ProblemConfig& p = cfg.problem;
    Stopwatch base_clock;
    const ScenarioBatch base = make_batch(cfg, threads);
    const Estimate e1 = solve_linear_explicit(base, c, p.claim, p.dividend, explicit_options(cfg, threads));
    const DriverSpec d1 = build_driver(cfg, p.driver, base);
    const BsdeSolution l1 = solve_backward_lsmc(base, d1, p.claim, p.dividend, lsmc_options(cfg, threads, false));
    const double base_runtime = base_clock.seconds();

    const ScenarioBatch fine = make_batch(cfg, threads, 2);
    const ScenarioBatch coarse = coarsen(fine, 2);
    const auto at = [&](const ScenarioBatch& b) {
        const Estimate e = solve_linear_explicit(b, c, p.claim, p.dividend, explicit_options(cfg, threads));
        const DriverSpec d = build_driver(cfg, p.driver, b);
        const BsdeSolution l = solve_backward_lsmc(b, d, p.claim, p.dividend, lsmc_options(cfg, threads, false));
        return std::pair{e, l.y0};
    };
    const auto [ec, lc] = at(coarse);
    const auto [ef, lf] = at(fine);
    // First order in dt: the error at n is about twice the n -> 2n change.
    const double budget = 2.0 * (std::abs(lc - lf) + std::abs(ec.mean - ef.mean));
    const double scale = std::max(std::abs(e1.mean), 1e-12);
    const double diff = std::abs(l1.y0 - e1.mean);
    const double noise = cfg.verify.z_score * std::hypot(l1.se, e1.se);
    const bool budget_ok = budget <= cfg.verify.budget_max * scale;
    const bool agree = diff <= noise + budget;
    json r = {{"config_hash", cfg.hash},
              {"suite", "crosscheck"},
              {"explicit", estimate_json(e1.mean, e1.se)},
              {"lsmc", estimate_json(l1.y0, l1.se)},
              {"difference", diff},
              {"noise_bound", noise},
              {"refinement",
               {{"explicit_n", ec.mean}, {"explicit_2n", ef.mean}, {"lsmc_n", lc}, {"lsmc_2n", lf}}},
              {"budget", budget},
              {"budget_relative", budget / scale},
              {"budget_ok", budget_ok},
              {"agree", agree},
              {"passed", agree && budget_ok}};
    r["runtime"] = {{"base", base_runtime}, {"total", clock.seconds()}};
    return {r.dump(), agree && budget_ok, {}};
}

RunResult suite_identity(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    if (!cfg.market || cfg.problem.driver.kind != DriverKind::market)
        throw ConfigError("suite 'identity' needs a market driver");
    const MarketSpec& market = *cfg.market;
    const ProblemConfig& p = cfg.problem;
    const ScenarioBatch b = make_batch(cfg, threads);
    validate_market(market, b);
    const CoefficientSet c = pricing_coefficients(market);
    const Eigen::ArrayXd pp = explicit_contributions(b, c, p.claim, p.dividend, {false, threads});
    const Eigen::ArrayXd qq = price_linear_Q_contributions(b, market, p.claim, p.dividend, threads);
    const double worst = ((pp - qq).abs() / pp.abs().max(1.0)).maxCoeff();
    const Estimate ep = estimate(pp), eq = estimate(qq);
    const Estimate first = ep;
    const Estimate second = solve_linear_explicit(b, c, p.claim, p.dividend, {true, threads});
    const double z = cfg.verify.z_score;
    const bool identity = worst <= 1e-12;
    const bool forms = std::abs(first.mean - second.mean) <= z * std::hypot(first.se, second.se) + 1e-12;
    json r = {{"config_hash", cfg.hash},
              {"suite", "identity"},
              {"price_P", estimate_json(ep.mean, ep.se)},
              {"price_Q", estimate_json(eq.mean, eq.se)},
              {"max_relative_gap", worst},
              {"payout_at_default", estimate_json(first.mean, first.se)},
              {"payout_jump_weighted", estimate_json(second.mean, second.se)},
              {"identity", identity},
              {"forms_agree", forms},
              {"passed", identity && forms}};
    return finish(r, identity && forms, clock);
}

}  // namespace

RunResult cmd_price(const RunConfig& cfg, int threads) {
    Stopwatch clock;
    const ScenarioBatch b = make_batch(cfg, threads);
    const ProblemConfig& p = cfg.problem;
    double y0 = 0.0, se = 0.0;
    RunResult out;
    switch (cfg.solver.method) {
        case Method::explicit_linear: {
            const BsdeSolution s = explicit_solution(b, cfg, p, threads);
            y0 = s.y0;
            se = s.se;
            break;
        }
        case Method::lsmc: {
            const DriverSpec d = build_driver(cfg, p.driver, b);
            const bool keep = !cfg.output.solution_csv.empty();
            const BsdeSolution s = solve_backward_lsmc(b, d, p.claim, p.dividend, lsmc_options(cfg, threads, keep));
            y0 = s.y0;
            se = s.se;
            if (keep)
                out.files.emplace_back(cfg.output.solution_csv,
                                       csv_of([&](std::ostream& os) { write_solution_csv(b, s, os); }));
            break;
        }
        case Method::picard: {
            const DriverSpec d = build_driver(cfg, p.driver, b);
            const PicardResult res = solve_picard(b, d, p.claim, p.dividend, cfg.solver.iterations,
                                                  lsmc_options(cfg, threads, true), cfg.solver.beta_w);
            y0 = res.solution.y0;
            se = res.solution.se;
            if (!cfg.output.solution_csv.empty())
                out.files.emplace_back(cfg.output.solution_csv,
                                       csv_of([&](std::ostream& os) { write_solution_csv(b, res.solution, os); }));
            break;
        }
    }
    json r = {{"config_hash", cfg.hash}, {"method", method_name(cfg.solver.method)}, {"Y0", y0}, {"SE", se}};
    r["runtime"] = clock.seconds();
    out.record = r.dump();
    return out;
}

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"martingale", "comparison", "contraction", "apriori",
                                                "replication", "crosscheck", "identity"};
    return names;
}

RunResult cmd_verify(const std::string& suite, const RunConfig& cfg, int threads) {
    if (suite == "martingale") return suite_martingale(cfg, threads);
    if (suite == "comparison") return suite_comparison(cfg, threads);
    if (suite == "contraction") return suite_contraction(cfg, threads);
    if (suite == "apriori") return suite_apriori(cfg, threads);
    if (suite == "replication") return suite_replication(cfg, threads);
    if (suite == "crosscheck") return suite_crosscheck(cfg, threads);
    if (suite == "identity") return suite_identity(cfg, threads);
    throw ConfigError("unknown suite '" + suite + "'");
}

RunResult cmd_simulate(const RunConfig& cfg, int threads, std::ostream& csv) {
    Stopwatch clock;
    const ScenarioBatch b = make_batch(cfg, threads);
    write_batch_csv(b, csv);
    std::vector<double> frequency;
    for (int i = 0; i < b.levels(); ++i)
        frequency.push_back(static_cast<double>((b.tau.col(i) <= b.grid.horizon()).count()) /
                            static_cast<double>(b.paths()));
    json r = {{"config_hash", cfg.hash},
              {"paths", b.paths()},
              {"steps", b.grid.steps()},
              {"levels", b.levels()},
              {"default_frequency", frequency}};
    r["runtime"] = clock.seconds();
    return {r.dump(), true, {}};
}

std::string strip_runtime(const std::string& record) {
    json r = json::parse(record);
    r.erase("runtime");
    return r.dump();
}

void write_atomic(const std::filesystem::path& dir, const std::string& name,
                  const std::function<void(std::ostream&)>& fill) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    const fs::path target = dir / name;
    const fs::path tmp = dir / ("." + name + ".tmp");
    try {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.precision(17);
        fill(out);
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    } catch (...) {
        fs::remove(tmp, ec);
        throw;
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into '" + target.string() + "'");
    }
}

}  // namespace mdbsde
