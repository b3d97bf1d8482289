#include "mdbsde/config.hpp"

#include "mdbsde/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace mdbsde {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

/// Object reader that remembers which keys were consumed and rejects the rest.
class Section {
public:
    Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) fail(where_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        if (!has(key)) fail(where_, "missing key '" + key + "'");
        return j_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(where_, "missing key '" + key + "'");
            return *fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number()) fail(where_, "'" + key + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(where_, "'" + key + "' must be finite");
        return x;
    }

    long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(where_, "missing key '" + key + "'");
            return *fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer()) fail(where_, "'" + key + "' must be an integer");
        return v.get<long long>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) {
            if (!fallback) fail(where_, "missing key '" + key + "'");
            return *fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_string()) fail(where_, "'" + key + "' must be a string");
        return v.get<std::string>();
    }

    const std::string& where() const { return where_; }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) fail(where_, "unknown key '" + item.key() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

/// Coefficient with bounds over [0, T] and every state.
struct Coef {
    CoefficientFn fn;
    double lo = 0.0, hi = 0.0;
    double sup() const { return std::max(std::abs(lo), std::abs(hi)); }
};

/// A number, or {value, per_default[], w_slope, t_slope}: base(defaults) + w_slope tanh(w) + t_slope t.
Coef parse_coef(const json& v, const std::string& where, double horizon) {
    if (v.is_number()) {
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(where, "must be finite");
        return {CoefficientSet::constant(x), x, x};
    }
    Section s(v, where);
    const double value = s.number("value", 0.0);
    std::vector<double> per_default;
    if (s.has("per_default")) {
        const json& a = s.at("per_default");
        if (!a.is_array() || a.empty()) fail(where, "'per_default' must be a non-empty array");
        for (const auto& x : a) {
            if (!x.is_number()) fail(where, "'per_default' entries must be numbers");
            per_default.push_back(x.get<double>());
        }
    }
    const double ws = s.number("w_slope", 0.0);
    const double ts = s.number("t_slope", 0.0);
    s.finish();
    double base_lo = value, base_hi = value;
    if (!per_default.empty()) {
        base_lo = *std::min_element(per_default.begin(), per_default.end());
        base_hi = *std::max_element(per_default.begin(), per_default.end());
    }
    auto fn = [value, per_default, ws, ts](const State& st) {
        double base = value;
        if (!per_default.empty())
            base = per_default[std::min<std::size_t>(static_cast<std::size_t>(st.defaults), per_default.size() - 1)];
        return base + ws * std::tanh(st.w) + ts * st.t;
    };
    return {fn, base_lo - std::abs(ws) + std::min(0.0, ts) * horizon,
            base_hi + std::abs(ws) + std::max(0.0, ts) * horizon};
}

struct HazardPart {
    HazardFn fn;
    double sup = 0.0;
};

HazardPart parse_hazard(const json& v, const std::string& where, double horizon) {
    Section s(v, where);
    const std::string kind = s.text("kind");
    HazardPart h;
    if (kind == "constant") {
        const double r = s.number("rate");
        if (r < 0.0) fail(where, "rate must be non-negative");
        h = {IntensityModel::constant(r), r};
    } else if (kind == "logistic") {
        const double base = s.number("base");
        const double amp = s.number("amplitude");
        const double slope = s.number("slope", 1.0);
        if (base < 0.0 || base + amp < 0.0) fail(where, "hazard must be non-negative");
        h = {IntensityModel::logistic(base, amp, slope), base + std::max(amp, 0.0)};
    } else if (kind == "linear_in_time") {
        const double r = s.number("rate");
        const double slope = s.number("slope");
        if (r < 0.0 || r + slope * horizon < 0.0) fail(where, "hazard must be non-negative on [0, T]");
        h = {IntensityModel::linear_in_time(r, slope), r + std::max(slope, 0.0) * horizon};
    } else {
        fail(where, "unknown hazard kind '" + kind + "'");
    }
    s.finish();
    return h;
}

std::vector<double> number_array(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(where, "expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

struct Context {
    double horizon = 1.0;
    std::vector<double> hazard_sup;
    bool has_market = false;
};

DriverConfig parse_driver(const json& v, const std::string& where, const Context& ctx) {
    Section s(v, where);
    DriverConfig d;
    const std::string kind = s.text("kind", "zero");
    if (kind == "zero") {
        d.kind = DriverKind::zero;
    } else if (kind == "linear") {
        d.kind = DriverKind::linear;
        CoefficientSet& c = d.coefficients;
        double ba = 0.0, bb = 0.0, bg = 0.0;
        if (s.has("alpha")) {
            const Coef a = parse_coef(s.at("alpha"), where + ".alpha", ctx.horizon);
            c.alpha = a.fn;
            ba = a.sup();
        }
        if (s.has("beta")) {
            const Coef b = parse_coef(s.at("beta"), where + ".beta", ctx.horizon);
            c.beta = b.fn;
            bb = b.sup();
        }
        if (s.has("delta")) c.delta = parse_coef(s.at("delta"), where + ".delta", ctx.horizon).fn;
        if (s.has("gamma")) {
            const json& g = s.at("gamma");
            if (!g.is_array()) fail(where, "'gamma' must be an array");
            if (g.size() > ctx.hazard_sup.size()) fail(where, "more gamma entries than default levels");
            for (std::size_t i = 0; i < g.size(); ++i) {
                const Coef gi = parse_coef(g[i], where + ".gamma[" + std::to_string(i) + "]", ctx.horizon);
                c.gamma.push_back(gi.fn);
                bg = std::max(bg, gi.sup() * std::sqrt(ctx.hazard_sup[i]));
            }
        }
        const double slack = 1.0 + 1e-12;
        c.bound_alpha = ba * slack;
        c.bound_beta = bb * slack;
        c.bound_gamma = bg * slack;
    } else if (kind == "market" || kind == "large_seller") {
        if (!ctx.has_market) fail(where, "driver kind '" + kind + "' needs a market section");
        d.kind = kind == "market" ? DriverKind::market : DriverKind::large_seller;
    } else {
        fail(where, "unknown driver kind '" + kind + "'");
    }
    if (s.has("lipschitz")) {
        const double l = s.number("lipschitz");
        if (!(l >= 0.0)) fail(where, "'lipschitz' must be non-negative");
        d.lipschitz = l;
    }
    s.finish();
    return d;
}

TerminalClaim parse_claim(const json& v, const std::string& where, const Context& ctx) {
    Section s(v, where);
    const std::string kind = s.text("kind");
    const int p = static_cast<int>(ctx.hazard_sup.size());
    TerminalClaim claim;
    if (kind == "constant") {
        claim = TerminalClaim::constant(s.number("value"));
    } else if (kind == "event") {
        const long long k = s.integer("defaults");
        if (k < 0 || k > p) fail(where, "'defaults' must lie in [0, levels]");
        claim = TerminalClaim::event(static_cast<int>(k), s.number("payout", 1.0));
    } else if (kind == "polynomial") {
        std::vector<double> coefficients = number_array(s.at("coefficients"), where + ".coefficients");
        std::vector<double> weights;
        if (s.has("weights")) {
            weights = number_array(s.at("weights"), where + ".weights");
            if (static_cast<int>(weights.size()) != p + 1) fail(where, "'weights' needs levels + 1 entries");
        }
        claim = TerminalClaim::polynomial(std::move(coefficients), std::move(weights));
    } else if (kind == "default_time") {
        const long long level = s.integer("level");
        if (level < 1 || level > p) fail(where, "'level' must lie in [1, levels]");
        claim = TerminalClaim::time_after_default(static_cast<int>(level), s.number("scale", 1.0), ctx.horizon);
    } else {
        fail(where, "unknown claim kind '" + kind + "'");
    }
    s.finish();
    return claim;
}

DividendSpec parse_dividend(const json& v, const std::string& where, const Context& ctx) {
    Section s(v, where);
    DividendSpec d;
    if (s.has("rate")) d.rate = parse_coef(s.at("rate"), where + ".rate", ctx.horizon).fn;
    if (s.has("jumps")) {
        const json& a = s.at("jumps");
        if (!a.is_array()) fail(where, "'jumps' must be an array");
        for (std::size_t i = 0; i < a.size(); ++i) {
            Section js(a[i], where + ".jumps[" + std::to_string(i) + "]");
            ScheduledJump j{js.number("time"), js.number("amount")};
            js.finish();
            if (!(j.time > 0.0 && j.time <= ctx.horizon)) fail(js.where(), "time must lie in (0, horizon]");
            d.jumps.push_back(j);
        }
    }
    if (s.has("payouts")) {
        const json& a = s.at("payouts");
        if (!a.is_array()) fail(where, "'payouts' must be an array");
        if (a.size() > ctx.hazard_sup.size()) fail(where, "more payouts than default levels");
        for (std::size_t i = 0; i < a.size(); ++i)
            d.payouts.push_back(parse_coef(a[i], where + ".payouts[" + std::to_string(i) + "]", ctx.horizon).fn);
    }
    s.finish();
    return d;
}

MarketSpec parse_market(Section& s, const Context& ctx, FeedbackSpec& feedback) {
    MarketSpec m;
    const std::string& where = s.where();
    const double T = ctx.horizon;
    const Coef r = parse_coef(s.at("rate"), where + ".rate", T);
    const Coef mu0 = parse_coef(s.at("mu0"), where + ".mu0", T);
    const Coef sigma0 = parse_coef(s.at("sigma0"), where + ".sigma0", T);
    m.rate = r.fn;
    m.mu0 = mu0.fn;
    m.sigma0 = sigma0.fn;
    double bound_mu = mu0.sup(), bound_sigma = sigma0.sup(), sigma_lo = sigma0.lo;
    const json& assets = s.at("assets");
    if (!assets.is_array()) fail(where, "'assets' must be an array");
    if (assets.size() != ctx.hazard_sup.size()) fail(where, "need one defaultable asset per default level");
    for (std::size_t i = 0; i < assets.size(); ++i) {
        const std::string w = where + ".assets[" + std::to_string(i) + "]";
        Section a(assets[i], w);
        const Coef mu = parse_coef(a.at("mu"), w + ".mu", T);
        const Coef sigma = parse_coef(a.at("sigma"), w + ".sigma", T);
        const Coef jump = parse_coef(a.at("jump"), w + ".jump", T);
        a.finish();
        if (jump.lo < -1.0) fail(w, "jump must be at least -1");
        if (jump.lo <= 0.0 && jump.hi >= 0.0) fail(w, "jump must not vanish");
        m.assets.push_back({mu.fn, sigma.fn, jump.fn});
        bound_mu = std::max(bound_mu, mu.sup());
        bound_sigma = std::max(bound_sigma, sigma.sup());
        sigma_lo = std::min(sigma_lo, sigma.lo);
    }
    if (!(sigma_lo > 0.0)) fail(where, "volatilities must be bounded away from 0");
    const double slack = 1.0 + 1e-12;
    m.bound_rate = r.sup() * slack;
    m.bound_mu = bound_mu * slack;
    m.bound_sigma = bound_sigma * slack;
    m.bound_sigma_inverse = slack / sigma_lo;
    if (s.has("feedback")) {
        const json& f = s.at("feedback");
        if (!f.is_array()) fail(where, "'feedback' must be an array");
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::string w = where + ".feedback[" + std::to_string(i) + "]";
            Section fs(f[i], w);
            const long long level = fs.integer("level");
            if (level < 1 || level > static_cast<long long>(ctx.hazard_sup.size()))
                fail(w, "'level' must lie in [1, levels]");
            const std::string kind = fs.text("kind");
            try {
                if (kind == "constant")
                    feedback.terms.push_back(FeedbackTerm::constant(static_cast<int>(level), fs.number("value")));
                else if (kind == "position")
                    feedback.terms.push_back(FeedbackTerm::position(static_cast<int>(level), fs.number("amplitude"),
                                                                    fs.number("scale", 1.0)));
                else
                    fail(w, "unknown feedback kind '" + kind + "'");
            } catch (const ModelError& e) {
                fail(w, e.what());
            }
            fs.finish();
        }
    }
    return m;
}

std::string output_name(Section& s, const std::string& key, const std::string& fallback) {
    const std::string name = s.text(key, fallback);
    if (name.find('/') != std::string::npos || name == "." || name == "..")
        fail(s.where(), "'" + key + "' must be a plain file name");
    return name;
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) fail("config", "expected an object");
    if (seed) {
        if (!root.contains("scenario") || !root["scenario"].is_object()) fail("config", "missing section 'scenario'");
        root["scenario"]["seed"] = *seed;
    }

    RunConfig cfg;
    cfg.canonical = root.dump();
    cfg.hash = fnv1a_hex(cfg.canonical);

    Section top(root, "config");
    top.text("name", "");
    top.text("description", "");

    Context ctx;
    {
        Section s(top.at("scenario"), "scenario");
        const double horizon = s.number("horizon");
        const long long steps = s.integer("steps");
        const long long paths = s.integer("paths");
        if (!(horizon > 0.0)) fail("scenario", "'horizon' must be positive");
        if (steps < 1 || steps > 1000000) fail("scenario", "'steps' must lie in [1, 1e6]");
        if (paths < 1) fail("scenario", "'paths' must be positive");
        if (s.has("seed")) {
            const json& v = s.at("seed");
            if (!v.is_number_unsigned()) fail("scenario", "'seed' must be a non-negative integer");
            cfg.seed = v.get<std::uint64_t>();
        }
        cfg.grid = TimeGrid(horizon, static_cast<int>(steps));
        cfg.paths = static_cast<Eigen::Index>(paths);
        ctx.horizon = horizon;
        if (s.has("hazards")) {
            const json& a = s.at("hazards");
            if (!a.is_array()) fail("scenario", "'hazards' must be an array");
            for (std::size_t i = 0; i < a.size(); ++i) {
                HazardPart h = parse_hazard(a[i], "scenario.hazards[" + std::to_string(i) + "]", horizon);
                cfg.model.hazards.push_back(h.fn);
                ctx.hazard_sup.push_back(h.sup);
            }
        }
        if (s.has("hazard_bound")) {
            const double bound = s.number("hazard_bound");
            if (!(bound > 0.0)) fail("scenario", "'hazard_bound' must be positive");
            cfg.model.bounded = true;
            cfg.model.bound = bound;
            for (double& h : ctx.hazard_sup) h = std::min(h, bound);
        }
        s.finish();
    }

    if (top.has("market")) {
        Section s(top.at("market"), "market");
        cfg.market = parse_market(s, ctx, cfg.feedback);
        s.finish();
        ctx.has_market = true;
    }

    cfg.problem.driver = top.has("driver") ? parse_driver(top.at("driver"), "driver", ctx) : DriverConfig{};
    cfg.problem.claim = parse_claim(top.at("claim"), "claim", ctx);
    if (top.has("dividend")) cfg.problem.dividend = parse_dividend(top.at("dividend"), "dividend", ctx);

    if (top.has("hat")) {
        Section s(top.at("hat"), "hat");
        ProblemConfig hat = cfg.problem;
        if (s.has("driver")) hat.driver = parse_driver(s.at("driver"), "hat.driver", ctx);
        if (s.has("claim")) hat.claim = parse_claim(s.at("claim"), "hat.claim", ctx);
        if (s.has("dividend")) hat.dividend = parse_dividend(s.at("dividend"), "hat.dividend", ctx);
        s.finish();
        cfg.hat = std::move(hat);
    }

    if (top.has("solver")) {
        Section s(top.at("solver"), "solver");
        const std::string method = s.text("method", "lsmc");
        if (method == "explicit")
            cfg.solver.method = Method::explicit_linear;
        else if (method == "lsmc")
            cfg.solver.method = Method::lsmc;
        else if (method == "picard")
            cfg.solver.method = Method::picard;
        else
            fail("solver", "unknown method '" + method + "'");
        const long long degree = s.integer("degree", 3);
        if (degree < 0 || degree > 8) fail("solver", "'degree' must lie in [0, 8]");
        cfg.solver.lsmc.degree = static_cast<int>(degree);
        const std::string transitions = s.text("transitions", "realized");
        if (transitions == "realized")
            cfg.solver.lsmc.transitions = Transitions::realized;
        else if (transitions == "integrated")
            cfg.solver.lsmc.transitions = Transitions::integrated;
        else
            fail("solver", "unknown transitions '" + transitions + "'");
        const long long inner = s.integer("inner_iterations", 2);
        if (inner < 1 || inner > 100) fail("solver", "'inner_iterations' must lie in [1, 100]");
        cfg.solver.lsmc.inner_iterations = static_cast<int>(inner);
        const long long iterations = s.integer("iterations", 6);
        if (iterations < 2 || iterations > 1000) fail("solver", "'iterations' must lie in [2, 1000]");
        cfg.solver.iterations = static_cast<int>(iterations);
        if (s.has("xi")) {
            const double xi = s.number("xi");
            if (!(xi > 0.0)) fail("solver", "'xi' must be positive");
            cfg.solver.xi = xi;
        }
        if (s.has("beta_w")) {
            const double beta = s.number("beta_w");
            if (!(beta > 0.0)) fail("solver", "'beta_w' must be positive");
            cfg.solver.beta_w = beta;
        }
        const std::string form = s.text("payout_form", "at_default");
        if (form == "at_default")
            cfg.solver.jump_weighted_payouts = false;
        else if (form == "jump_weighted")
            cfg.solver.jump_weighted_payouts = true;
        else
            fail("solver", "unknown payout_form '" + form + "'");
        s.finish();
    }

    if (top.has("output")) {
        Section s(top.at("output"), "output");
        cfg.output.record = output_name(s, "record", cfg.output.record);
        cfg.output.batch_csv = output_name(s, "batch_csv", cfg.output.batch_csv);
        cfg.output.solution_csv = output_name(s, "solution_csv", "");
        cfg.output.trace_csv = output_name(s, "trace_csv", "");
        if (cfg.output.record.empty() || cfg.output.batch_csv.empty())
            fail("output", "'record' and 'batch_csv' must not be empty");
        s.finish();
    }

    if (top.has("verify")) {
        Section s(top.at("verify"), "verify");
        VerifyConfig& v = cfg.verify;
        v.gamma_map = s.text("gamma_map", "");
        if (!v.gamma_map.empty() && v.gamma_map != "linear" && v.gamma_map != "difference_quotient")
            fail("verify", "unknown gamma_map '" + v.gamma_map + "'");
        v.z_score = s.number("z_score", v.z_score);
        v.contraction_bound = s.number("contraction_bound", v.contraction_bound);
        v.ratio_low = s.number("ratio_low", v.ratio_low);
        v.ratio_high = s.number("ratio_high", v.ratio_high);
        v.relative_max = s.number("relative_max", v.relative_max);
        v.budget_max = s.number("budget_max", v.budget_max);
        if (!(v.z_score > 0.0 && v.contraction_bound > 0.0 && v.ratio_low > 0.0 && v.ratio_high >= v.ratio_low &&
              v.relative_max > 0.0 && v.budget_max > 0.0))
            fail("verify", "thresholds must be positive and ordered");
        s.finish();
    }

    top.finish();
    return cfg;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file '" + path + "'");
    return parse_config(text.str(), seed);
}

std::optional<CoefficientSet> linear_coefficients(const RunConfig& config, const DriverConfig& driver) {
    switch (driver.kind) {
        case DriverKind::zero:
            return CoefficientSet{};
        case DriverKind::linear:
            return driver.coefficients;
        case DriverKind::market:
            return pricing_coefficients(*config.market);
        case DriverKind::large_seller:
            if (config.feedback.terms.empty()) return pricing_coefficients(*config.market);
            return std::nullopt;
    }
    return std::nullopt;
}

DriverSpec build_driver(const RunConfig& config, const DriverConfig& driver, const ScenarioBatch& b) {
    DriverSpec d;
    switch (driver.kind) {
        case DriverKind::zero:
            d = zero_driver();
            break;
        case DriverKind::linear:
            d = linear_driver(driver.coefficients);
            break;
        case DriverKind::market:
            validate_market(*config.market, b);
            d = large_seller_driver(*config.market, FeedbackSpec{}, b);
            break;
        case DriverKind::large_seller:
            validate_market(*config.market, b);
            d = large_seller_driver(*config.market, config.feedback, b);
            break;
    }
    if (driver.lipschitz) d.lipschitz = *driver.lipschitz;
    return d;
}

}  // namespace mdbsde
