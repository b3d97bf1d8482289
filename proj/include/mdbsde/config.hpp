#pragma once

#include "mdbsde/bsde.hpp"
#include "mdbsde/market.hpp"
#include "mdbsde/scenario.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace mdbsde {

enum class DriverKind { zero, linear, market, large_seller };

struct DriverConfig {
    DriverKind kind = DriverKind::zero;
    CoefficientSet coefficients;  // linear drivers
    std::optional<double> lipschitz;
};

struct ProblemConfig {
    DriverConfig driver;
    TerminalClaim claim = TerminalClaim::constant(0.0);
    DividendSpec dividend;
};

enum class Method { explicit_linear, lsmc, picard };

struct SolverConfig {
    Method method = Method::lsmc;
    LsmcOptions lsmc;
    int iterations = 6;
    std::optional<double> xi, beta_w;
    bool jump_weighted_payouts = false;
};

/// File names inside the output directory; empty means not written.
struct OutputConfig {
    std::string record = "result.json";
    std::string solution_csv;
    std::string trace_csv;
    std::string batch_csv = "batch.csv";
};

struct VerifyConfig {
    std::string gamma_map;  // "linear" or "difference_quotient"; empty picks by driver kind
    double z_score = 3.0;
    double contraction_bound = 0.6;
    double ratio_low = 1.7, ratio_high = 2.3;
    double relative_max = 0.02;
    double budget_max = 0.01;
};

struct RunConfig {
    std::string canonical;  // effective configuration, compact JSON with sorted keys
    std::string hash;       // FNV-1a of `canonical`, 16 hex digits
    TimeGrid grid{1.0, 1};
    Eigen::Index paths = 1;
    std::uint64_t seed = 0;
    IntensityModel model;
    std::optional<MarketSpec> market;
    FeedbackSpec feedback;
    ProblemConfig problem;
    std::optional<ProblemConfig> hat;
    SolverConfig solver;
    OutputConfig output;
    VerifyConfig verify;
};

/// Parses a configuration document. Throws ConfigError on schema violations and unknown keys.
RunConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed = std::nullopt);
/// Throws IoError when the file cannot be read.
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt);

/// Coefficients of a linear or market driver, nullopt for the others.
std::optional<CoefficientSet> linear_coefficients(const RunConfig& config, const DriverConfig& driver);
DriverSpec build_driver(const RunConfig& config, const DriverConfig& driver, const ScenarioBatch& b);

std::string fnv1a_hex(const std::string& text);

}  // namespace mdbsde
