#pragma once

#include "mdbsde/bsde.hpp"
#include "mdbsde/calculus.hpp"
#include "mdbsde/checks.hpp"
#include "mdbsde/dividend.hpp"
#include "mdbsde/scenario.hpp"

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace mdbsde {

/// Defaultable asset i: dS = S_-(mu dt + sigma dW + b dM^i).
struct DefaultableAsset {
    CoefficientFn mu, sigma, jump;
};

/// Bank account at rate r, a default-free asset (mu0, sigma0) and p defaultable assets.
/// Declared bounds are checked whenever a coefficient is evaluated.
struct MarketSpec {
    CoefficientFn rate;
    CoefficientFn mu0, sigma0;
    std::vector<DefaultableAsset> assets;  // asset i at index i-1
    double bound_rate = std::numeric_limits<double>::infinity();
    double bound_mu = std::numeric_limits<double>::infinity();
    double bound_sigma = std::numeric_limits<double>::infinity();
    double bound_sigma_inverse = std::numeric_limits<double>::infinity();
    double bound_theta = std::numeric_limits<double>::infinity();  // on |Theta^i| sqrt(lambda^i)

    int levels() const { return static_cast<int>(assets.size()); }
    double r(const State& s) const;
    double mu(int asset, const State& s) const;     // asset 0 is the default-free one
    double sigma(int asset, const State& s) const;
    double jump(int asset, const State& s) const;   // asset >= 1
};

struct SharpeRatios {
    double theta0 = 0.0;
    std::vector<double> theta;  // Theta^i, 0 where b^i lambda^i = 0
};

/// Theta^0 = (mu0 - r)/sigma0, Theta^i = (mu^i - r - sigma^i Theta^0)/(b^i lambda^i).
SharpeRatios sharpe_ratios(const MarketSpec& market, const State& s);

/// Evaluates every coefficient at every grid state and default time of the batch.
void validate_market(const MarketSpec& market, const ScenarioBatch& b);

/// S^0..S^p on the grid, paths x (n+1), all starting at 1.
std::vector<Eigen::ArrayXXd> simulate_assets(const ScenarioBatch& b, const MarketSpec& market, int threads = 1);

/// alpha = -r, beta = -Theta^0, gamma^i = -Theta^i, delta = 0.
CoefficientSet pricing_coefficients(const MarketSpec& market);
DriverSpec linear_pricing_driver(const MarketSpec& market);

struct PriceReport {
    Estimate price;
    Estimate zeta_mean;          // E[zeta_{0,T}]
    double factorization_error;  // max |Gamma_T - e^{-int r} zeta_T| / max(1, Gamma_T)
};

/// Explicit price with the linear pricing driver.
PriceReport price_linear(const ScenarioBatch& b, const MarketSpec& market, const TerminalClaim& claim,
                         const DividendSpec& dividend, int threads = 1);

/// Per-path cashflows discounted at r and weighted by the density zeta.
/// Throws ModelError when 1 - Theta^i_{tau_i} <= 0 on some path.
Eigen::ArrayXd price_linear_Q_contributions(const ScenarioBatch& b, const MarketSpec& market,
                                            const TerminalClaim& claim, const DividendSpec& dividend, int threads = 1);
Estimate price_linear_Q(const ScenarioBatch& b, const MarketSpec& market, const TerminalClaim& claim,
                        const DividendSpec& dividend, int threads = 1);

/// Amounts invested in the risky assets on [t_k, t_{k+1}).
struct Strategy {
    Eigen::ArrayXXd phi0;              // paths x n
    std::vector<Eigen::ArrayXXd> phi;  // per defaultable asset, paths x n
};

/// phi^i = K^i / b^i, phi^0 = (Z - sum K^i sigma^i / b^i) / sigma^0.
Strategy extract_strategy(const ScenarioBatch& b, const BsdeSolution& solution, const MarketSpec& market);

struct ReplicationReport {
    Eigen::ArrayXd wealth;  // V_T per path
    Eigen::ArrayXd error;   // V_T - eta
    double mae = 0.0;
    double mean_abs_claim = 0.0;
    double relative() const { return mean_abs_claim > 0.0 ? mae / mean_abs_claim : mae; }
};

/// Forward Euler on the self-financing wealth equation with withdrawals dD, started at x.
ReplicationReport replicate(const ScenarioBatch& b, const MarketSpec& market, const Strategy& strategy, double x,
                            const TerminalClaim& claim, const DividendSpec& dividend);

/// Seller feedback gamma^i(t, phi^i) on the intensity of level i. `k_lipschitz` bounds the
/// slope of k -> gamma(k / b) k.
struct FeedbackTerm {
    int level = 1;
    std::function<double(const State&, double phi)> gamma;
    double bound = 0.0;        // |gamma| <= bound < 1
    double k_lipschitz = 0.0;

    static FeedbackTerm constant(int level, double c);
    /// amplitude * tanh(scale * phi^i)
    static FeedbackTerm position(int level, double amplitude, double scale);
};

struct FeedbackSpec {
    std::vector<FeedbackTerm> terms;
};

/// Sup of the driver's Lipschitz constant over the grid states of the batch.
double large_seller_lipschitz(const MarketSpec& market, const FeedbackSpec& feedback, const ScenarioBatch& b);

/// -r y - Theta^0 z - sum Theta^i lambda^i k^i - sum gamma^i(phi^i) lambda^i k^i.
/// The Lipschitz constant comes from the batch and the driver is probed; throws ModelError on failure.
DriverSpec large_seller_driver(const MarketSpec& market, const FeedbackSpec& feedback, const ScenarioBatch& b);

struct FlowReport {
    Estimate full;       // Y_0 from [0, T]
    Estimate restarted;  // Y_0 from [0, S] with terminal values Y_S
    double difference = 0.0;
    bool consistent = true;  // within 3 SE plus `tolerance`
};

/// (g, D)-evaluation on [0, T] and the restart from Y at grid step `stop`.
FlowReport gD_evaluation(const ScenarioBatch& b, const DriverSpec& driver, const DividendSpec& dividend,
                         const TerminalClaim& claim, int stop, const LsmcOptions& options = {},
                         double tolerance = 1e-3);

}  // namespace mdbsde
