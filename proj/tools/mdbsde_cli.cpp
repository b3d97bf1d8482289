#include "mdbsde/app.hpp"
#include "mdbsde/errors.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum Exit { ok = 0, verify_failed = 1, config_error = 2, model_error = 3, io_error = 4 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-default BSDE pricing and verification"};
    app.require_subcommand(1);
    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 1;
    app.add_option("--config", config_path, "JSON configuration document")->required();
    app.add_option("--seed", seed, "Override scenario.seed");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 1024));
    app.add_option("--out", out_dir, "Output directory");

    auto* price = app.add_subcommand("price", "Solve the configured problem and write the result record");
    auto* verify = app.add_subcommand("verify", "Run a verification suite");
    std::string suite;
    verify->add_option("suite", suite, "martingale | comparison | contraction | apriori | replication | crosscheck | identity")
        ->required();
    auto* simulate = app.add_subcommand("simulate", "Export the scenario batch as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        const mdbsde::RunConfig cfg = mdbsde::load_config(config_path, seed);
        mdbsde::RunResult result;
        std::string record_name = cfg.output.record;
        if (price->parsed()) {
            result = mdbsde::cmd_price(cfg, threads);
        } else if (verify->parsed()) {
            result = mdbsde::cmd_verify(suite, cfg, threads);
            record_name = "verify_" + suite + ".json";
        } else if (simulate->parsed()) {
            mdbsde::write_atomic(out_dir, cfg.output.batch_csv,
                                 [&](std::ostream& os) { result = mdbsde::cmd_simulate(cfg, threads, os); });
            record_name = "simulate.json";
        }
        for (const auto& [name, contents] : result.files)
            mdbsde::write_atomic(out_dir, name, [&](std::ostream& os) { os << contents; });
        mdbsde::write_atomic(out_dir, record_name, [&](std::ostream& os) { os << result.record << '\n'; });
        std::cout << result.record << '\n';
        return result.passed ? ok : verify_failed;
    } catch (const mdbsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const mdbsde::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return io_error;
    } catch (const mdbsde::ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return model_error;
    } catch (const mdbsde::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return model_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return model_error;
    }
}
