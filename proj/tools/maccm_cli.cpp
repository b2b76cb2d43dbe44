// maccm command-line front end: run experiments or validate a config.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "maccm/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Decentralized multi-agent congestion cost minimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<std::string> out_dir;
    bool oracle_only = false;

    auto* run = app.add_subcommand("run", "run seeded experiments and write CSVs");
    run->add_option("--config", config_path, "key = value config file")->required();
    run->add_option("--seed", seed, "base seed (overrides config)");
    run->add_option("--runs", runs, "number of seeds (overrides config)");
    run->add_option("--out", out_dir, "output directory (overrides config)");
    run->add_flag("--oracle-only", oracle_only, "write V*_T and departure tables only");

    auto* validate = app.add_subcommand("validate", "check a config and its transition model");
    validate->add_option("--config", config_path, "key = value config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        maccm::ExperimentConfig config = maccm::load_config(config_path, maccm::process_environment());
        if (seed) config.seed = *seed;
        if (runs) {
            if (*runs < 1) throw maccm::ConfigError("runs: must satisfy runs >= 1");
            config.runs = *runs;
        }
        if (out_dir) config.output = *out_dir;

        if (*validate) {
            const auto oracle = maccm::compute_oracle(config);
            std::cout << "config ok: n=" << config.n << " d=" << config.d
                      << " v_star_T=" << maccm::format_number(oracle.departure.value)
                      << " B=" << maccm::format_number(oracle.B) << '\n';
            return 0;
        }
        if (oracle_only) {
            const auto oracle = maccm::compute_oracle(config);
            maccm::write_oracle_outputs(config.output, config, oracle);
            std::cout << "v_star_T = " << maccm::format_number(oracle.departure.value) << " (mass "
                      << maccm::format_number(oracle.departure.mass) << ")\n";
            return 0;
        }
        const auto outcome = maccm::run_experiment(config);
        maccm::write_outputs(config.output, config, outcome);
        std::cout << maccm::summary_text(config, outcome);
        return 0;
    } catch (const maccm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
