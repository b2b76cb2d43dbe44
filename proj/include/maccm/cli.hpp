#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maccm/maccm.hpp"
#include "maccm/oracle.hpp"

namespace maccm {

enum class RegretBaseline { ExactVI, Departure };
enum class OracleCosts { Alpha, Realized };

struct ExperimentConfig {
    int n = 1;
    int d = 2;
    double delta = 0.2;
    double Delta = 0.1;
    double c_min = 0.5;
    int K = 100;
    double lambda = 1.0;
    double B = 0.0;  ///< 0 = auto (2 × V*_T, at least 1)
    double conf_delta = 0.1;
    std::uint64_t seed = 1;
    int runs = 1;
    int step_cap = 0;  ///< 0 = auto
    int oracle_T_max = 0;  ///< 0 = auto tail
    bool clip_renormalize = false;
    std::optional<std::vector<std::vector<int>>> theta_star_signs;
    std::string output = "out";
    RegretBaseline regret_baseline = RegretBaseline::ExactVI;
    OracleCosts oracle_costs = OracleCosts::Alpha;
    std::string mixing_matrix;  ///< path; empty = uniform
    double kappa = 1e-3;
    BehaviorPolicy policy = BehaviorPolicy::MinMax;
    std::int64_t total_steps = 0;  ///< 0 = unlimited
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Process environment lookup for MACCM_<key> overrides.
EnvLookup process_environment();

/// Parses `key = value` lines (`#` starts a comment). Values from `lookup`
/// ("MACCM_" + key) override the text. Throws ConfigError naming the key.
ExperimentConfig parse_config(const std::string& source, const EnvLookup& lookup = {});
ExperimentConfig load_config(const std::string& path, const EnvLookup& lookup = {});

/// Theta sign patterns such as "+-,--" (one group per agent).
std::vector<std::vector<int>> parse_theta_signs(const std::string& text, int n, int d);

EnvParams env_params(const ExperimentConfig& config);

/// Structural checks beyond parsing: every grid parameter (or the pinned θ*)
/// must define a valid kernel unless clipping is on. Throws ConfigError.
void validate_instance_constraints(const ExperimentConfig& config);

struct OracleSummary {
    ValueEstimate departure;  ///< V*_T
    double B = 1.0;           ///< resolved input bound
};

OracleSummary compute_oracle(const ExperimentConfig& config);

struct RunOutcome {
    std::uint64_t seed = 0;
    double v_star = 0.0;       ///< baseline used for regret
    double v_star_exact = 0.0; ///< exact value-iteration V*(s_init)
    MaccmResult result;
};

struct ExperimentOutcome {
    OracleSummary oracle;
    std::vector<RunOutcome> runs;
};

MaccmConfig maccm_config(const ExperimentConfig& config, double B, double v_star);

/// One seeded run: instance construction and simulation share one stream.
RunOutcome run_single(const ExperimentConfig& config, const OracleSummary& oracle, std::uint64_t seed,
                      bool test_mode = false);

/// Runs `config.runs` seeds (seed, seed+1, ...) in parallel.
ExperimentOutcome run_experiment(const ExperimentConfig& config, bool test_mode = false);

std::string format_number(double value);
std::string episode_csv(const RunOutcome& run);
std::string aggregate_csv(const ExperimentOutcome& outcome);
std::string summary_text(const ExperimentConfig& config, const ExperimentOutcome& outcome);
std::string departure_table(const ExperimentConfig& config, const OracleSummary& oracle, int max_rows);

/// Writes run_<seed>.csv, aggregate.csv and summary.txt into `dir`.
void write_outputs(const std::string& dir, const ExperimentConfig& config, const ExperimentOutcome& outcome);
/// Writes oracle.txt and departures.csv into `dir`.
void write_oracle_outputs(const std::string& dir, const ExperimentConfig& config, const OracleSummary& oracle);

}  // namespace maccm
