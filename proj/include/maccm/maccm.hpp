#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "maccm/consensus_cost.hpp"
#include "maccm/maevi.hpp"
#include "maccm/network_env.hpp"

namespace maccm {

enum class BehaviorPolicy { MinMax, UniformRandom };

struct MaccmConfig {
    int K = 1;                ///< episodes
    double lambda = 1.0;
    double B = 1.0;
    double conf_delta = 0.1;  ///< δ in the confidence radius
    int step_cap = 0;         ///< 0 selects ⌈200 n / c_min⌉
    std::int64_t max_total_steps = 0;  ///< 0 = unlimited; the current episode is cut when reached
    double v_star = 0.0;      ///< regret baseline subtracted once per episode
    std::optional<ConsensusMatrix> mixing;  ///< defaults to uniform 1/n
    BehaviorPolicy policy = BehaviorPolicy::MinMax;
    bool learn_transitions = true;  ///< ridge updates, doubling checks and MAEVI
    /// Replace the sign grid with explicit parameters (e.g. {θ*}).
    std::optional<std::vector<ModelParams>> grid_override;
    /// Freeze every agent's cost parameters (no gradient step, no mixing).
    std::optional<CostParams> fixed_w;
    bool check_contraction = false;  ///< throw on a (1-q) decay violation
    bool check_optimism = false;     ///< compare MAEVI output with exact Q* under θ*
};

struct AgentRuntime {
    int epoch = 0;
    std::int64_t epoch_start = 0;  ///< t at the last MAEVI trigger
    RidgeState ridge;
    Eigen::MatrixXd sigma_anchor;
    double anchor_log_det = 0.0;
    std::optional<ConfidenceSet> confidence;
    ValueTables values;
    CostParams w;
    int evi_calls = 0;
};

struct EpisodeRecord {
    int episode = 0;
    int steps = 0;
    std::vector<double> est_costs;   ///< per-step mean over agents of ⟨ψ, w^i⟩
    std::vector<double> true_costs;  ///< per-step mean over agents of c^i
    double regret = 0.0;
    int evi_calls = 0;
    bool truncated = false;
};

struct MaccmDiagnostics {
    std::int64_t total_steps = 0;
    int total_evi_calls = 0;
    int epochs = 0;             ///< MAEVI calls (including no-update ones)
    int no_update_epochs = 0;
    int filter_hits = 0;        ///< epochs whose ellipsoid contained θ*
    int contraction_violations = 0;
    int optimism_checks = 0;
    int optimism_violations = 0;
    int optimism_skipped = 0;   ///< negative estimated costs: bound premise fails
    double worst_optimism_excess = -std::numeric_limits<double>::infinity();
    std::int64_t maevi_iterations = 0;
    double budget = 0.0;
};

struct MaccmResult {
    std::vector<EpisodeRecord> episodes;
    std::vector<AgentRuntime> agents;
    MaccmDiagnostics diagnostics;
    std::vector<std::int64_t> visits;  ///< per-pair visitation counts
};

class CallBudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// argmin over own moves of the max over the other travelling agents'
/// moves of Q(s, a); ties go to the smallest sign vector.
AgentAction select_action(const ValueTables& values, const StateActionSpace& space, const GlobalState& state,
                          int agent);

/// log det Σ ≥ log det Σ_anchor + log 2, or t ≥ 2 t_j.
bool doubling_check(const AgentRuntime& rt, std::int64_t t);

double episode_regret(const std::vector<double>& step_costs, double v_star);

double call_budget(std::int64_t T, int n, int d, double B, double lambda);
bool assert_call_budget(int J, std::int64_t T, int n, int d, double B, double lambda);

int default_step_cap(int n, double c_min);

/// Runs K episodes. RNG order per step: behavior draws (uniform policy only,
/// agent order), then one transition draw.
MaccmResult run(const EnvInstance& env, const MaccmConfig& config, Rng& rng);

}  // namespace maccm
