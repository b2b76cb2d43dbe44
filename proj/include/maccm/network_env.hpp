#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "maccm/linear_model.hpp"
#include "maccm/rng.hpp"
#include "maccm/types.hpp"

namespace maccm {

struct EnvParams {
    Dims dims;
    double delta = 0.2;
    double Delta = 0.1;
    double c_min = 0.5;
    bool clip_renormalize = false;
    /// Per-agent θ sign patterns; drawn uniformly from the grid when absent.
    std::optional<std::vector<std::vector<int>>> theta_signs;
};

class InvalidInstance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The multi-agent congestion MDP on the two-node network. Immutable after
/// construction.
class EnvInstance {
public:
    /// Draws θ* signs (unless supplied) and then one private cost
    /// K^i(s,a) ~ Uniform(c_min, 1) per (agent, pair) in agent-major, pair
    /// order. Throws InvalidInstance when θ* fails validation in strict mode.
    static EnvInstance create(const EnvParams& params, Rng& rng);

    const EnvParams& params() const { return params_; }
    const Dims& dims() const { return params_.dims; }
    const FeatureTable& features() const { return *features_; }
    std::shared_ptr<const FeatureTable> shared_features() const { return features_; }
    const StateActionSpace& space() const { return features_->space(); }
    const ModelParams& theta_star() const { return theta_star_; }
    const std::vector<std::vector<int>>& theta_star_signs() const { return theta_signs_; }
    const TransitionKernel& true_kernel() const { return *kernel_; }

    double private_cost(int agent, std::size_t pair) const {
        return private_costs_[static_cast<std::size_t>(agent) * space().num_pairs() + pair];
    }

    /// Per-agent true costs c^i(s,a) and their mean, for one pair.
    double local_cost(std::size_t pair, int agent) const;
    double mean_cost(std::size_t pair) const;

    /// Next state drawn from the true kernel row of `pair` using one uniform.
    std::uint32_t sample_next(std::size_t pair, Rng& rng) const;

private:
    EnvInstance() = default;

    EnvParams params_;
    std::shared_ptr<const FeatureTable> features_;
    ModelParams theta_star_;
    std::vector<std::vector<int>> theta_signs_;
    std::shared_ptr<const TransitionKernel> kernel_;
    std::vector<double> private_costs_;
};

EnvInstance new_instance(const EnvParams& params, Rng& rng);

/// Agents at the source that chose the same move as `agent` (including
/// itself); 0 when the agent is at goal. Agents at goal never count.
int congestion(const GlobalState& state, const JointAction& ja, int agent);

double local_cost(const EnvInstance& env, const GlobalState& state, const JointAction& ja, int agent);
double mean_cost(const EnvInstance& env, const GlobalState& state, const JointAction& ja);

GlobalState step(const EnvInstance& env, const GlobalState& state, const JointAction& ja, Rng& rng);

}  // namespace maccm
