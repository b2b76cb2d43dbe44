#include "maccm/network_env.hpp"

#include <cmath>
#include <string>

namespace maccm {

EnvInstance EnvInstance::create(const EnvParams& params, Rng& rng) {
    check_dims(params.dims);
    if (!(params.c_min > 0.0 && params.c_min < 1.0)) {
        throw std::invalid_argument("c_min must lie in (0, 1)");
    }
    if (!(params.delta > 0.0) || !(params.Delta > 0.0)) {
        throw std::invalid_argument("delta and Delta must be positive");
    }
    EnvInstance env;
    env.params_ = params;
    const Dims& dims = params.dims;
    env.features_ = std::make_shared<const FeatureTable>(dims, params.delta);

    if (params.theta_signs) {
        env.theta_signs_ = *params.theta_signs;
    } else {
        env.theta_signs_.assign(static_cast<std::size_t>(dims.n), {});
        for (auto& pattern : env.theta_signs_) {
            for (int k = 0; k < dims.d - 1; ++k) pattern.push_back((rng() >> 63) ? 1 : -1);
        }
    }
    env.theta_star_ = theta_from_signs(dims, params.Delta, env.theta_signs_);

    const ThetaValidation check = validate_theta(env.theta_star_, *env.features_, params.clip_renormalize);
    if (!check.valid) {
        throw InvalidInstance("theta* does not define a valid transition kernel (delta=" +
                              std::to_string(params.delta) + ", Delta=" + std::to_string(params.Delta) +
                              ", n=" + std::to_string(dims.n) + "): " +
                              check.first_violation->describe(env.space()) +
                              "; enable clip_renormalize to clip negative mass");
    }
    env.kernel_ = std::make_shared<const TransitionKernel>(*env.features_, env.theta_star_,
                                                           params.clip_renormalize);

    const std::size_t pairs = env.space().num_pairs();
    env.private_costs_.resize(static_cast<std::size_t>(dims.n) * pairs);
    for (double& k : env.private_costs_) {
        k = params.c_min + (1.0 - params.c_min) * uniform_open01(rng);
    }
    return env;
}

EnvInstance new_instance(const EnvParams& params, Rng& rng) { return EnvInstance::create(params, rng); }

double EnvInstance::local_cost(std::size_t pair, int agent) const {
    return private_cost(agent, pair) * features_->psi(pair)[agent];
}

double EnvInstance::mean_cost(std::size_t pair) const {
    double total = 0.0;
    for (int i = 0; i < dims().n; ++i) total += local_cost(pair, i);
    return total / dims().n;
}

std::uint32_t EnvInstance::sample_next(std::size_t pair, Rng& rng) const {
    const Eigen::VectorXd& row = kernel_->row(pair);
    const double u = uniform01(rng);
    double cumulative = 0.0;
    std::uint32_t last_positive = 0;
    for (std::uint32_t sp = 0; sp < row.size(); ++sp) {
        if (row[sp] <= 0.0) continue;
        last_positive = sp;
        cumulative += row[sp];
        if (u < cumulative) return sp;
    }
    // Rounding left u above the final cumulative sum.
    return last_positive;
}

int congestion(const GlobalState& state, const JointAction& ja, int agent) {
    if (agent < 0 || agent >= state.size() || static_cast<int>(ja.size()) != state.size()) {
        throw std::out_of_range("congestion: agent index or joint action size");
    }
    if (state.at_goal(agent)) return 0;
    int count = 0;
    for (int j = 0; j < state.size(); ++j) {
        if (!state.at_goal(j) && ja[static_cast<std::size_t>(j)] == ja[static_cast<std::size_t>(agent)]) {
            ++count;
        }
    }
    return count;
}

double local_cost(const EnvInstance& env, const GlobalState& state, const JointAction& ja, int agent) {
    const auto& space = env.space();
    return env.local_cost(space.pair_index(state.index(), space.action_index(state, ja)), agent);
}

double mean_cost(const EnvInstance& env, const GlobalState& state, const JointAction& ja) {
    const auto& space = env.space();
    return env.mean_cost(space.pair_index(state.index(), space.action_index(state, ja)));
}

GlobalState step(const EnvInstance& env, const GlobalState& state, const JointAction& ja, Rng& rng) {
    const auto& space = env.space();
    const std::size_t pair = space.pair_index(state.index(), space.action_index(state, ja));
    const Eigen::VectorXd& row = env.true_kernel().row(pair);
    if (row.minCoeff() < -kNegativeMassTolerance || std::abs(row.sum() - 1.0) > kNormalizationTolerance) {
        throw std::logic_error("step: invalid transition distribution at " + to_string(state));
    }
    return GlobalState(state.size(), env.sample_next(pair, rng));
}

}  // namespace maccm
