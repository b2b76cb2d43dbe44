#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maccm/types.hpp"

namespace maccm {

/// Transition-model parameter θ of length n·d. Block i holds agent i's
/// (d-1) sign-scaled entries followed by the block-final mixture weight.
struct ModelParams {
    Eigen::VectorXd theta;
};

/// Per-agent congestion features ψ(s, a): entry i counts the agents at the
/// source that chose the same move as agent i (including i), 0 at goal.
struct CostFeature {
    Eigen::VectorXd psi;
};

/// Agent-wise feature φ(s'|s,a) as written for the two-node network: the
/// concatenation of per-agent blocks, with the two special all-goal rows.
/// Under this feature an agent at goal can drift back to the source when
/// some other agent is still travelling.
Eigen::VectorXd agentwise_transition_feature(const GlobalState& next, const GlobalState& state,
                                             const JointAction& ja, const Dims& dims, double delta);

/// Absorbing feature used by the environment and the learner: the
/// agent-wise feature with every successor in which an at-goal agent returns
/// to the source folded onto the successor where it stays at goal. Zero for
/// successors that move an at-goal agent. Still linear in θ, so the model
/// remains a linear mixture and Σ_{s'} φ is unchanged.
Eigen::VectorXd transition_feature(const GlobalState& next, const GlobalState& state,
                                   const JointAction& ja, const Dims& dims, double delta);

CostFeature cost_feature(const GlobalState& state, const JointAction& ja, const Dims& dims);

double transition_prob(const ModelParams& theta, const GlobalState& state, const JointAction& ja,
                       const GlobalState& next, const Dims& dims, double delta);

/// Precomputed features for every (state, joint action) pair: an nd × |S|
/// matrix whose column s' is φ(s'|s,a), plus ψ(s,a).
class FeatureTable {
public:
    FeatureTable(Dims dims, double delta);

    const StateActionSpace& space() const { return space_; }
    const Dims& dims() const { return space_.dims(); }
    double delta() const { return delta_; }

    const Eigen::MatrixXd& phi(std::size_t pair) const { return phi_[pair]; }
    const Eigen::VectorXd& psi(std::size_t pair) const { return psi_[pair]; }

    /// φ_V(s,a) = Σ_{s'} φ(s'|s,a) V(s').
    Eigen::VectorXd phi_v(std::size_t pair, const Eigen::VectorXd& values) const {
        return phi_[pair] * values;
    }

private:
    StateActionSpace space_;
    double delta_;
    std::vector<Eigen::MatrixXd> phi_;
    std::vector<Eigen::VectorXd> psi_;
};

Eigen::VectorXd phi_v(const FeatureTable& features, const GlobalState& state, const JointAction& ja,
                      const Eigen::VectorXd& values);

struct ThetaViolation {
    std::uint32_t state = 0;
    std::size_t action = 0;
    std::uint32_t next = 0;  // meaningful when kind == NegativeMass / GoalNotAbsorbing
    double value = 0.0;
    enum class Kind { NegativeMass, NotNormalized, GoalNotAbsorbing } kind = Kind::NegativeMass;

    std::string describe(const StateActionSpace& space) const;
};

struct ThetaValidation {
    bool valid = true;
    std::optional<ThetaViolation> first_violation;
};

inline constexpr double kNegativeMassTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-9;

/// Membership in the valid-parameter set: every row ⟨φ(·|s,a), θ⟩ is a
/// distribution (entries ≥ -1e-12, total within 1e-9 of 1) and the all-goal
/// state is absorbing. With `allow_negative_mass` the nonnegativity test is
/// skipped (used when the kernel is later clipped and renormalized).
ThetaValidation validate_theta(const ModelParams& theta, const FeatureTable& features,
                               bool allow_negative_mass = false);

/// All 2^{n(d-1)} sign patterns θ^i ∈ {±Δ/(n(d-1))}^{d-1}, each block
/// terminated by 1/2^{n-1}. Ordered lexicographically by sign pattern
/// (agent 0, component 0 most significant; -1 before +1).
std::vector<ModelParams> enumerate_theta_grid(const Dims& dims, double Delta);

/// Grid parameter with the given per-agent sign patterns.
ModelParams theta_from_signs(const Dims& dims, double Delta, const std::vector<std::vector<int>>& signs);

/// Transition kernel of one θ over every pair: row p is the distribution
/// over successor states. In clip mode negative entries are zeroed and each
/// row renormalized.
class TransitionKernel {
public:
    TransitionKernel(const FeatureTable& features, const ModelParams& theta, bool clip_renormalize);

    const Eigen::VectorXd& row(std::size_t pair) const { return rows_[pair]; }
    std::size_t num_pairs() const { return rows_.size(); }

private:
    std::vector<Eigen::VectorXd> rows_;
};

/// Ridge-regression statistics Σ = λI + Σ φφᵀ and b = Σ φ·v.
struct RidgeState {
    Eigen::MatrixXd sigma;
    Eigen::VectorXd b;
    double lambda = 1.0;
    std::int64_t t_last_reset = 0;

    static RidgeState init(int dim, double lambda);
    double log_det() const;
};

RidgeState ridge_update(RidgeState state, const Eigen::VectorXd& phi_v, double v_next);

/// θ̂ = Σ⁻¹ b via a Cholesky solve. Throws if Σ has condition number > 1e12.
Eigen::VectorXd theta_hat(const RidgeState& state);

double beta_radius(double t, double B, int n, int d, double lambda, double delta_conf);

/// Ellipsoid {θ : ‖Σ^{1/2}(θ - θ̂)‖₂ ≤ β} anchored at the epoch-start Σ.
class ConfidenceSet {
public:
    ConfidenceSet(Eigen::VectorXd theta_hat, const Eigen::MatrixXd& sigma_anchor, double beta);

    const Eigen::VectorXd& theta_hat() const { return theta_hat_; }
    const Eigen::MatrixXd& sigma_anchor() const { return sigma_; }
    double beta() const { return beta_; }

    /// ‖Σ^{1/2}(θ - θ̂)‖₂ computed as ‖Lᵀ(θ - θ̂)‖₂ with Σ = LLᵀ.
    double weighted_distance(const Eigen::VectorXd& theta) const;
    bool contains(const Eigen::VectorXd& theta) const { return weighted_distance(theta) <= beta_; }

private:
    Eigen::VectorXd theta_hat_;
    Eigen::MatrixXd sigma_;
    Eigen::MatrixXd chol_upper_;  // Lᵀ
    double beta_;
};

inline bool in_ellipsoid(const ModelParams& theta, const ConfidenceSet& cs) {
    return cs.contains(theta.theta);
}

}  // namespace maccm
