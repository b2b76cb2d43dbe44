#include "maccm/linear_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace maccm {

namespace {

void check_consistent(const GlobalState& next, const GlobalState& state, const JointAction& ja,
                      const Dims& dims) {
    if (state.size() != dims.n || next.size() != dims.n || static_cast<int>(ja.size()) != dims.n) {
        throw std::invalid_argument("transition feature: dimension mismatch");
    }
}

void add_agent_block(Eigen::VectorXd& out, int agent, bool from_goal, bool to_goal,
                     const AgentAction& action, const Dims& dims, double delta, double scale) {
    const int base = agent * dims.d;
    const double inv_n = 1.0 / dims.n;
    if (!from_goal) {
        const double sign_scale = to_goal ? 1.0 : -1.0;
        for (int k = 0; k < dims.d - 1; ++k) {
            out[base + k] += scale * sign_scale * action.sign(k, dims.d);
        }
        out[base + dims.d - 1] += scale * (to_goal ? delta : 1.0 - delta) * inv_n;
    } else if (to_goal) {
        out[base + dims.d - 1] += scale * inv_n;
    }
}

}  // namespace

Eigen::VectorXd agentwise_transition_feature(const GlobalState& next, const GlobalState& state,
                                             const JointAction& ja, const Dims& dims, double delta) {
    check_consistent(next, state, ja, dims);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dims.feature_dim());
    if (state.is_goal()) {
        if (next.is_goal()) out[dims.feature_dim() - 1] = std::ldexp(1.0, dims.n - 1);
        return out;
    }
    for (int i = 0; i < dims.n; ++i) {
        add_agent_block(out, i, state.at_goal(i), next.at_goal(i), ja[static_cast<std::size_t>(i)],
                        dims, delta, 1.0);
    }
    return out;
}

Eigen::VectorXd transition_feature(const GlobalState& next, const GlobalState& state,
                                   const JointAction& ja, const Dims& dims, double delta) {
    check_consistent(next, state, ja, dims);
    if (state.is_goal()) return agentwise_transition_feature(next, state, ja, dims, delta);
    const std::uint32_t goal_mask = state.index();
    if ((next.index() & goal_mask) != goal_mask) {
        return Eigen::VectorXd::Zero(dims.feature_dim());
    }
    // Sum the agent-wise feature over every pattern of at-goal agents
    // returning to the source.
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dims.feature_dim());
    std::uint32_t sub = goal_mask;
    while (true) {
        const GlobalState preimage(dims.n, next.index() & ~sub);
        out += agentwise_transition_feature(preimage, state, ja, dims, delta);
        if (sub == 0) break;
        sub = (sub - 1) & goal_mask;
    }
    return out;
}

CostFeature cost_feature(const GlobalState& state, const JointAction& ja, const Dims& dims) {
    if (state.size() != dims.n || static_cast<int>(ja.size()) != dims.n) {
        throw std::invalid_argument("cost_feature: dimension mismatch");
    }
    CostFeature f{Eigen::VectorXd::Zero(dims.n)};
    for (int i = 0; i < dims.n; ++i) {
        if (state.at_goal(i)) continue;
        int count = 0;
        for (int j = 0; j < dims.n; ++j) {
            if (!state.at_goal(j) && ja[static_cast<std::size_t>(j)] == ja[static_cast<std::size_t>(i)]) {
                ++count;
            }
        }
        f.psi[i] = count;
    }
    return f;
}

double transition_prob(const ModelParams& theta, const GlobalState& state, const JointAction& ja,
                       const GlobalState& next, const Dims& dims, double delta) {
    if (theta.theta.size() != dims.feature_dim()) {
        throw std::invalid_argument("transition_prob: theta has wrong length");
    }
    return transition_feature(next, state, ja, dims, delta).dot(theta.theta);
}

FeatureTable::FeatureTable(Dims dims, double delta) : space_(dims), delta_(delta) {
    const std::size_t pairs = space_.num_pairs();
    const std::size_t states = space_.num_states();
    phi_.resize(pairs);
    psi_.resize(pairs);
    for (std::uint32_t s = 0; s < states; ++s) {
        const GlobalState state(dims.n, s);
        for (std::size_t k = 0; k < space_.num_actions(s); ++k) {
            const std::size_t p = space_.pair_index(s, k);
            const JointAction ja = space_.joint_action(s, k);
            Eigen::MatrixXd m(dims.feature_dim(), static_cast<Eigen::Index>(states));
            for (std::uint32_t sp = 0; sp < states; ++sp) {
                m.col(sp) = transition_feature(GlobalState(dims.n, sp), state, ja, dims, delta);
            }
            phi_[p] = std::move(m);
            psi_[p] = cost_feature(state, ja, dims).psi;
        }
    }
}

Eigen::VectorXd phi_v(const FeatureTable& features, const GlobalState& state, const JointAction& ja,
                      const Eigen::VectorXd& values) {
    const auto& space = features.space();
    if (values.size() != static_cast<Eigen::Index>(space.num_states())) {
        throw std::invalid_argument("phi_v: value table must cover every state");
    }
    return features.phi_v(space.pair_index(state.index(), space.action_index(state, ja)), values);
}

std::string ThetaViolation::describe(const StateActionSpace& space) const {
    std::ostringstream os;
    const int n = space.dims().n;
    os << "s=" << to_string(GlobalState(n, state))
       << " a=" << to_string(space.joint_action(state, action), space.dims().d);
    switch (kind) {
        case Kind::NegativeMass:
            os << " s'=" << to_string(GlobalState(n, next)) << ": negative transition mass " << value;
            break;
        case Kind::NotNormalized:
            os << ": transition row sums to " << value;
            break;
        case Kind::GoalNotAbsorbing:
            os << " s'=" << to_string(GlobalState(n, next)) << ": goal row entry " << value;
            break;
    }
    return os.str();
}

ThetaValidation validate_theta(const ModelParams& theta, const FeatureTable& features,
                               bool allow_negative_mass) {
    const auto& space = features.space();
    if (theta.theta.size() != features.dims().feature_dim()) {
        throw std::invalid_argument("validate_theta: theta has wrong length");
    }
    const std::uint32_t goal = static_cast<std::uint32_t>(space.num_states() - 1);
    auto fail = [](ThetaViolation v) { return ThetaValidation{false, v}; };
    for (std::uint32_t s = 0; s < space.num_states(); ++s) {
        for (std::size_t k = 0; k < space.num_actions(s); ++k) {
            const Eigen::VectorXd row = features.phi(space.pair_index(s, k)).transpose() * theta.theta;
            for (std::uint32_t sp = 0; sp < row.size(); ++sp) {
                if (!allow_negative_mass && row[sp] < -kNegativeMassTolerance) {
                    return fail({s, k, sp, row[sp], ThetaViolation::Kind::NegativeMass});
                }
            }
            const double total = row.sum();
            if (std::abs(total - 1.0) > kNormalizationTolerance) {
                return fail({s, k, 0, total, ThetaViolation::Kind::NotNormalized});
            }
            if (s == goal) {
                for (std::uint32_t sp = 0; sp < row.size(); ++sp) {
                    const double expected = sp == goal ? 1.0 : 0.0;
                    if (std::abs(row[sp] - expected) > kNormalizationTolerance) {
                        return fail({s, k, sp, row[sp], ThetaViolation::Kind::GoalNotAbsorbing});
                    }
                }
            }
        }
    }
    return {};
}

ModelParams theta_from_signs(const Dims& dims, double Delta, const std::vector<std::vector<int>>& signs) {
    if (static_cast<int>(signs.size()) != dims.n) {
        throw std::invalid_argument("theta_from_signs: need one sign pattern per agent");
    }
    const double magnitude = Delta / (dims.n * (dims.d - 1));
    const double block_final = std::ldexp(1.0, -(dims.n - 1));
    ModelParams p{Eigen::VectorXd::Zero(dims.feature_dim())};
    for (int i = 0; i < dims.n; ++i) {
        const auto& pattern = signs[static_cast<std::size_t>(i)];
        if (static_cast<int>(pattern.size()) != dims.d - 1) {
            throw std::invalid_argument("theta_from_signs: sign pattern must have length d-1");
        }
        for (int k = 0; k < dims.d - 1; ++k) {
            const int sg = pattern[static_cast<std::size_t>(k)];
            if (sg != 1 && sg != -1) throw std::invalid_argument("theta_from_signs: signs must be +-1");
            p.theta[i * dims.d + k] = sg * magnitude;
        }
        p.theta[i * dims.d + dims.d - 1] = block_final;
    }
    return p;
}

std::vector<ModelParams> enumerate_theta_grid(const Dims& dims, double Delta) {
    check_dims(dims);
    const int bits = dims.n * (dims.d - 1);
    if (bits > 24) {
        throw std::invalid_argument("enumerate_theta_grid: n(d-1) = " + std::to_string(bits) +
                                    " exceeds the grid limit of 24");
    }
    std::vector<ModelParams> grid;
    grid.reserve(std::size_t{1} << bits);
    for (std::uint32_t code = 0; code < (1u << bits); ++code) {
        std::vector<std::vector<int>> signs(static_cast<std::size_t>(dims.n));
        int bit = bits - 1;
        for (int i = 0; i < dims.n; ++i) {
            for (int k = 0; k < dims.d - 1; ++k, --bit) {
                signs[static_cast<std::size_t>(i)].push_back(((code >> bit) & 1u) ? 1 : -1);
            }
        }
        grid.push_back(theta_from_signs(dims, Delta, signs));
    }
    return grid;
}

TransitionKernel::TransitionKernel(const FeatureTable& features, const ModelParams& theta,
                                   bool clip_renormalize) {
    const std::size_t pairs = features.space().num_pairs();
    rows_.resize(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        Eigen::VectorXd row = features.phi(p).transpose() * theta.theta;
        if (clip_renormalize) {
            row = row.cwiseMax(0.0);
            const double total = row.sum();
            if (total <= 0.0) throw std::runtime_error("TransitionKernel: row has no positive mass");
            row /= total;
        }
        rows_[p] = std::move(row);
    }
}

RidgeState RidgeState::init(int dim, double lambda) {
    if (lambda <= 0.0) throw std::invalid_argument("ridge regularization must be positive");
    RidgeState r;
    r.sigma = lambda * Eigen::MatrixXd::Identity(dim, dim);
    r.b = Eigen::VectorXd::Zero(dim);
    r.lambda = lambda;
    return r;
}

double RidgeState::log_det() const {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw std::runtime_error("ridge Sigma is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

RidgeState ridge_update(RidgeState state, const Eigen::VectorXd& phi_v, double v_next) {
    if (phi_v.size() != state.b.size()) throw std::invalid_argument("ridge_update: dimension mismatch");
    state.sigma.noalias() += phi_v * phi_v.transpose();
    state.b += phi_v * v_next;
    return state;
}

Eigen::VectorXd theta_hat(const RidgeState& state) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(state.sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12) {
        throw std::runtime_error("theta_hat: Sigma is numerically singular");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(state.sigma);
    return llt.solve(state.b);
}

double beta_radius(double t, double B, int n, int d, double lambda, double delta_conf) {
    if (t < 1 || B < 1 || lambda < 1 || delta_conf <= 0 || delta_conf >= 1) {
        throw std::invalid_argument("beta_radius: requires t>=1, B>=1, lambda>=1, 0<delta<1");
    }
    const double nd = static_cast<double>(n) * d;
    const double inner = (4.0 / delta_conf) * (n * t * t + n * t * t * t * B * B / lambda);
    return B * std::sqrt(nd * std::log(inner)) + std::sqrt(lambda * nd);
}

ConfidenceSet::ConfidenceSet(Eigen::VectorXd theta_hat, const Eigen::MatrixXd& sigma_anchor, double beta)
    : theta_hat_(std::move(theta_hat)), sigma_(sigma_anchor), beta_(beta) {
    if (!(beta_ > 0.0)) throw std::invalid_argument("ConfidenceSet: beta must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("ConfidenceSet: anchor Sigma must be positive definite");
    }
    chol_upper_ = llt.matrixU();
}

double ConfidenceSet::weighted_distance(const Eigen::VectorXd& theta) const {
    return (chol_upper_ * (theta - theta_hat_)).norm();
}

}  // namespace maccm
