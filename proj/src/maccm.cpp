#include "maccm/maccm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "maccm/oracle.hpp"

namespace maccm {

AgentAction select_action(const ValueTables& values, const StateActionSpace& space, const GlobalState& state,
                          int agent) {
    if (state.at_goal(agent)) return AgentAction::stay_at_goal();
    const std::uint32_t s = state.index();
    const int moves = space.dims().moves_per_agent();
    std::vector<double> worst(static_cast<std::size_t>(moves), -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < space.num_actions(s); ++k) {
        const std::uint32_t own = space.agent_move(s, k, agent);
        const double qv = values.q[static_cast<Eigen::Index>(space.pair_index(s, k))];
        worst[own] = std::max(worst[own], qv);
    }
    std::uint32_t best = 0;
    for (std::uint32_t m = 1; m < static_cast<std::uint32_t>(moves); ++m) {
        if (worst[m] < worst[best]) best = m;
    }
    return AgentAction::move(best);
}

bool doubling_check(const AgentRuntime& rt, std::int64_t t) {
    if (t < 1) throw std::invalid_argument("doubling_check: t must be >= 1");
    if (t >= 2 * rt.epoch_start) return true;
    return rt.ridge.log_det() >= rt.anchor_log_det + std::log(2.0);
}

double episode_regret(const std::vector<double>& step_costs, double v_star) {
    if (v_star < 0.0) throw std::invalid_argument("episode_regret: v_star must be nonnegative");
    double total = 0.0;
    for (double c : step_costs) total += c;
    return total - v_star;
}

double call_budget(std::int64_t T, int n, int d, double B, double lambda) {
    if (T < 1) throw std::invalid_argument("call_budget: T must be >= 1");
    const double nd = static_cast<double>(n) * d;
    const double td = static_cast<double>(T);
    return 2.0 * n * n * d * std::log(1.0 + td * B * B * nd / lambda) + 2.0 * n * std::log(td);
}

bool assert_call_budget(int J, std::int64_t T, int n, int d, double B, double lambda) {
    return J <= call_budget(T, n, d, B, lambda);
}

int default_step_cap(int n, double c_min) { return static_cast<int>(std::ceil(200.0 * n / c_min)); }

namespace {

Eigen::VectorXd clipped(const Eigen::VectorXd& v, double B) { return v.cwiseMax(0.0).cwiseMin(B); }

class Runner {
public:
    Runner(const EnvInstance& env, const MaccmConfig& config, Rng& rng)
        : env_(env),
          config_(config),
          rng_(rng),
          dims_(env.dims()),
          space_(env.space()),
          features_(env.features()),
          mixing_(config.mixing ? *config.mixing : uniform_consensus_matrix(env.dims().n)),
          grid_(config.grid_override
                    ? CandidateGrid(env.shared_features(), *config.grid_override, env.params().clip_renormalize)
                    : CandidateGrid(env.shared_features(), env.params().Delta, env.params().clip_renormalize)),
          theta_star_index_(grid_.find(env.theta_star())),
          step_cap_(config.step_cap > 0 ? config.step_cap : default_step_cap(dims_.n, env.params().c_min)) {
        if (config.K < 1) throw std::invalid_argument("run: K must be >= 1");
        if (mixing_.size() != dims_.n) throw std::invalid_argument("run: mixing matrix size must equal n");
        const int k = dims_.feature_dim();
        agents_.resize(static_cast<std::size_t>(dims_.n));
        for (auto& rt : agents_) {
            rt.ridge = RidgeState::init(k, config.lambda);
            rt.sigma_anchor = rt.ridge.sigma;
            rt.anchor_log_det = rt.ridge.log_det();
            rt.values = initial_value_tables(space_, 1.0);
            rt.w = config.fixed_w ? *config.fixed_w : CostParams{Eigen::VectorXd::Zero(dims_.n)};
            if (rt.w.w.size() != dims_.n) throw std::invalid_argument("run: fixed_w must have length n");
        }
        result_.visits.assign(space_.num_pairs(), 0);
    }

    MaccmResult execute() {
        for (int e = 0; e < config_.K && !out_of_steps(); ++e) run_episode(e);
        result_.agents = std::move(agents_);
        result_.diagnostics.total_steps = t_ - 1;
        if (t_ > 1) {
            result_.diagnostics.budget =
                call_budget(t_ - 1, dims_.n, dims_.d, config_.B, config_.lambda);
        }
        return std::move(result_);
    }

private:
    bool out_of_steps() const { return config_.max_total_steps > 0 && t_ > config_.max_total_steps; }

    JointAction choose(const GlobalState& state) {
        JointAction ja;
        ja.reserve(static_cast<std::size_t>(dims_.n));
        const auto moves = static_cast<double>(dims_.moves_per_agent());
        for (int i = 0; i < dims_.n; ++i) {
            if (state.at_goal(i)) {
                ja.push_back(AgentAction::stay_at_goal());
            } else if (config_.policy == BehaviorPolicy::UniformRandom) {
                ja.push_back(AgentAction::move(static_cast<std::uint32_t>(uniform01(rng_) * moves)));
            } else {
                ja.push_back(select_action(agents_[static_cast<std::size_t>(i)].values, space_, state, i));
            }
        }
        return ja;
    }

    void run_episode(int index) {
        EpisodeRecord record;
        record.episode = index + 1;
        GlobalState state = GlobalState::initial(dims_.n);
        while (!state.is_goal()) {
            if (record.steps >= step_cap_ || out_of_steps()) {
                record.truncated = true;
                break;
            }
            record.evi_calls += do_step(state, record);
            ++record.steps;
        }
        record.regret = episode_regret(record.est_costs, config_.v_star);
        result_.diagnostics.total_evi_calls += record.evi_calls;
        if (t_ > 1 && !assert_call_budget(result_.diagnostics.total_evi_calls, t_ - 1, dims_.n, dims_.d,
                                          config_.B, config_.lambda)) {
            throw CallBudgetExceeded(
                "MAEVI call budget exceeded: J=" + std::to_string(result_.diagnostics.total_evi_calls) +
                " > " + std::to_string(call_budget(t_ - 1, dims_.n, dims_.d, config_.B, config_.lambda)) +
                " at T=" + std::to_string(t_ - 1));
        }
        result_.episodes.push_back(std::move(record));
    }

    int do_step(GlobalState& state, EpisodeRecord& record) {
        const JointAction ja = choose(state);
        const std::size_t pair = space_.pair_index(state.index(), space_.action_index(state, ja));
        const Eigen::VectorXd& psi = features_.psi(pair);
        ++result_.visits[pair];

        double est = 0.0;
        for (const auto& rt : agents_) est += psi.dot(rt.w.w);
        record.est_costs.push_back(est / dims_.n);
        record.true_costs.push_back(env_.mean_cost(pair));

        const std::uint32_t next = env_.sample_next(pair, rng_);

        std::vector<CostParams> tilde;
        if (!config_.fixed_w) {
            const double gamma = 1.0 / static_cast<double>(t_ + 1);
            tilde.reserve(agents_.size());
            for (int i = 0; i < dims_.n; ++i) {
                tilde.push_back(local_gradient_step(agents_[static_cast<std::size_t>(i)].w, CostFeature{psi},
                                                    env_.local_cost(pair, i), gamma));
            }
        }

        int calls = 0;
        if (config_.learn_transitions) {
            for (auto& rt : agents_) {
                const Eigen::VectorXd v = clipped(rt.values.v, config_.B);
                rt.ridge = ridge_update(std::move(rt.ridge), features_.phi_v(pair, v), v[next]);
            }
            for (auto& rt : agents_) {
                if (doubling_check(rt, t_)) {
                    trigger(rt);
                    ++calls;
                }
            }
        }

        if (!config_.fixed_w) {
            std::vector<CostParams> mixed = mix(tilde, mixing_);
            for (int i = 0; i < dims_.n; ++i) agents_[static_cast<std::size_t>(i)].w = std::move(mixed[static_cast<std::size_t>(i)]);
        }
        state = GlobalState(dims_.n, next);
        ++t_;
        return calls;
    }

    void trigger(AgentRuntime& rt) {
        auto& diag = result_.diagnostics;
        ++rt.epoch;
        ++rt.evi_calls;
        ++diag.epochs;
        rt.epoch_start = t_;
        rt.sigma_anchor = rt.ridge.sigma;
        rt.anchor_log_det = rt.ridge.log_det();
        const double td = static_cast<double>(t_);
        const double epsilon = 1.0 / td;
        const double q = 1.0 / td;
        const double beta = beta_radius(td, config_.B, dims_.n, dims_.d, config_.lambda, config_.conf_delta);
        rt.confidence.emplace(theta_hat(rt.ridge), rt.sigma_anchor, beta);

        MaeviOptions options;
        options.B = config_.B;
        options.t = td;
        options.check_contraction = config_.check_contraction;
        const MaeviResult out = run_maevi(*rt.confidence, grid_, epsilon, q, rt.w, options);
        if (!out.contraction_held) ++diag.contraction_violations;
        diag.maevi_iterations += out.iterations;
        if (!out.updated) {
            ++diag.no_update_epochs;
            return;
        }
        rt.values.q = out.tables.q;
        rt.values.v = out.tables.v;

        const bool hit = std::find(out.candidate_indices.begin(), out.candidate_indices.end(),
                                   theta_star_index_) != out.candidate_indices.end();
        if (hit) ++diag.filter_hits;
        if (config_.check_optimism && hit) check_optimism(rt, epsilon / q);
    }

    void check_optimism(const AgentRuntime& rt, double slack) {
        auto& diag = result_.diagnostics;
        const auto goal = static_cast<std::uint32_t>(space_.num_states() - 1);
        Eigen::VectorXd costs(static_cast<Eigen::Index>(space_.num_pairs()));
        for (std::size_t p = 0; p < space_.num_pairs(); ++p) {
            const double c = features_.psi(p).dot(rt.w.w);
            // The bound needs nonnegative costs; early overshoot of w can break that.
            if (space_.state_of_pair(p) != goal && c < 0.0) {
                ++diag.optimism_skipped;
                return;
            }
            costs[static_cast<Eigen::Index>(p)] = c;
        }
        ExactValues exact;
        try {
            exact = brute_force_value_iteration(features_, env_.true_kernel(), costs);
        } catch (const OracleDivergence&) {
            ++diag.optimism_skipped;
            return;
        }
        const double excess = (rt.values.q - exact.q).maxCoeff();
        ++diag.optimism_checks;
        diag.worst_optimism_excess = std::max(diag.worst_optimism_excess, excess - slack);
        if (excess > slack + 1e-9) ++diag.optimism_violations;
    }

    const EnvInstance& env_;
    const MaccmConfig& config_;
    Rng& rng_;
    const Dims dims_;
    const StateActionSpace& space_;
    const FeatureTable& features_;
    ConsensusMatrix mixing_;
    CandidateGrid grid_;
    std::size_t theta_star_index_;
    int step_cap_;
    std::vector<AgentRuntime> agents_;
    MaccmResult result_;
    std::int64_t t_ = 1;
};

}  // namespace

MaccmResult run(const EnvInstance& env, const MaccmConfig& config, Rng& rng) {
    Runner runner(env, config, rng);
    return runner.execute();
}

}  // namespace maccm
