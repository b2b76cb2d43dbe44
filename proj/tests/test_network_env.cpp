#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maccm/network_env.hpp"

using namespace maccm;

namespace {

EnvParams params(int n, int d, double delta, double Delta) {
    EnvParams p;
    p.dims = Dims{n, d};
    p.delta = delta;
    p.Delta = Delta;
    return p;
}

}  // namespace

TEST_CASE("instance construction") {
    Rng rng(1);
    const EnvInstance env = new_instance(params(1, 2, 0.2, 0.1), rng);
    CHECK(std::abs(env.theta_star().theta[0]) == doctest::Approx(0.1));
    CHECK(env.theta_star().theta[1] == 1.0);

    EnvParams bad = params(2, 2, 0.1, 0.2);
    bad.theta_signs = std::vector<std::vector<int>>{{1}, {1}};
    try {
        Rng r(1);
        (void)new_instance(bad, r);
        FAIL("expected rejection");
    } catch (const InvalidInstance& e) {
        const std::string msg = e.what();
        CHECK(msg.find("s=(s,s)") != std::string::npos);
        CHECK(msg.find("a=(-;-)") != std::string::npos);
        CHECK(msg.find("s'=(g,g)") != std::string::npos);
    }
    bad.clip_renormalize = true;
    Rng r2(1);
    CHECK_NOTHROW(new_instance(bad, r2));

    EnvParams cost = params(1, 2, 0.2, 0.1);
    cost.c_min = 1.5;
    CHECK_THROWS(new_instance(cost, rng));
}

TEST_CASE("private costs lie in (c_min, 1)") {
    Rng rng(3);
    EnvParams p = params(3, 3, 0.4, 0.05);
    p.c_min = 0.5;
    const EnvInstance env = new_instance(p, rng);
    for (int i = 0; i < 3; ++i) {
        for (std::size_t pair = 0; pair < env.space().num_pairs(); ++pair) {
            const double k = env.private_cost(i, pair);
            CHECK(k > 0.5);
            CHECK(k < 1.0);
        }
    }
}

TEST_CASE("congestion counts") {
    const JointAction same{AgentAction::move(1), AgentAction::move(1), AgentAction::move(1)};
    for (int i = 0; i < 3; ++i) CHECK(congestion(GlobalState::initial(3), same, i) == 3);
    const JointAction diff{AgentAction::move(0), AgentAction::move(1)};
    CHECK(congestion(GlobalState::initial(2), diff, 0) == 1);
    CHECK(congestion(GlobalState::initial(2), diff, 1) == 1);
    const JointAction partial{AgentAction::stay_at_goal(), AgentAction::move(0)};
    CHECK(congestion(GlobalState(2, 0b01), partial, 0) == 0);
    CHECK(congestion(GlobalState(2, 0b01), partial, 1) == 1);
}

TEST_CASE("local and mean cost") {
    Rng rng(5);
    const EnvInstance env = new_instance(params(2, 2, 0.4, 0.2), rng);
    const auto& space = env.space();
    const JointAction same{AgentAction::move(0), AgentAction::move(0)};
    const std::size_t p = space.pair_index(0, space.action_index(GlobalState::initial(2), same));
    CHECK(local_cost(env, GlobalState::initial(2), same, 0) == doctest::Approx(2.0 * env.private_cost(0, p)));
    CHECK(mean_cost(env, GlobalState::initial(2), same) ==
          doctest::Approx(env.private_cost(0, p) + env.private_cost(1, p)));

    const JointAction stay{AgentAction::stay_at_goal(), AgentAction::stay_at_goal()};
    CHECK(mean_cost(env, GlobalState::all_goal(2), stay) == 0.0);
    const JointAction partial{AgentAction::stay_at_goal(), AgentAction::move(1)};
    CHECK(local_cost(env, GlobalState(2, 0b01), partial, 0) == 0.0);

    Rng r1(2);
    const EnvInstance single = new_instance(params(1, 2, 0.2, 0.1), r1);
    const JointAction a{AgentAction::move(0)};
    CHECK(mean_cost(single, GlobalState::initial(1), a) == local_cost(single, GlobalState::initial(1), a, 0));

    for (std::size_t pair = 0; pair < space.num_pairs(); ++pair) {
        const double m = env.mean_cost(pair);
        CHECK(m >= 0.0);
        CHECK(m <= 2.0);
        const std::uint32_t s = space.state_of_pair(pair);
        for (int i = 0; i < 2; ++i) {
            if (!((s >> i) & 1u)) CHECK(env.local_cost(pair, i) >= 0.5);
        }
    }
}

TEST_CASE("goal is absorbing under step") {
    Rng rng(9);
    const EnvInstance env = new_instance(params(2, 2, 0.4, 0.2), rng);
    const JointAction stay{AgentAction::stay_at_goal(), AgentAction::stay_at_goal()};
    for (int k = 0; k < 1000; ++k) CHECK(step(env, GlobalState::all_goal(2), stay, rng).is_goal());
    // A goal agent never returns to the source.
    const JointAction partial{AgentAction::stay_at_goal(), AgentAction::move(0)};
    for (int k = 0; k < 1000; ++k) CHECK(step(env, GlobalState(2, 0b01), partial, rng).at_goal(0));
}

TEST_CASE("n = 1 aligned move reaches goal with frequency 0.3") {
    EnvParams p = params(1, 2, 0.2, 0.1);
    p.theta_signs = std::vector<std::vector<int>>{{1}};
    Rng rng(17);
    const EnvInstance env = new_instance(p, rng);
    const JointAction aligned{AgentAction::move(1)};
    const int draws = 200000;
    int hits = 0;
    for (int k = 0; k < draws; ++k) hits += step(env, GlobalState::initial(1), aligned, rng).is_goal();
    const double freq = static_cast<double>(hits) / draws;
    // Five binomial standard errors.
    CHECK(std::abs(freq - 0.3) < 5.0 * std::sqrt(0.3 * 0.7 / draws));
}

TEST_CASE("same seed gives the same instance and trajectory") {
    Rng a(42);
    Rng b(42);
    const EnvInstance ea = new_instance(params(2, 3, 0.4, 0.1), a);
    const EnvInstance eb = new_instance(params(2, 3, 0.4, 0.1), b);
    CHECK(ea.theta_star().theta == eb.theta_star().theta);
    for (std::size_t p = 0; p < ea.space().num_pairs(); ++p) CHECK(ea.private_cost(1, p) == eb.private_cost(1, p));
    GlobalState sa = GlobalState::initial(2);
    GlobalState sb = sa;
    const JointAction ja{AgentAction::move(2), AgentAction::move(1)};
    for (int k = 0; k < 50 && !sa.is_goal(); ++k) {
        JointAction cur = ja;
        for (int i = 0; i < 2; ++i) {
            if (sa.at_goal(i)) cur[static_cast<std::size_t>(i)] = AgentAction::stay_at_goal();
        }
        sa = step(ea, sa, cur, a);
        sb = step(eb, sb, cur, b);
        CHECK(sa == sb);
    }
}

TEST_CASE("every kernel row is a distribution with an absorbing goal") {
    for (int n = 1; n <= 3; ++n) {
        for (int d = 2; d <= 3; ++d) {
            const double delta = 0.4;
            const double Delta = delta / std::ldexp(1.0, n - 1);
            for (std::uint64_t seed = 1; seed <= 4; ++seed) {
                Rng rng(seed);
                const EnvInstance env = new_instance(params(n, d, delta, Delta), rng);
                const auto& space = env.space();
                for (std::size_t p = 0; p < space.num_pairs(); ++p) {
                    const Eigen::VectorXd& row = env.true_kernel().row(p);
                    CHECK(std::abs(row.sum() - 1.0) < 1e-12);
                    CHECK(row.minCoeff() >= -1e-12);
                }
                const std::size_t goal_pair = space.first_pair(static_cast<std::uint32_t>(space.num_states() - 1));
                const Eigen::VectorXd& g = env.true_kernel().row(goal_pair);
                CHECK(g[g.size() - 1] == 1.0);
                CHECK(g.head(g.size() - 1).isZero(0.0));
            }
        }
    }
}
