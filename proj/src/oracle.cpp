#include "maccm/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace maccm {

namespace {

void check_horizon(int n, int t) {
    if (n < 1) throw std::invalid_argument("departure: n must be >= 1");
    if (t < 1) throw std::invalid_argument("departure: t must be >= 1");
}

}  // namespace

double departure_cost(const std::vector<double>& x, double alpha, double c_min, int n) {
    if (x.empty()) throw std::invalid_argument("departure_cost: empty sequence");
    const std::size_t t = x.size();
    double cost = 0.0;
    double departed = 0.0;
    for (std::size_t j = 0; j + 1 < t; ++j) {
        departed += x[j];
        cost += alpha * x[j] * x[j] + c_min * (n - departed);
    }
    return cost + alpha * x[t - 1] * x[t - 1];
}

double departure_cost(const DepartureSequence& x, double alpha, double c_min, int n) {
    return departure_cost(std::vector<double>(x.x.begin(), x.x.end()), alpha, c_min, n);
}

std::vector<double> unfloored_departure_sequence(int n, int t, double c_min) {
    check_horizon(n, t);
    const double alpha = departure_alpha(c_min);
    std::vector<double> x(static_cast<std::size_t>(t));
    double sum = 0.0;
    for (int j = 1; j < t; ++j) {
        x[static_cast<std::size_t>(j - 1)] = double(n) / t + ((t + 1) / 2.0 - j) * c_min / (2.0 * alpha);
        sum += x[static_cast<std::size_t>(j - 1)];
    }
    x.back() = n - sum;
    return x;
}

DepartureSequence departure_sequence(int n, int t, double c_min) {
    const std::vector<double> raw = unfloored_departure_sequence(n, t, c_min);
    DepartureSequence seq;
    seq.x.resize(static_cast<std::size_t>(t));
    int sum = 0;
    for (int j = 0; j + 1 < t; ++j) {
        int xj = static_cast<int>(std::floor(raw[static_cast<std::size_t>(j)]));
        if (xj < 0) {
            xj = 0;
            seq.clamped = true;
        }
        seq.x[static_cast<std::size_t>(j)] = xj;
        sum += xj;
    }
    seq.x.back() = n - sum;
    if (seq.x.back() < 0) {
        throw std::domain_error("departure_sequence: horizon t=" + std::to_string(t) +
                                " is infeasible for n=" + std::to_string(n) + " (x_t < 0)");
    }
    return seq;
}

double closed_form_cost(int n, int t, double c_min) {
    check_horizon(n, t);
    const double alpha = departure_alpha(c_min);
    const double tt = t;
    return alpha * n * n / tt + c_min * n * (tt - 1.0) / 2.0 -
           tt * (tt * tt - 1.0) * c_min * c_min / (48.0 * alpha);
}

std::vector<double> departure_gradient(const std::vector<double>& x, double c_min) {
    const double alpha = departure_alpha(c_min);
    const std::size_t t = x.size();
    std::vector<double> g(t - 1);
    for (std::size_t j = 0; j + 1 < t; ++j) {
        g[j] = 2.0 * alpha * x[j] - 2.0 * alpha * x[t - 1] - static_cast<double>(t - 1 - j) * c_min;
    }
    return g;
}

Eigen::MatrixXd departure_hessian(int t, double c_min) {
    if (t < 2) throw std::invalid_argument("departure_hessian: t must be >= 2");
    const double alpha = departure_alpha(c_min);
    return 2.0 * alpha *
           (Eigen::MatrixXd::Identity(t - 1, t - 1) + Eigen::MatrixXd::Ones(t - 1, t - 1));
}

DepartureProbability departure_probability(const DepartureSequence& x, int n, double delta, double Delta) {
    if (x.x.empty()) throw std::invalid_argument("departure_probability: empty sequence");
    const double scale = std::ldexp(1.0, n - 1);
    const double gamma = Delta / n + delta / (n * scale);
    const double eta = 1.0 / (n * scale);
    DepartureProbability out;
    out.value = 1.0;
    auto apply = [&](double factor) {
        if (factor < 0.0 || factor > 1.0) out.factors_in_range = false;
        out.value *= factor;
    };
    const int t = x.horizon();
    int departed = 0;
    for (int k = 0; k + 1 < t; ++k) {
        departed += x.x[static_cast<std::size_t>(k)];
        apply(1.0 - gamma * n + (gamma - eta) * departed);
    }
    apply(gamma * n - (gamma - eta) * departed);
    return out;
}

std::pair<DepartureSequence, double> best_departure(int n, int t, double c_min, int min_last) {
    check_horizon(n, t);
    if (min_last > n) throw std::invalid_argument("best_departure: min_last exceeds n");
    const double alpha = departure_alpha(c_min);
    const double inf = std::numeric_limits<double>::infinity();
    const auto width = static_cast<std::size_t>(n + 1);
    // f[S] = cheapest prefix of the first j entries summing to S.
    std::vector<double> f(width, inf), next(width);
    std::vector<int> choice(static_cast<std::size_t>(t - 1) * width, 0);
    f[0] = 0.0;
    for (int j = 0; j + 1 < t; ++j) {
        for (int s = 0; s <= n; ++s) {
            double best = inf;
            int arg = 0;
            for (int xj = 0; xj <= s; ++xj) {
                const double prev = f[static_cast<std::size_t>(s - xj)];
                if (prev == inf) continue;
                const double cand = prev + alpha * xj * xj + c_min * (n - s);
                if (cand < best) {
                    best = cand;
                    arg = xj;
                }
            }
            next[static_cast<std::size_t>(s)] = best;
            choice[static_cast<std::size_t>(j) * width + static_cast<std::size_t>(s)] = arg;
        }
        std::swap(f, next);
    }
    double best = inf;
    int last = n;
    for (int xt = std::max(min_last, 0); xt <= n; ++xt) {
        const double prev = f[static_cast<std::size_t>(n - xt)];
        if (prev == inf) continue;
        const double cand = prev + alpha * xt * xt;
        if (cand < best) {
            best = cand;
            last = xt;
        }
    }
    DepartureSequence seq;
    seq.x.assign(static_cast<std::size_t>(t), 0);
    seq.x.back() = last;
    int s = n - last;
    for (int j = t - 2; j >= 0; --j) {
        const int xj = choice[static_cast<std::size_t>(j) * width + static_cast<std::size_t>(s)];
        seq.x[static_cast<std::size_t>(j)] = xj;
        s -= xj;
    }
    return {seq, best};
}

std::pair<DepartureSequence, double> brute_force_departure(int n, int t, double c_min) {
    check_horizon(n, t);
    if (n > 8 || t > 6) throw std::invalid_argument("brute_force_departure: requires n <= 8 and t <= 6");
    const double alpha = departure_alpha(c_min);
    DepartureSequence current;
    current.x.assign(static_cast<std::size_t>(t), 0);
    DepartureSequence best;
    double best_cost = std::numeric_limits<double>::infinity();
    auto recurse = [&](auto& self, int j, int remaining) -> void {
        if (j == t - 1) {
            current.x[static_cast<std::size_t>(j)] = remaining;
            const double cost = departure_cost(current, alpha, c_min, n);
            if (cost < best_cost) {
                best_cost = cost;
                best = current;
            }
            return;
        }
        for (int xj = 0; xj <= remaining; ++xj) {
            current.x[static_cast<std::size_t>(j)] = xj;
            self(self, j + 1, remaining - xj);
        }
    };
    recurse(recurse, 0, n);
    return {best, best_cost};
}

std::pair<DepartureSequence, bool> value_sequence(int n, int t, double c_min) {
    try {
        DepartureSequence seq = departure_sequence(n, t, c_min);
        if (!seq.clamped && seq.x.back() >= 1) return {seq, true};
    } catch (const std::domain_error&) {
    }
    return {best_departure(n, t, c_min, 1).first, false};
}

ValueEstimate optimal_value_estimate(int T_max, int n, double c_min, double delta, double Delta) {
    if (T_max < 0) throw std::invalid_argument("optimal_value_estimate: T_max must be >= 1 (or 0 for auto)");
    check_horizon(n, 1);
    constexpr int kAutoCap = 100000;
    constexpr double kMassTarget = 1.0 - 1e-6;
    constexpr double kStall = 1e-12;
    constexpr int kStallRun = 20;
    const bool automatic = T_max == 0;
    const int limit = automatic ? kAutoCap : T_max;
    const double alpha = departure_alpha(c_min);

    ValueEstimate out;
    int stalled = 0;
    for (int t = 1; t <= limit; ++t) {
        const auto [seq, floor_used] = value_sequence(n, t, c_min);
        if (!floor_used) ++out.fallback_count;
        const DepartureProbability p = departure_probability(seq, n, delta, Delta);
        if (!p.factors_in_range) ++out.out_of_range_count;
        const double increment = p.value * departure_cost(seq, alpha, c_min, n);
        out.value += increment;
        out.mass += p.value;
        out.horizon = t;
        if (automatic) {
            if (out.mass >= kMassTarget) break;
            stalled = (std::abs(increment) < kStall && std::abs(p.value) < kStall) ? stalled + 1 : 0;
            if (stalled >= kStallRun) break;
        }
    }
    return out;
}

ExactValues brute_force_value_iteration(const FeatureTable& features, const TransitionKernel& kernel,
                                        const Eigen::VectorXd& pair_costs, double tolerance) {
    const auto& space = features.space();
    if (pair_costs.size() != static_cast<Eigen::Index>(space.num_pairs())) {
        throw std::invalid_argument("brute_force_value_iteration: one cost per pair required");
    }
    constexpr int kMaxIterations = 10'000'000;
    constexpr double kDivergence = 1e12;
    const std::size_t states = space.num_states();
    const auto goal = static_cast<std::uint32_t>(states - 1);
    ExactValues out;
    out.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states));
    out.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.num_pairs()));
    for (int it = 1; it <= kMaxIterations; ++it) {
        for (std::size_t p = 0; p < space.num_pairs(); ++p) {
            out.q[static_cast<Eigen::Index>(p)] =
                space.state_of_pair(p) == goal ? 0.0 : pair_costs[static_cast<Eigen::Index>(p)] + kernel.row(p).dot(out.v);
        }
        const Eigen::VectorXd v_next = [&] {
            Eigen::VectorXd v(static_cast<Eigen::Index>(states));
            for (std::uint32_t s = 0; s < states; ++s) {
                v[s] = out.q.segment(static_cast<Eigen::Index>(space.first_pair(s)),
                                     static_cast<Eigen::Index>(space.num_actions(s)))
                           .minCoeff();
            }
            v[goal] = 0.0;
            return v;
        }();
        const double change = (v_next - out.v).cwiseAbs().maxCoeff();
        out.v = v_next;
        out.iterations = it;
        if (!std::isfinite(change) || out.v.cwiseAbs().maxCoeff() > kDivergence) {
            throw OracleDivergence("value iteration diverged: no proper policy for these costs");
        }
        if (change < tolerance) {
            for (std::size_t p = 0; p < space.num_pairs(); ++p) {
                out.q[static_cast<Eigen::Index>(p)] = space.state_of_pair(p) == goal
                                                          ? 0.0
                                                          : pair_costs[static_cast<Eigen::Index>(p)] +
                                                                kernel.row(p).dot(out.v);
            }
            return out;
        }
    }
    throw OracleDivergence("value iteration did not settle within the iteration cap");
}

ExactValues brute_force_value_iteration(const EnvInstance& env, const Eigen::VectorXd& pair_costs,
                                        double tolerance) {
    return brute_force_value_iteration(env.features(), env.true_kernel(), pair_costs, tolerance);
}

Eigen::VectorXd alpha_mean_costs(const FeatureTable& features, double c_min) {
    const double alpha = departure_alpha(c_min);
    const auto pairs = features.space().num_pairs();
    Eigen::VectorXd out(static_cast<Eigen::Index>(pairs));
    for (std::size_t p = 0; p < pairs; ++p) out[static_cast<Eigen::Index>(p)] = alpha * features.psi(p).mean();
    return out;
}

Eigen::VectorXd realized_mean_costs(const EnvInstance& env) {
    const auto pairs = env.space().num_pairs();
    Eigen::VectorXd out(static_cast<Eigen::Index>(pairs));
    for (std::size_t p = 0; p < pairs; ++p) out[static_cast<Eigen::Index>(p)] = env.mean_cost(p);
    return out;
}

}  // namespace maccm
