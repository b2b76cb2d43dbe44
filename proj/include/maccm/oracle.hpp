#pragma once

#include <Eigen/Dense>

#include <vector>

#include "maccm/linear_model.hpp"
#include "maccm/network_env.hpp"

namespace maccm {

/// Number of agents leaving the source at each step 1..t.
struct DepartureSequence {
    std::vector<int> x;
    bool clamped = false;  ///< the floor formula went negative somewhere and was clamped to 0

    int horizon() const { return static_cast<int>(x.size()); }
};

inline double departure_alpha(double c_min) { return (c_min + 1.0) / 2.0; }

/// α Σ_{j<t} x_j² + c_min Σ_{j<t}(n - Σ_{i≤j} x_i) + α x_t².
double departure_cost(const std::vector<double>& x, double alpha, double c_min, int n);
double departure_cost(const DepartureSequence& x, double alpha, double c_min, int n);

/// Floor formula x_j = ⌊n/t + ((t+1)/2 - j) c_min/(2α)⌋ for j < t, with
/// x_t absorbing the remainder. Throws std::domain_error when x_t < 0.
DepartureSequence departure_sequence(int n, int t, double c_min);

/// The same formula without the floor (the stationary point of the cost).
std::vector<double> unfloored_departure_sequence(int n, int t, double c_min);

/// Cost of the unfloored sequence in closed form:
/// α n²/t + c_min n (t-1)/2 - t(t²-1) c_min² / (48 α).
double closed_form_cost(int n, int t, double c_min);

/// ∂C/∂x_j for j < t with x_t = n - Σ_{j<t} x_j eliminated.
std::vector<double> departure_gradient(const std::vector<double>& x, double c_min);

/// Hessian of C in (x_1..x_{t-1}) after eliminating x_t: 2α(I + 11ᵀ).
Eigen::MatrixXd departure_hessian(int t, double c_min);

struct DepartureProbability {
    double value = 0.0;
    bool factors_in_range = true;  ///< every factor lies in [0, 1]
};

DepartureProbability departure_probability(const DepartureSequence& x, int n, double delta, double Delta);

struct ValueEstimate {
    double value = 0.0;
    double mass = 0.0;       ///< Σ_t P[finish at t] covered by the sum
    int horizon = 0;         ///< last t included
    int fallback_count = 0;  ///< horizons that used the exact integer optimum
    int out_of_range_count = 0;
};

/// Σ_{t=1}^{T} P[x*(t)] C(x*(t)). T_max = 0 selects the automatic tail:
/// stop once the covered mass reaches 1 - 1e-6 or the increments stall.
/// Horizons where the floor formula is infeasible (clamped, or no departure
/// at t) use the integer minimizer of C with x_t ≥ 1.
ValueEstimate optimal_value_estimate(int T_max, int n, double c_min, double delta, double Delta);

/// Sequence used by optimal_value_estimate at horizon t, and whether it is
/// the floor formula (true) or the integer fallback (false).
std::pair<DepartureSequence, bool> value_sequence(int n, int t, double c_min);

/// Integer minimizer of C over x ≥ 0, Σx = n, x_t ≥ `min_last`.
std::pair<DepartureSequence, double> best_departure(int n, int t, double c_min, int min_last = 0);

/// Exhaustive minimum over every composition of n into t parts (n ≤ 8, t ≤ 6).
std::pair<DepartureSequence, double> brute_force_departure(int n, int t, double c_min);

struct ExactValues {
    Eigen::VectorXd v;  ///< per state
    Eigen::VectorXd q;  ///< per pair
    int iterations = 0;
};

class OracleDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Undiscounted SSP value iteration on the given kernel with per-pair costs,
/// from V = 0 until the sup-norm change drops below `tolerance`.
ExactValues brute_force_value_iteration(const FeatureTable& features, const TransitionKernel& kernel,
                                        const Eigen::VectorXd& pair_costs, double tolerance = 1e-10);
ExactValues brute_force_value_iteration(const EnvInstance& env, const Eigen::VectorXd& pair_costs,
                                        double tolerance = 1e-10);

/// Per-pair mean cost (1/n) Σ_i α ψ_i(s,a).
Eigen::VectorXd alpha_mean_costs(const FeatureTable& features, double c_min);
/// Per-pair mean of the realized K^i(s,a) ψ_i(s,a).
Eigen::VectorXd realized_mean_costs(const EnvInstance& env);

}  // namespace maccm
