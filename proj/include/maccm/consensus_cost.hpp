#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "maccm/linear_model.hpp"

namespace maccm {

/// One agent's estimate w of the global mean-cost parameters.
struct CostParams {
    Eigen::VectorXd w;
};

/// Row-stochastic mixing matrix. Construction validates entries ≥ 0, rows
/// summing to 1 and positive entries ≥ κ.
class ConsensusMatrix {
public:
    explicit ConsensusMatrix(Eigen::MatrixXd weights, double kappa = 1e-3);

    const Eigen::MatrixXd& weights() const { return weights_; }
    int size() const { return static_cast<int>(weights_.rows()); }
    /// ‖Lᵀ(I - 11ᵀ/n)L‖₂ for this (deterministic) matrix.
    double disagreement_norm() const;

private:
    Eigen::MatrixXd weights_;
};

/// Throws unless L is also column stochastic and ‖Lᵀ(I - 11ᵀ/n)L‖₂ < 1,
/// the conditions under which mixing drives agents to agreement.
void check_mixing_assumptions(const ConsensusMatrix& L);

ConsensusMatrix uniform_consensus_matrix(int n);

/// Reads n rows of n whitespace-separated decimals; also applies
/// check_mixing_assumptions.
ConsensusMatrix load_consensus_matrix(const std::string& path, int n, double kappa = 1e-3);
ConsensusMatrix parse_consensus_matrix(const std::string& text, int n, double kappa = 1e-3);

/// w̃ = w + γ (c_i - ⟨ψ, w⟩) ψ.
CostParams local_gradient_step(const CostParams& w, const CostFeature& psi, double c_i, double gamma);

/// w^i = Σ_j L[i][j] w̃^j.
std::vector<CostParams> mix(const std::vector<CostParams>& tilde, const ConsensusMatrix& L);

inline double estimated_cost(const CostParams& w, const CostFeature& psi) { return psi.psi.dot(w.w); }

/// One (s,a) support point for the fixed-point diagnostic.
struct WeightedSample {
    Eigen::VectorXd psi;
    double weight = 0.0;
    double mean_cost = 0.0;
};

struct FixedPointReport {
    double residual = 0.0;        ///< ‖Ψᵀ D (Ψ w̄ - c̄)‖₂ at the across-agent mean w̄
    double max_disagreement = 0.0;///< max_{i,j} ‖w^i - w^j‖₂
};

FixedPointReport fixed_point_residual(const std::vector<CostParams>& ws,
                                      const std::vector<WeightedSample>& samples);

/// Weighted least-squares solution of Ψᵀ D (Ψ w - c̄) = 0.
CostParams fixed_point_solve(const std::vector<WeightedSample>& samples, int k);

}  // namespace maccm
