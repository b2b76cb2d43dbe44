#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "maccm/consensus_cost.hpp"
#include "maccm/linear_model.hpp"

namespace maccm {

/// Tabular Q over every (state, joint action) pair and V over every state.
struct ValueTables {
    Eigen::VectorXd q;
    Eigen::VectorXd v;
};

/// Q = V = `off_goal` everywhere except the all-goal state, which is 0.
ValueTables initial_value_tables(const StateActionSpace& space, double off_goal);

/// One grid parameter with its kernel and its membership in the valid set.
struct Candidate {
    ModelParams theta;
    std::shared_ptr<const TransitionKernel> kernel;
    bool valid = false;
};

/// The finite parameter grid with precomputed kernels, shared by all agents.
class CandidateGrid {
public:
    CandidateGrid(std::shared_ptr<const FeatureTable> features, double Delta, bool clip_renormalize);
    /// Grid restricted to explicit parameters (used to pin the grid to {θ*}).
    CandidateGrid(std::shared_ptr<const FeatureTable> features, std::vector<ModelParams> thetas,
                  bool clip_renormalize);

    const FeatureTable& features() const { return *features_; }
    const std::vector<Candidate>& candidates() const { return candidates_; }
    std::size_t size() const { return candidates_.size(); }
    /// Index of the candidate equal to `theta`, or size() when absent.
    std::size_t find(const ModelParams& theta) const;

private:
    void build(std::vector<ModelParams> thetas, bool clip_renormalize);

    std::shared_ptr<const FeatureTable> features_;
    std::vector<Candidate> candidates_;
};

/// Q(s,a) = ⟨ψ(s,a), w⟩ + (1-q) min_θ ⟨θ, φ_V(s,a)⟩ over the given
/// candidates; Q at the all-goal state is 0.
Eigen::VectorXd bellman_backup(const Eigen::VectorXd& v, const std::vector<const Candidate*>& candidates,
                               const FeatureTable& features, const CostParams& w, double q);

/// V(s) = min_a Q(s,a); V at the all-goal state is 0.
Eigen::VectorXd greedy_value(const Eigen::VectorXd& q, const StateActionSpace& space);

class MaeviNonConvergence : public std::runtime_error {
public:
    MaeviNonConvergence(int iterations, double gap);
    int iterations() const { return iterations_; }
    double gap() const { return gap_; }

private:
    int iterations_;
    double gap_;
};

struct MaeviOptions {
    int max_iters = 0;  ///< 0 selects default_max_iters(B, t, q)
    double B = 1.0;
    double t = 1.0;
    /// Throw std::logic_error when an iterate breaks the (1-q) decay bound.
    bool check_contraction = false;
};

struct MaeviResult {
    bool updated = false;  ///< false: empty filtered set, caller keeps its tables
    ValueTables tables;
    int iterations = 0;
    bool converged = false;
    double final_gap = 0.0;
    std::vector<double> dq_trace;  ///< ‖Q^(l) - Q^(l-1)‖_∞ for l = 1, 2, ...
    std::vector<std::size_t> candidate_indices;
    bool contraction_held = true;
};

int default_max_iters(double B, double t, double q);

/// Candidates of `grid` inside the ellipsoid and the valid set, in grid order.
std::vector<std::size_t> filter_candidates(const CandidateGrid& grid, const ConfidenceSet& cs);

MaeviResult run_maevi(const ConfidenceSet& cs, const CandidateGrid& grid, double epsilon, double q,
                      const CostParams& w, const MaeviOptions& options = {});

}  // namespace maccm
