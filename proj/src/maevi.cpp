#include "maccm/maevi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace maccm {

ValueTables initial_value_tables(const StateActionSpace& space, double off_goal) {
    ValueTables tables;
    tables.q = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(space.num_pairs()), off_goal);
    tables.v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(space.num_states()), off_goal);
    const std::uint32_t goal = static_cast<std::uint32_t>(space.num_states() - 1);
    tables.q[static_cast<Eigen::Index>(space.first_pair(goal))] = 0.0;
    tables.v[goal] = 0.0;
    return tables;
}

CandidateGrid::CandidateGrid(std::shared_ptr<const FeatureTable> features, double Delta, bool clip_renormalize)
    : features_(std::move(features)) {
    build(enumerate_theta_grid(features_->dims(), Delta), clip_renormalize);
}

CandidateGrid::CandidateGrid(std::shared_ptr<const FeatureTable> features, std::vector<ModelParams> thetas,
                             bool clip_renormalize)
    : features_(std::move(features)) {
    build(std::move(thetas), clip_renormalize);
}

void CandidateGrid::build(std::vector<ModelParams> thetas, bool clip_renormalize) {
    candidates_.reserve(thetas.size());
    for (auto& theta : thetas) {
        Candidate c;
        c.valid = validate_theta(theta, *features_, clip_renormalize).valid;
        c.kernel = std::make_shared<const TransitionKernel>(*features_, theta, clip_renormalize);
        c.theta = std::move(theta);
        candidates_.push_back(std::move(c));
    }
}

std::size_t CandidateGrid::find(const ModelParams& theta) const {
    for (std::size_t k = 0; k < candidates_.size(); ++k) {
        if ((candidates_[k].theta.theta - theta.theta).cwiseAbs().maxCoeff() < 1e-15) return k;
    }
    return candidates_.size();
}

Eigen::VectorXd bellman_backup(const Eigen::VectorXd& v, const std::vector<const Candidate*>& candidates,
                               const FeatureTable& features, const CostParams& w, double q) {
    if (candidates.empty()) throw std::invalid_argument("bellman_backup: no candidates");
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("bellman_backup: q must lie in (0, 1]");
    const auto& space = features.space();
    const std::size_t pairs = space.num_pairs();
    const std::size_t goal_pair = space.first_pair(static_cast<std::uint32_t>(space.num_states() - 1));
    Eigen::VectorXd out(static_cast<Eigen::Index>(pairs));
    for (std::size_t p = 0; p < pairs; ++p) {
        if (p == goal_pair) {
            out[static_cast<Eigen::Index>(p)] = 0.0;
            continue;
        }
        double best = std::numeric_limits<double>::infinity();
        for (const Candidate* c : candidates) best = std::min(best, c->kernel->row(p).dot(v));
        out[static_cast<Eigen::Index>(p)] = features.psi(p).dot(w.w) + (1.0 - q) * best;
    }
    return out;
}

Eigen::VectorXd greedy_value(const Eigen::VectorXd& q, const StateActionSpace& space) {
    const std::size_t states = space.num_states();
    Eigen::VectorXd v(static_cast<Eigen::Index>(states));
    for (std::uint32_t s = 0; s < states; ++s) {
        const auto first = static_cast<Eigen::Index>(space.first_pair(s));
        v[s] = q.segment(first, static_cast<Eigen::Index>(space.num_actions(s))).minCoeff();
    }
    v[static_cast<Eigen::Index>(states - 1)] = 0.0;
    return v;
}

MaeviNonConvergence::MaeviNonConvergence(int iterations, double gap)
    : std::runtime_error("MAEVI did not converge after " + std::to_string(iterations) +
                         " iterations (final gap " + std::to_string(gap) + ")"),
      iterations_(iterations),
      gap_(gap) {}

int default_max_iters(double B, double t, double q) {
    const double base = std::max(std::log(std::max(B * t, 1.0)), 1.0);
    return 10 * static_cast<int>(std::ceil(base / q)) + 10;
}

std::vector<std::size_t> filter_candidates(const CandidateGrid& grid, const ConfidenceSet& cs) {
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Candidate& c = grid.candidates()[k];
        if (c.valid && in_ellipsoid(c.theta, cs)) kept.push_back(k);
    }
    return kept;
}

MaeviResult run_maevi(const ConfidenceSet& cs, const CandidateGrid& grid, double epsilon, double q,
                      const CostParams& w, const MaeviOptions& options) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("run_maevi: epsilon must be positive");
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("run_maevi: q must lie in (0, 1]");

    MaeviResult result;
    result.candidate_indices = filter_candidates(grid, cs);
    if (result.candidate_indices.empty()) return result;

    std::vector<const Candidate*> active;
    active.reserve(result.candidate_indices.size());
    for (std::size_t k : result.candidate_indices) active.push_back(&grid.candidates()[k]);

    const auto& features = grid.features();
    const auto& space = features.space();
    const int max_iters = options.max_iters > 0 ? options.max_iters : default_max_iters(options.B, options.t, q);

    Eigen::VectorXd q_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.num_pairs()));
    Eigen::VectorXd v_prev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.num_states()));
    double gap = std::numeric_limits<double>::infinity();
    int l = 0;
    while (l < 2 || gap >= epsilon) {
        if (l >= max_iters) throw MaeviNonConvergence(l, gap);
        Eigen::VectorXd q_next = bellman_backup(v_prev, active, features, w, q);
        Eigen::VectorXd v_next = greedy_value(q_next, space);
        const double dq = (q_next - q_prev).cwiseAbs().maxCoeff();
        if (!result.dq_trace.empty() && dq > (1.0 - q) * result.dq_trace.back() + 1e-12) {
            result.contraction_held = false;
            if (options.check_contraction) {
                throw std::logic_error("MAEVI contraction violated at iteration " + std::to_string(l + 1));
            }
        }
        result.dq_trace.push_back(dq);
        gap = (v_next - v_prev).cwiseAbs().maxCoeff();
        q_prev = std::move(q_next);
        v_prev = std::move(v_next);
        ++l;
    }
    result.updated = true;
    result.converged = true;
    result.iterations = l;
    result.final_gap = gap;
    result.tables.q = std::move(q_prev);
    result.tables.v = std::move(v_prev);
    return result;
}

}  // namespace maccm
