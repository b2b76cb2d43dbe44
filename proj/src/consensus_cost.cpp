#include "maccm/consensus_cost.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace maccm {

ConsensusMatrix::ConsensusMatrix(Eigen::MatrixXd weights, double kappa) : weights_(std::move(weights)) {
    const auto n = weights_.rows();
    if (n < 1 || weights_.cols() != n) throw std::invalid_argument("consensus matrix must be square");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0, 1)");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double l = weights_(i, j);
            if (!std::isfinite(l) || l < 0.0) {
                throw std::invalid_argument("consensus matrix entries must be finite and nonnegative");
            }
            if (l > 0.0 && l < kappa) {
                throw std::invalid_argument("consensus matrix entry below kappa at (" + std::to_string(i) +
                                            "," + std::to_string(j) + ")");
            }
        }
        if (std::abs(weights_.row(i).sum() - 1.0) > 1e-12) {
            throw std::invalid_argument("consensus matrix row " + std::to_string(i) + " does not sum to 1");
        }
    }
}

void check_mixing_assumptions(const ConsensusMatrix& L) {
    const auto& m = L.weights();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (std::abs(m.col(j).sum() - 1.0) > 1e-12) {
            throw std::invalid_argument("consensus matrix column " + std::to_string(j) + " does not sum to 1");
        }
    }
    if (!(L.disagreement_norm() < 1.0 - 1e-12)) {
        throw std::invalid_argument("consensus matrix does not contract disagreement (spectral norm >= 1)");
    }
}

double ConsensusMatrix::disagreement_norm() const {
    const auto n = weights_.rows();
    const Eigen::MatrixXd centering =
        Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd m = weights_.transpose() * centering * weights_;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

ConsensusMatrix uniform_consensus_matrix(int n) {
    if (n < 1) throw std::invalid_argument("uniform_consensus_matrix: n must be >= 1");
    ConsensusMatrix L(Eigen::MatrixXd::Constant(n, n, 1.0 / n), std::min(0.5, 1.0 / n));
    check_mixing_assumptions(L);
    return L;
}

ConsensusMatrix parse_consensus_matrix(const std::string& text, int n, double kappa) {
    std::istringstream in(text);
    Eigen::MatrixXd m(n, n);
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::vector<double> values;
        double v = 0;
        while (ls >> v) values.push_back(v);
        if (!ls.eof()) throw std::invalid_argument("consensus matrix: non-numeric token in row " + std::to_string(row));
        if (values.empty()) continue;
        if (row >= n || static_cast<int>(values.size()) != n) {
            throw std::invalid_argument("consensus matrix must have " + std::to_string(n) + " rows of " +
                                        std::to_string(n) + " values");
        }
        for (int j = 0; j < n; ++j) m(row, j) = values[static_cast<std::size_t>(j)];
        ++row;
    }
    if (row != n) throw std::invalid_argument("consensus matrix has " + std::to_string(row) + " rows, expected " +
                                              std::to_string(n));
    ConsensusMatrix L(m, kappa);
    check_mixing_assumptions(L);
    return L;
}

ConsensusMatrix load_consensus_matrix(const std::string& path, int n, double kappa) {
    std::ifstream file(path);
    if (!file) throw std::runtime_error("cannot open consensus matrix file: " + path);
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_consensus_matrix(buffer.str(), n, kappa);
}

CostParams local_gradient_step(const CostParams& w, const CostFeature& psi, double c_i, double gamma) {
    if (w.w.size() != psi.psi.size()) throw std::invalid_argument("local_gradient_step: dimension mismatch");
    const double residual = c_i - psi.psi.dot(w.w);
    return CostParams{w.w + gamma * residual * psi.psi};
}

std::vector<CostParams> mix(const std::vector<CostParams>& tilde, const ConsensusMatrix& L) {
    const int n = L.size();
    if (static_cast<int>(tilde.size()) != n) throw std::invalid_argument("mix: need one parameter per agent");
    std::vector<CostParams> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(tilde[0].w.size());
        for (int j = 0; j < n; ++j) acc += L.weights()(i, j) * tilde[static_cast<std::size_t>(j)].w;
        out[static_cast<std::size_t>(i)].w = std::move(acc);
    }
    return out;
}

FixedPointReport fixed_point_residual(const std::vector<CostParams>& ws,
                                      const std::vector<WeightedSample>& samples) {
    if (ws.empty()) throw std::invalid_argument("fixed_point_residual: no agents");
    const auto k = ws[0].w.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
    for (const auto& w : ws) mean += w.w;
    mean /= static_cast<double>(ws.size());

    FixedPointReport report;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        for (std::size_t j = i + 1; j < ws.size(); ++j) {
            report.max_disagreement = std::max(report.max_disagreement, (ws[i].w - ws[j].w).norm());
        }
    }
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(k);
    for (const auto& sample : samples) {
        gradient += sample.weight * (sample.psi.dot(mean) - sample.mean_cost) * sample.psi;
    }
    report.residual = gradient.norm();
    return report;
}

CostParams fixed_point_solve(const std::vector<WeightedSample>& samples, int k) {
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    for (const auto& sample : samples) {
        normal += sample.weight * sample.psi * sample.psi.transpose();
        rhs += sample.weight * sample.mean_cost * sample.psi;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        pivots.minCoeff() <= 1e-12 * std::max(1.0, pivots.maxCoeff())) {
        throw std::runtime_error("fixed_point_solve: weighted feature matrix is rank deficient");
    }
    return CostParams{ldlt.solve(rhs)};
}

}  // namespace maccm
