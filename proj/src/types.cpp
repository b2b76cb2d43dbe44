#include "maccm/types.hpp"

#include <sstream>
#include <stdexcept>

namespace maccm {

void check_dims(const Dims& dims) {
    if (dims.n < 1 || dims.n > 16) {
        throw std::invalid_argument("agent count n must lie in [1, 16], got " + std::to_string(dims.n));
    }
    if (dims.d < 2 || dims.d > 16) {
        throw std::invalid_argument("feature block dimension d must lie in [2, 16], got " +
                                    std::to_string(dims.d));
    }
}

AgentAction AgentAction::from_signs(const std::vector<int>& signs) {
    std::uint32_t code = 0;
    for (int s : signs) {
        if (s != 1 && s != -1) {
            throw std::invalid_argument("move signs must be exactly +1 or -1");
        }
        code = (code << 1) | (s == 1 ? 1u : 0u);
    }
    return move(code);
}

int AgentAction::sign(int component, int d) const {
    const int shift = d - 2 - component;
    return ((code_ >> shift) & 1u) ? 1 : -1;
}

std::vector<int> AgentAction::signs(int d) const {
    if (stay_) return {};
    std::vector<int> out(static_cast<std::size_t>(d - 1));
    for (int k = 0; k < d - 1; ++k) out[static_cast<std::size_t>(k)] = sign(k, d);
    return out;
}

GlobalState::GlobalState(int n, std::uint32_t goal_mask) : n_(n), mask_(goal_mask) {
    if (n < 1 || n > 16) throw std::invalid_argument("GlobalState: agent count out of range");
    if (goal_mask >= (1u << n)) throw std::invalid_argument("GlobalState: mask out of range");
}

GlobalState::GlobalState(const std::vector<Node>& nodes) : n_(static_cast<int>(nodes.size())) {
    if (n_ < 1 || n_ > 16) throw std::invalid_argument("GlobalState: agent count out of range");
    for (int i = 0; i < n_; ++i) {
        if (nodes[static_cast<std::size_t>(i)] == Node::Goal) mask_ |= 1u << i;
    }
}

Node GlobalState::node(int agent) const {
    if (agent < 0 || agent >= n_) throw std::out_of_range("GlobalState::node: agent index");
    return at_goal(agent) ? Node::Goal : Node::Init;
}

std::vector<Node> GlobalState::nodes() const {
    std::vector<Node> out;
    out.reserve(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) out.push_back(node(i));
    return out;
}

std::string to_string(const GlobalState& s) {
    std::string out = "(";
    for (int i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += s.at_goal(i) ? "g" : "s";
    }
    return out + ")";
}

std::string to_string(const JointAction& a, int d) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) os << ";";
        if (a[i].is_stay()) {
            os << "g";
            continue;
        }
        for (int s : a[i].signs(d)) os << (s > 0 ? '+' : '-');
    }
    os << ")";
    return os.str();
}

StateActionSpace::StateActionSpace(Dims dims) : dims_(dims) {
    check_dims(dims_);
    const std::size_t states = dims_.num_states();
    const auto moves = static_cast<std::size_t>(dims_.moves_per_agent());
    counts_.resize(states);
    offsets_.resize(states + 1, 0);
    for (std::uint32_t s = 0; s < states; ++s) {
        std::size_t count = 1;
        for (int i = 0; i < dims_.n; ++i) {
            if (!((s >> i) & 1u)) count *= moves;
        }
        counts_[s] = count;
        offsets_[s + 1] = offsets_[s] + count;
    }
    pair_state_.resize(offsets_.back());
    for (std::uint32_t s = 0; s < states; ++s) {
        for (std::size_t k = 0; k < counts_[s]; ++k) pair_state_[offsets_[s] + k] = s;
    }
}

std::uint32_t StateActionSpace::agent_move(std::uint32_t state, std::size_t action, int agent) const {
    if ((state >> agent) & 1u) return 0;
    const auto moves = static_cast<std::size_t>(dims_.moves_per_agent());
    // Moving agents after `agent` occupy the less significant digits.
    std::size_t divisor = 1;
    for (int j = agent + 1; j < dims_.n; ++j) {
        if (!((state >> j) & 1u)) divisor *= moves;
    }
    return static_cast<std::uint32_t>((action / divisor) % moves);
}

JointAction StateActionSpace::joint_action(std::uint32_t state, std::size_t action) const {
    if (state >= num_states() || action >= counts_[state]) {
        throw std::out_of_range("StateActionSpace::joint_action: index out of range");
    }
    JointAction ja;
    ja.reserve(static_cast<std::size_t>(dims_.n));
    for (int i = 0; i < dims_.n; ++i) {
        if ((state >> i) & 1u) {
            ja.push_back(AgentAction::stay_at_goal());
        } else {
            ja.push_back(AgentAction::move(agent_move(state, action, i)));
        }
    }
    return ja;
}

std::size_t StateActionSpace::action_index(const GlobalState& state, const JointAction& ja) const {
    if (state.size() != dims_.n || static_cast<int>(ja.size()) != dims_.n) {
        throw std::invalid_argument("action_index: dimension mismatch");
    }
    const auto moves = static_cast<std::uint32_t>(dims_.moves_per_agent());
    std::size_t index = 0;
    for (int i = 0; i < dims_.n; ++i) {
        const AgentAction& a = ja[static_cast<std::size_t>(i)];
        if (state.at_goal(i)) {
            if (!a.is_stay()) throw std::invalid_argument("agent at goal must use StayAtGoal");
            continue;
        }
        if (a.is_stay() || a.code() >= moves) {
            throw std::invalid_argument("agent at source must choose a valid move");
        }
        index = index * moves + a.code();
    }
    return index;
}

}  // namespace maccm
