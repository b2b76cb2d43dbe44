#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace maccm {

/// Node of the two-node network. Every episode starts with all agents at
/// `Init` and ends once every agent sits at `Goal`.
enum class Node : std::uint8_t { Init = 0, Goal = 1 };

/// Problem dimensions: agent count and per-agent feature block size.
/// Each agent at the source chooses a sign vector of length `d - 1`.
struct Dims {
    int n = 1;
    int d = 2;

    int feature_dim() const { return n * d; }
    int moves_per_agent() const { return 1 << (d - 1); }
    std::size_t num_states() const { return std::size_t{1} << n; }
};

void check_dims(const Dims& dims);

/// Per-agent action. A move is a sign vector in {-1,+1}^{d-1}, stored as a
/// bit pattern whose most significant bit is the first sign (bit set = +1).
/// Integer order of `code` is therefore lexicographic order of the signs
/// with -1 < +1.
class AgentAction {
public:
    static AgentAction stay_at_goal() { return AgentAction(true, 0); }
    static AgentAction move(std::uint32_t code) { return AgentAction(false, code); }
    static AgentAction from_signs(const std::vector<int>& signs);

    bool is_stay() const { return stay_; }
    std::uint32_t code() const { return code_; }
    /// Sign vector of a move; empty for StayAtGoal.
    std::vector<int> signs(int d) const;
    int sign(int component, int d) const;

    friend bool operator==(const AgentAction&, const AgentAction&) = default;

private:
    AgentAction(bool stay, std::uint32_t code) : stay_(stay), code_(code) {}
    bool stay_ = true;
    std::uint32_t code_ = 0;
};

/// Per-agent node vector. Internally a bitmask (bit i set = agent i at goal),
/// which is also the state's index in every table.
class GlobalState {
public:
    GlobalState() = default;
    GlobalState(int n, std::uint32_t goal_mask);
    explicit GlobalState(const std::vector<Node>& nodes);

    static GlobalState initial(int n) { return GlobalState(n, 0); }
    static GlobalState all_goal(int n) { return GlobalState(n, (1u << n) - 1u); }

    int size() const { return n_; }
    Node node(int agent) const;
    bool at_goal(int agent) const { return (mask_ >> agent) & 1u; }
    bool is_goal() const { return mask_ == (1u << n_) - 1u; }
    std::uint32_t index() const { return mask_; }
    std::vector<Node> nodes() const;

    friend bool operator==(const GlobalState&, const GlobalState&) = default;

private:
    int n_ = 0;
    std::uint32_t mask_ = 0;
};

inline bool is_goal(const GlobalState& s) { return s.is_goal(); }

using JointAction = std::vector<AgentAction>;

std::string to_string(const GlobalState& s);
std::string to_string(const JointAction& a, int d);

/// Enumerates every global state and, per state, the legal joint actions in
/// lexicographic order (agent 0 most significant; agents at goal contribute
/// only StayAtGoal). Flat (state, joint action) pair indices are what the
/// value tables, feature tables, and cost tables use.
class StateActionSpace {
public:
    explicit StateActionSpace(Dims dims);

    const Dims& dims() const { return dims_; }
    std::size_t num_states() const { return dims_.num_states(); }
    std::size_t num_actions(std::uint32_t state) const { return counts_[state]; }
    std::size_t num_pairs() const { return offsets_.back(); }
    std::size_t pair_index(std::uint32_t state, std::size_t action) const {
        return offsets_[state] + action;
    }
    std::size_t first_pair(std::uint32_t state) const { return offsets_[state]; }
    std::uint32_t state_of_pair(std::size_t pair) const { return pair_state_[pair]; }

    JointAction joint_action(std::uint32_t state, std::size_t action) const;
    /// Own move code of `agent` in the given joint action (0 when at goal).
    std::uint32_t agent_move(std::uint32_t state, std::size_t action, int agent) const;
    /// Inverse of `joint_action`; throws if the action is inconsistent with the state.
    std::size_t action_index(const GlobalState& state, const JointAction& ja) const;

private:
    Dims dims_;
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> pair_state_;
};

}  // namespace maccm
