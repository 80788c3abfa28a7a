#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lsiq/errors.hpp"

namespace lsiq {

/// Dense real-valued table over state-action pairs, row-major in the state.
/// Used for Q-functions, rewards, critics and policy probabilities alike.
struct StateActionTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> data;

    StateActionTable() = default;
    StateActionTable(int states, int actions, double fill = 0.0)
        : n_states(states),
          n_actions(actions),
          data(static_cast<std::size_t>(states) * static_cast<std::size_t>(actions), fill) {}

    double& operator()(int s, int a) {
        return data[static_cast<std::size_t>(s) * n_actions + a];
    }
    double operator()(int s, int a) const {
        return data[static_cast<std::size_t>(s) * n_actions + a];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const StateActionTable& other) const {
        return n_states == other.n_states && n_actions == other.n_actions;
    }

    double max_abs_diff(const StateActionTable& other) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i)
            worst = std::max(worst, std::abs(data[i] - other.data[i]));
        return worst;
    }
};

/// Tabular stochastic policy; each state row is a distribution over actions.
/// `beta` records the temperature the policy was extracted with, when any.
struct Policy {
    StateActionTable probs;
    double beta = 1.0;

    int n_states() const { return probs.n_states; }
    int n_actions() const { return probs.n_actions; }
    double prob(int s, int a) const { return probs(s, a); }

    /// Throws InvalidPolicyError unless every row is a distribution.
    void validate(double tol = 1e-12) const;

    static Policy uniform(int n_states, int n_actions);

    /// Shannon entropy of the action distribution at state s (zero entries skipped).
    double entropy(int s) const;

    /// Most likely action at s; ties broken toward the lowest action id.
    int mode_action(int s) const;
};

/// Nonnegative weights over state-action pairs. Normalized instances are
/// probability distributions; discounted occupancy measures reuse the same
/// container with total mass 1/(1-gamma).
struct StateActionDistribution {
    StateActionTable values;

    StateActionDistribution() = default;
    explicit StateActionDistribution(StateActionTable v) : values(std::move(v)) {}
    StateActionDistribution(int n_states, int n_actions)
        : values(n_states, n_actions, 0.0) {}

    int n_states() const { return values.n_states; }
    int n_actions() const { return values.n_actions; }
    double operator()(int s, int a) const { return values(s, a); }
    double& operator()(int s, int a) { return values(s, a); }

    double total_mass() const;

    /// Throws InvalidDistributionError unless entries are nonnegative and
    /// sum to 1 within `tol`.
    void validate_distribution(double tol = 1e-10) const;
};

}  // namespace lsiq
