#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "lsiq/mdp.hpp"

namespace lsiq {

/// Count-based inverse dynamics model: predicts the action connecting two
/// consecutive states as the mode of the observed (s, s') -> a counts.
/// Trained on policy-generated transitions only, never on expert data.
class InverseDynamicsModel {
  public:
    InverseDynamicsModel() = default;
    explicit InverseDynamicsModel(int n_actions) : n_actions_(n_actions) {}

    struct Prediction {
        int action = 0;
        /// False when the pair was never observed and the global modal
        /// action was used as a fallback.
        bool confident = false;
    };

    void update(std::span<const Transition> batch);

    /// Mode action of the pair, ties broken toward the lowest action id;
    /// unseen pairs fall back to the globally most frequent action. Throws
    /// UntrainedModelError when no transitions have been observed at all.
    Prediction predict(int s, int s_next) const;

    bool covered(int s, int s_next) const;
    long total_observed() const { return total_; }
    int n_actions() const { return n_actions_; }

    /// Sparse (s, s_next, action, count) rows in deterministic order.
    std::vector<std::array<long, 4>> count_entries() const;

    void add_count(int s, int s_next, int a, long count);

  private:
    static std::uint64_t key(int s, int s_next) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) |
               static_cast<std::uint32_t>(s_next);
    }

    int n_actions_ = 0;
    std::unordered_map<std::uint64_t, std::vector<long>> counts_;
    std::vector<long> action_totals_;
    long total_ = 0;
};

}  // namespace lsiq
