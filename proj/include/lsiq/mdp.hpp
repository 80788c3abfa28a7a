#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lsiq/rng.hpp"
#include "lsiq/types.hpp"

namespace lsiq {

/// Finite MDP with explicit absorbing flags.
///
/// Invariants (checked by validate()):
///   - every transition row is a distribution over next states,
///   - absorbing states self-transition with probability 1,
///   - the initial distribution is a distribution and puts no mass on
///     absorbing states (unless every state is absorbing, in which case no
///     valid support exists and the restriction is dropped).
///
/// `true_reward` is only consulted for expert training and evaluation;
/// imitation learners never read it.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // [s][a][s'] flattened, row-major
    std::vector<std::uint8_t> absorbing;
    std::vector<double> initial_dist;
    double gamma = 0.99;
    std::optional<StateActionTable> true_reward;

    double p(int s, int a, int s_next) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
    }
    double& p_ref(int s, int a, int s_next) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
    }
    std::span<const double> next_dist(int s, int a) const {
        return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    bool is_absorbing(int s) const { return absorbing[static_cast<std::size_t>(s)] != 0; }

    static TabularMdp empty(int n_states, int n_actions, double gamma);

    /// Throws InvalidEnvironmentError on any violated invariant.
    void validate(double tol = 1e-12) const;
};

/// One environment step. `absorbing_next` mirrors the absorbing flag of
/// `s_next` for rollout-generated data.
struct Transition {
    int s = 0;
    int a = 0;
    int s_next = 0;
    bool absorbing_next = false;
};

/// Replay buffer / demonstration store. With a capacity it behaves as a
/// ring buffer; sampling is uniform with replacement over stored records.
class TransitionSet {
  public:
    TransitionSet() = default;
    explicit TransitionSet(std::size_t capacity) : capacity_(capacity) {}

    void push(const Transition& t);
    void push_all(std::span<const Transition> ts);

    const std::vector<Transition>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::optional<std::size_t> capacity() const { return capacity_; }

    std::vector<Transition> sample(std::size_t n, RandomStream& rng) const;

  private:
    std::vector<Transition> records_;
    std::optional<std::size_t> capacity_;
    std::size_t next_slot_ = 0;
};

/// Grid actions. Moving off-grid is a no-op move.
inline constexpr int kActionUp = 0;
inline constexpr int kActionDown = 1;
inline constexpr int kActionLeft = 2;
inline constexpr int kActionRight = 3;
inline constexpr int kGridActions = 4;

/// Parameters of the point-mass grid task. Cells are row-major ids in
/// [0, size^2). Hazard cells terminate the episode; goal cells terminate it
/// with reward `goal_reward` per (absorbing) step.
struct PointmassGridSpec {
    int size = 7;
    std::array<int, 4> spawn_cells{};
    std::vector<int> goal_cells;
    std::vector<int> hazard_cells;
    double gamma = 0.99;
    double goal_reward = 1.0;
};

/// Deterministic 4-action grid: hazards and goals are absorbing, stepping
/// off-grid stays in place, spawns are uniform over the four spawn cells.
TabularMdp build_pointmass_grid(const PointmassGridSpec& spec);
TabularMdp build_pointmass_grid(int size, const std::array<int, 4>& spawn_cells,
                                const std::vector<int>& goal_cells,
                                const std::vector<int>& hazard_cells, double gamma,
                                double goal_reward = 1.0);

/// 7x7 reconstruction used by the experiments: spawns in the four corners,
/// goal in the center, and an absorbing hazard ring around the goal with one
/// gap per side.
PointmassGridSpec default_pointmass_spec(double gamma = 0.99);

/// Discounted occupancy measure rho_pi(s,a) = pi(a|s) * sum_t gamma^t mu_t(s),
/// from a direct solve of the discounted flow linear system. Total mass is
/// 1/(1-gamma).
StateActionDistribution occupancy_measure(const TabularMdp& mdp, const Policy& policy);

/// Normalizes an occupancy measure into a state-action distribution,
/// d = (1-gamma) * rho realised as division by the total mass.
StateActionDistribution occupancy_to_distribution(const StateActionDistribution& rho);

/// Samples one trajectory. Terminates on entering an absorbing state (that
/// transition is included) or after `horizon` steps. Bit-reproducible for a
/// fixed seed.
std::vector<Transition> rollout(const TabularMdp& mdp, const Policy& policy, int horizon,
                                std::uint64_t seed);

}  // namespace lsiq
