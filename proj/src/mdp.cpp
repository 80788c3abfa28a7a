#include "lsiq/mdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace lsiq {

TabularMdp TabularMdp::empty(int n_states, int n_actions, double gamma) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
    mdp.absorbing.assign(static_cast<std::size_t>(n_states), 0);
    mdp.initial_dist.assign(static_cast<std::size_t>(n_states), 0.0);
    mdp.gamma = gamma;
    return mdp;
}

void TabularMdp::validate(double tol) const {
    if (n_states <= 0 || n_actions <= 0)
        throw InvalidEnvironmentError("state and action counts must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw InvalidEnvironmentError("gamma must lie in [0, 1)");
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            double row = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double pr = p(s, a, s2);
                if (!(pr >= 0.0) || !std::isfinite(pr))
                    throw InvalidEnvironmentError("negative transition probability at state " +
                                                  std::to_string(s));
                row += pr;
            }
            if (std::abs(row - 1.0) > tol)
                throw InvalidEnvironmentError("transition row (" + std::to_string(s) + "," +
                                              std::to_string(a) + ") sums to " +
                                              std::to_string(row));
            if (is_absorbing(s) && std::abs(p(s, a, s) - 1.0) > tol)
                throw InvalidEnvironmentError("absorbing state " + std::to_string(s) +
                                              " does not self-transition");
        }
    }
    bool all_absorbing = true;
    for (int s = 0; s < n_states; ++s) all_absorbing = all_absorbing && is_absorbing(s);
    double mu_sum = 0.0;
    for (int s = 0; s < n_states; ++s) {
        double m = initial_dist[static_cast<std::size_t>(s)];
        if (!(m >= 0.0)) throw InvalidEnvironmentError("negative initial probability");
        if (!all_absorbing && is_absorbing(s) && m > 0.0)
            throw InvalidEnvironmentError("initial distribution puts mass on absorbing state " +
                                          std::to_string(s));
        mu_sum += m;
    }
    if (std::abs(mu_sum - 1.0) > tol)
        throw InvalidEnvironmentError("initial distribution sums to " + std::to_string(mu_sum));
}

void TransitionSet::push(const Transition& t) {
    if (capacity_ && records_.size() == *capacity_) {
        records_[next_slot_] = t;
        next_slot_ = (next_slot_ + 1) % *capacity_;
    } else {
        records_.push_back(t);
    }
}

void TransitionSet::push_all(std::span<const Transition> ts) {
    for (const Transition& t : ts) push(t);
}

std::vector<Transition> TransitionSet::sample(std::size_t n, RandomStream& rng) const {
    if (records_.empty()) throw InvalidBatchError("cannot sample from an empty transition set");
    std::vector<Transition> batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) batch.push_back(records_[rng.uniform_index(records_.size())]);
    return batch;
}

namespace {

void check_disjoint(const std::set<int>& a, const std::set<int>& b, const char* what) {
    for (int cell : a)
        if (b.count(cell))
            throw InvalidEnvironmentError(std::string("overlapping cell sets: ") + what);
}

}  // namespace

TabularMdp build_pointmass_grid(const PointmassGridSpec& spec) {
    return build_pointmass_grid(spec.size, spec.spawn_cells, spec.goal_cells, spec.hazard_cells,
                                spec.gamma, spec.goal_reward);
}

TabularMdp build_pointmass_grid(int size, const std::array<int, 4>& spawn_cells,
                                const std::vector<int>& goal_cells,
                                const std::vector<int>& hazard_cells, double gamma,
                                double goal_reward) {
    if (size <= 0) throw InvalidEnvironmentError("grid size must be positive");
    const int n = size * size;
    auto in_range = [n](int cell) { return cell >= 0 && cell < n; };

    std::set<int> goals(goal_cells.begin(), goal_cells.end());
    std::set<int> hazards(hazard_cells.begin(), hazard_cells.end());
    std::set<int> spawns(spawn_cells.begin(), spawn_cells.end());
    for (int cell : goals)
        if (!in_range(cell)) throw InvalidEnvironmentError("goal cell out of range");
    for (int cell : hazards)
        if (!in_range(cell)) throw InvalidEnvironmentError("hazard cell out of range");
    for (int cell : spawns)
        if (!in_range(cell)) throw InvalidEnvironmentError("spawn cell out of range");

    check_disjoint(goals, hazards, "goal and hazard");
    for (int cell : spawns) {
        if (hazards.count(cell))
            throw InvalidEnvironmentError("spawn cell " + std::to_string(cell) +
                                          " lies inside a hazard");
        // A spawn on the goal is only meaningful when the goal covers the
        // whole grid (degenerate 1x1 case); reject it otherwise.
        if (goals.count(cell) && static_cast<int>(goals.size()) < n)
            throw InvalidEnvironmentError("spawn cell " + std::to_string(cell) +
                                          " lies inside the goal");
    }

    TabularMdp mdp = TabularMdp::empty(n, kGridActions, gamma);
    mdp.true_reward = StateActionTable(n, kGridActions, 0.0);

    auto row_of = [size](int cell) { return cell / size; };
    auto col_of = [size](int cell) { return cell % size; };

    for (int cell = 0; cell < n; ++cell) {
        const bool absorbing = goals.count(cell) || hazards.count(cell);
        mdp.absorbing[static_cast<std::size_t>(cell)] = absorbing ? 1 : 0;
        for (int a = 0; a < kGridActions; ++a) {
            int next = cell;
            if (!absorbing) {
                int r = row_of(cell);
                int c = col_of(cell);
                switch (a) {
                    case kActionUp: r -= 1; break;
                    case kActionDown: r += 1; break;
                    case kActionLeft: c -= 1; break;
                    case kActionRight: c += 1; break;
                }
                if (r >= 0 && r < size && c >= 0 && c < size) next = r * size + c;
            }
            mdp.p_ref(cell, a, next) = 1.0;
            if (goals.count(cell)) (*mdp.true_reward)(cell, a) = goal_reward;
        }
    }

    // Uniform over the four spawn entries; duplicate cells accumulate mass.
    for (int cell : spawn_cells) mdp.initial_dist[static_cast<std::size_t>(cell)] += 0.25;
    mdp.validate();
    return mdp;
}

PointmassGridSpec default_pointmass_spec(double gamma) {
    PointmassGridSpec spec;
    spec.size = 7;
    spec.gamma = gamma;
    spec.spawn_cells = {0, 6, 42, 48};
    spec.goal_cells = {24};  // (3,3)
    // Chebyshev-radius-2 ring around the goal, opened at the four side
    // midpoints so every spawn has a shortest safe path through a gap.
    const int center = 3;
    for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 7; ++c) {
            int dist = std::max(std::abs(r - center), std::abs(c - center));
            bool side_mid = (r == center || c == center);
            if (dist == 2 && !side_mid) spec.hazard_cells.push_back(r * 7 + c);
        }
    }
    return spec;
}

StateActionDistribution occupancy_measure(const TabularMdp& mdp, const Policy& policy) {
    policy.validate(1e-10);
    const int n = mdp.n_states;
    const int m = mdp.n_actions;

    // State flow: mu = mu0 + gamma * P_pi^T mu, with P_pi the policy-averaged
    // next-state kernel. Solved directly (the system is nonsingular for
    // gamma < 1) and polished with iterative refinement to reach a 1e-12
    // residual.
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            for (int s2 = 0; s2 < n; ++s2) system(s2, s) -= mdp.gamma * pa * mdp.p(s, a, s2);
        }
    Eigen::VectorXd mu0(n);
    for (int s = 0; s < n; ++s) mu0(s) = mdp.initial_dist[static_cast<std::size_t>(s)];

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd mu = lu.solve(mu0);
    for (int pass = 0; pass < 3; ++pass) {
        Eigen::VectorXd residual = mu0 - system * mu;
        if (residual.lpNorm<Eigen::Infinity>() <= 1e-12) break;
        mu += lu.solve(residual);
    }
    double residual = (mu0 - system * mu).lpNorm<Eigen::Infinity>();
    if (residual > 1e-10)
        throw ConvergenceFailureError("occupancy flow solve residual too large", residual);

    StateActionDistribution rho(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) rho(s, a) = std::max(0.0, policy.prob(s, a) * mu(s));
    return rho;
}

StateActionDistribution occupancy_to_distribution(const StateActionDistribution& rho) {
    for (double v : rho.values.data)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidDistributionError("occupancy measure has a negative entry");
    double mass = rho.total_mass();
    if (!(mass > 0.0)) throw InvalidDistributionError("occupancy measure has zero mass");
    StateActionDistribution d = rho;
    for (double& v : d.values.data) v /= mass;
    return d;
}

std::vector<Transition> rollout(const TabularMdp& mdp, const Policy& policy, int horizon,
                                std::uint64_t seed) {
    if (horizon < 1) throw InvalidEnvironmentError("rollout horizon must be >= 1");
    policy.validate(1e-10);
    RandomStream rng(seed);

    std::vector<Transition> trajectory;
    int s = rng.categorical(std::span<const double>(mdp.initial_dist));
    if (mdp.is_absorbing(s)) return trajectory;  // degenerate all-absorbing start

    for (int t = 0; t < horizon; ++t) {
        int a = rng.categorical(std::span<const double>(&policy.probs.data[static_cast<std::size_t>(s) * mdp.n_actions],
                                                        static_cast<std::size_t>(mdp.n_actions)));
        int s2 = rng.categorical(mdp.next_dist(s, a));
        bool absorbed = mdp.is_absorbing(s2);
        trajectory.push_back(Transition{s, a, s2, absorbed});
        if (absorbed) break;
        s = s2;
    }
    return trajectory;
}

}  // namespace lsiq
