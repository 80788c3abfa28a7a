#include "lsiq/synthetic.hpp"

#include <cmath>

namespace lsiq {

TabularMdp random_mdp(RandomStream& rng, int n_states, int n_actions, double absorbing_fraction,
                      double gamma) {
    TabularMdp mdp = TabularMdp::empty(n_states, n_actions, gamma);
    for (int s = 1; s < n_states; ++s)  // state 0 stays non-absorbing
        if (rng.uniform01() < absorbing_fraction) mdp.absorbing[static_cast<std::size_t>(s)] = 1;

    mdp.true_reward = StateActionTable(n_states, n_actions, 0.0);
    for (int s = 0; s < n_states; ++s) {
        double absorbing_reward = rng.uniform(-1.0, 1.0);
        for (int a = 0; a < n_actions; ++a) {
            if (mdp.is_absorbing(s)) {
                mdp.p_ref(s, a, s) = 1.0;
                (*mdp.true_reward)(s, a) = absorbing_reward;
                continue;
            }
            double row = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                double w = -std::log(1.0 - rng.uniform01());  // exponential weight
                mdp.p_ref(s, a, s2) = w;
                row += w;
            }
            for (int s2 = 0; s2 < n_states; ++s2) mdp.p_ref(s, a, s2) /= row;
            (*mdp.true_reward)(s, a) = rng.uniform(-1.0, 1.0);
        }
    }

    double mass = 0.0;
    for (int s = 0; s < n_states; ++s) {
        if (mdp.is_absorbing(s)) continue;
        double w = rng.uniform01() + 0.05;
        mdp.initial_dist[static_cast<std::size_t>(s)] = w;
        mass += w;
    }
    for (double& m : mdp.initial_dist) m /= mass;
    mdp.validate();
    return mdp;
}

TabularMdp random_deterministic_mdp(RandomStream& rng, int n_states, int n_actions, double gamma) {
    TabularMdp mdp = TabularMdp::empty(n_states, n_actions, gamma);
    mdp.true_reward = StateActionTable(n_states, n_actions, 0.0);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            mdp.p_ref(s, a, rng.uniform_int(n_states)) = 1.0;
            (*mdp.true_reward)(s, a) = rng.uniform(-1.0, 1.0);
        }
    double mass = 0.0;
    for (int s = 0; s < n_states; ++s) {
        double w = rng.uniform01() + 0.05;
        mdp.initial_dist[static_cast<std::size_t>(s)] = w;
        mass += w;
    }
    for (double& m : mdp.initial_dist) m /= mass;
    mdp.validate();
    return mdp;
}

Policy random_policy(RandomStream& rng, int n_states, int n_actions) {
    Policy pi;
    pi.probs = StateActionTable(n_states, n_actions, 0.0);
    for (int s = 0; s < n_states; ++s) {
        double row = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            double w = rng.uniform01() + 0.02;  // keep rows strictly positive
            pi.probs(s, a) = w;
            row += w;
        }
        for (int a = 0; a < n_actions; ++a) pi.probs(s, a) /= row;
    }
    return pi;
}

StateActionTable random_table(RandomStream& rng, int n_states, int n_actions, double lo,
                              double hi) {
    StateActionTable t(n_states, n_actions, 0.0);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

StateActionDistribution random_distribution(RandomStream& rng, int n_states, int n_actions,
                                            double zero_fraction) {
    StateActionDistribution d(n_states, n_actions);
    double mass = 0.0;
    for (double& v : d.values.data) {
        if (rng.uniform01() < zero_fraction) continue;
        v = rng.uniform01() + 1e-3;
        mass += v;
    }
    if (mass == 0.0) {
        d.values.data[0] = 1.0;
        return d;
    }
    for (double& v : d.values.data) v /= mass;
    return d;
}

}  // namespace lsiq
