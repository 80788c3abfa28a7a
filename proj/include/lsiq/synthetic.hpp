#pragma once

#include "lsiq/mdp.hpp"
#include "lsiq/rng.hpp"
#include "lsiq/types.hpp"

namespace lsiq {

/// Random MDP with dense transition rows. A fraction of states (never all,
/// never the whole initial support) is made absorbing; rewards at absorbing
/// states are action-independent so their value has the closed form
/// r / (1-gamma).
TabularMdp random_mdp(RandomStream& rng, int n_states, int n_actions, double absorbing_fraction,
                      double gamma);

/// Deterministic random MDP (one successor per state-action pair).
TabularMdp random_deterministic_mdp(RandomStream& rng, int n_states, int n_actions, double gamma);

Policy random_policy(RandomStream& rng, int n_states, int n_actions);

StateActionTable random_table(RandomStream& rng, int n_states, int n_actions, double lo, double hi);

/// Random distribution; roughly `zero_fraction` of the entries are exactly 0.
StateActionDistribution random_distribution(RandomStream& rng, int n_states, int n_actions,
                                            double zero_fraction);

}  // namespace lsiq
