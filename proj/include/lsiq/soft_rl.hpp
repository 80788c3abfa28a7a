#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lsiq/mdp.hpp"
#include "lsiq/types.hpp"

namespace lsiq {

/// Learnable critic tables. `q` is the hard Q-function being trained,
/// `q_target` its slow-moving copy used to form regression targets, `h` an
/// optional entropy critic and `g` an optional combined critic (entropy plus
/// scaled squared-reward term). `entropy_cap` is the running cap used to
/// clip entropy bonuses on expert states; NaN until first updated.
struct CriticState {
    StateActionTable q;
    StateActionTable q_target;
    std::optional<StateActionTable> h;
    std::optional<StateActionTable> g;
    long step_count = 0;
    double entropy_cap = std::numeric_limits<double>::quiet_NaN();

    static CriticState zeros(int n_states, int n_actions, bool with_entropy_critic,
                             bool with_combined_critic);
};

/// Softmax policy pi(a|s) proportional to exp(q(s,a) / beta), computed with
/// max subtraction. Throws InvalidTemperatureError for beta <= 0.
Policy maxent_policy(const StateActionTable& q_soft, double beta);

/// Deterministic argmax policy; ties broken toward the lowest action id.
Policy greedy_policy(const StateActionTable& q);

/// Soft state value V(s) = sum_a pi(a|s) (q(s,a) - beta log pi(a|s)). For the
/// softmax policy of q this equals beta * logsumexp(q(s,.) / beta).
std::vector<double> soft_value(const StateActionTable& q_soft, const Policy& policy, double beta);

/// Entropy-regularized optimal Q-function: fixed point of the soft backup
/// with softmax-extracted policy, to sup-norm residual <= tol. The value of
/// an absorbing state is its closed form beta*logsumexp(r(s,.)/beta)/(1-gamma)
/// rather than a bootstrapped estimate.
StateActionTable soft_value_iteration(const TabularMdp& mdp, const StateActionTable& reward,
                                      double beta, double tol, int max_sweeps = 200000);

/// Exact solve of Q = r + gamma P Pi Q (no entropy bonus).
StateActionTable policy_evaluation_hard(const TabularMdp& mdp, const StateActionTable& reward,
                                        const Policy& policy);

/// Exact solve of the entropy-regularized evaluation equations for a fixed
/// policy. Equals policy_evaluation_hard + entropy_critic for any reward.
StateActionTable soft_policy_evaluation(const TabularMdp& mdp, const StateActionTable& reward,
                                        const Policy& policy, double beta);

/// Discounted future entropy-bonus critic
///   H(s,a) = gamma * E[ beta * H(pi(.|s')) + E_{a'~pi} H(s',a') ],
/// solved exactly. Zero for deterministic policies.
StateActionTable entropy_critic(const TabularMdp& mdp, const Policy& policy, double beta);

struct TableLossResult {
    double loss = 0.0;
    StateActionTable grad;
};

/// Squared Bellman error of a combined critic on a batch,
///   mean_i (g_pred(s_i,a_i) - (k r_q_i^2 + gamma E_{a'}[-beta log pi + g_boot(s',a')]))^2,
/// with the bootstrap side frozen. Gradient is with respect to g_pred.
TableLossResult combined_critic_loss(const StateActionTable& g_pred,
                                     const StateActionTable& g_boot,
                                     std::span<const Transition> batch,
                                     std::span<const double> r_q, double k, double beta,
                                     double gamma, const Policy& policy);

/// One semi-gradient step on the loss above, bootstrapping from the current
/// table. Mutates only `g`; returns the pre-step loss.
double combined_critic_update(StateActionTable& g, std::span<const Transition> batch,
                              std::span<const double> r_q, double k, double beta, double gamma,
                              const Policy& policy, double lr);

}  // namespace lsiq
