#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lsiq/mdp.hpp"
#include "lsiq/soft_rl.hpp"
#include "lsiq/types.hpp"

namespace lsiq {

/// Inverse Bellman operator variants. kIq masks the bootstrapped next value
/// with (1-nu) and implicitly assigns absorbing states a value of zero; kLsiq
/// replaces it with the closed-form absorbing value r_A / (1-gamma).
enum class OperatorKind { kIq, kLsiq };

enum class Algorithm { kLsiq, kSqil, kIq, kIqv0 };

/// Target-table update rule: hard copy every `period` steps, or Polyak
/// averaging with rate `tau`.
struct TargetUpdate {
    enum class Kind { kHard, kPolyak };
    Kind kind = Kind::kPolyak;
    int period = 1;
    double tau = 0.005;

    static TargetUpdate hard(int period) { return {Kind::kHard, period, 0.0}; }
    static TargetUpdate polyak(double tau) { return {Kind::kPolyak, 1, tau}; }
};

/// Derived regression bounds: r_max = 1/(2 alpha c), r_min = -1/(2 (1-alpha) c),
/// and the induced Q-value range q_{max,min} = r_{max,min} / (1-gamma).
struct RewardTargets {
    double r_max = 0.0;
    double r_min = 0.0;
    double q_max = 0.0;
    double q_min = 0.0;
};

/// (r_max, r_min) for the given regularizer constant and mixing coefficient.
/// Throws InfiniteTargetError when alpha is 0 or 1.
std::pair<double, double> reward_targets(double c, double alpha);

/// (q_max, q_min) = (r_max, r_min) / (1 - gamma).
std::pair<double, double> q_bounds(double r_max, double r_min, double gamma);

/// All hyperparameters of the critic updates.
struct LsIqConfig {
    double c = 0.5;
    double alpha = 0.5;
    double beta = 0.1;   // entropy coefficient; 0 disables the bonus
    double gamma = 0.99;
    OperatorKind operator_kind = OperatorKind::kLsiq;
    bool fixed_expert_target = true;
    bool clip_targets = true;
    bool entropy_clip = true;
    bool use_entropy_critic = false;
    bool use_regularization_critic = false;
    double lr_q = 0.5;
    double lr_g = 0.5;
    TargetUpdate target_update = TargetUpdate::polyak(0.005);
    int batch_size = 64;
    Algorithm algorithm = Algorithm::kLsiq;
    /// SQIL only: use (r_max, r_min) derived from (c, alpha) instead of the
    /// default binary rewards (1, 0).
    bool sqil_symmetric_targets = false;
    double entropy_clip_decay = 0.99;

    void validate() const;
    RewardTargets targets() const;
    /// Weight of the squared-reward term in the combined critic, k = c(1-alpha).
    double regularization_k() const { return c * (1.0 - alpha); }
};

/// Implicit reward of each transition under the configured inverse operator:
///   kIq:   r = Q(s,a) - (1-nu) gamma V(s')
///   kLsiq: r = Q(s,a) - gamma ((1-nu) V(s') + nu r_A/(1-gamma))
/// with r_A = r_max on the expert side and r_min on the policy side.
std::vector<double> implicit_reward(const CriticState& critic, std::span<const Transition> batch,
                                    std::span<const double> soft_values, const LsIqConfig& cfg,
                                    bool expert_side);

/// Loss value, exact gradient with respect to the prediction table, and the
/// regression targets that were emitted for each batch element.
struct LossResult {
    double loss = 0.0;
    StateActionTable grad;
    std::vector<double> expert_targets;
    std::vector<double> policy_targets;
};

/// Least-squares critic loss
///   alpha * mean_E[(Q(s,a) - T_E)^2] + (1-alpha) * mean_pi[(Q(s,a) - T_pi)^2].
/// Targets bootstrap through the soft value of `q_target` under `policy`,
/// with the absorbing-state handling of the configured operator, the fixed
/// expert target q_max when enabled, clipping of bootstrapped values to
/// [q_min, q_max] when enabled, and the expert-side entropy bonus capped at
/// `entropy_cap` (ignore by passing +infinity). Targets are constants to the
/// gradient.
LossResult ls_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                            std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg, double entropy_cap);
LossResult ls_loss_and_grad(const CriticState& critic, std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg);

/// SQIL critic loss: the same least-squares structure with fixed rewards
/// (1, 0) — or the symmetric (r_max, r_min) variant — bootstrapped targets,
/// no clipping and no absorbing-state closed form.
LossResult sqil_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                              std::span<const Transition> expert_batch,
                              std::span<const Transition> policy_batch, const Policy& policy,
                              const LsIqConfig& cfg);

/// Distribution-matching critic loss: negated sample estimate of
///   E_dE[r_Q] - E_dpi[r_Q] - c alpha E_dE[r_Q^2] - c(1-alpha) E_dpi[r_Q^2]
///   - beta H(pi),
/// with r_Q from the (1-nu)-masked inverse operator and values bootstrapped
/// through q_target.
LossResult iq_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                            std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg);

/// Telescoped variant: the policy-expectation of r_Q is replaced by
/// (1-gamma) E_mu0[V(s0)] on the live table; the squared-reward regularizer
/// stays on the sampled batches.
LossResult iqv0_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                              std::span<const Transition> expert_batch,
                              std::span<const Transition> policy_batch, const Policy& policy,
                              const LsIqConfig& cfg, std::span<const double> initial_dist);

/// Exact-expectation evaluation of the distribution-matching objective J, the
/// least-squares objective L (bootstrapped, no fixed targets or clipping) and
/// the constant K = 1/(4 alpha c) + 1/(4 (1-alpha) c). The three satisfy the
/// affine equivalence J + c*L = K for every Q table and policy.
struct ObjectiveIdentity {
    double j = 0.0;
    double l = 0.0;
    double k = 0.0;
};
ObjectiveIdentity objective_identity_check(const StateActionTable& q_soft, const TabularMdp& mdp,
                                           const Policy& policy,
                                           const StateActionDistribution& d_expert,
                                           const StateActionDistribution& d_policy,
                                           const LsIqConfig& cfg);

/// Forward backup with closed-form absorbing values,
///   (B Q)(s,a) = r(s,a) + gamma E_{s'}[(1-nu) V_pi(s') + nu r(s')/(1-gamma)],
/// where V_pi(s') = E_{a'~pi} Q(s',a'). Q^pi is a fixed point of this backup
/// and the backup is a gamma-contraction in the sup norm.
StateActionTable lsiq_forward_backup(const TabularMdp& mdp, const StateActionTable& reward,
                                     const StateActionTable& q, const Policy& policy);

/// EMA tracker for the per-batch maximum entropy bonus observed on policy
/// states. A NaN tracker is treated as unset and takes the batch maximum.
double entropy_clip_update(double tracker, std::span<const double> policy_batch_bonuses,
                           double decay);

/// One critic gradient step with the configured algorithm's loss, followed by
/// the target-table update. For kIqv0 the MDP initial distribution must be
/// supplied. Returns the updated critic; `result_out`, when given, receives
/// the step's loss, gradient and emitted targets.
CriticState critic_step(const CriticState& critic, std::span<const Transition> expert_batch,
                        std::span<const Transition> policy_batch, const Policy& policy,
                        const LsIqConfig& cfg, std::span<const double> initial_dist = {},
                        LossResult* result_out = nullptr);

/// Extracts the softmax policy of Q(s,a) plus the configured critic
/// correction (combined critic when enabled, else entropy critic, else
/// nothing). With beta = 0 the extraction is greedy.
Policy policy_improvement(const CriticState& critic, const LsIqConfig& cfg);

}  // namespace lsiq
