#include "lsiq/lsiq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsiq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::pair<double, double> reward_targets(double c, double alpha) {
    if (!(c > 0.0)) throw InfiniteTargetError("regularizer constant c must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InfiniteTargetError("reward targets diverge for alpha in {0, 1}");
    return {1.0 / (2.0 * alpha * c), -1.0 / (2.0 * (1.0 - alpha) * c)};
}

std::pair<double, double> q_bounds(double r_max, double r_min, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidEnvironmentError("gamma must lie in [0, 1)");
    return {r_max / (1.0 - gamma), r_min / (1.0 - gamma)};
}

void LsIqConfig::validate() const {
    if (!(c > 0.0)) throw ConfigurationError("c must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigurationError("alpha must lie in (0, 1)");
    if (!(beta >= 0.0)) throw ConfigurationError("beta must be nonnegative");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigurationError("gamma must lie in [0, 1)");
    if (!(lr_q >= 0.0) || !(lr_g >= 0.0))
        throw ConfigurationError("learning rates must be nonnegative");
    if (batch_size < 1) throw ConfigurationError("batch size must be >= 1");
    if (target_update.kind == TargetUpdate::Kind::kHard && target_update.period < 1)
        throw ConfigurationError("hard target update period must be >= 1");
    if (target_update.kind == TargetUpdate::Kind::kPolyak &&
        !(target_update.tau > 0.0 && target_update.tau <= 1.0))
        throw ConfigurationError("polyak rate must lie in (0, 1]");
    if (!(entropy_clip_decay >= 0.0 && entropy_clip_decay < 1.0))
        throw ConfigurationError("entropy clip decay must lie in [0, 1)");
}

RewardTargets LsIqConfig::targets() const {
    auto [r_max, r_min] = reward_targets(c, alpha);
    auto [q_max, q_min] = q_bounds(r_max, r_min, gamma);
    return RewardTargets{r_max, r_min, q_max, q_min};
}

std::vector<double> implicit_reward(const CriticState& critic, std::span<const Transition> batch,
                                    std::span<const double> soft_values, const LsIqConfig& cfg,
                                    bool expert_side) {
    RewardTargets t = cfg.targets();
    const double absorbing_value = (expert_side ? t.r_max : t.r_min) / (1.0 - cfg.gamma);
    std::vector<double> rewards;
    rewards.reserve(batch.size());
    for (const Transition& tr : batch) {
        double q = critic.q(tr.s, tr.a);
        double r;
        if (cfg.operator_kind == OperatorKind::kIq) {
            r = q - (tr.absorbing_next ? 0.0
                                       : cfg.gamma * soft_values[static_cast<std::size_t>(tr.s_next)]);
        } else {
            double v = tr.absorbing_next ? absorbing_value
                                         : soft_values[static_cast<std::size_t>(tr.s_next)];
            r = q - cfg.gamma * v;
        }
        rewards.push_back(r);
    }
    return rewards;
}

namespace {

/// Fully resolved inputs of the shared least-squares kernel. Both the main
/// critic loss and the fixed-binary-reward critic loss lower onto this, so
/// configurations that coincide here produce identical gradients bit for bit.
struct LsKernelParams {
    double r_expert = 0.0;          // non-absorbing reward target, expert side
    double r_policy = 0.0;          // non-absorbing reward target, policy side
    double expert_abs_target = 0.0; // regression target for expert absorbing transitions
    double policy_abs_target = 0.0; // regression target for policy absorbing transitions
    bool fixed_expert_target = false;
    double fixed_expert_value = 0.0;
    bool clip = false;
    double clip_lo = -kInf;
    double clip_hi = kInf;
    double expert_entropy_cap = kInf;
    double alpha = 0.5;
    double beta = 0.0;
    double gamma = 0.99;
};

/// Soft values of the target table per state, split into the policy-averaged
/// Q part and the entropy bonus so the expert side can cap the bonus.
struct TargetValues {
    std::vector<double> base;
    std::vector<double> bonus;
};

TargetValues target_soft_values(const StateActionTable& q_target, const Policy& policy,
                                double beta) {
    TargetValues tv;
    tv.base.assign(static_cast<std::size_t>(q_target.n_states), 0.0);
    tv.bonus.assign(static_cast<std::size_t>(q_target.n_states), 0.0);
    for (int s = 0; s < q_target.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < q_target.n_actions; ++a) acc += policy.prob(s, a) * q_target(s, a);
        tv.base[static_cast<std::size_t>(s)] = acc;
        tv.bonus[static_cast<std::size_t>(s)] = beta * policy.entropy(s);
    }
    return tv;
}

LossResult least_squares_kernel(const StateActionTable& q, const StateActionTable& q_target,
                                std::span<const Transition> expert_batch,
                                std::span<const Transition> policy_batch, const Policy& policy,
                                const LsKernelParams& p) {
    if (expert_batch.empty() || policy_batch.empty())
        throw InvalidBatchError("least-squares critic batches must be non-empty");

    TargetValues tv = target_soft_values(q_target, policy, p.beta);
    auto clipped = [&p](double v) { return p.clip ? std::clamp(v, p.clip_lo, p.clip_hi) : v; };

    LossResult out;
    out.grad = StateActionTable(q.n_states, q.n_actions, 0.0);
    out.expert_targets.reserve(expert_batch.size());
    out.policy_targets.reserve(policy_batch.size());

    const double we = p.alpha / static_cast<double>(expert_batch.size());
    const double wp = (1.0 - p.alpha) / static_cast<double>(policy_batch.size());

    for (const Transition& t : expert_batch) {
        double target;
        if (p.fixed_expert_target) {
            target = p.fixed_expert_value;
        } else if (t.absorbing_next) {
            target = p.expert_abs_target;
        } else {
            std::size_t s2 = static_cast<std::size_t>(t.s_next);
            double v = tv.base[s2] + std::min(tv.bonus[s2], p.expert_entropy_cap);
            target = p.r_expert + p.gamma * clipped(v);
        }
        out.expert_targets.push_back(target);
        double residual = q(t.s, t.a) - target;
        out.loss += we * residual * residual;
        out.grad(t.s, t.a) += 2.0 * we * residual;
    }
    for (const Transition& t : policy_batch) {
        double target;
        if (t.absorbing_next) {
            target = p.policy_abs_target;
        } else {
            std::size_t s2 = static_cast<std::size_t>(t.s_next);
            double v = tv.base[s2] + tv.bonus[s2];
            target = p.r_policy + p.gamma * clipped(v);
        }
        out.policy_targets.push_back(target);
        double residual = q(t.s, t.a) - target;
        out.loss += wp * residual * residual;
        out.grad(t.s, t.a) += 2.0 * wp * residual;
    }
    return out;
}

LsKernelParams lsiq_kernel_params(const LsIqConfig& cfg, double entropy_cap) {
    RewardTargets t = cfg.targets();
    LsKernelParams p;
    p.r_expert = t.r_max;
    p.r_policy = t.r_min;
    if (cfg.operator_kind == OperatorKind::kLsiq) {
        p.expert_abs_target = t.q_max;  // r_max + gamma * r_max/(1-gamma)
        p.policy_abs_target = t.q_min;
    } else {
        p.expert_abs_target = t.r_max;  // bootstrapped value of absorbing states is zero
        p.policy_abs_target = t.r_min;
    }
    p.fixed_expert_target = cfg.fixed_expert_target;
    p.fixed_expert_value = t.q_max;
    p.clip = cfg.clip_targets;
    p.clip_lo = t.q_min;
    p.clip_hi = t.q_max;
    p.expert_entropy_cap = entropy_cap;
    p.alpha = cfg.alpha;
    p.beta = cfg.beta;
    p.gamma = cfg.gamma;
    return p;
}

LsKernelParams sqil_kernel_params(const LsIqConfig& cfg) {
    LsKernelParams p;
    if (cfg.sqil_symmetric_targets) {
        RewardTargets t = cfg.targets();
        p.r_expert = t.r_max;
        p.r_policy = t.r_min;
    } else {
        p.r_expert = 1.0;
        p.r_policy = 0.0;
    }
    p.expert_abs_target = p.r_expert;
    p.policy_abs_target = p.r_policy;
    p.alpha = cfg.alpha;
    p.beta = cfg.beta;
    p.gamma = cfg.gamma;
    return p;
}

}  // namespace

LossResult ls_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                            std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg, double entropy_cap) {
    return least_squares_kernel(q, q_target, expert_batch, policy_batch, policy,
                                lsiq_kernel_params(cfg, entropy_cap));
}

LossResult ls_loss_and_grad(const CriticState& critic, std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg) {
    double cap = (cfg.entropy_clip && !std::isnan(critic.entropy_cap)) ? critic.entropy_cap : kInf;
    return ls_loss_and_grad(critic.q, critic.q_target, expert_batch, policy_batch, policy, cfg,
                            cap);
}

LossResult sqil_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                              std::span<const Transition> expert_batch,
                              std::span<const Transition> policy_batch, const Policy& policy,
                              const LsIqConfig& cfg) {
    return least_squares_kernel(q, q_target, expert_batch, policy_batch, policy,
                                sqil_kernel_params(cfg));
}

namespace {

/// Per-transition implicit rewards against the target-table soft values,
/// shared by the distribution-matching losses.
std::vector<double> batch_rewards(const StateActionTable& q, const TargetValues& tv,
                                  std::span<const Transition> batch, double gamma) {
    std::vector<double> r;
    r.reserve(batch.size());
    for (const Transition& t : batch) {
        double ri = q(t.s, t.a);
        if (!t.absorbing_next) {
            std::size_t s2 = static_cast<std::size_t>(t.s_next);
            ri -= gamma * (tv.base[s2] + tv.bonus[s2]);
        }
        r.push_back(ri);
    }
    return r;
}

}  // namespace

LossResult iq_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                            std::span<const Transition> expert_batch,
                            std::span<const Transition> policy_batch, const Policy& policy,
                            const LsIqConfig& cfg) {
    if (expert_batch.empty() || policy_batch.empty())
        throw InvalidBatchError("critic batches must be non-empty");
    TargetValues tv = target_soft_values(q_target, policy, cfg.beta);
    std::vector<double> re = batch_rewards(q, tv, expert_batch, cfg.gamma);
    std::vector<double> rp = batch_rewards(q, tv, policy_batch, cfg.gamma);

    const double inv_ne = 1.0 / static_cast<double>(expert_batch.size());
    const double inv_np = 1.0 / static_cast<double>(policy_batch.size());

    double j = 0.0;
    LossResult out;
    out.grad = StateActionTable(q.n_states, q.n_actions, 0.0);
    for (std::size_t i = 0; i < expert_batch.size(); ++i) {
        const Transition& t = expert_batch[i];
        j += inv_ne * (re[i] - cfg.c * cfg.alpha * re[i] * re[i]);
        out.grad(t.s, t.a) -= inv_ne * (1.0 - 2.0 * cfg.c * cfg.alpha * re[i]);
    }
    for (std::size_t i = 0; i < policy_batch.size(); ++i) {
        const Transition& t = policy_batch[i];
        j -= inv_np * (rp[i] + cfg.c * (1.0 - cfg.alpha) * rp[i] * rp[i]);
        out.grad(t.s, t.a) += inv_np * (1.0 + 2.0 * cfg.c * (1.0 - cfg.alpha) * rp[i]);
        double p = policy.prob(t.s, t.a);
        if (p > 0.0) j -= cfg.beta * inv_np * (-std::log(p));
    }
    out.loss = -j;
    return out;
}

LossResult iqv0_loss_and_grad(const StateActionTable& q, const StateActionTable& q_target,
                              std::span<const Transition> expert_batch,
                              std::span<const Transition> policy_batch, const Policy& policy,
                              const LsIqConfig& cfg, std::span<const double> initial_dist) {
    if (expert_batch.empty() || policy_batch.empty())
        throw InvalidBatchError("critic batches must be non-empty");
    if (initial_dist.size() != static_cast<std::size_t>(q.n_states))
        throw ConfigurationError("telescoped update needs the MDP initial distribution");
    TargetValues tv = target_soft_values(q_target, policy, cfg.beta);
    std::vector<double> re = batch_rewards(q, tv, expert_batch, cfg.gamma);
    std::vector<double> rp = batch_rewards(q, tv, policy_batch, cfg.gamma);

    const double inv_ne = 1.0 / static_cast<double>(expert_batch.size());
    const double inv_np = 1.0 / static_cast<double>(policy_batch.size());

    double j = 0.0;
    LossResult out;
    out.grad = StateActionTable(q.n_states, q.n_actions, 0.0);
    for (std::size_t i = 0; i < expert_batch.size(); ++i) {
        const Transition& t = expert_batch[i];
        j += inv_ne * (re[i] - cfg.c * cfg.alpha * re[i] * re[i]);
        out.grad(t.s, t.a) -= inv_ne * (1.0 - 2.0 * cfg.c * cfg.alpha * re[i]);
    }
    // Telescoped policy expectation: (1-gamma) E_mu0[V(s0)] on the live table.
    for (int s = 0; s < q.n_states; ++s) {
        double mu = initial_dist[static_cast<std::size_t>(s)];
        if (mu == 0.0) continue;
        double v = cfg.beta * policy.entropy(s);
        for (int a = 0; a < q.n_actions; ++a) v += policy.prob(s, a) * q(s, a);
        j -= (1.0 - cfg.gamma) * mu * v;
        for (int a = 0; a < q.n_actions; ++a)
            out.grad(s, a) += (1.0 - cfg.gamma) * mu * policy.prob(s, a);
    }
    for (std::size_t i = 0; i < policy_batch.size(); ++i) {
        const Transition& t = policy_batch[i];
        j -= inv_np * cfg.c * (1.0 - cfg.alpha) * rp[i] * rp[i];
        out.grad(t.s, t.a) += inv_np * 2.0 * cfg.c * (1.0 - cfg.alpha) * rp[i];
        double p = policy.prob(t.s, t.a);
        if (p > 0.0) j -= cfg.beta * inv_np * (-std::log(p));
    }
    out.loss = -j;
    return out;
}

ObjectiveIdentity objective_identity_check(const StateActionTable& q_soft, const TabularMdp& mdp,
                                           const Policy& policy,
                                           const StateActionDistribution& d_expert,
                                           const StateActionDistribution& d_policy,
                                           const LsIqConfig& cfg) {
    std::vector<double> v = soft_value(q_soft, policy, cfg.beta);
    StateActionTable r(q_soft.n_states, q_soft.n_actions, 0.0);
    for (int s = 0; s < q_soft.n_states; ++s)
        for (int a = 0; a < q_soft.n_actions; ++a) {
            double ev = 0.0;
            auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                ev += next[static_cast<std::size_t>(s2)] * v[static_cast<std::size_t>(s2)];
            r(s, a) = q_soft(s, a) - mdp.gamma * ev;
        }

    double entropy_term = 0.0;
    for (int s = 0; s < q_soft.n_states; ++s)
        for (int a = 0; a < q_soft.n_actions; ++a) {
            double d = d_policy(s, a);
            if (d > 0.0) entropy_term += d * (-std::log(policy.prob(s, a)));
        }

    auto [r_max, r_min] = reward_targets(cfg.c, cfg.alpha);
    ObjectiveIdentity out;
    for (int s = 0; s < q_soft.n_states; ++s)
        for (int a = 0; a < q_soft.n_actions; ++a) {
            double de = d_expert(s, a);
            double dp = d_policy(s, a);
            double ri = r(s, a);
            out.j += de * ri - dp * ri - cfg.c * cfg.alpha * de * ri * ri -
                     cfg.c * (1.0 - cfg.alpha) * dp * ri * ri;
            out.l += cfg.alpha * de * (ri - r_max) * (ri - r_max) +
                     (1.0 - cfg.alpha) * dp * (ri - r_min) * (ri - r_min);
        }
    out.j -= cfg.beta * entropy_term;
    out.l += cfg.beta / cfg.c * entropy_term;
    out.k = 1.0 / (4.0 * cfg.alpha * cfg.c) + 1.0 / (4.0 * (1.0 - cfg.alpha) * cfg.c);
    return out;
}

StateActionTable lsiq_forward_backup(const TabularMdp& mdp, const StateActionTable& reward,
                                     const StateActionTable& q, const Policy& policy) {
    std::vector<double> v(static_cast<std::size_t>(mdp.n_states), 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.is_absorbing(s)) {
            // Reward of absorbing states is action-independent by convention;
            // their value is the geometric tail rather than a bootstrap.
            v[static_cast<std::size_t>(s)] = reward(s, 0) / (1.0 - mdp.gamma);
        } else {
            double acc = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) acc += policy.prob(s, a) * q(s, a);
            v[static_cast<std::size_t>(s)] = acc;
        }
    }
    StateActionTable out(q.n_states, q.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double backup = reward(s, a);
            auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                backup += mdp.gamma * next[static_cast<std::size_t>(s2)] *
                          v[static_cast<std::size_t>(s2)];
            out(s, a) = backup;
        }
    return out;
}

double entropy_clip_update(double tracker, std::span<const double> policy_batch_bonuses,
                           double decay) {
    if (policy_batch_bonuses.empty()) return tracker;
    double batch_max = policy_batch_bonuses[0];
    for (double b : policy_batch_bonuses) batch_max = std::max(batch_max, b);
    if (std::isnan(tracker)) return batch_max;
    return decay * tracker + (1.0 - decay) * batch_max;
}

CriticState critic_step(const CriticState& critic, std::span<const Transition> expert_batch,
                        std::span<const Transition> policy_batch, const Policy& policy,
                        const LsIqConfig& cfg, std::span<const double> initial_dist,
                        LossResult* result_out) {
    cfg.validate();
    CriticState out = critic;

    if (cfg.entropy_clip) {
        std::vector<double> bonuses;
        bonuses.reserve(policy_batch.size());
        for (const Transition& t : policy_batch)
            bonuses.push_back(cfg.beta * policy.entropy(t.s_next));
        out.entropy_cap = entropy_clip_update(out.entropy_cap, bonuses, cfg.entropy_clip_decay);
    }
    const double cap =
        (cfg.entropy_clip && !std::isnan(out.entropy_cap)) ? out.entropy_cap : kInf;

    LossResult res;
    switch (cfg.algorithm) {
        case Algorithm::kLsiq:
            res = ls_loss_and_grad(out.q, out.q_target, expert_batch, policy_batch, policy, cfg,
                                   cap);
            break;
        case Algorithm::kSqil:
            res = sqil_loss_and_grad(out.q, out.q_target, expert_batch, policy_batch, policy, cfg);
            break;
        case Algorithm::kIq:
            res = iq_loss_and_grad(out.q, out.q_target, expert_batch, policy_batch, policy, cfg);
            break;
        case Algorithm::kIqv0:
            res = iqv0_loss_and_grad(out.q, out.q_target, expert_batch, policy_batch, policy, cfg,
                                     initial_dist);
            break;
    }

    for (std::size_t i = 0; i < out.q.size(); ++i) out.q.data[i] -= cfg.lr_q * res.grad.data[i];
    out.step_count += 1;

    if (cfg.target_update.kind == TargetUpdate::Kind::kPolyak) {
        const double tau = cfg.target_update.tau;
        for (std::size_t i = 0; i < out.q.size(); ++i)
            out.q_target.data[i] = (1.0 - tau) * out.q_target.data[i] + tau * out.q.data[i];
    } else if (out.step_count % cfg.target_update.period == 0) {
        out.q_target = out.q;
    }

    if (result_out) *result_out = std::move(res);
    return out;
}

Policy policy_improvement(const CriticState& critic, const LsIqConfig& cfg) {
    StateActionTable q_dag = critic.q;
    if (cfg.use_regularization_critic) {
        if (!critic.g) throw ConfigurationError("combined critic table is not allocated");
        for (std::size_t i = 0; i < q_dag.size(); ++i) q_dag.data[i] += critic.g->data[i];
    } else if (cfg.use_entropy_critic) {
        if (!critic.h) throw ConfigurationError("entropy critic table is not allocated");
        for (std::size_t i = 0; i < q_dag.size(); ++i) q_dag.data[i] += critic.h->data[i];
    }
    return cfg.beta > 0.0 ? maxent_policy(q_dag, cfg.beta) : greedy_policy(q_dag);
}

}  // namespace lsiq
