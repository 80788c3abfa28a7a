#include "lsiq/soft_rl.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lsiq {

CriticState CriticState::zeros(int n_states, int n_actions, bool with_entropy_critic,
                               bool with_combined_critic) {
    CriticState critic;
    critic.q = StateActionTable(n_states, n_actions, 0.0);
    critic.q_target = critic.q;
    if (with_entropy_critic) critic.h = StateActionTable(n_states, n_actions, 0.0);
    if (with_combined_critic) critic.g = StateActionTable(n_states, n_actions, 0.0);
    return critic;
}

namespace {

double logsumexp_row(const StateActionTable& q, int s, double beta) {
    double hi = q(s, 0);
    for (int a = 1; a < q.n_actions; ++a) hi = std::max(hi, q(s, a));
    double acc = 0.0;
    for (int a = 0; a < q.n_actions; ++a) acc += std::exp((q(s, a) - hi) / beta);
    return hi + beta * std::log(acc);
}

/// Solves x = b + gamma * M x for the state-action vector x, where
/// (M x)(s,a) = sum_{s'} P(s'|s,a) sum_{a'} pi(a'|s') x(s',a').
StateActionTable solve_sa_system(const TabularMdp& mdp, const Policy& policy,
                                 const StateActionTable& b, double gamma) {
    const int n = mdp.n_states;
    const int m = mdp.n_actions;
    const int dim = n * m;
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(dim, dim);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) {
            const int row = s * m + a;
            for (int s2 = 0; s2 < n; ++s2) {
                double pr = mdp.p(s, a, s2);
                if (pr == 0.0) continue;
                for (int a2 = 0; a2 < m; ++a2) {
                    double pa = policy.prob(s2, a2);
                    if (pa == 0.0) continue;
                    system(row, s2 * m + a2) -= gamma * pr * pa;
                }
            }
        }
    Eigen::VectorXd rhs(dim);
    for (int i = 0; i < dim; ++i) rhs(i) = b.data[static_cast<std::size_t>(i)];

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    Eigen::VectorXd x = lu.solve(rhs);
    for (int pass = 0; pass < 3; ++pass) {
        Eigen::VectorXd residual = rhs - system * x;
        if (residual.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
            break;
        x += lu.solve(residual);
    }

    StateActionTable out(n, m);
    for (int i = 0; i < dim; ++i) out.data[static_cast<std::size_t>(i)] = x(i);
    return out;
}

/// Per-state expected entropy bonus beta * H(pi(.|s)).
std::vector<double> entropy_bonus_per_state(const Policy& policy, double beta) {
    std::vector<double> bonus(static_cast<std::size_t>(policy.n_states()), 0.0);
    for (int s = 0; s < policy.n_states(); ++s) bonus[static_cast<std::size_t>(s)] = beta * policy.entropy(s);
    return bonus;
}

}  // namespace

Policy maxent_policy(const StateActionTable& q_soft, double beta) {
    if (!(beta > 0.0)) throw InvalidTemperatureError("softmax temperature must be positive");
    Policy pi;
    pi.beta = beta;
    pi.probs = StateActionTable(q_soft.n_states, q_soft.n_actions, 0.0);
    for (int s = 0; s < q_soft.n_states; ++s) {
        double hi = q_soft(s, 0);
        for (int a = 1; a < q_soft.n_actions; ++a) hi = std::max(hi, q_soft(s, a));
        double z = 0.0;
        for (int a = 0; a < q_soft.n_actions; ++a) {
            double w = std::exp((q_soft(s, a) - hi) / beta);
            pi.probs(s, a) = w;
            z += w;
        }
        for (int a = 0; a < q_soft.n_actions; ++a) pi.probs(s, a) /= z;
    }
    return pi;
}

Policy greedy_policy(const StateActionTable& q) {
    Policy pi;
    pi.beta = 0.0;
    pi.probs = StateActionTable(q.n_states, q.n_actions, 0.0);
    for (int s = 0; s < q.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < q.n_actions; ++a)
            if (q(s, a) > q(s, best)) best = a;
        pi.probs(s, best) = 1.0;
    }
    return pi;
}

std::vector<double> soft_value(const StateActionTable& q_soft, const Policy& policy, double beta) {
    std::vector<double> v(static_cast<std::size_t>(q_soft.n_states), 0.0);
    for (int s = 0; s < q_soft.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < q_soft.n_actions; ++a) {
            double p = policy.prob(s, a);
            if (p > 0.0) acc += p * (q_soft(s, a) - beta * std::log(p));
        }
        v[static_cast<std::size_t>(s)] = acc;
    }
    return v;
}

StateActionTable soft_value_iteration(const TabularMdp& mdp, const StateActionTable& reward,
                                      double beta, double tol, int max_sweeps) {
    if (!(beta > 0.0)) throw InvalidTemperatureError("softmax temperature must be positive");
    if (!(tol > 0.0)) throw InvalidEnvironmentError("tolerance must be positive");
    const int n = mdp.n_states;
    const int m = mdp.n_actions;

    // Absorbing values in closed form: V(s_A) solves
    // V = beta*logsumexp((r(s_A,.) + gamma V)/beta), i.e.
    // V = beta*logsumexp(r(s_A,.)/beta) / (1-gamma).
    std::vector<double> absorbing_value(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s)
        if (mdp.is_absorbing(s))
            absorbing_value[static_cast<std::size_t>(s)] =
                logsumexp_row(reward, s, beta) / (1.0 - mdp.gamma);

    StateActionTable q(n, m, 0.0);
    for (int s = 0; s < n; ++s)
        if (mdp.is_absorbing(s))
            for (int a = 0; a < m; ++a)
                q(s, a) = reward(s, a) + mdp.gamma * absorbing_value[static_cast<std::size_t>(s)];

    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int s = 0; s < n; ++s)
            v[static_cast<std::size_t>(s)] =
                mdp.is_absorbing(s) ? absorbing_value[static_cast<std::size_t>(s)]
                                    : logsumexp_row(q, s, beta);
        residual = 0.0;
        for (int s = 0; s < n; ++s) {
            if (mdp.is_absorbing(s)) continue;  // pinned to the closed form
            for (int a = 0; a < m; ++a) {
                double backup = reward(s, a);
                auto next = mdp.next_dist(s, a);
                for (int s2 = 0; s2 < n; ++s2)
                    if (next[static_cast<std::size_t>(s2)] > 0.0)
                        backup += mdp.gamma * next[static_cast<std::size_t>(s2)] *
                                  v[static_cast<std::size_t>(s2)];
                residual = std::max(residual, std::abs(backup - q(s, a)));
                q(s, a) = backup;
            }
        }
        if (residual <= tol) return q;
    }
    throw ConvergenceFailureError("soft value iteration did not converge", residual);
}

StateActionTable policy_evaluation_hard(const TabularMdp& mdp, const StateActionTable& reward,
                                        const Policy& policy) {
    policy.validate(1e-10);
    return solve_sa_system(mdp, policy, reward, mdp.gamma);
}

StateActionTable soft_policy_evaluation(const TabularMdp& mdp, const StateActionTable& reward,
                                        const Policy& policy, double beta) {
    policy.validate(1e-10);
    // q = (r + gamma P e) + gamma P Pi q, with e the per-state entropy bonus.
    std::vector<double> bonus = entropy_bonus_per_state(policy, beta);
    StateActionTable b = reward;
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                b(s, a) += mdp.gamma * next[static_cast<std::size_t>(s2)] *
                           bonus[static_cast<std::size_t>(s2)];
        }
    return solve_sa_system(mdp, policy, b, mdp.gamma);
}

StateActionTable entropy_critic(const TabularMdp& mdp, const Policy& policy, double beta) {
    policy.validate(1e-10);
    std::vector<double> bonus = entropy_bonus_per_state(policy, beta);
    StateActionTable b(mdp.n_states, mdp.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto next = mdp.next_dist(s, a);
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                b(s, a) += mdp.gamma * next[static_cast<std::size_t>(s2)] *
                           bonus[static_cast<std::size_t>(s2)];
        }
    return solve_sa_system(mdp, policy, b, mdp.gamma);
}

TableLossResult combined_critic_loss(const StateActionTable& g_pred, const StateActionTable& g_boot,
                                     std::span<const Transition> batch, std::span<const double> r_q,
                                     double k, double beta, double gamma, const Policy& policy) {
    if (batch.empty()) throw InvalidBatchError("combined critic batch is empty");
    TableLossResult out;
    out.grad = StateActionTable(g_pred.n_states, g_pred.n_actions, 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& t = batch[i];
        double next = 0.0;
        for (int a2 = 0; a2 < g_boot.n_actions; ++a2) {
            double p = policy.prob(t.s_next, a2);
            if (p > 0.0) next += p * (-beta * std::log(p) + g_boot(t.s_next, a2));
        }
        double target = k * r_q[i] * r_q[i] + gamma * next;
        double residual = g_pred(t.s, t.a) - target;
        out.loss += residual * residual * inv_n;
        out.grad(t.s, t.a) += 2.0 * residual * inv_n;
    }
    return out;
}

double combined_critic_update(StateActionTable& g, std::span<const Transition> batch,
                              std::span<const double> r_q, double k, double beta, double gamma,
                              const Policy& policy, double lr) {
    TableLossResult res = combined_critic_loss(g, g, batch, r_q, k, beta, gamma, policy);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] -= lr * res.grad.data[i];
    return res.loss;
}

}  // namespace lsiq
