#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "lsiq/divergence.hpp"
#include "lsiq/experiment.hpp"
#include "lsiq/synthetic.hpp"

namespace lsiq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

/// Central finite differences of `loss(q)` with respect to every table
/// entry. All critic losses are quadratic in the prediction table, so the
/// central difference is exact up to round-off.
StateActionTable numeric_gradient(const std::function<double(const StateActionTable&)>& loss,
                                  StateActionTable q, double h = 1e-4) {
    StateActionTable grad(q.n_states, q.n_actions, 0.0);
    for (std::size_t i = 0; i < q.data.size(); ++i) {
        double saved = q.data[i];
        q.data[i] = saved + h;
        double up = loss(q);
        q.data[i] = saved - h;
        double down = loss(q);
        q.data[i] = saved;
        grad.data[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double gradient_rel_error(const StateActionTable& analytic, const StateActionTable& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.data.size(); ++i) {
        double denom = std::max({1.0, std::abs(analytic.data[i]), std::abs(numeric.data[i])});
        worst = std::max(worst, std::abs(analytic.data[i] - numeric.data[i]) / denom);
    }
    return worst;
}

std::vector<Transition> random_batch(RandomStream& rng, const TabularMdp& mdp, int size) {
    std::vector<Transition> batch;
    batch.reserve(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        int s = rng.uniform_int(mdp.n_states);
        int a = rng.uniform_int(mdp.n_actions);
        int s2 = rng.categorical(mdp.next_dist(s, a));
        batch.push_back(Transition{s, a, s2, mdp.is_absorbing(s2)});
    }
    return batch;
}

struct SuiteBuilder {
    std::vector<PropertyCheck> checks;

    void add(const std::string& name, bool pass, double worst, const std::string& detail) {
        checks.push_back(PropertyCheck{name, pass, worst, detail});
    }
};

void check_occupancy(SuiteBuilder& suite, RandomStream& rng) {
    double worst_mass = 0.0;
    double worst_norm = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(8), 2 + rng.uniform_int(3), 0.3,
                                    rng.uniform(0.3, 0.97));
        Policy pi = random_policy(rng, mdp.n_states, mdp.n_actions);
        StateActionDistribution rho = occupancy_measure(mdp, pi);
        worst_mass = std::max(worst_mass, std::abs(rho.total_mass() - 1.0 / (1.0 - mdp.gamma)));
        StateActionDistribution d = occupancy_to_distribution(rho);
        d.validate_distribution(1e-10);
        worst_norm = std::max(worst_norm, std::abs(d.total_mass() - 1.0));
    }
    suite.add("occupancy mass = 1/(1-gamma)", worst_mass <= 1e-10, worst_mass,
              "worst |mass - 1/(1-gamma)| = " + fmt(worst_mass));
    suite.add("occupancy normalizes to a distribution", worst_norm <= 1e-12, worst_norm,
              "worst |mass - 1| = " + fmt(worst_norm));
}

void check_rollout_determinism(SuiteBuilder& suite, RandomStream& rng) {
    TabularMdp mdp = random_mdp(rng, 8, 3, 0.2, 0.95);
    Policy pi = random_policy(rng, 8, 3);
    bool identical = true;
    for (int trial = 0; trial < 10; ++trial) {
        std::uint64_t seed = rng.engine()();
        auto a = rollout(mdp, pi, 60, seed);
        auto b = rollout(mdp, pi, 60, seed);
        identical = identical && a.size() == b.size();
        for (std::size_t i = 0; identical && i < a.size(); ++i)
            identical = a[i].s == b[i].s && a[i].a == b[i].a && a[i].s_next == b[i].s_next &&
                        a[i].absorbing_next == b[i].absorbing_next;
    }
    suite.add("rollouts are seed-reproducible", identical, identical ? 0.0 : 1.0,
              identical ? "10/10 seed pairs identical" : "trajectory mismatch");
}

void check_softmax_shift_invariance(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        int ns = 2 + rng.uniform_int(6);
        int na = 2 + rng.uniform_int(4);
        StateActionTable q = random_table(rng, ns, na, -5.0, 5.0);
        double beta = rng.uniform(0.1, 3.0);
        Policy base = maxent_policy(q, beta);
        StateActionTable shifted = q;
        for (int s = 0; s < ns; ++s) {
            double c = rng.uniform(-100.0, 100.0);
            for (int a = 0; a < na; ++a) shifted(s, a) += c;
        }
        Policy moved = maxent_policy(shifted, beta);
        worst = std::max(worst, base.probs.max_abs_diff(moved.probs));
    }
    suite.add("softmax shift invariance", worst <= 1e-12, worst,
              "worst probability shift = " + fmt(worst));
}

void check_soft_hard_decomposition(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(8), 2 + rng.uniform_int(3), 0.25,
                                    rng.uniform(0.3, 0.97));
        Policy pi = random_policy(rng, mdp.n_states, mdp.n_actions);
        StateActionTable reward = random_table(rng, mdp.n_states, mdp.n_actions, -1.0, 1.0);
        double beta = rng.uniform(0.05, 2.0);
        StateActionTable soft = soft_policy_evaluation(mdp, reward, pi, beta);
        StateActionTable hard = policy_evaluation_hard(mdp, reward, pi);
        StateActionTable h = entropy_critic(mdp, pi, beta);
        for (std::size_t i = 0; i < soft.data.size(); ++i)
            worst = std::max(worst, std::abs(soft.data[i] - hard.data[i] - h.data[i]));
    }
    suite.add("soft evaluation = hard evaluation + entropy critic", worst <= 1e-8, worst,
              "worst decomposition residual = " + fmt(worst));
}

void check_entropy_critic_cases(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    // Deterministic policy -> zero entropy critic.
    TabularMdp mdp = random_mdp(rng, 6, 3, 0.0, 0.9);
    StateActionTable fake(6, 3, 0.0);
    for (int s = 0; s < 6; ++s) fake(s, rng.uniform_int(3)) = 1.0;
    Policy det;
    det.probs = fake;
    StateActionTable h_det = entropy_critic(mdp, det, 1.0);
    for (double v : h_det.data) worst = std::max(worst, std::abs(v));

    // Uniform policy with no absorbing states: gamma * beta * log|A| / (1-gamma).
    Policy uni = Policy::uniform(6, 3);
    StateActionTable h_uni = entropy_critic(mdp, uni, 1.0);
    double expected = 0.9 * std::log(3.0) / 0.1;
    double nonneg_floor = 0.0;
    for (double v : h_uni.data) {
        worst = std::max(worst, std::abs(v - expected));
        nonneg_floor = std::min(nonneg_floor, v);
    }
    suite.add("entropy critic closed forms", worst <= 1e-8 && nonneg_floor >= -1e-12, worst,
              "worst residual = " + fmt(worst));
}

void check_soft_vi_fixed_point(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    const double tol = 1e-9;
    for (int trial = 0; trial < 10; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(6), 2 + rng.uniform_int(3), 0.3,
                                    rng.uniform(0.3, 0.9));
        StateActionTable reward = random_table(rng, mdp.n_states, mdp.n_actions, -1.0, 1.0);
        for (int s = 0; s < mdp.n_states; ++s)
            if (mdp.is_absorbing(s))
                for (int a = 1; a < mdp.n_actions; ++a) reward(s, a) = reward(s, 0);
        double beta = rng.uniform(0.1, 1.0);
        StateActionTable q = soft_value_iteration(mdp, reward, beta, tol);
        // One more backup must move the table by no more than tol.
        Policy pi = maxent_policy(q, beta);
        std::vector<double> v = soft_value(q, pi, beta);
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_absorbing(s)) continue;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double backup = reward(s, a);
                auto next = mdp.next_dist(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2)
                    backup += mdp.gamma * next[static_cast<std::size_t>(s2)] *
                              v[static_cast<std::size_t>(s2)];
                worst = std::max(worst, std::abs(backup - q(s, a)));
            }
        }
    }
    suite.add("soft value iteration reaches a fixed point", worst <= tol, worst,
              "worst one-step residual = " + fmt(worst) + " (tol " + fmt(tol) + ")");
}

void check_divergence_bounds(SuiteBuilder& suite, RandomStream& rng) {
    const double c_grid[] = {0.25, 0.5, 1.0, 2.0};
    double worst_closed = 0.0;
    double worst_reward = 0.0;
    double worst_match = 0.0;
    double worst_dominance = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        int ns = 2 + rng.uniform_int(4);
        int na = 2 + rng.uniform_int(3);
        MixtureSpec spec;
        spec.alpha = 0.5;
        spec.c = c_grid[trial % 4];
        spec.d_expert = random_distribution(rng, ns, na, 0.3);
        spec.d_policy = random_distribution(rng, ns, na, 0.3);
        double closed = chi2_mixture_closed_form(spec);
        worst_closed = std::max({worst_closed, -closed, closed - 1.0 / spec.c});
        StateActionTable r_star = optimal_reward(spec);
        for (double v : r_star.data)
            worst_reward = std::max(worst_reward, std::abs(v) - 1.0 / spec.c);
        worst_match = std::max(worst_match,
                               std::abs(variational_objective(r_star, spec) - closed));
        StateActionTable r_rand = random_table(rng, ns, na, -1.5 / spec.c, 1.5 / spec.c);
        worst_dominance =
            std::max(worst_dominance, variational_objective(r_rand, spec) - closed);
    }
    suite.add("mixture divergence in [0, 1/c]", worst_closed <= 1e-12, worst_closed,
              "worst bound violation = " + fmt(worst_closed));
    suite.add("optimal reward in [-1/c, 1/c]", worst_reward <= 1e-12, worst_reward,
              "worst bound violation = " + fmt(worst_reward));
    suite.add("variational value at r* equals closed form", worst_match <= 1e-10, worst_match,
              "worst mismatch = " + fmt(worst_match));
    suite.add("r* dominates random rewards", worst_dominance <= 1e-12, worst_dominance,
              "worst dominance violation = " + fmt(worst_dominance));
}

void check_convexity_bound(SuiteBuilder& suite, RandomStream& rng) {
    const double alphas[] = {0.1, 0.5, 0.9};
    int failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        int ns = 2 + rng.uniform_int(4);
        int na = 2 + rng.uniform_int(3);
        StateActionDistribution de = random_distribution(rng, ns, na, 0.25);
        StateActionDistribution dp = random_distribution(rng, ns, na, 0.25);
        for (double alpha : alphas)
            if (!chi2_convexity_bound_check(de, dp, alpha)) failures += 1;
    }
    suite.add("mixture convexity bound", failures == 0, static_cast<double>(failures),
              std::to_string(failures) + " violations over 300 checks");
}

void check_affine_equivalence(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int ns = 2 + rng.uniform_int(9);
        int na = 2 + rng.uniform_int(3);
        TabularMdp mdp = random_mdp(rng, ns, na, 0.2, rng.uniform(0.3, 0.97));
        Policy pi = random_policy(rng, ns, na);
        StateActionTable q = random_table(rng, ns, na, -3.0, 3.0);
        LsIqConfig cfg;
        cfg.c = rng.uniform(0.25, 2.0);
        cfg.alpha = rng.uniform(0.15, 0.85);
        cfg.beta = rng.uniform(0.0, 1.0);
        cfg.gamma = mdp.gamma;
        StateActionDistribution de = random_distribution(rng, ns, na, 0.0);
        StateActionDistribution dp = random_distribution(rng, ns, na, 0.0);
        ObjectiveIdentity identity = objective_identity_check(q, mdp, pi, de, dp, cfg);
        worst = std::max(worst, std::abs(identity.j + cfg.c * identity.l - identity.k));
    }
    suite.add("affine equivalence J + c*L = K", worst <= 1e-10, worst,
              "worst |J + c*L - K| = " + fmt(worst));
}

void check_target_bounds(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    bool fixed_exact = true;
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp mdp = random_mdp(rng, 6, 3, 0.35, 0.95);
        Policy pi = random_policy(rng, 6, 3);
        LsIqConfig cfg;
        cfg.gamma = mdp.gamma;
        cfg.clip_targets = true;
        cfg.fixed_expert_target = trial % 2 == 0;
        cfg.operator_kind = trial % 3 == 0 ? OperatorKind::kIq : OperatorKind::kLsiq;
        RewardTargets t = cfg.targets();
        CriticState critic = CriticState::zeros(6, 3, false, false);
        // Hostile target table far outside the admissible range.
        critic.q_target = random_table(rng, 6, 3, -10.0 * t.q_max, 10.0 * t.q_max);
        auto expert_batch = random_batch(rng, mdp, 24);
        auto policy_batch = random_batch(rng, mdp, 24);
        LossResult res = ls_loss_and_grad(critic, expert_batch, policy_batch, pi, cfg);
        for (double target : res.expert_targets) {
            worst = std::max({worst, t.q_min - target, target - t.q_max});
            if (cfg.fixed_expert_target && target != t.q_max) fixed_exact = false;
        }
        for (double target : res.policy_targets)
            worst = std::max({worst, t.q_min - target, target - t.q_max});
    }
    suite.add("clipped targets stay in [q_min, q_max]", worst <= 0.0 && fixed_exact, worst,
              "worst excursion = " + fmt(worst));
}

void check_operator_agreement(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp mdp = random_mdp(rng, 7, 3, 0.0, 0.93);  // no absorbing states
        CriticState critic = CriticState::zeros(7, 3, false, false);
        critic.q = random_table(rng, 7, 3, -2.0, 2.0);
        Policy pi = random_policy(rng, 7, 3);
        std::vector<double> values = soft_value(critic.q, pi, 0.3);
        auto batch = random_batch(rng, mdp, 32);
        LsIqConfig cfg;
        cfg.gamma = mdp.gamma;
        cfg.operator_kind = OperatorKind::kIq;
        auto r_iq = implicit_reward(critic, batch, values, cfg, false);
        cfg.operator_kind = OperatorKind::kLsiq;
        auto r_ls = implicit_reward(critic, batch, values, cfg, false);
        for (std::size_t i = 0; i < r_iq.size(); ++i)
            worst = std::max(worst, std::abs(r_iq[i] - r_ls[i]));
    }
    suite.add("operators agree on non-absorbing data", worst == 0.0, worst,
              "worst reward difference = " + fmt(worst));
}

void check_gradients(SuiteBuilder& suite, RandomStream& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 6; ++trial) {
        TabularMdp mdp = random_mdp(rng, 5, 3, 0.3, 0.9);
        Policy pi = random_policy(rng, 5, 3);
        LsIqConfig cfg;
        cfg.gamma = mdp.gamma;
        cfg.c = rng.uniform(0.3, 1.5);
        cfg.alpha = rng.uniform(0.2, 0.8);
        cfg.beta = rng.uniform(0.0, 0.5);
        cfg.fixed_expert_target = trial % 2 == 0;
        cfg.clip_targets = trial % 3 == 0;
        cfg.operator_kind = trial % 2 == 0 ? OperatorKind::kLsiq : OperatorKind::kIq;
        cfg.sqil_symmetric_targets = trial % 2 == 1;
        StateActionTable q = random_table(rng, 5, 3, -3.0, 3.0);
        StateActionTable q_target = random_table(rng, 5, 3, -3.0, 3.0);
        auto expert_batch = random_batch(rng, mdp, 16);
        auto policy_batch = random_batch(rng, mdp, 16);

        auto check_loss = [&](auto&& loss_fn, const StateActionTable& analytic) {
            StateActionTable numeric = numeric_gradient(loss_fn, q);
            worst = std::max(worst, gradient_rel_error(analytic, numeric));
        };

        check_loss(
            [&](const StateActionTable& qq) {
                return ls_loss_and_grad(qq, q_target, expert_batch, policy_batch, pi, cfg, kInf)
                    .loss;
            },
            ls_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, cfg, kInf).grad);
        check_loss(
            [&](const StateActionTable& qq) {
                return sqil_loss_and_grad(qq, q_target, expert_batch, policy_batch, pi, cfg).loss;
            },
            sqil_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, cfg).grad);
        check_loss(
            [&](const StateActionTable& qq) {
                return iq_loss_and_grad(qq, q_target, expert_batch, policy_batch, pi, cfg).loss;
            },
            iq_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, cfg).grad);
        check_loss(
            [&](const StateActionTable& qq) {
                return iqv0_loss_and_grad(qq, q_target, expert_batch, policy_batch, pi, cfg,
                                          mdp.initial_dist)
                    .loss;
            },
            iqv0_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, cfg, mdp.initial_dist)
                .grad);

        // Combined-critic loss, gradient with respect to the prediction table.
        StateActionTable g_pred = random_table(rng, 5, 3, -2.0, 2.0);
        StateActionTable g_boot = random_table(rng, 5, 3, -2.0, 2.0);
        std::vector<double> r_q(policy_batch.size());
        for (double& v : r_q) v = rng.uniform(-2.0, 2.0);
        double k = cfg.regularization_k();
        StateActionTable g_analytic =
            combined_critic_loss(g_pred, g_boot, policy_batch, r_q, k, cfg.beta, cfg.gamma, pi)
                .grad;
        StateActionTable g_numeric = numeric_gradient(
            [&](const StateActionTable& gg) {
                return combined_critic_loss(gg, g_boot, policy_batch, r_q, k, cfg.beta, cfg.gamma,
                                            pi)
                    .loss;
            },
            g_pred);
        worst = std::max(worst, gradient_rel_error(g_analytic, g_numeric));
    }
    suite.add("analytic gradients match finite differences", worst <= 1e-6, worst,
              "worst relative error = " + fmt(worst));
}

void check_sqil_reduction(SuiteBuilder& suite, RandomStream& rng) {
    bool bitwise = true;
    for (int trial = 0; trial < 10; ++trial) {
        TabularMdp mdp = random_mdp(rng, 6, 3, 0.3, 0.95);
        Policy pi = random_policy(rng, 6, 3);
        StateActionTable q = random_table(rng, 6, 3, -3.0, 3.0);
        StateActionTable q_target = random_table(rng, 6, 3, -3.0, 3.0);
        auto expert_batch = random_batch(rng, mdp, 20);
        auto policy_batch = random_batch(rng, mdp, 20);

        LsIqConfig degraded;
        degraded.gamma = mdp.gamma;
        degraded.operator_kind = OperatorKind::kIq;
        degraded.fixed_expert_target = false;
        degraded.clip_targets = false;
        degraded.entropy_clip = false;
        degraded.beta = 0.2;
        LossResult ls =
            ls_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, degraded, kInf);

        LsIqConfig sqil = degraded;
        sqil.algorithm = Algorithm::kSqil;
        sqil.sqil_symmetric_targets = true;
        LossResult sq = sqil_loss_and_grad(q, q_target, expert_batch, policy_batch, pi, sqil);

        bitwise = bitwise && ls.loss == sq.loss;
        for (std::size_t i = 0; i < ls.grad.data.size(); ++i)
            bitwise = bitwise && ls.grad.data[i] == sq.grad.data[i];
    }
    suite.add("degraded critic loss reduces to symmetric fixed-reward loss", bitwise,
              bitwise ? 0.0 : 1.0, bitwise ? "gradients bitwise identical" : "gradient mismatch");
}

void check_forward_operator(SuiteBuilder& suite, RandomStream& rng) {
    double worst_fp = 0.0;
    double worst_contraction = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(8), 2 + rng.uniform_int(3), 0.4,
                                    rng.uniform(0.3, 0.97));
        Policy pi = random_policy(rng, mdp.n_states, mdp.n_actions);
        const StateActionTable& reward = *mdp.true_reward;
        StateActionTable q_pi = policy_evaluation_hard(mdp, reward, pi);
        StateActionTable backed = lsiq_forward_backup(mdp, reward, q_pi, pi);
        worst_fp = std::max(worst_fp, backed.max_abs_diff(q_pi));

        StateActionTable qa = random_table(rng, mdp.n_states, mdp.n_actions, -5.0, 5.0);
        StateActionTable qb = random_table(rng, mdp.n_states, mdp.n_actions, -5.0, 5.0);
        double lhs = lsiq_forward_backup(mdp, reward, qa, pi)
                         .max_abs_diff(lsiq_forward_backup(mdp, reward, qb, pi));
        double rhs = mdp.gamma * qa.max_abs_diff(qb);
        worst_contraction = std::max(worst_contraction, lhs - rhs);
    }
    suite.add("forward backup fixes Q^pi", worst_fp <= 1e-8, worst_fp,
              "worst fixed-point residual = " + fmt(worst_fp));
    suite.add("forward backup is a gamma-contraction", worst_contraction <= 1e-12,
              worst_contraction, "worst contraction excess = " + fmt(worst_contraction));
}

}  // namespace

VerifyReport run_property_suite(std::uint64_t seed) {
    RandomStream rng(derive_seed(seed, 0xfeed));
    SuiteBuilder suite;
    check_occupancy(suite, rng);
    check_rollout_determinism(suite, rng);
    check_softmax_shift_invariance(suite, rng);
    check_soft_hard_decomposition(suite, rng);
    check_entropy_critic_cases(suite, rng);
    check_soft_vi_fixed_point(suite, rng);
    check_divergence_bounds(suite, rng);
    check_convexity_bound(suite, rng);
    check_affine_equivalence(suite, rng);
    check_target_bounds(suite, rng);
    check_operator_agreement(suite, rng);
    check_gradients(suite, rng);
    check_sqil_reduction(suite, rng);
    check_forward_operator(suite, rng);
    return VerifyReport{suite.checks};
}

}  // namespace lsiq
