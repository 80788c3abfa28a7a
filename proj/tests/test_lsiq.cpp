#include <doctest.h>

#include <cmath>
#include <limits>

#include "lsiq/lsiq.hpp"
#include "lsiq/synthetic.hpp"
#include "oracles.hpp"

using namespace lsiq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Transition> draw_batch(RandomStream& rng, const TabularMdp& mdp, int size) {
    std::vector<Transition> batch;
    for (int i = 0; i < size; ++i) {
        int s = rng.uniform_int(mdp.n_states);
        int a = rng.uniform_int(mdp.n_actions);
        int s2 = rng.categorical(mdp.next_dist(s, a));
        batch.push_back({s, a, s2, mdp.is_absorbing(s2)});
    }
    return batch;
}

}  // namespace

TEST_CASE("reward targets and q bounds") {
    auto [r1, r2] = reward_targets(1.0, 0.5);
    CHECK(r1 == doctest::Approx(1.0));
    CHECK(r2 == doctest::Approx(-1.0));

    auto [r3, r4] = reward_targets(0.5, 0.5);
    CHECK(r3 == doctest::Approx(2.0));
    CHECK(r4 == doctest::Approx(-2.0));

    auto [r5, r6] = reward_targets(1.0, 0.25);
    CHECK(r5 == doctest::Approx(2.0));
    CHECK(r6 == doctest::Approx(-2.0 / 3.0));

    CHECK_THROWS_AS(reward_targets(1.0, 0.0), InfiniteTargetError);
    CHECK_THROWS_AS(reward_targets(1.0, 1.0), InfiniteTargetError);

    auto [q1, q2] = q_bounds(2.0, -2.0, 0.99);
    CHECK(q1 == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(q2 == doctest::Approx(-200.0).epsilon(1e-12));
    auto [q3, q4] = q_bounds(1.0, -1.0, 0.9);
    CHECK(q3 == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(q4 == doctest::Approx(-10.0).epsilon(1e-12));
    auto [q5, q6] = q_bounds(0.0, 0.0, 0.5);
    CHECK(q5 == 0.0);
    CHECK(q6 == 0.0);
}

TEST_CASE("implicit reward: operator behaviour per transition") {
    LsIqConfig cfg;
    cfg.gamma = 0.9;
    CriticState critic = CriticState::zeros(3, 2, false, false);
    for (double& v : critic.q.data) v = 5.0;
    std::vector<double> values = {5.0, 5.0, 5.0};

    SUBCASE("non-absorbing transitions agree across operators") {
        std::vector<Transition> batch{{0, 0, 1, false}, {1, 1, 2, false}};
        cfg.operator_kind = OperatorKind::kIq;
        auto r_iq = implicit_reward(critic, batch, values, cfg, false);
        cfg.operator_kind = OperatorKind::kLsiq;
        auto r_ls = implicit_reward(critic, batch, values, cfg, false);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            CHECK(r_iq[i] == r_ls[i]);
            // Constant table with V = Q0 gives (1-gamma) Q0.
            CHECK(r_iq[i] == doctest::Approx(0.1 * 5.0).epsilon(1e-12));
        }
    }
    SUBCASE("absorbing transition uses the closed-form tail") {
        std::vector<Transition> batch{{0, 0, 2, true}};
        cfg.operator_kind = OperatorKind::kLsiq;
        auto [r_max, r_min] = reward_targets(cfg.c, cfg.alpha);
        auto r_policy = implicit_reward(critic, batch, values, cfg, false);
        CHECK(r_policy[0] == doctest::Approx(5.0 - cfg.gamma * r_min / 0.1).epsilon(1e-12));
        auto r_expert = implicit_reward(critic, batch, values, cfg, true);
        CHECK(r_expert[0] == doctest::Approx(5.0 - cfg.gamma * r_max / 0.1).epsilon(1e-12));
        cfg.operator_kind = OperatorKind::kIq;
        auto r_iq = implicit_reward(critic, batch, values, cfg, false);
        CHECK(r_iq[0] == doctest::Approx(5.0));  // masked bootstrap
    }
}

TEST_CASE("least-squares loss: vanishing residuals and empty batches") {
    LsIqConfig cfg;
    cfg.gamma = 0.9;
    cfg.fixed_expert_target = true;
    RewardTargets t = cfg.targets();

    CriticState critic = CriticState::zeros(3, 2, false, false);
    Policy pi = Policy::uniform(3, 2);
    // Expert pairs sit at q_max; policy transitions are absorbing ones whose
    // Q already equals q_min, so both residuals vanish.
    critic.q(0, 0) = t.q_max;
    critic.q(1, 1) = t.q_min;
    std::vector<Transition> expert{{0, 0, 1, false}};
    std::vector<Transition> policy_batch{{1, 1, 2, true}};
    LossResult res = ls_loss_and_grad(critic, expert, policy_batch, pi, cfg);
    CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-14));
    for (double g : res.grad.data) CHECK(g == 0.0);

    CHECK_THROWS_AS(ls_loss_and_grad(critic, {}, policy_batch, pi, cfg), InvalidBatchError);
    CHECK_THROWS_AS(ls_loss_and_grad(critic, expert, {}, pi, cfg), InvalidBatchError);
}

TEST_CASE("least-squares loss: fixed expert targets and clipping post-conditions") {
    RandomStream rng(67);
    TabularMdp mdp = random_mdp(rng, 6, 3, 0.35, 0.95);
    Policy pi = random_policy(rng, 6, 3);
    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.clip_targets = true;
    RewardTargets t = cfg.targets();

    CriticState critic = CriticState::zeros(6, 3, false, false);
    critic.q = random_table(rng, 6, 3, -1.0, 1.0);
    // Hostile target entries far outside the admissible range.
    critic.q_target = random_table(rng, 6, 3, -10.0 * t.q_max, 10.0 * t.q_max);

    auto expert = draw_batch(rng, mdp, 32);
    auto policy_batch = draw_batch(rng, mdp, 32);

    SUBCASE("bootstrapped targets are clipped into [q_min, q_max]") {
        cfg.fixed_expert_target = false;
        LossResult res = ls_loss_and_grad(critic, expert, policy_batch, pi, cfg);
        for (double target : res.expert_targets) {
            CHECK(target >= t.q_min - 1e-12);
            CHECK(target <= t.q_max + 1e-12);
        }
        for (double target : res.policy_targets) {
            CHECK(target >= t.q_min - 1e-12);
            CHECK(target <= t.q_max + 1e-12);
        }
    }
    SUBCASE("fixed expert targets are exactly q_max") {
        cfg.fixed_expert_target = true;
        LossResult res = ls_loss_and_grad(critic, expert, policy_batch, pi, cfg);
        for (double target : res.expert_targets) CHECK(target == t.q_max);
    }
}

TEST_CASE("loss gradients match central finite differences") {
    RandomStream rng(71);
    TabularMdp mdp = random_mdp(rng, 5, 3, 0.3, 0.9);
    Policy pi = random_policy(rng, 5, 3);
    StateActionTable q = random_table(rng, 5, 3, -3.0, 3.0);
    StateActionTable q_target = random_table(rng, 5, 3, -3.0, 3.0);
    auto expert = draw_batch(rng, mdp, 16);
    auto policy_batch = draw_batch(rng, mdp, 16);

    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.beta = 0.3;
    cfg.fixed_expert_target = false;

    auto fd_check = [&](auto&& loss_fn, const StateActionTable& analytic) {
        StateActionTable numeric = test::finite_difference_gradient(loss_fn, q);
        CHECK(test::max_rel_error(analytic, numeric) < 1e-6);
    };

    fd_check(
        [&](const StateActionTable& qq) {
            return ls_loss_and_grad(qq, q_target, expert, policy_batch, pi, cfg, kInf).loss;
        },
        ls_loss_and_grad(q, q_target, expert, policy_batch, pi, cfg, kInf).grad);
    fd_check(
        [&](const StateActionTable& qq) {
            return sqil_loss_and_grad(qq, q_target, expert, policy_batch, pi, cfg).loss;
        },
        sqil_loss_and_grad(q, q_target, expert, policy_batch, pi, cfg).grad);
    fd_check(
        [&](const StateActionTable& qq) {
            return iq_loss_and_grad(qq, q_target, expert, policy_batch, pi, cfg).loss;
        },
        iq_loss_and_grad(q, q_target, expert, policy_batch, pi, cfg).grad);
    fd_check(
        [&](const StateActionTable& qq) {
            return iqv0_loss_and_grad(qq, q_target, expert, policy_batch, pi, cfg,
                                      mdp.initial_dist)
                .loss;
        },
        iqv0_loss_and_grad(q, q_target, expert, policy_batch, pi, cfg, mdp.initial_dist).grad);
}

TEST_CASE("objective identity: J + c*L = K") {
    LsIqConfig half;
    half.c = 0.5;
    half.alpha = 0.5;
    CHECK(half.targets().r_max == doctest::Approx(2.0));
    // K = 1/(4 alpha c) + 1/(4 (1-alpha) c) = 2 for c = 1/2, alpha = 1/2.
    RandomStream rng(73);
    TabularMdp mdp0 = random_mdp(rng, 4, 2, 0.2, 0.9);
    ObjectiveIdentity id0 =
        objective_identity_check(random_table(rng, 4, 2, -1.0, 1.0), mdp0,
                                 random_policy(rng, 4, 2), random_distribution(rng, 4, 2, 0.0),
                                 random_distribution(rng, 4, 2, 0.0), half);
    CHECK(id0.k == doctest::Approx(2.0));

    for (int trial = 0; trial < 30; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(8), 2 + rng.uniform_int(3), 0.2,
                                    rng.uniform(0.3, 0.97));
        Policy pi = random_policy(rng, mdp.n_states, mdp.n_actions);
        LsIqConfig cfg;
        cfg.c = rng.uniform(0.25, 2.0);
        cfg.alpha = rng.uniform(0.1, 0.9);
        cfg.beta = rng.uniform(0.0, 1.0);
        cfg.gamma = mdp.gamma;
        ObjectiveIdentity id = objective_identity_check(
            random_table(rng, mdp.n_states, mdp.n_actions, -3.0, 3.0), mdp, pi,
            random_distribution(rng, mdp.n_states, mdp.n_actions, 0.0),
            random_distribution(rng, mdp.n_states, mdp.n_actions, 0.0), cfg);
        CHECK(std::abs(id.j + cfg.c * id.l - id.k) < 1e-10);
    }
}

TEST_CASE("objective identity: residuals vanish at the target rewards") {
    // Choose Q so the implicit reward is exactly r_max on the expert support
    // and r_min on the policy support (disjoint supports); then L collapses
    // to its entropy term and J attains the variational maximum.
    RandomStream rng(79);
    TabularMdp mdp = random_mdp(rng, 6, 2, 0.0, 0.9);
    Policy pi = random_policy(rng, 6, 2);
    LsIqConfig cfg;
    cfg.c = 0.5;
    cfg.alpha = 0.5;
    cfg.beta = 0.4;
    cfg.gamma = mdp.gamma;
    RewardTargets t = cfg.targets();

    StateActionDistribution de(6, 2), dp(6, 2);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) de(s, a) = 1.0 / 6.0;
    for (int s = 3; s < 6; ++s)
        for (int a = 0; a < 2; ++a) dp(s, a) = 1.0 / 6.0;

    StateActionTable r_t(6, 2, 0.0);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 2; ++a) r_t(s, a) = s < 3 ? t.r_max : t.r_min;
    StateActionTable q = soft_policy_evaluation(mdp, r_t, pi, cfg.beta);

    ObjectiveIdentity id = objective_identity_check(q, mdp, pi, de, dp, cfg);
    double entropy_term = 0.0;
    for (int s = 3; s < 6; ++s)
        for (int a = 0; a < 2; ++a) entropy_term += dp(s, a) * (-std::log(pi.prob(s, a)));
    CHECK(id.l == doctest::Approx(cfg.beta / cfg.c * entropy_term).epsilon(1e-9));

    // No reward table scores a higher J under the same policy.
    for (int trial = 0; trial < 50; ++trial) {
        StateActionTable perturbed = q;
        for (double& v : perturbed.data) v += rng.uniform(-1.0, 1.0);
        ObjectiveIdentity other = objective_identity_check(perturbed, mdp, pi, de, dp, cfg);
        CHECK(other.j <= id.j + 1e-9);
    }
}

TEST_CASE("critic step: zero learning rate leaves the tables unchanged") {
    RandomStream rng(83);
    TabularMdp mdp = random_mdp(rng, 4, 2, 0.25, 0.9);
    Policy pi = random_policy(rng, 4, 2);
    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.lr_q = 0.0;
    CriticState critic = CriticState::zeros(4, 2, false, false);
    critic.q = random_table(rng, 4, 2, -1.0, 1.0);
    critic.q_target = critic.q;
    auto expert = draw_batch(rng, mdp, 8);
    auto policy_batch = draw_batch(rng, mdp, 8);
    CriticState next = critic_step(critic, expert, policy_batch, pi, cfg);
    CHECK(next.q.max_abs_diff(critic.q) == 0.0);
    CHECK(next.q_target.max_abs_diff(critic.q_target) == 0.0);
    CHECK(next.step_count == critic.step_count + 1);
}

TEST_CASE("critic step: expert values converge to the fixed target") {
    // Fixed policy, disjoint expert/policy supports, fixed expert targets:
    // the expert entries are a pure least-squares regression onto q_max.
    RandomStream rng(89);
    TabularMdp mdp = random_deterministic_mdp(rng, 6, 2, 0.9);
    Policy pi = random_policy(rng, 6, 2);
    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.fixed_expert_target = true;
    cfg.lr_q = 0.5;
    cfg.target_update = TargetUpdate::polyak(0.05);
    RewardTargets t = cfg.targets();

    std::vector<Transition> expert, policy_batch;
    for (int s = 0; s < 3; ++s) expert.push_back({s, 0, (s + 1) % 6, false});
    for (int s = 3; s < 6; ++s) policy_batch.push_back({s, 1, (s + 2) % 6, false});

    CriticState critic = CriticState::zeros(6, 2, false, false);
    for (int step = 0; step < 2000; ++step)
        critic = critic_step(critic, expert, policy_batch, pi, cfg);
    for (const Transition& e : expert)
        CHECK(critic.q(e.s, e.a) == doctest::Approx(t.q_max).epsilon(1e-4));
}

TEST_CASE("critic step: symmetric fixed-reward loss equals the degraded critic loss") {
    RandomStream rng(97);
    TabularMdp mdp = random_mdp(rng, 6, 3, 0.3, 0.95);
    Policy pi = random_policy(rng, 6, 3);
    StateActionTable q = random_table(rng, 6, 3, -2.0, 2.0);
    StateActionTable q_target = random_table(rng, 6, 3, -2.0, 2.0);
    auto expert = draw_batch(rng, mdp, 24);
    auto policy_batch = draw_batch(rng, mdp, 24);

    LsIqConfig degraded;
    degraded.gamma = mdp.gamma;
    degraded.beta = 0.15;
    degraded.operator_kind = OperatorKind::kIq;
    degraded.fixed_expert_target = false;
    degraded.clip_targets = false;
    degraded.entropy_clip = false;
    LossResult a = ls_loss_and_grad(q, q_target, expert, policy_batch, pi, degraded, kInf);

    LsIqConfig sqil = degraded;
    sqil.algorithm = Algorithm::kSqil;
    sqil.sqil_symmetric_targets = true;
    LossResult b = sqil_loss_and_grad(q, q_target, expert, policy_batch, pi, sqil);

    CHECK(a.loss == b.loss);
    for (std::size_t i = 0; i < a.grad.data.size(); ++i) CHECK(a.grad.data[i] == b.grad.data[i]);
}

TEST_CASE("entropy clip tracker") {
    double tracker = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> ones{1.0, 0.4, 0.9};
    tracker = entropy_clip_update(tracker, ones, 0.99);
    CHECK(tracker == doctest::Approx(1.0));  // unset tracker takes the batch max

    SUBCASE("constant bonuses converge to the constant") {
        std::vector<double> bonuses{0.6, 0.6, 0.6};
        for (int i = 0; i < 2000; ++i) tracker = entropy_clip_update(tracker, bonuses, 0.99);
        CHECK(tracker == doctest::Approx(0.6).epsilon(1e-8));
    }
    SUBCASE("zero decay tracks the latest batch maximum") {
        std::vector<double> bonuses{0.2, 0.05};
        tracker = entropy_clip_update(tracker, bonuses, 0.0);
        CHECK(tracker == doctest::Approx(0.2));
    }
    SUBCASE("empty update leaves the tracker alone") {
        CHECK(entropy_clip_update(0.7, {}, 0.5) == doctest::Approx(0.7));
    }
}

TEST_CASE("entropy cap bounds the expert bonus inside targets") {
    // With a capped entropy bonus the expert bootstrapped target can never
    // exceed the uncapped one, and respects the cap exactly when binding.
    RandomStream rng(101);
    TabularMdp mdp = random_mdp(rng, 5, 4, 0.0, 0.9);
    Policy pi = Policy::uniform(5, 4);  // maximal entropy everywhere
    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.beta = 1.0;
    cfg.fixed_expert_target = false;
    cfg.clip_targets = false;
    auto expert = draw_batch(rng, mdp, 16);
    auto policy_batch = draw_batch(rng, mdp, 16);
    CriticState critic = CriticState::zeros(5, 4, false, false);

    LossResult uncapped =
        ls_loss_and_grad(critic.q, critic.q_target, expert, policy_batch, pi, cfg, kInf);
    double cap = 0.5 * std::log(4.0);
    LossResult capped =
        ls_loss_and_grad(critic.q, critic.q_target, expert, policy_batch, pi, cfg, cap);
    for (std::size_t i = 0; i < expert.size(); ++i) {
        CHECK(capped.expert_targets[i] <= uncapped.expert_targets[i]);
        if (!expert[i].absorbing_next) {
            double expected = cfg.targets().r_max + cfg.gamma * cap;  // q_target is zero
            CHECK(capped.expert_targets[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("policy improvement: critic corrections and configuration errors") {
    RandomStream rng(103);
    StateActionTable q = random_table(rng, 4, 3, -1.0, 1.0);
    CriticState critic = CriticState::zeros(4, 3, false, false);
    critic.q = q;

    LsIqConfig cfg;
    cfg.beta = 0.5;
    Policy plain = policy_improvement(critic, cfg);
    Policy softmax = maxent_policy(q, cfg.beta);
    CHECK(plain.probs.max_abs_diff(softmax.probs) == 0.0);

    cfg.use_entropy_critic = true;
    CHECK_THROWS_AS(policy_improvement(critic, cfg), ConfigurationError);
    critic.h = StateActionTable(4, 3, 0.0);
    Policy with_zero_h = policy_improvement(critic, cfg);
    CHECK(with_zero_h.probs.max_abs_diff(softmax.probs) == 0.0);

    cfg.use_regularization_critic = true;
    CHECK_THROWS_AS(policy_improvement(critic, cfg), ConfigurationError);
    critic.g = StateActionTable(4, 3, 0.0);
    CHECK(policy_improvement(critic, cfg).probs.max_abs_diff(softmax.probs) == 0.0);

    SUBCASE("greedy extraction at zero temperature") {
        cfg.use_regularization_critic = false;
        cfg.use_entropy_critic = false;
        cfg.beta = 0.0;
        Policy greedy = policy_improvement(critic, cfg);
        for (int s = 0; s < 4; ++s) {
            int best = 0;
            for (int a = 1; a < 3; ++a)
                if (q(s, a) > q(s, best)) best = a;
            CHECK(greedy.prob(s, best) == doctest::Approx(1.0));
        }
    }
}

TEST_CASE("policy improvement: converged combined critic matches the closed form") {
    // Constant implicit reward r0 under a deterministic policy: the combined
    // critic converges to k r0^2/(1-gamma) and the extracted policy equals
    // the softmax of q + k r0^2/(1-gamma).
    RandomStream rng(107);
    TabularMdp mdp = random_deterministic_mdp(rng, 5, 3, 0.9);
    Policy det;
    det.probs = StateActionTable(5, 3, 0.0);
    for (int s = 0; s < 5; ++s) det.probs(s, 2) = 1.0;

    std::vector<Transition> batch;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a)
            for (int s2 = 0; s2 < 5; ++s2)
                if (mdp.p(s, a, s2) == 1.0) batch.push_back({s, a, s2, false});

    LsIqConfig cfg;
    cfg.gamma = mdp.gamma;
    cfg.beta = 0.5;
    cfg.alpha = 0.5;
    cfg.c = 0.8;
    cfg.use_regularization_critic = true;
    const double k = cfg.regularization_k();
    const double r0 = 1.2;

    CriticState critic = CriticState::zeros(5, 3, false, true);
    critic.q = random_table(rng, 5, 3, -1.0, 1.0);
    std::vector<double> r_q(batch.size(), r0);
    for (int sweep = 0; sweep < 4000; ++sweep)
        combined_critic_update(*critic.g, batch, r_q, k, cfg.beta, cfg.gamma, det, 0.3);

    Policy extracted = policy_improvement(critic, cfg);
    StateActionTable reference = critic.q;
    for (double& v : reference.data) v += k * r0 * r0 / (1.0 - cfg.gamma);
    Policy expected = maxent_policy(reference, cfg.beta);
    CHECK(extracted.probs.max_abs_diff(expected.probs) < 1e-6);
}

TEST_CASE("forward backup: fixed point and contraction on random models") {
    RandomStream rng(109);
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp mdp = random_mdp(rng, 3 + rng.uniform_int(8), 2 + rng.uniform_int(3), 0.4,
                                    rng.uniform(0.4, 0.97));
        Policy pi = random_policy(rng, mdp.n_states, mdp.n_actions);
        const StateActionTable& reward = *mdp.true_reward;
        StateActionTable q_pi = policy_evaluation_hard(mdp, reward, pi);
        CHECK(lsiq_forward_backup(mdp, reward, q_pi, pi).max_abs_diff(q_pi) < 1e-8);

        StateActionTable qa = random_table(rng, mdp.n_states, mdp.n_actions, -5.0, 5.0);
        StateActionTable qb = random_table(rng, mdp.n_states, mdp.n_actions, -5.0, 5.0);
        double lhs = lsiq_forward_backup(mdp, reward, qa, pi)
                         .max_abs_diff(lsiq_forward_backup(mdp, reward, qb, pi));
        CHECK(lhs <= mdp.gamma * qa.max_abs_diff(qb) + 1e-12);
    }
}
