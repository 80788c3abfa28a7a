#include "lsiq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsiq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Substream ids of the experiment seed.
constexpr std::uint64_t kStreamDemos = 0;
constexpr std::uint64_t kStreamEnv = 1;
constexpr std::uint64_t kStreamBatch = 2;
constexpr std::uint64_t kStreamEval = 3;

/// Absorbing states with positive reward count as goals; all other absorbing
/// states are treated as failures (hazards).
std::vector<std::uint8_t> goal_mask(const TabularMdp& mdp) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(mdp.n_states), 0);
    if (!mdp.true_reward) return mask;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (!mdp.is_absorbing(s)) continue;
        double hi = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions; ++a) hi = std::max(hi, (*mdp.true_reward)(s, a));
        mask[static_cast<std::size_t>(s)] = hi > 0.0 ? 1 : 0;
    }
    return mask;
}

/// Probability of ever entering a failure-absorbing state under `policy`,
/// from the least fixed point of the absorption equations (power iteration;
/// monotone and bounded by 1).
double hazard_entry_probability(const TabularMdp& mdp, const Policy& policy) {
    std::vector<std::uint8_t> goals = goal_mask(mdp);
    bool any_hazard = false;
    for (int s = 0; s < mdp.n_states; ++s)
        if (mdp.is_absorbing(s) && !goals[static_cast<std::size_t>(s)]) any_hazard = true;
    if (!any_hazard) return 0.0;

    std::vector<double> h(static_cast<std::size_t>(mdp.n_states), 0.0);
    for (int sweep = 0; sweep < 100000; ++sweep) {
        double delta = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            if (mdp.is_absorbing(s)) continue;
            double acc = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                auto next = mdp.next_dist(s, a);
                for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                    double pr = next[static_cast<std::size_t>(s2)];
                    if (pr == 0.0) continue;
                    if (mdp.is_absorbing(s2))
                        acc += pa * pr * (goals[static_cast<std::size_t>(s2)] ? 0.0 : 1.0);
                    else
                        acc += pa * pr * h[static_cast<std::size_t>(s2)];
                }
            }
            delta = std::max(delta, std::abs(acc - h[static_cast<std::size_t>(s)]));
            h[static_cast<std::size_t>(s)] = acc;
        }
        if (delta < 1e-14) break;
    }
    double p = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        p += mdp.initial_dist[static_cast<std::size_t>(s)] * h[static_cast<std::size_t>(s)];
    return p;
}

Policy as_greedy(const Policy& policy) {
    Policy g;
    g.beta = 0.0;
    g.probs = StateActionTable(policy.n_states(), policy.n_actions(), 0.0);
    for (int s = 0; s < policy.n_states(); ++s) g.probs(s, policy.mode_action(s)) = 1.0;
    return g;
}

}  // namespace

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.environment = default_pointmass_spec(0.9);
    cfg.lsiq.gamma = 0.9;
    cfg.lsiq.fixed_expert_target = false;
    cfg.lsiq.lr_q = 0.25;
    cfg.total_steps = 8000;
    cfg.eval_every = 500;
    return cfg;
}

void ExperimentConfig::validate() const {
    lsiq.validate();
    if (n_expert_trajectories < 1) throw ConfigurationError("need at least one expert trajectory");
    if (total_steps < 0) throw ConfigurationError("total_steps must be nonnegative");
    if (eval_every < 1) throw ConfigurationError("eval_every must be >= 1");
    if (eval_episodes < 1) throw ConfigurationError("eval_episodes must be >= 1");
    if (effective_horizon() < 1) throw ConfigurationError("horizon must be >= 1");
    if (!(expert_beta > 0.0)) throw ConfigurationError("expert_beta must be positive");
    if (lfo && lsiq.algorithm != Algorithm::kLsiq)
        throw ConfigurationError("observation-only training is only wired up for the "
                                 "least-squares critic");
}

Policy train_expert(const TabularMdp& mdp, double beta, double tol) {
    if (!mdp.true_reward) throw ConfigurationError("expert training needs the true reward");
    StateActionTable q = soft_value_iteration(mdp, *mdp.true_reward, beta, tol);
    Policy expert = maxent_policy(q, beta);
    double p_hazard = hazard_entry_probability(mdp, expert);
    if (p_hazard > 1e-6)
        throw ExpertQualityError("trained expert enters a hazard with probability " +
                                 std::to_string(p_hazard));
    return expert;
}

DemoSet collect_demonstrations(const TabularMdp& mdp, const Policy& expert, int n_traj,
                               int horizon, bool lfo, std::uint64_t seed) {
    if (n_traj < 1) throw ConfigurationError("need at least one trajectory");
    DemoSet demos;
    demos.lfo = lfo;
    for (int i = 0; i < n_traj; ++i) {
        auto trajectory = rollout(mdp, expert, horizon, derive_seed(seed, static_cast<std::uint64_t>(i)));
        demos.transitions.push_all(trajectory);
    }
    return demos;
}

EvalResult evaluate(const TabularMdp& mdp, const Policy& policy, int episodes, int horizon,
                    std::uint64_t seed) {
    if (!mdp.true_reward) throw ConfigurationError("evaluation needs the true reward");
    if (episodes < 1) throw ConfigurationError("need at least one evaluation episode");
    const StateActionTable& reward = *mdp.true_reward;
    std::vector<std::uint8_t> goals = goal_mask(mdp);
    Policy greedy = as_greedy(policy);

    double return_sum = 0.0;
    double success_sum = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(ep)));
        int s = rng.categorical(std::span<const double>(mdp.initial_dist));
        double ep_return = 0.0;
        double discount = 1.0;
        for (int t = 0; t < horizon; ++t) {
            if (mdp.is_absorbing(s)) break;
            int a = greedy.mode_action(s);
            ep_return += discount * reward(s, a);
            s = rng.categorical(mdp.next_dist(s, a));
            discount *= mdp.gamma;
        }
        if (mdp.is_absorbing(s)) {
            // Closed-form tail of sitting in the absorbing state forever.
            ep_return += discount * reward(s, greedy.mode_action(s)) / (1.0 - mdp.gamma);
            if (goals[static_cast<std::size_t>(s)]) success_sum += 1.0;
        }
        return_sum += ep_return;
    }
    return EvalResult{return_sum / episodes, success_sum / episodes};
}

TrainOutput train(const ExperimentConfig& config) {
    config.validate();
    const TabularMdp mdp = build_pointmass_grid(config.environment);
    const LsIqConfig& cfg = config.lsiq;
    const int horizon = config.effective_horizon();

    Policy expert = train_expert(mdp, config.expert_beta, config.expert_tol);
    DemoSet demos = collect_demonstrations(mdp, expert, config.n_expert_trajectories, horizon,
                                           config.lfo, derive_seed(config.seed, kStreamDemos));

    TrainOutput out{.metrics = {},
                    .critic = CriticState::zeros(mdp.n_states, mdp.n_actions,
                                                 cfg.use_entropy_critic && !cfg.use_regularization_critic,
                                                 cfg.use_regularization_critic),
                    .policy = {},
                    .idm = InverseDynamicsModel(mdp.n_actions),
                    .replay = config.replay_capacity > 0 ? TransitionSet(config.replay_capacity)
                                                         : TransitionSet(),
                    .demos = demos};
    out.policy = policy_improvement(out.critic, cfg);

    RandomStream env_rng(derive_seed(config.seed, kStreamEnv));
    RandomStream batch_rng(derive_seed(config.seed, kStreamBatch));
    const std::uint64_t eval_seed = derive_seed(config.seed, kStreamEval);
    std::vector<std::uint8_t> goals = goal_mask(mdp);

    int state = -1;
    int steps_in_episode = 0;
    auto reset_env = [&]() {
        state = env_rng.categorical(std::span<const double>(mdp.initial_dist));
        steps_in_episode = 0;
    };
    auto env_step = [&]() {
        if (state < 0 || mdp.is_absorbing(state) || steps_in_episode >= horizon) reset_env();
        int a = env_rng.categorical(std::span<const double>(
            &out.policy.probs.data[static_cast<std::size_t>(state) * mdp.n_actions],
            static_cast<std::size_t>(mdp.n_actions)));
        int s2 = env_rng.categorical(mdp.next_dist(state, a));
        out.replay.push(Transition{state, a, s2, mdp.is_absorbing(s2)});
        state = s2;
        steps_in_episode += 1;
    };

    // Warm-up so the first mini-batch can be drawn; with LfO it also gives
    // the IDM its initial coverage.
    while (out.replay.size() < static_cast<std::size_t>(cfg.batch_size)) env_step();
    if (config.lfo) out.idm.update(out.replay.records());

    auto emit_metrics = [&](long step, double loss) {
        MetricsRow row;
        row.step = step;
        EvalResult eval = evaluate(mdp, out.policy, config.eval_episodes, horizon,
                                   derive_seed(eval_seed, static_cast<std::uint64_t>(step)));
        row.discounted_return = eval.discounted_return;
        row.success_rate = eval.success_rate;

        double abs_sum = 0.0, nonabs_sum = 0.0;
        long abs_n = 0, nonabs_n = 0;
        for (const Transition& t : out.replay.records()) {
            if (t.absorbing_next && !goals[static_cast<std::size_t>(t.s_next)]) {
                abs_sum += out.critic.q(t.s, t.a);
                abs_n += 1;
            } else if (!t.absorbing_next) {
                nonabs_sum += out.critic.q(t.s, t.a);
                nonabs_n += 1;
            }
        }
        row.q_mean_absorbing = abs_n > 0 ? abs_sum / abs_n : kNaN;
        row.q_mean_nonabsorbing = nonabs_n > 0 ? nonabs_sum / nonabs_n : kNaN;
        row.loss = loss;

        row.idm_accuracy = kNaN;
        if (config.lfo && out.idm.total_observed() > 0) {
            long correct = 0;
            const auto& records = out.demos.transitions.records();
            for (const Transition& t : records)
                if (out.idm.predict(t.s, t.s_next).action == t.a) correct += 1;
            row.idm_accuracy = records.empty() ? kNaN
                                               : static_cast<double>(correct) /
                                                     static_cast<double>(records.size());
        }
        out.metrics.push_back(row);
    };

    double loss = 0.0;
    LossResult step_result;
    auto note_targets = [&out](const LossResult& res) {
        for (const std::vector<double>* targets : {&res.expert_targets, &res.policy_targets})
            for (double t : *targets) {
                if (!(t >= out.target_min)) out.target_min = t;  // NaN-initialized
                if (!(t <= out.target_max)) out.target_max = t;
            }
    };
    for (long step = 1; step <= config.total_steps; ++step) {
        env_step();

        std::vector<Transition> expert_batch =
            demos.transitions.sample(static_cast<std::size_t>(cfg.batch_size), batch_rng);
        if (config.lfo) {
            // Relabel with confident IDM predictions only; records whose pair
            // the policy has not covered yet would carry the fallback action
            // and poison the regression. While nothing is covered the step
            // degenerates to pure exploration plus IDM training.
            std::vector<Transition> relabeled;
            relabeled.reserve(expert_batch.size());
            for (Transition t : expert_batch) {
                InverseDynamicsModel::Prediction p = out.idm.predict(t.s, t.s_next);
                if (!p.confident) continue;
                t.a = p.action;
                relabeled.push_back(t);
            }
            expert_batch = std::move(relabeled);
        }
        std::vector<Transition> policy_batch =
            out.replay.sample(static_cast<std::size_t>(cfg.batch_size), batch_rng);
        if (config.lfo) out.idm.update(policy_batch);
        if (expert_batch.empty()) {
            if (step % config.eval_every == 0 || step == config.total_steps)
                emit_metrics(step, loss);
            continue;
        }

        out.critic = critic_step(out.critic, expert_batch, policy_batch, out.policy, cfg,
                                 std::span<const double>(mdp.initial_dist), &step_result);
        loss = step_result.loss;
        note_targets(step_result);

        if (cfg.use_regularization_critic || cfg.use_entropy_critic) {
            StateActionTable& aux = cfg.use_regularization_critic ? *out.critic.g : *out.critic.h;
            std::vector<double> live_values = soft_value(out.critic.q, out.policy, cfg.beta);
            std::vector<double> r_q =
                implicit_reward(out.critic, policy_batch, live_values, cfg, /*expert_side=*/false);
            double k = cfg.use_regularization_critic ? cfg.regularization_k() : 0.0;
            combined_critic_update(aux, policy_batch, r_q, k, cfg.beta, cfg.gamma, out.policy,
                                   cfg.lr_g);
        }

        out.policy = policy_improvement(out.critic, cfg);

        if (step % config.eval_every == 0 || step == config.total_steps) emit_metrics(step, loss);
    }
    return out;
}

bool VerifyReport::all_pass() const {
    for (const PropertyCheck& c : checks)
        if (!c.pass) return false;
    return true;
}

}  // namespace lsiq
