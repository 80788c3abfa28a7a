#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lsiq/experiment.hpp"
#include "lsiq/serialization.hpp"
#include "lsiq/synthetic.hpp"
#include "oracles.hpp"

using namespace lsiq;

TEST_CASE("expert training: solves the grid and respects the hazard gate") {
    TabularMdp mdp = build_pointmass_grid(default_pointmass_spec(0.9));
    Policy expert = train_expert(mdp, 0.01, 1e-10);
    EvalResult eval = evaluate(mdp, expert, 1000, 28, 42);
    CHECK(eval.success_rate == doctest::Approx(1.0));

    // The soft-optimal return at small beta is within 1% of the greedy
    // value-iteration return.
    auto v_star = test::greedy_value_iteration(mdp, *mdp.true_reward, 1e-12);
    double greedy_return = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) greedy_return += mdp.initial_dist[s] * v_star[s];
    CHECK(eval.discounted_return == doctest::Approx(greedy_return).epsilon(0.01));
}

TEST_CASE("expert training: degenerate single-state grid is vacuously optimal") {
    TabularMdp mdp = build_pointmass_grid(1, {0, 0, 0, 0}, {0}, {}, 0.9);
    Policy expert = train_expert(mdp, 0.5, 1e-10);
    for (int a = 0; a < 4; ++a) CHECK(expert.prob(0, a) == doctest::Approx(0.25));
}

TEST_CASE("expert training: quality gate rejects a near-random expert") {
    // A huge temperature makes the soft-optimal policy close to a random
    // walk, which enters the hazard ring with non-negligible probability.
    TabularMdp mdp = build_pointmass_grid(default_pointmass_spec(0.9));
    CHECK_THROWS_AS(train_expert(mdp, 50.0, 1e-10), ExpertQualityError);
}

TEST_CASE("demonstrations: sizes, views and distribution match") {
    TabularMdp mdp = build_pointmass_grid(default_pointmass_spec(0.9));
    Policy expert = train_expert(mdp, 0.01, 1e-10);

    DemoSet one = collect_demonstrations(mdp, expert, 1, 28, false, 7);
    CHECK(one.transitions.size() <= 28);
    CHECK(one.transitions.records().back().absorbing_next);

    SUBCASE("observation-only serialization hides actions") {
        DemoSet lfo = collect_demonstrations(mdp, expert, 3, 28, true, 7);
        std::ostringstream os;
        write_demos_jsonl(lfo, os);
        CHECK(os.str().find("\"a\"") == std::string::npos);
        CHECK(os.str().find("\"s_next\"") != std::string::npos);

        std::istringstream is(os.str());
        DemoSet parsed = read_demos_jsonl(is);
        CHECK(parsed.lfo);
        CHECK(parsed.transitions.size() == lfo.transitions.size());
        for (const Transition& t : parsed.transitions.records()) CHECK(t.a == -1);
    }
    SUBCASE("state-action serialization round-trips") {
        DemoSet demos = collect_demonstrations(mdp, expert, 2, 28, false, 11);
        std::ostringstream os;
        write_demos_jsonl(demos, os);
        std::istringstream is(os.str());
        DemoSet parsed = read_demos_jsonl(is);
        CHECK_FALSE(parsed.lfo);
        REQUIRE(parsed.transitions.size() == demos.transitions.size());
        for (std::size_t i = 0; i < demos.transitions.size(); ++i) {
            CHECK(parsed.transitions.records()[i].s == demos.transitions.records()[i].s);
            CHECK(parsed.transitions.records()[i].a == demos.transitions.records()[i].a);
        }
    }
    SUBCASE("demo visitation matches the expert state-action distribution") {
        DemoSet demos = collect_demonstrations(mdp, expert, 1000, 28, false, 13);
        StateActionDistribution d_expert =
            occupancy_to_distribution(occupancy_measure(mdp, expert));

        // Discount-weighted empirical distribution, absorbing tail included.
        StateActionDistribution empirical(mdp.n_states, mdp.n_actions);
        double discount = 1.0;
        double episodes = 0.0;
        bool episode_start = true;
        for (const Transition& t : demos.transitions.records()) {
            if (episode_start) {
                discount = 1.0;
                episodes += 1.0;
                episode_start = false;
            }
            empirical(t.s, t.a) += discount;
            discount *= mdp.gamma;
            if (t.absorbing_next) {
                for (int a = 0; a < mdp.n_actions; ++a)
                    empirical(t.s_next, a) += discount / (1.0 - mdp.gamma) * expert.prob(t.s_next, a);
                episode_start = true;
            }
        }
        for (double& v : empirical.values.data) v *= (1.0 - mdp.gamma) / episodes;

        double tv = 0.0;
        for (std::size_t i = 0; i < empirical.values.data.size(); ++i)
            tv += std::abs(empirical.values.data[i] - d_expert.values.data[i]);
        CHECK(tv / 2.0 < 0.05);
    }
}

TEST_CASE("evaluate: uniform policies fail on the hazard ring") {
    TabularMdp mdp = build_pointmass_grid(default_pointmass_spec(0.9));
    EvalResult eval = evaluate(mdp, Policy::uniform(49, 4), 200, 28, 3);
    CHECK(eval.success_rate < 1.0);
}

TEST_CASE("evaluate: Monte-Carlo return matches the exact policy value") {
    RandomStream rng(127);
    TabularMdp mdp = random_mdp(rng, 6, 3, 0.25, 0.85);
    // Deterministic policy so greedy evaluation evaluates the policy itself.
    Policy det;
    det.probs = StateActionTable(6, 3, 0.0);
    for (int s = 0; s < 6; ++s) det.probs(s, rng.uniform_int(3)) = 1.0;
    StateActionTable q = policy_evaluation_hard(mdp, *mdp.true_reward, det);
    double exact = 0.0;
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a) exact += mdp.initial_dist[s] * det.prob(s, a) * q(s, a);
    EvalResult eval = evaluate(mdp, det, 20000, 200, 17);
    CHECK(eval.discounted_return == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("train: zero steps produce no metrics") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.total_steps = 0;
    TrainOutput out = train(cfg);
    CHECK(out.metrics.empty());
    CHECK(out.critic.step_count == 0);
}

TEST_CASE("train: replay and idm only ever see environment data") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.total_steps = 300;
    cfg.eval_every = 300;
    cfg.lfo = true;
    TrainOutput out = train(cfg);
    // One environment step per iteration plus the warm-up fill.
    CHECK(out.replay.size() == static_cast<std::size_t>(cfg.total_steps + cfg.lsiq.batch_size));
    // The IDM consumed the warm-up once plus one policy mini-batch per step;
    // expert demonstrations never enter it.
    CHECK(out.idm.total_observed() ==
          cfg.lsiq.batch_size + static_cast<long>(cfg.total_steps) * cfg.lsiq.batch_size);
}

TEST_CASE("train: metrics are deterministic for a fixed seed") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.total_steps = 400;
    cfg.eval_every = 100;
    cfg.eval_episodes = 20;
    cfg.seed = 9;
    TrainOutput a = train(cfg);
    TrainOutput b = train(cfg);
    std::ostringstream csv_a, csv_b;
    write_metrics_csv(a.metrics, csv_a);
    write_metrics_csv(b.metrics, csv_b);
    CHECK(csv_a.str() == csv_b.str());
    CHECK(csv_a.str().rfind("step,discounted_return,success_rate,q_mean_absorbing,"
                            "q_mean_nonabsorbing,loss,idm_accuracy\n",
                            0) == 0);
    // Not learning from observations: the idm_accuracy column stays empty.
    std::istringstream lines(csv_a.str());
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) CHECK(line.back() == ',');
}

TEST_CASE("train: the operator choice decides the toy task") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.n_expert_trajectories = 1;
    cfg.total_steps = 8000;
    cfg.eval_every = 2000;
    cfg.seed = 0;
    TrainOutput ls = train(cfg);
    CHECK(ls.metrics.back().success_rate >= 0.9);

    cfg.lsiq.operator_kind = OperatorKind::kIq;
    TrainOutput iq = train(cfg);
    CHECK(iq.metrics.back().success_rate < ls.metrics.back().success_rate);
}

TEST_CASE("config validation: observation-only mode requires the least-squares critic") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.lfo = true;
    cfg.lsiq.algorithm = Algorithm::kIq;
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg.lsiq.algorithm = Algorithm::kLsiq;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("config serialization: round trip and unknown-key rejection") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.lsiq.algorithm = Algorithm::kIqv0;
    cfg.lsiq.target_update = TargetUpdate::hard(25);
    cfg.seed = 123;
    ExperimentConfig parsed = experiment_config_from_json(experiment_config_to_json(cfg));
    CHECK(parsed.lsiq.algorithm == Algorithm::kIqv0);
    CHECK(parsed.lsiq.target_update.kind == TargetUpdate::Kind::kHard);
    CHECK(parsed.lsiq.target_update.period == 25);
    CHECK(parsed.seed == 123);

    cfg.lsiq.algorithm = Algorithm::kLsiq;
    cfg.lfo = true;
    CHECK(experiment_config_from_json(experiment_config_to_json(cfg)).lfo);
    CHECK(parsed.environment.gamma == doctest::Approx(cfg.environment.gamma));

    CHECK_THROWS_AS(experiment_config_from_json("{\"total_step\": 10}"), ConfigurationError);
    CHECK_THROWS_AS(experiment_config_from_json("{\"lsiq\": {\"alfa\": 0.5}}"),
                    ConfigurationError);
    CHECK_THROWS_AS(lsiq_config_from_json("{\"operator\": \"SOFT\"}"), ConfigurationError);
}

TEST_CASE("checkpoint serialization: critic round trip") {
    RandomStream rng(131);
    CriticState critic = CriticState::zeros(5, 3, true, false);
    critic.q = random_table(rng, 5, 3, -3.0, 3.0);
    critic.q_target = random_table(rng, 5, 3, -3.0, 3.0);
    *critic.h = random_table(rng, 5, 3, -1.0, 1.0);
    critic.step_count = 77;
    critic.entropy_cap = 0.42;

    CriticState restored = checkpoint_from_json(checkpoint_to_json(critic));
    CHECK(restored.q.max_abs_diff(critic.q) == 0.0);
    CHECK(restored.q_target.max_abs_diff(critic.q_target) == 0.0);
    REQUIRE(restored.h.has_value());
    CHECK(restored.h->max_abs_diff(*critic.h) == 0.0);
    CHECK_FALSE(restored.g.has_value());
    CHECK(restored.step_count == 77);
    CHECK(restored.entropy_cap == doctest::Approx(0.42));
}

TEST_CASE("property suite passes end to end") {
    VerifyReport report = run_property_suite(0);
    for (const PropertyCheck& check : report.checks) {
        INFO(check.name, ": ", check.detail);
        CHECK(check.pass);
    }
    CHECK(report.all_pass());
}
