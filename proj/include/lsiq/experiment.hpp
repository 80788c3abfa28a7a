#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lsiq/idm.hpp"
#include "lsiq/lsiq.hpp"
#include "lsiq/mdp.hpp"
#include "lsiq/soft_rl.hpp"

namespace lsiq {

/// Everything needed to run one imitation experiment on the grid task.
struct ExperimentConfig {
    PointmassGridSpec environment;
    LsIqConfig lsiq;
    int n_expert_trajectories = 10;
    bool lfo = false;  // expert data exposes states only; actions come from the IDM
    int total_steps = 4000;
    int eval_every = 200;
    int eval_episodes = 100;
    std::uint64_t seed = 0;
    int horizon = 0;          // 0 -> 4 * grid size
    double expert_beta = 0.01;
    double expert_tol = 1e-10;
    std::size_t replay_capacity = 0;  // 0 -> unbounded

    int effective_horizon() const { return horizon > 0 ? horizon : 4 * environment.size; }
    void validate() const;
};

/// Grid setup that trains reliably: discount 0.9, bootstrapped expert
/// targets, clipping and entropy clipping on.
ExperimentConfig default_experiment_config();

/// One metrics emission. Undefined entries (no absorbing transitions seen
/// yet, or idm_accuracy outside the LfO setting) are NaN and serialize to an
/// empty CSV cell.
struct MetricsRow {
    long step = 0;
    double discounted_return = 0.0;
    double success_rate = 0.0;
    double q_mean_absorbing = 0.0;
    double q_mean_nonabsorbing = 0.0;
    double loss = 0.0;
    double idm_accuracy = 0.0;
};

/// Expert demonstrations. Actions are always retained internally; with
/// `lfo` set they are withheld from the learner and from serialization, and
/// used only to score IDM predictions.
struct DemoSet {
    TransitionSet transitions;
    bool lfo = false;
};

/// Soft-optimal policy for the environment's own reward, with a hazard
/// quality gate: throws ExpertQualityError if the expert enters a hazard
/// with probability above 1e-6 (computed exactly by an absorption solve).
Policy train_expert(const TabularMdp& mdp, double beta, double tol);

DemoSet collect_demonstrations(const TabularMdp& mdp, const Policy& expert, int n_traj,
                               int horizon, bool lfo, std::uint64_t seed);

struct EvalResult {
    double discounted_return = 0.0;
    double success_rate = 0.0;
};

/// Monte-Carlo evaluation with greedy (mode) action selection. Success means
/// reaching a positively rewarded absorbing state before the horizon; the
/// discounted return includes the closed-form absorbing tail.
EvalResult evaluate(const TabularMdp& mdp, const Policy& policy, int episodes, int horizon,
                    std::uint64_t seed);

struct TrainOutput {
    std::vector<MetricsRow> metrics;
    CriticState critic;
    Policy policy;
    InverseDynamicsModel idm;
    TransitionSet replay;
    DemoSet demos;
    /// Extremes of every regression target emitted by the critic loss over
    /// the whole run (NaN when the loss emits no targets, e.g. IQ variants).
    double target_min = std::numeric_limits<double>::quiet_NaN();
    double target_max = std::numeric_limits<double>::quiet_NaN();
};

/// Full training loop: environment interaction into the replay buffer,
/// expert/policy mini-batches, critic and optional combined-critic updates,
/// softmax policy extraction, optional IDM updates, periodic evaluation.
/// Deterministic for a fixed config and seed.
TrainOutput train(const ExperimentConfig& config);

/// One property check of the verification suite.
struct PropertyCheck {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // measured residual / margin, check-specific
    std::string detail;
};

struct VerifyReport {
    std::vector<PropertyCheck> checks;
    bool all_pass() const;
};

/// Runs the full property suite (occupancy, softmax, critic decompositions,
/// divergence bounds, operator fixed point and contraction, gradient checks,
/// reduction identities) on deterministic random instances.
VerifyReport run_property_suite(std::uint64_t seed = 0);

}  // namespace lsiq
