// Command-line front end: train experts, collect demonstrations, run
// imitation experiments, score checkpoints and run the property suite.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lsiq/experiment.hpp"
#include "lsiq/serialization.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spill(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    long long seed = -1;
    bool lfo = false;
    bool lfo_set = false;
};

lsiq::ExperimentConfig load_config(const CommonOpts& opts) {
    lsiq::ExperimentConfig cfg = lsiq::default_experiment_config();
    if (!opts.config_path.empty()) cfg = lsiq::experiment_config_from_json(slurp(opts.config_path));
    if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.lfo_set) cfg.lfo = opts.lfo;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_flag_callback(
        "--lfo",
        [&opts] {
            opts.lfo = true;
            opts.lfo_set = true;
        },
        "observation-only expert data");
}

int run_expert(const CommonOpts& opts) {
    lsiq::ExperimentConfig cfg = load_config(opts);
    lsiq::TabularMdp mdp = lsiq::build_pointmass_grid(cfg.environment);
    lsiq::Policy expert = lsiq::train_expert(mdp, cfg.expert_beta, cfg.expert_tol);
    lsiq::EvalResult eval = lsiq::evaluate(mdp, expert, cfg.eval_episodes,
                                           cfg.effective_horizon(), lsiq::derive_seed(cfg.seed, 3));
    spill(fs::path(opts.out_dir) / "expert_policy.json", lsiq::policy_to_json(expert));
    std::cout << "expert saved; success_rate=" << eval.success_rate
              << " discounted_return=" << eval.discounted_return << "\n";
    return 0;
}

int run_collect(const CommonOpts& opts, const std::string& expert_path) {
    lsiq::ExperimentConfig cfg = load_config(opts);
    lsiq::TabularMdp mdp = lsiq::build_pointmass_grid(cfg.environment);
    lsiq::Policy expert = expert_path.empty()
                              ? lsiq::train_expert(mdp, cfg.expert_beta, cfg.expert_tol)
                              : lsiq::policy_from_json(slurp(expert_path));
    lsiq::DemoSet demos = lsiq::collect_demonstrations(
        mdp, expert, cfg.n_expert_trajectories, cfg.effective_horizon(), cfg.lfo,
        lsiq::derive_seed(cfg.seed, 0));
    std::ofstream out(fs::path(opts.out_dir) / "demos.jsonl");
    lsiq::write_demos_jsonl(demos, out);
    std::cout << "wrote " << demos.transitions.size() << " transitions ("
              << (demos.lfo ? "states only" : "states and actions") << ")\n";
    return 0;
}

int run_train(const CommonOpts& opts) {
    lsiq::ExperimentConfig cfg = load_config(opts);
    lsiq::TrainOutput out = lsiq::train(cfg);
    std::ostringstream csv;
    lsiq::write_metrics_csv(out.metrics, csv);
    spill(fs::path(opts.out_dir) / "metrics.csv", csv.str());
    spill(fs::path(opts.out_dir) / "checkpoint.json", lsiq::checkpoint_to_json(out.critic));
    if (cfg.lfo) spill(fs::path(opts.out_dir) / "idm.json", lsiq::idm_to_json(out.idm));
    if (!out.metrics.empty()) {
        const lsiq::MetricsRow& last = out.metrics.back();
        std::cout << "final step " << last.step << ": success_rate=" << last.success_rate
                  << " discounted_return=" << last.discounted_return << "\n";
    } else {
        std::cout << "no training steps requested; nothing learned\n";
    }
    return 0;
}

int run_eval(const CommonOpts& opts, const std::string& checkpoint_path) {
    lsiq::ExperimentConfig cfg = load_config(opts);
    lsiq::TabularMdp mdp = lsiq::build_pointmass_grid(cfg.environment);
    lsiq::CriticState critic = lsiq::checkpoint_from_json(slurp(checkpoint_path));
    lsiq::Policy policy = lsiq::policy_improvement(critic, cfg.lsiq);
    lsiq::EvalResult eval = lsiq::evaluate(mdp, policy, cfg.eval_episodes,
                                           cfg.effective_horizon(), lsiq::derive_seed(cfg.seed, 3));
    std::cout << "success_rate=" << eval.success_rate
              << " discounted_return=" << eval.discounted_return << "\n";
    return 0;
}

int run_verify(long long seed) {
    lsiq::VerifyReport report =
        lsiq::run_property_suite(seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
    std::cout << lsiq::verify_report_to_text(report);
    return report.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Least-squares inverse Q-learning on tabular tasks"};
    app.require_subcommand(1);

    CommonOpts expert_opts, collect_opts, train_opts, eval_opts;
    std::string expert_path, checkpoint_path;
    long long verify_seed = -1;

    add_common(app.add_subcommand("expert", "train and save the expert policy"), expert_opts);
    CLI::App* collect = app.add_subcommand("collect", "write expert demonstrations as JSONL");
    add_common(collect, collect_opts);
    collect->add_option("--expert", expert_path, "expert policy JSON (retrained when omitted)");
    add_common(app.add_subcommand("train", "run an imitation experiment"), train_opts);
    CLI::App* eval_cmd = app.add_subcommand("eval", "score a saved checkpoint");
    add_common(eval_cmd, eval_opts);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the property suite");
    verify_cmd->add_option("--seed", verify_seed, "property suite seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("expert")) return run_expert(expert_opts);
        if (app.got_subcommand("collect")) return run_collect(collect_opts, expert_path);
        if (app.got_subcommand("train")) return run_train(train_opts);
        if (app.got_subcommand("eval")) return run_eval(eval_opts, checkpoint_path);
        if (app.got_subcommand("verify")) return run_verify(verify_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
