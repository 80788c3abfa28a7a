#include "lsiq/serialization.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace lsiq {

namespace {

using nlohmann::json;

/// Shortest decimal representation that round-trips the exact double.
std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    for (int precision = 1; precision <= 17; ++precision) {
        std::ostringstream os;
        os << std::setprecision(precision) << x;
        if (std::stod(os.str()) == x) return os.str();
    }
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known)
            throw ConfigurationError("unknown key '" + it.key() + "' in " + context + " config");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

json target_update_to_json(const TargetUpdate& tu) {
    json j;
    if (tu.kind == TargetUpdate::Kind::kHard) {
        j["type"] = "hard";
        j["period"] = tu.period;
    } else {
        j["type"] = "polyak";
        j["tau"] = tu.tau;
    }
    return j;
}

TargetUpdate target_update_from_json(const json& j) {
    require_keys(j, {"type", "period", "tau"}, "target_update");
    std::string type = j.at("type").get<std::string>();
    if (type == "hard") return TargetUpdate::hard(j.at("period").get<int>());
    if (type == "polyak") return TargetUpdate::polyak(j.at("tau").get<double>());
    throw ConfigurationError("unknown target update type '" + type + "'");
}

const char* operator_name(OperatorKind op) {
    return op == OperatorKind::kIq ? "IQ_OPERATOR" : "LSIQ_OPERATOR";
}

OperatorKind operator_from_name(const std::string& name) {
    if (name == "IQ_OPERATOR") return OperatorKind::kIq;
    if (name == "LSIQ_OPERATOR") return OperatorKind::kLsiq;
    throw ConfigurationError("unknown operator '" + name + "'");
}

const char* algorithm_name(Algorithm alg) {
    switch (alg) {
        case Algorithm::kLsiq: return "LSIQ";
        case Algorithm::kSqil: return "SQIL";
        case Algorithm::kIq: return "IQ";
        case Algorithm::kIqv0: return "IQV0";
    }
    return "LSIQ";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "LSIQ") return Algorithm::kLsiq;
    if (name == "SQIL") return Algorithm::kSqil;
    if (name == "IQ") return Algorithm::kIq;
    if (name == "IQV0") return Algorithm::kIqv0;
    throw ConfigurationError("unknown algorithm '" + name + "'");
}

json grid_spec_to_json_obj(const PointmassGridSpec& spec) {
    json j;
    j["size"] = spec.size;
    j["spawn_cells"] = spec.spawn_cells;
    j["goal_cells"] = spec.goal_cells;
    j["hazard_cells"] = spec.hazard_cells;
    j["gamma"] = spec.gamma;
    j["goal_reward"] = spec.goal_reward;
    return j;
}

PointmassGridSpec grid_spec_from_json_obj(const json& j) {
    require_keys(j, {"size", "spawn_cells", "goal_cells", "hazard_cells", "gamma", "goal_reward"},
                 "environment");
    PointmassGridSpec spec = default_pointmass_spec();
    read_field(j, "size", spec.size);
    if (j.contains("spawn_cells")) {
        auto cells = j.at("spawn_cells").get<std::vector<int>>();
        if (cells.size() != 4)
            throw ConfigurationError("spawn_cells must contain exactly 4 cell ids");
        std::copy(cells.begin(), cells.end(), spec.spawn_cells.begin());
    }
    read_field(j, "goal_cells", spec.goal_cells);
    read_field(j, "hazard_cells", spec.hazard_cells);
    read_field(j, "gamma", spec.gamma);
    read_field(j, "goal_reward", spec.goal_reward);
    return spec;
}

json lsiq_config_to_json_obj(const LsIqConfig& cfg) {
    json j;
    j["c"] = cfg.c;
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
    j["gamma"] = cfg.gamma;
    j["operator"] = operator_name(cfg.operator_kind);
    j["fixed_expert_target"] = cfg.fixed_expert_target;
    j["clip_targets"] = cfg.clip_targets;
    j["entropy_clip"] = cfg.entropy_clip;
    j["use_entropy_critic"] = cfg.use_entropy_critic;
    j["use_regularization_critic"] = cfg.use_regularization_critic;
    j["lr_q"] = cfg.lr_q;
    j["lr_g"] = cfg.lr_g;
    j["target_update"] = target_update_to_json(cfg.target_update);
    j["batch_size"] = cfg.batch_size;
    j["algorithm"] = algorithm_name(cfg.algorithm);
    j["sqil_symmetric_targets"] = cfg.sqil_symmetric_targets;
    j["entropy_clip_decay"] = cfg.entropy_clip_decay;
    return j;
}

LsIqConfig lsiq_config_from_json_obj(const json& j) {
    require_keys(j,
                 {"c", "alpha", "beta", "gamma", "operator", "fixed_expert_target", "clip_targets",
                  "entropy_clip", "use_entropy_critic", "use_regularization_critic", "lr_q",
                  "lr_g", "target_update", "batch_size", "algorithm", "sqil_symmetric_targets",
                  "entropy_clip_decay"},
                 "lsiq");
    LsIqConfig cfg;
    read_field(j, "c", cfg.c);
    read_field(j, "alpha", cfg.alpha);
    read_field(j, "beta", cfg.beta);
    read_field(j, "gamma", cfg.gamma);
    if (j.contains("operator"))
        cfg.operator_kind = operator_from_name(j.at("operator").get<std::string>());
    read_field(j, "fixed_expert_target", cfg.fixed_expert_target);
    read_field(j, "clip_targets", cfg.clip_targets);
    read_field(j, "entropy_clip", cfg.entropy_clip);
    read_field(j, "use_entropy_critic", cfg.use_entropy_critic);
    read_field(j, "use_regularization_critic", cfg.use_regularization_critic);
    read_field(j, "lr_q", cfg.lr_q);
    read_field(j, "lr_g", cfg.lr_g);
    if (j.contains("target_update"))
        cfg.target_update = target_update_from_json(j.at("target_update"));
    read_field(j, "batch_size", cfg.batch_size);
    if (j.contains("algorithm"))
        cfg.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    read_field(j, "sqil_symmetric_targets", cfg.sqil_symmetric_targets);
    read_field(j, "entropy_clip_decay", cfg.entropy_clip_decay);
    cfg.validate();
    return cfg;
}

json table_to_json(const StateActionTable& t) { return json(t.data); }

StateActionTable table_from_json(const json& j, int n_states, int n_actions) {
    StateActionTable t(n_states, n_actions, 0.0);
    auto values = j.get<std::vector<double>>();
    if (values.size() != t.data.size())
        throw ConfigurationError("table size mismatch in checkpoint");
    t.data = std::move(values);
    return t;
}

}  // namespace

void write_demos_jsonl(const DemoSet& demos, std::ostream& os) {
    for (const Transition& t : demos.transitions.records()) {
        os << "{\"s\": " << t.s;
        if (!demos.lfo) os << ", \"a\": " << t.a;
        os << ", \"s_next\": " << t.s_next
           << ", \"absorbing\": " << (t.absorbing_next ? "true" : "false") << "}\n";
    }
}

DemoSet read_demos_jsonl(std::istream& is) {
    DemoSet demos;
    bool saw_action = false;
    bool saw_record = false;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        require_keys(j, {"s", "a", "s_next", "absorbing"}, "demonstration record");
        Transition t;
        t.s = j.at("s").get<int>();
        t.a = j.contains("a") ? j.at("a").get<int>() : -1;
        saw_action = saw_action || j.contains("a");
        t.s_next = j.at("s_next").get<int>();
        t.absorbing_next = j.at("absorbing").get<bool>();
        demos.transitions.push(t);
        saw_record = true;
    }
    demos.lfo = saw_record && !saw_action;
    return demos;
}

std::string grid_spec_to_json(const PointmassGridSpec& spec) {
    return grid_spec_to_json_obj(spec).dump(2);
}

PointmassGridSpec grid_spec_from_json(const std::string& text) {
    return grid_spec_from_json_obj(json::parse(text));
}

std::string lsiq_config_to_json(const LsIqConfig& cfg) {
    return lsiq_config_to_json_obj(cfg).dump(2);
}

LsIqConfig lsiq_config_from_json(const std::string& text) {
    return lsiq_config_from_json_obj(json::parse(text));
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["environment"] = grid_spec_to_json_obj(cfg.environment);
    j["lsiq"] = lsiq_config_to_json_obj(cfg.lsiq);
    j["n_expert_trajectories"] = cfg.n_expert_trajectories;
    j["lfo"] = cfg.lfo;
    j["total_steps"] = cfg.total_steps;
    j["eval_every"] = cfg.eval_every;
    j["eval_episodes"] = cfg.eval_episodes;
    j["seed"] = cfg.seed;
    j["horizon"] = cfg.horizon;
    j["expert_beta"] = cfg.expert_beta;
    j["expert_tol"] = cfg.expert_tol;
    j["replay_capacity"] = cfg.replay_capacity;
    return j.dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j = json::parse(text);
    require_keys(j,
                 {"environment", "lsiq", "n_expert_trajectories", "lfo", "total_steps",
                  "eval_every", "eval_episodes", "seed", "horizon", "expert_beta", "expert_tol",
                  "replay_capacity"},
                 "experiment");
    ExperimentConfig cfg;
    cfg.environment = default_pointmass_spec();
    if (j.contains("environment")) cfg.environment = grid_spec_from_json_obj(j.at("environment"));
    if (j.contains("lsiq")) cfg.lsiq = lsiq_config_from_json_obj(j.at("lsiq"));
    read_field(j, "n_expert_trajectories", cfg.n_expert_trajectories);
    read_field(j, "lfo", cfg.lfo);
    read_field(j, "total_steps", cfg.total_steps);
    read_field(j, "eval_every", cfg.eval_every);
    read_field(j, "eval_episodes", cfg.eval_episodes);
    read_field(j, "seed", cfg.seed);
    read_field(j, "horizon", cfg.horizon);
    read_field(j, "expert_beta", cfg.expert_beta);
    read_field(j, "expert_tol", cfg.expert_tol);
    read_field(j, "replay_capacity", cfg.replay_capacity);
    cfg.validate();
    return cfg;
}

std::string checkpoint_to_json(const CriticState& critic) {
    json j;
    j["n_states"] = critic.q.n_states;
    j["n_actions"] = critic.q.n_actions;
    j["q"] = table_to_json(critic.q);
    j["q_target"] = table_to_json(critic.q_target);
    j["h"] = critic.h ? table_to_json(*critic.h) : json(nullptr);
    j["g"] = critic.g ? table_to_json(*critic.g) : json(nullptr);
    j["step_count"] = critic.step_count;
    j["entropy_cap"] = std::isnan(critic.entropy_cap) ? json(nullptr) : json(critic.entropy_cap);
    return j.dump();
}

CriticState checkpoint_from_json(const std::string& text) {
    json j = json::parse(text);
    require_keys(j, {"n_states", "n_actions", "q", "q_target", "h", "g", "step_count",
                     "entropy_cap"},
                 "checkpoint");
    int ns = j.at("n_states").get<int>();
    int na = j.at("n_actions").get<int>();
    CriticState critic = CriticState::zeros(ns, na, false, false);
    critic.q = table_from_json(j.at("q"), ns, na);
    critic.q_target = table_from_json(j.at("q_target"), ns, na);
    if (!j.at("h").is_null()) critic.h = table_from_json(j.at("h"), ns, na);
    if (!j.at("g").is_null()) critic.g = table_from_json(j.at("g"), ns, na);
    critic.step_count = j.at("step_count").get<long>();
    if (!j.at("entropy_cap").is_null()) critic.entropy_cap = j.at("entropy_cap").get<double>();
    return critic;
}

std::string policy_to_json(const Policy& policy) {
    json j;
    j["n_states"] = policy.n_states();
    j["n_actions"] = policy.n_actions();
    j["probs"] = table_to_json(policy.probs);
    j["beta"] = policy.beta;
    return j.dump();
}

Policy policy_from_json(const std::string& text) {
    json j = json::parse(text);
    require_keys(j, {"n_states", "n_actions", "probs", "beta"}, "policy");
    Policy policy;
    policy.probs =
        table_from_json(j.at("probs"), j.at("n_states").get<int>(), j.at("n_actions").get<int>());
    policy.beta = j.at("beta").get<double>();
    policy.validate(1e-9);
    return policy;
}

std::string idm_to_json(const InverseDynamicsModel& idm) {
    json j;
    j["n_actions"] = idm.n_actions();
    j["counts"] = idm.count_entries();
    return j.dump();
}

InverseDynamicsModel idm_from_json(const std::string& text) {
    json j = json::parse(text);
    require_keys(j, {"n_actions", "counts"}, "idm");
    InverseDynamicsModel idm(j.at("n_actions").get<int>());
    for (const auto& row : j.at("counts")) {
        auto entry = row.get<std::array<long, 4>>();
        idm.add_count(static_cast<int>(entry[0]), static_cast<int>(entry[1]),
                      static_cast<int>(entry[2]), entry[3]);
    }
    return idm;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os) {
    os << "step,discounted_return,success_rate,q_mean_absorbing,q_mean_nonabsorbing,loss,"
          "idm_accuracy\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const MetricsRow& row : rows) {
        os << row.step << ',' << cell(row.discounted_return) << ',' << cell(row.success_rate)
           << ',' << cell(row.q_mean_absorbing) << ',' << cell(row.q_mean_nonabsorbing) << ','
           << cell(row.loss) << ',' << cell(row.idm_accuracy) << '\n';
    }
}

std::string verify_report_to_text(const VerifyReport& report) {
    std::ostringstream os;
    for (const PropertyCheck& check : report.checks)
        os << (check.pass ? "[PASS] " : "[FAIL] ") << check.name << ": " << check.detail << "\n";
    os << (report.all_pass() ? "all properties hold\n" : "PROPERTY FAILURES PRESENT\n");
    return os.str();
}

}  // namespace lsiq
