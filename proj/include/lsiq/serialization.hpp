#pragma once

#include <iosfwd>
#include <string>

#include "lsiq/experiment.hpp"

namespace lsiq {

/// JSON-lines demonstrations, one record per transition:
///   {"s": int, "a": int, "s_next": int, "absorbing": bool}
/// The action field is omitted for observation-only demo sets; reading such
/// a file yields records with action -1.
void write_demos_jsonl(const DemoSet& demos, std::ostream& os);
DemoSet read_demos_jsonl(std::istream& is);

std::string grid_spec_to_json(const PointmassGridSpec& spec);
PointmassGridSpec grid_spec_from_json(const std::string& text);

std::string lsiq_config_to_json(const LsIqConfig& cfg);
LsIqConfig lsiq_config_from_json(const std::string& text);

std::string experiment_config_to_json(const ExperimentConfig& cfg);
/// Unknown keys are rejected in every config object.
ExperimentConfig experiment_config_from_json(const std::string& text);

std::string checkpoint_to_json(const CriticState& critic);
CriticState checkpoint_from_json(const std::string& text);

std::string policy_to_json(const Policy& policy);
Policy policy_from_json(const std::string& text);

std::string idm_to_json(const InverseDynamicsModel& idm);
InverseDynamicsModel idm_from_json(const std::string& text);

/// CSV with the fixed header
///   step,discounted_return,success_rate,q_mean_absorbing,q_mean_nonabsorbing,loss,idm_accuracy
/// NaN entries serialize as empty cells (idm_accuracy is empty outside LfO).
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os);

std::string verify_report_to_text(const VerifyReport& report);

}  // namespace lsiq
