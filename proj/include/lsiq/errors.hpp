#pragma once

#include <stdexcept>
#include <string>

namespace lsiq {

/// Environment construction rejected (overlapping cell sets, spawn inside a
/// hazard, malformed transition rows, ...).
struct InvalidEnvironmentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A policy row is not a probability distribution.
struct InvalidPolicyError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A state-action weight table is not usable as a distribution (zero or
/// negative mass).
struct InvalidDistributionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Softmax temperature must be strictly positive.
struct InvalidTemperatureError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Requested operation is only defined for a restricted configuration
/// (e.g. closed-form divergence quantities at equal mixing).
struct UnsupportedConfigurationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Reward targets diverge for degenerate mixing coefficients.
struct InfiniteTargetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A loss was asked to operate on an empty mini-batch.
struct InvalidBatchError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Config flags and available critic tables do not line up.
struct ConfigurationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Prediction requested from an inverse dynamics model with no observations.
struct UntrainedModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Trained expert fails its quality gate (reaches a hazard with
/// non-negligible probability).
struct ExpertQualityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver did not reach its tolerance within the sweep budget.
class ConvergenceFailureError : public std::runtime_error {
  public:
    ConvergenceFailureError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

}  // namespace lsiq
