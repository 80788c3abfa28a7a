#include "lsiq/divergence.hpp"

#include <cmath>
#include <limits>

namespace lsiq {

void MixtureSpec::validate() const {
    if (!(c > 0.0)) throw UnsupportedConfigurationError("regularizer constant c must be positive");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw UnsupportedConfigurationError("mixing coefficient alpha must lie in (0, 1)");
    if (!d_expert.values.same_shape(d_policy.values))
        throw InvalidDistributionError("distribution shapes differ");
    d_expert.validate_distribution();
    d_policy.validate_distribution();
}

double variational_objective(const StateActionTable& r, const MixtureSpec& spec) {
    spec.validate();
    double value = 0.0;
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        double de = spec.d_expert.values.data[i];
        double dp = spec.d_policy.values.data[i];
        if (de == 0.0 && dp == 0.0) continue;
        double ri = r.data[i];
        value += de * ri - dp * ri - spec.c * spec.alpha * de * ri * ri -
                 spec.c * (1.0 - spec.alpha) * dp * ri * ri;
    }
    return value;
}

StateActionTable optimal_reward(const MixtureSpec& spec) {
    spec.validate();
    if (spec.alpha != 0.5)
        throw UnsupportedConfigurationError("optimal reward is only available for alpha = 1/2");
    StateActionTable r(spec.d_expert.n_states(), spec.d_expert.n_actions(), 0.0);
    for (std::size_t i = 0; i < r.data.size(); ++i) {
        double de = spec.d_expert.values.data[i];
        double dp = spec.d_policy.values.data[i];
        if (de + dp > 0.0) r.data[i] = (de - dp) / (de + dp) / spec.c;
    }
    return r;
}

double chi2_mixture_closed_form(const MixtureSpec& spec) {
    spec.validate();
    if (spec.alpha != 0.5)
        throw UnsupportedConfigurationError("closed form is only available for alpha = 1/2");
    double value = 0.0;
    for (std::size_t i = 0; i < spec.d_expert.values.data.size(); ++i) {
        double de = spec.d_expert.values.data[i];
        double dp = spec.d_policy.values.data[i];
        if (de + dp > 0.0) value += (de - dp) * (de - dp) / (de + dp);
    }
    return value / (2.0 * spec.c);
}

double chi2_divergence(const StateActionDistribution& p, const StateActionDistribution& q) {
    double value = 0.0;
    for (std::size_t i = 0; i < p.values.data.size(); ++i) {
        double pi = p.values.data[i];
        double qi = q.values.data[i];
        if (qi > 0.0) {
            value += (pi - qi) * (pi - qi) / qi;
        } else if (pi > 0.0) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return value;
}

bool chi2_convexity_bound_check(const StateActionDistribution& d_expert,
                                const StateActionDistribution& d_policy, double alpha,
                                double slack) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw UnsupportedConfigurationError("alpha must lie in (0, 1)");
    StateActionDistribution mix(d_expert.n_states(), d_expert.n_actions());
    for (std::size_t i = 0; i < mix.values.data.size(); ++i)
        mix.values.data[i] =
            alpha * d_expert.values.data[i] + (1.0 - alpha) * d_policy.values.data[i];
    double lhs = chi2_divergence(d_expert, mix);
    double rhs = chi2_divergence(d_expert, d_policy);
    if (std::isinf(rhs)) return true;
    return lhs <= (1.0 - alpha) * rhs + slack;
}

}  // namespace lsiq
