#pragma once

#include "lsiq/types.hpp"

namespace lsiq {

/// Inputs of the mixture chi-squared quantities: regularizer constant c > 0,
/// mixing coefficient alpha in (0,1), and the two state-action distributions
/// being compared. Points where both distributions vanish carry no weight and
/// are excluded from every sum; the reward there is arbitrary.
struct MixtureSpec {
    double c = 0.5;
    double alpha = 0.5;
    StateActionDistribution d_expert;
    StateActionDistribution d_policy;

    void validate() const;
};

/// Supremand of the variational form of the generalized mixture divergence:
///   E_dE[r] - E_dpi[r] - c*alpha*E_dE[r^2] - c*(1-alpha)*E_dpi[r^2].
double variational_objective(const StateActionTable& r, const MixtureSpec& spec);

/// Maximizer of the variational objective at alpha = 1/2:
///   r*(s,a) = (1/c) (dE - dpi) / (dE + dpi)
/// on the union support and 0 outside; values lie in [-1/c, 1/c]. Throws
/// UnsupportedConfigurationError for alpha != 1/2.
StateActionTable optimal_reward(const MixtureSpec& spec);

/// Value of the variational objective at its maximizer (alpha = 1/2):
///   (1/(2c)) * sum (dE - dpi)^2 / (dE + dpi),
/// which lies in [0, 1/c].
double chi2_mixture_closed_form(const MixtureSpec& spec);

/// Standard Pearson chi-squared divergence chi2(p || q) = sum (p-q)^2 / q
/// over the support of q; +infinity when p has mass where q has none.
double chi2_divergence(const StateActionDistribution& p, const StateActionDistribution& q);

/// Verifies chi2(dE || alpha dE + (1-alpha) dpi) <= (1-alpha) chi2(dE || dpi)
/// by direct summation, with `slack` of absolute tolerance. An infinite
/// right-hand side counts as satisfied.
bool chi2_convexity_bound_check(const StateActionDistribution& d_expert,
                                const StateActionDistribution& d_policy, double alpha,
                                double slack = 1e-10);

}  // namespace lsiq
