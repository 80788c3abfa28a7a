#include "lsiq/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lsiq {

void Policy::validate(double tol) const {
    for (int s = 0; s < n_states(); ++s) {
        double row_sum = 0.0;
        for (int a = 0; a < n_actions(); ++a) {
            double p = probs(s, a);
            if (!(p >= 0.0) || !std::isfinite(p))
                throw InvalidPolicyError("policy has a negative or non-finite probability at state " +
                                         std::to_string(s));
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > tol)
            throw InvalidPolicyError("policy row at state " + std::to_string(s) +
                                     " sums to " + std::to_string(row_sum));
    }
}

Policy Policy::uniform(int n_states, int n_actions) {
    Policy pi;
    pi.probs = StateActionTable(n_states, n_actions, 1.0 / n_actions);
    pi.beta = 1.0;
    return pi;
}

double Policy::entropy(int s) const {
    double h = 0.0;
    for (int a = 0; a < n_actions(); ++a) {
        double p = probs(s, a);
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

int Policy::mode_action(int s) const {
    int best = 0;
    for (int a = 1; a < n_actions(); ++a)
        if (probs(s, a) > probs(s, best)) best = a;
    return best;
}

double StateActionDistribution::total_mass() const {
    double total = 0.0;
    for (double v : values.data) total += v;
    return total;
}

void StateActionDistribution::validate_distribution(double tol) const {
    for (double v : values.data)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidDistributionError("distribution has a negative or non-finite entry");
    if (std::abs(total_mass() - 1.0) > tol)
        throw InvalidDistributionError("distribution mass is " + std::to_string(total_mass()) +
                                       ", expected 1");
}

}  // namespace lsiq
