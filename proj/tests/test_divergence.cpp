#include <doctest.h>

#include <cmath>

#include "lsiq/divergence.hpp"
#include "lsiq/synthetic.hpp"
#include "oracles.hpp"

using namespace lsiq;

namespace {

MixtureSpec make_spec(double c, StateActionDistribution de, StateActionDistribution dp) {
    MixtureSpec spec;
    spec.c = c;
    spec.alpha = 0.5;
    spec.d_expert = std::move(de);
    spec.d_policy = std::move(dp);
    return spec;
}

StateActionDistribution point_mass(int n_states, int n_actions, int s, int a) {
    StateActionDistribution d(n_states, n_actions);
    d(s, a) = 1.0;
    return d;
}

}  // namespace

TEST_CASE("variational objective: zero reward scores zero") {
    RandomStream rng(41);
    MixtureSpec spec = make_spec(1.0, random_distribution(rng, 3, 2, 0.2),
                                 random_distribution(rng, 3, 2, 0.2));
    StateActionTable zero(3, 2, 0.0);
    CHECK(variational_objective(zero, spec) == doctest::Approx(0.0));
}

TEST_CASE("optimal reward: identical distributions give zero everywhere") {
    RandomStream rng(43);
    StateActionDistribution d = random_distribution(rng, 4, 2, 0.0);
    MixtureSpec spec = make_spec(0.5, d, d);
    StateActionTable r = optimal_reward(spec);
    for (double v : r.data) CHECK(std::abs(v) < 1e-14);
    CHECK(chi2_mixture_closed_form(spec) == doctest::Approx(0.0));
}

TEST_CASE("optimal reward: expert-only support saturates at 1/c") {
    StateActionDistribution de = point_mass(2, 2, 0, 0);
    StateActionDistribution dp = point_mass(2, 2, 1, 1);
    MixtureSpec spec = make_spec(2.0, de, dp);
    StateActionTable r = optimal_reward(spec);
    CHECK(r(0, 0) == doctest::Approx(0.5));    // 1/c where only the expert sits
    CHECK(r(1, 1) == doctest::Approx(-0.5));   // -1/c where only the policy sits
    CHECK(r(0, 1) == doctest::Approx(0.0));    // arbitrary outside the union support
    // Disjoint supports saturate the divergence bound.
    CHECK(chi2_mixture_closed_form(spec) == doctest::Approx(1.0 / spec.c).epsilon(1e-14));
}

TEST_CASE("optimal reward requires equal mixing") {
    RandomStream rng(47);
    MixtureSpec spec = make_spec(1.0, random_distribution(rng, 2, 2, 0.0),
                                 random_distribution(rng, 2, 2, 0.0));
    spec.alpha = 0.3;
    CHECK_THROWS_AS(optimal_reward(spec), UnsupportedConfigurationError);
    CHECK_THROWS_AS(chi2_mixture_closed_form(spec), UnsupportedConfigurationError);
}

TEST_CASE("closed form equals the variational value at the optimal reward") {
    RandomStream rng(53);
    const double c_grid[] = {0.25, 0.5, 1.0, 2.0};
    for (int trial = 0; trial < 40; ++trial) {
        MixtureSpec spec = make_spec(c_grid[trial % 4], random_distribution(rng, 3, 3, 0.3),
                                     random_distribution(rng, 3, 3, 0.3));
        double closed = chi2_mixture_closed_form(spec);
        StateActionTable r_star = optimal_reward(spec);
        CHECK(std::abs(variational_objective(r_star, spec) - closed) < 1e-10);
        CHECK(closed >= -1e-14);
        CHECK(closed <= 1.0 / spec.c + 1e-12);
        // Any other reward scores no better.
        StateActionTable r = random_table(rng, 3, 3, -2.0 / spec.c, 2.0 / spec.c);
        CHECK(variational_objective(r, spec) <= closed + 1e-12);
    }
}

TEST_CASE("closed form matches a per-point dense grid search") {
    RandomStream rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        double c = trial % 2 == 0 ? 0.5 : 1.5;
        MixtureSpec spec = make_spec(c, random_distribution(rng, 2, 3, 0.25),
                                     random_distribution(rng, 2, 3, 0.25));
        // The supremand separates per point: a (y - (c/2) y^2) - b (y + (c/2) y^2).
        double sup = 0.0;
        for (std::size_t i = 0; i < spec.d_expert.values.data.size(); ++i) {
            double a = spec.d_expert.values.data[i];
            double b = spec.d_policy.values.data[i];
            if (a == 0.0 && b == 0.0) continue;
            sup += test::grid_search_max(
                [&](double y) {
                    return a * (y - 0.5 * c * y * y) - b * (y + 0.5 * c * y * y);
                },
                -1.0 / c, 1.0 / c);
        }
        CHECK(std::abs(sup - chi2_mixture_closed_form(spec)) < 1e-6);

        // The per-point maximizer found by search matches the formula.
        StateActionTable r_star = optimal_reward(spec);
        for (std::size_t i = 0; i < r_star.data.size(); ++i) {
            double a = spec.d_expert.values.data[i];
            double b = spec.d_policy.values.data[i];
            if (a + b == 0.0) continue;
            double lo = r_star.data[i] - 1e-4;
            double hi = r_star.data[i] + 1e-4;
            double near = test::grid_search_max(
                [&](double y) {
                    return a * (y - 0.5 * c * y * y) - b * (y + 0.5 * c * y * y);
                },
                lo, hi);
            double at_star = a * (r_star.data[i] - 0.5 * c * r_star.data[i] * r_star.data[i]) -
                             b * (r_star.data[i] + 0.5 * c * r_star.data[i] * r_star.data[i]);
            CHECK(near <= at_star + 1e-12);
        }
    }
}

TEST_CASE("convexity bound: holds for random pairs and infinite right sides") {
    RandomStream rng(61);
    StateActionDistribution de = point_mass(2, 2, 0, 0);
    StateActionDistribution dp = point_mass(2, 2, 1, 1);
    CHECK(chi2_convexity_bound_check(de, dp, 0.5));  // rhs is infinite

    StateActionDistribution eq = random_distribution(rng, 3, 2, 0.0);
    CHECK(chi2_convexity_bound_check(eq, eq, 0.5));  // 0 <= 0

    const double alphas[] = {0.1, 0.5, 0.9};
    for (int trial = 0; trial < 100; ++trial) {
        StateActionDistribution a = random_distribution(rng, 3, 3, 0.25);
        StateActionDistribution b = random_distribution(rng, 3, 3, 0.25);
        for (double alpha : alphas) CHECK(chi2_convexity_bound_check(a, b, alpha));
    }
}
