#include "realdrl/runtime.hpp"
#include "realdrl/safety.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace realdrl;

TEST(Safety, MembershipIsStrict) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_TRUE(in_safety_set(s, vec({0.99, 5, -0.99, 9})));
    EXPECT_FALSE(in_safety_set(s, vec({1.0, 0, 0, 0})));
    EXPECT_FALSE(in_safety_set(s, vec({0, 0, -1.2, 0})));
    EXPECT_TRUE(in_learning_space(s, vec({0.69, 0, 0, 0})));
    EXPECT_FALSE(in_learning_space(s, vec({0.7, 0, 0, 0})));
    EXPECT_FALSE(in_learning_space(s, vec({0.71, 0, 0, 0})));
}

TEST(Safety, LearningSpaceInsideSafetySet) {
    const SafetySpec s = cartpole_safety_spec();
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 20000; ++k) {
        const Vector v = vec({u(rng), u(rng), u(rng), u(rng)});
        if (in_learning_space(s, v)) EXPECT_TRUE(in_safety_set(s, v));
    }
}

TEST(Safety, ActionAdmissibility) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_TRUE(is_admissible(s, vec({49.999})));
    EXPECT_FALSE(is_admissible(s, vec({50.0})));
    EXPECT_FALSE(is_admissible(s, vec({-60.0})));
}

TEST(Safety, DimensionMismatchThrows) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_THROW(in_safety_set(s, vec({1, 2})), InvalidState);
}

TEST(Safety, InvalidSpecRejected) {
    SafetySpec s = cartpole_safety_spec();
    s.c = vec({1, -1});
    EXPECT_THROW(s.validate(), std::invalid_argument);
    EXPECT_THROW(cartpole_safety_spec(1.0), std::invalid_argument);
}

TEST(Indicator, DiagonalBoxMatchesAnalyticSolution) {
    const Vector c = vec({1, 3, 1, 4.5});
    const SymMatrix P = compute_indicator_matrix(RectMatrix::Identity(4, 4), c);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double want = i == j ? 1.0 / (c[i] * c[i]) : 0.0;
            EXPECT_NEAR(P(i, j), want, 1e-3 / (c[i] * c[j]));
        }
}

TEST(Indicator, BoundarySamplesLieInSafetySet) {
    SafetySpec s = cartpole_safety_spec();
    const SymMatrix& P = compute_indicator_matrix(s);
    const RectMatrix L = invert_spd(P).dense().llt().matrixL();
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 10000; ++k) {
        Vector z = vec({nd(rng), nd(rng), nd(rng), nd(rng)});
        z.normalize();
        const Vector v = L * z;  // v' P v = 1
        EXPECT_NEAR(safety_indicator(s, v), 1.0, 1e-9);
        EXPECT_TRUE(in_safety_set(s, v));
    }
}

TEST(Indicator, UnboundedPolytopeIsDegenerate) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_THROW(compute_indicator_matrix(s.C, s.c), DegenerateSafetySet);
}

TEST(Indicator, NeedsComputation) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_THROW(safety_indicator(s, vec({0, 0, 0, 0})), std::logic_error);
}

TEST(Indicator, ZeroAtOriginAndHomogeneous) {
    SafetySpec s = cartpole_safety_spec();
    compute_indicator_matrix(s);
    EXPECT_EQ(safety_indicator(s, Vector::Zero(4)), 0.0);
    const Vector v = vec({0.3, -0.1, 0.2, 0.5});
    EXPECT_NEAR(safety_indicator(s, 2.0 * v), 4.0 * safety_indicator(s, v), 1e-12);
}

TEST(Trigger, FiresOnlyOnExitCrossing) {
    const SafetySpec s = cartpole_safety_spec();
    EXPECT_FALSE(check_trigger(s, vec({0.1, 0, 0, 0}), vec({0.2, 0, 0, 0})));
    EXPECT_TRUE(check_trigger(s, vec({0.69, 0, 0, 0}), vec({0.71, 0, 0, 0})));
    EXPECT_FALSE(check_trigger(s, vec({0.8, 0, 0, 0}), vec({0.9, 0, 0, 0})));
    EXPECT_FALSE(check_trigger(s, vec({0.8, 0, 0, 0}), vec({0.5, 0, 0, 0})));
}
