#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "calib/oracle.hpp"
#include "oracle_expected.hpp"

using namespace calib;

TEST(Oracle, BaseFunctionExamples) {
    EXPECT_DOUBLE_EQ(bowl(1, 1, 1, 2, -1, 1, -3), 1.0);
    EXPECT_DOUBLE_EQ(logistic(0.3, 2.0, 5.0, 0.3, 0.25), 2.0 / 2 + 0.25);
    EXPECT_NEAR(gaussian(0.4, 0.7, 0.5, 0.4, 0.7, 2.0, -0.1), 2.0 / (2 * M_PI * 0.25) - 0.1, 1e-15);
    // scale sits outside the exponent: 1 / (1 + e^{-k} (phi - mu))
    EXPECT_NEAR(modlogistic(0.5, 0.2, -1.0, 0.5, 0.0), 0.2, 1e-15);
    EXPECT_NEAR(modlogistic(1.0, -2.0, -1.1, 2.0, -0.4), -2.0 / (1.0 + std::exp(1.1) * (1.0 - 2.0)) - 0.4, 1e-15);
}

TEST(Oracle, ModLogisticPole) {
    // pole at phi = mu - e^{k}
    const double k = 0.3, mu = 0.5;
    try {
        (void)modlogistic(mu - std::exp(k), 1.0, k, mu, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "pole");
    }
}

TEST(Oracle, GtCalibratedMatchesOracleGrid) {
    using namespace oracle_expected;
    const std::array<const std::array<double, 28>*, 7> expected{&kGtStove, &kGtTable, &kGtLaptopByWeight, &kGtCupAngle,
                                                                &kGtLaptopByFullness, &kGtHuman, &kGtPoint};
    for (std::size_t f = 0; f < kAllGtFns.size(); ++f)
        for (std::size_t i = 0; i < kGtPhis.size(); ++i)
            for (std::size_t j = 0; j < kGtCs.size(); ++j)
                EXPECT_NEAR(gt_calibrated(kAllGtFns[f], kGtPhis[i], kGtCs[j]), (*expected[f])[i * kGtCs.size() + j], 1e-12)
                    << to_string(kAllGtFns[f]) << " phi=" << kGtPhis[i] << " c=" << kGtCs[j];
}

TEST(Oracle, GtCalibratedExamples) {
    for (double phi : {0.0, 0.3, 1.0}) EXPECT_EQ(gt_calibrated(GtFn::Stove, phi, 0.0), 1.0);
    EXPECT_EQ(gt_calibrated(GtFn::Stove, 0.0, 1.0), 0.0);
    EXPECT_EQ(gt_calibrated(GtFn::LaptopByWeight, 1.2, 0.7), 1.0);
    EXPECT_EQ(gt_calibrated(GtFn::Point, 0.2, 0.9), 1.0);
}

TEST(Oracle, GtFunctionsInUnitIntervalOnGrid) {
    for (auto fn : kAllGtFns)
        for (int i = 0; i <= 100; ++i)
            for (int j = 0; j <= 100; ++j) {
                const double v = gt_calibrated(fn, i / 100.0, j / 100.0);
                ASSERT_GE(v, 0.0) << to_string(fn);
                ASSERT_LE(v, 1.0) << to_string(fn);
            }
}

TEST(Oracle, BtProbExamplesAndAntisymmetry) {
    EXPECT_NEAR(bt_prob(0.55, 0.45, 20), 0.8807970779778823, 1e-12);
    EXPECT_NEAR(bt_prob(1, 0, 1), 0.7310585786300049, 1e-12);
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), beta = rng.uniform(0.1, 50);
        EXPECT_NEAR(bt_prob(a, b, beta) + bt_prob(b, a, beta), 1.0, 1e-12);
    }
    EXPECT_EQ(bt_prob(35.0, 0.0, 20.0), 1.0);
    EXPECT_LT(bt_prob(0.0, 35.0, 20.0), 1e-300);
    EXPECT_TRUE(std::isfinite(bt_prob(-35.0, 0.0, 20.0)));
}

TEST(Oracle, RespondEquivalenceIsDeterministic) {
    Rng rng(1);
    const OracleConfig cfg;
    for (int i = 0; i < 10000; ++i) {
        const double a = rng.uniform(), d = rng.uniform(-cfg.epsilon, cfg.epsilon);
        ASSERT_EQ(respond(a, a + d, cfg, rng), Label::Equal);
    }
    EXPECT_EQ(respond(0.0, 0.01, cfg, rng), Label::Equal);  // boundary is inclusive
}

TEST(Oracle, RespondStatistics) {
    const OracleConfig cfg;
    Rng rng(2);
    int first = 0;
    for (int i = 0; i < 10000; ++i) first += respond(1.0, 0.5, cfg, rng) == Label::First;
    EXPECT_GE(first, 9990);  // P = sigmoid(10)

    int wins = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) wins += respond(0.55, 0.45, cfg, rng) == Label::First;
    const double p = bt_prob(0.55, 0.45, 20);
    EXPECT_NEAR(static_cast<double>(wins) / n, p, 5 * std::sqrt(p * (1 - p) / n));
}

TEST(Oracle, OracleConfigValidation) {
    EXPECT_THROW((OracleConfig{0.0, 0.01}.validate()), Error);
    EXPECT_THROW((OracleConfig{1.0, -1.0}.validate()), Error);
    EXPECT_NO_THROW((OracleConfig{}.validate()));
}

TEST(Oracle, LabelsMapToTargets) {
    EXPECT_EQ(label_target(Label::First), 1.0);
    EXPECT_EQ(label_target(Label::Equal), 0.5);
    EXPECT_EQ(label_target(Label::Second), 0.0);
    for (auto l : {Label::First, Label::Equal, Label::Second}) EXPECT_EQ(label_from_string(to_string(l)), l);
    EXPECT_THROW(label_from_string("maybe"), Error);
}

class RewardFixture : public ::testing::Test {
protected:
    EnvironmentSpec env = EnvironmentSpec::make(EnvName::Cup);
    StateSet set = build_state_set(env, 500, 0);
    Normalizer norm = fit_normalizer(set, env);
};

TEST_F(RewardFixture, ZeroWeightsGiveZeroReward) {
    for (const auto& s : set.states) ASSERT_EQ(gt_reward({{0, 0, 0}}, env, norm, Scenario::all(), s), 0.0);
}

TEST_F(RewardFixture, SingleTermEqualsCalibratedFeature) {
    for (const auto& s : set.states)
        ASSERT_DOUBLE_EQ(gt_reward({{1, 0, 0}}, env, norm, Scenario::all(), s), gt_feature_value(env, norm, 0, s));
}

TEST_F(RewardFixture, SingleScenarioIgnoresOtherContexts) {
    // single(stove): only stove heat matters; perturbing the cup fullness is a no-op
    const RewardWeights w{{1, -0.5, 0.5}};
    for (const auto& s : set.states) {
        State t = s;
        t.context[1] = 1.0 - s.context[1];
        ASSERT_EQ(gt_reward(w, env, norm, Scenario::single(0), s), gt_reward(w, env, norm, Scenario::single(0), t));
    }
    // single(cup_angle): the stove heat no longer matters
    for (const auto& s : set.states) {
        State t = s;
        t.context[0] = 1.0 - s.context[0];
        ASSERT_EQ(gt_reward(w, env, norm, Scenario::single(1), s), gt_reward(w, env, norm, Scenario::single(1), t));
    }
}

TEST_F(RewardFixture, ScenarioNames) {
    EXPECT_EQ(to_string(Scenario::single(1), env), "single:cup_angle");
    EXPECT_EQ(scenario_from_string("single:laptop_dist", env), Scenario::single(2));
    EXPECT_EQ(scenario_from_string("all", env), Scenario::all());
    EXPECT_THROW(scenario_from_string("single:human_dist", env), Error);
    EXPECT_THROW(scenario_from_string("some", env), Error);
}

TEST(Oracle, RewardGrids) {
    const auto g = make_reward_grids();
    ASSERT_EQ(g.test.size(), 10u);
    ASSERT_EQ(g.joint.size(), 50u);
    EXPECT_EQ(g.joint[0], (RewardWeights{{1, 1, 1}}));
    const RewardWeights zero{}, ones{{1, 1, 1}}, neg{{-1, -1, -1}};
    std::set<RewardWeights> test(g.test.begin(), g.test.end()), joint(g.joint.begin(), g.joint.end());
    EXPECT_EQ(test.size(), 10u);
    EXPECT_EQ(joint.size(), 50u);
    for (std::size_t i = 0; i < g.test.size(); i += 2)
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(g.test[i].theta[k], -g.test[i + 1].theta[k]);
    for (const auto& w : g.test) {
        EXPECT_NE(w, zero);
        EXPECT_NE(w, ones);
        EXPECT_NE(w, neg);
        EXPECT_FALSE(joint.count(w));
        for (double t : w.theta) EXPECT_NE(std::find(kWeightGrid.begin(), kWeightGrid.end(), t), kWeightGrid.end());
    }
    EXPECT_FALSE(joint.count(zero));
    const auto t10 = g.train(10), t25 = g.train(25);
    EXPECT_TRUE(std::equal(t10.begin(), t10.end(), t25.begin()));
    EXPECT_EQ(g.single_pref().size(), 1u);
    EXPECT_THROW((void)g.train(7), Error);
    EXPECT_EQ(make_reward_grids().joint, g.joint);
    EXPECT_EQ(all_grid_rewards().size(), 125u);
}
