#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "calib/experiments.hpp"
#include "calib/parallel.hpp"

using namespace calib;

TEST(Rng, DeterministicAndInRange) {
    Rng a(1), b(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    Rng r(2);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        ASSERT_TRUE(u >= 0.0 && u < 1.0);
        ASSERT_LT(r.uniform_int(7), 7u);
    }
    EXPECT_NE(derive_seed(1, {2}), derive_seed(1, {3}));
    EXPECT_NE(hash_tag("a"), hash_tag("b"));
    std::vector<int> v{1, 2, 3, 4, 5};
    r.shuffle(v);
    EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 5u);
}

TEST(Metrics, MseAndErrors) {
    const std::vector<double> p{0.0, 1.0}, t{0.5, 1.0};
    EXPECT_DOUBLE_EQ(metric_mse(p, t), 0.125);
    try {
        (void)metric_mse(std::vector<double>{}, std::vector<double>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "empty test set");
    }
}

TEST(Metrics, RewardAccuracyExcludesEquivalentAndCountsTiesWrong) {
    const std::vector<double> gt{0.0, 0.005, 1.0, 2.0};
    const std::vector<double> model{5.0, 0.0, 1.0, 1.0};
    const std::vector<IndexPair> pairs{{0, 1}, {0, 2}, {2, 3}, {3, 1}};
    // (0,1) is equivalent; (0,2) wrong; (2,3) tie -> wrong; (3,1) right
    const auto r = metric_reward_accuracy(model, gt, pairs, 0.01);
    EXPECT_EQ(r.evaluable, 3u);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0 / 3.0);
    try {
        (void)metric_reward_accuracy(model, gt, std::vector<IndexPair>{{0, 1}}, 0.01);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "no evaluable pairs");
    }
}

TEST(Metrics, SignFlippedModelScoresComplement) {
    Rng rng(3);
    std::vector<double> gt(200), model(200), neg(200);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gt[i] = rng.uniform();
        model[i] = gt[i] + rng.normal() * 0.2;
        neg[i] = -model[i];
    }
    const auto pairs = sample_index_pairs(gt.size(), 1000, rng);
    for (const auto& [a, b] : pairs) ASSERT_NE(a, b);
    const auto r1 = metric_reward_accuracy(model, gt, pairs, 0.01), r2 = metric_reward_accuracy(neg, gt, pairs, 0.01);
    EXPECT_NEAR(r1.accuracy + r2.accuracy, 1.0, 1e-12);
}

TEST(Aggregation, MeanAndStandardError) {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto a = aggregate(v);
    EXPECT_DOUBLE_EQ(a.mean, 2.5);
    EXPECT_NEAR(a.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
    EXPECT_EQ(a.n, 4u);
    const std::vector<double> one{0.7};
    EXPECT_EQ(aggregate(one).se, 0.0);
}

TEST(Methods, NamesAndTrainingRewards) {
    EXPECT_EQ(method_name(Method::CalibratedFeatures, true), "CF");
    EXPECT_EQ(method_name(Method::JointPref10, true), "JointPref-10/frozen");
    EXPECT_EQ(method_name(Method::SinglePref, false), "SinglePref/unfrozen");
    for (auto m : kAllMethods) EXPECT_EQ(method_from_string(method_base_name(m)), m);
    EXPECT_EQ(training_rewards(Method::JointPref50), 50u);
    EXPECT_EQ(training_rewards(Method::SinglePref), 1u);
}

TEST(PointCloud, DiscreteContexts) {
    EXPECT_EQ(discrete_context_values("stove_heat").size(), 8u);
    EXPECT_EQ(discrete_context_values("block_weight").size(), 16u);
    EXPECT_EQ(discrete_context_values("cup_fullness").size(), 6u);
    EXPECT_EQ(discrete_context_values("utensil_sharpness").size(), 4u);
    EXPECT_DOUBLE_EQ(discrete_context_values("cup_fullness").back(), 1.0);
    try {
        (void)discrete_context_count("humidity");
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "unknown context element 'humidity'");
    }
    const auto g = discrete_context_values("utensil_sharpness");
    EXPECT_DOUBLE_EQ(snap_to_grid(0.4, g), 1.0 / 3.0);
}

class CloudFixture : public ::testing::Test {
protected:
    EnvironmentSpec env = EnvironmentSpec::make(EnvName::Utensil);
    StateSet set = build_state_set(env, 2000, 0);
    Featurizer fz{env, fit_normalizer(set, env)};
};

TEST_F(CloudFixture, BaseFeatureCloudIsContextInvariant) {
    const auto cloud = pointcloud(base_feature_values(fz, 0), env, "stove_heat", 500);
    ASSERT_EQ(cloud.clouds.size(), 8u);
    for (std::size_t k = 1; k < cloud.clouds.size(); ++k)
        for (std::size_t i = 0; i < 500; ++i) ASSERT_EQ(cloud.clouds[k][i].value, cloud.clouds[0][i].value);
}

TEST_F(CloudFixture, JointNormalizationAndSnapping) {
    const auto cloud = pointcloud(gt_values(fz, 0), env, "stove_heat", 500, 3);
    double lo = 1e9, hi = -1e9;
    for (const auto& c : cloud.clouds)
        for (const auto& p : c) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
        }
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
    EXPECT_EQ(cloud.display_indices(), (std::vector<std::size_t>{0, 2, 5, 7}));
    std::set<std::size_t> seen;
    for (int i = 0; i <= 100; ++i) seen.insert(cloud.display_index(i / 100.0));
    EXPECT_EQ(seen.size(), 4u);
    // gt stove feature at heat 0 is 1 everywhere: constant within that cloud
    for (const auto& p : cloud.clouds[0]) ASSERT_EQ(p.value, cloud.clouds[0][0].value);
}

TEST(Experiments, SmallPlanIsBitReproducible) {
    ExperimentPlan p = ExperimentPlan::standard(EnvName::Cup, Scenario::single(1));
    p.seeds = {0, 1};
    p.pretrain_budget = 30;
    p.reward_query_grid = {0, 5, 10};
    p.methods = {Method::CalibratedFeatures, Method::JointPref10};
    p.config.state_count = 600;
    p.config.eval_pairs = 200;
    p.config.cf_rep.epochs = 20;
    p.config.mt_rep.epochs = 20;
    p.config.cf_reward.epochs = 20;
    p.config.mt_reward.epochs = 20;
    const auto a = run_experiment(p, 2);
    const auto b = run_experiment(p, 1);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    ASSERT_FALSE(a.rows.empty());
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i], b.rows[i]);
    EXPECT_EQ(a.diagnostics, b.diagnostics);
    // 2 seeds x 3 counts x (CF + JointPref-10 frozen/unfrozen)
    EXPECT_EQ(a.rows.size(), 2u * 3u * 3u);
    for (const auto& r : a.rows) {
        EXPECT_EQ(r.metric, "reward_accuracy");
        EXPECT_GE(r.value, 0.0);
        EXPECT_LE(r.value, 1.0);
    }
    std::size_t evaluable = 0;
    for (const auto& r : a.diagnostics)
        if (r.metric == "evaluable_pairs") ++evaluable;
    EXPECT_EQ(evaluable, 2u * 10u);
}

TEST(Parallel, RethrowsWorkerErrors) {
    EXPECT_THROW(parallel_for(8, 3, [](std::size_t i) {
                     if (i == 5) throw Error("boom");
                 }),
                 Error);
    std::vector<int> hits(50, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
}
