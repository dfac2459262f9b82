// Simulated-human experiments: representation pre-training, downstream reward
// learning on held-out test rewards, evaluation and per-seed bookkeeping.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <tuple>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/geometry_env.hpp"
#include "calib/learning.hpp"
#include "calib/oracle.hpp"
#include "calib/parallel.hpp"
#include "calib/rng.hpp"

namespace calib {

// ---- methods ---------------------------------------------------------------

enum class Method { CalibratedFeatures, SinglePref, JointPref10, JointPref25, JointPref50 };
inline constexpr std::array<Method, 5> kAllMethods{Method::CalibratedFeatures, Method::SinglePref,
                                                   Method::JointPref10, Method::JointPref25,
                                                   Method::JointPref50};

inline std::size_t training_rewards(Method m) {
    switch (m) {
        case Method::CalibratedFeatures: return 0;
        case Method::SinglePref: return 1;
        case Method::JointPref10: return 10;
        case Method::JointPref25: return 25;
        case Method::JointPref50: return 50;
    }
    throw Error("unknown method");
}

inline std::string method_base_name(Method m) {
    switch (m) {
        case Method::CalibratedFeatures: return "CF";
        case Method::SinglePref: return "SinglePref";
        case Method::JointPref10: return "JointPref-10";
        case Method::JointPref25: return "JointPref-25";
        case Method::JointPref50: return "JointPref-50";
    }
    throw Error("unknown method");
}

inline Method method_from_string(std::string_view s) {
    for (auto m : kAllMethods)
        if (method_base_name(m) == s) return m;
    throw Error("unknown method '" + std::string(s) + "'");
}

/// "CF" or "<baseline>/frozen" / "<baseline>/unfrozen".
inline std::string method_name(Method m, bool frozen) {
    if (m == Method::CalibratedFeatures) return "CF";
    return method_base_name(m) + (frozen ? "/frozen" : "/unfrozen");
}

// ---- configuration ------------------------------------------------------------

inline constexpr std::size_t kEvalPairs = 1000;
inline constexpr std::size_t kSingleScenarioBudget = 100;
inline constexpr std::size_t kAllScenarioBudget = 300;
inline const std::vector<std::size_t> kDefaultRewardQueryGrid{0, 5, 10, 25, 50, 100};
inline const std::vector<std::uint64_t> kDefaultSeeds{0, 1, 2, 3, 4, 5};
/// Query budgets for the feature-MSE learning curve; 0 is the untrained network.
inline const std::vector<std::size_t> kDefaultFeatureBudgets{0, 10, 25, 50, 100};

struct ExperimentConfig {
    TrainHyper cf_rep = TrainHyper::calibrated_features();
    TrainHyper mt_rep = TrainHyper::multitask_representation();
    TrainHyper cf_reward = TrainHyper::calibrated_reward();
    TrainHyper mt_reward = TrainHyper::multitask_reward();
    OracleConfig oracle{};
    std::size_t state_count = kDefaultStateCount;
    std::uint64_t state_seed = kDefaultStateSeed;
    std::uint64_t grid_seed = kDefaultGridSeed;
    std::size_t eval_pairs = kEvalPairs;
    ObjectLayout layout{};
    WorkspaceBox workspace{};
};

struct ExperimentPlan {
    EnvName env = EnvName::WeightedBlock;
    Scenario scenario = Scenario::all();
    std::size_t pretrain_budget = kAllScenarioBudget;
    std::vector<std::size_t> reward_query_grid = kDefaultRewardQueryGrid;
    std::vector<std::uint64_t> seeds = kDefaultSeeds;
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    /// Baselines are run both frozen and fine-tuned; CF is always frozen.
    std::vector<bool> baseline_frozen{true, false};
    ExperimentConfig config{};

    static ExperimentPlan standard(EnvName env, Scenario sc) {
        ExperimentPlan p;
        p.env = env;
        p.scenario = sc;
        p.pretrain_budget = sc.single_slot ? kSingleScenarioBudget : kAllScenarioBudget;
        return p;
    }

    [[nodiscard]] EnvironmentSpec env_spec() const {
        return EnvironmentSpec::make(env, config.layout, config.workspace);
    }

    [[nodiscard]] std::vector<std::string> method_names() const {
        std::vector<std::string> out;
        for (auto m : methods) {
            if (m == Method::CalibratedFeatures) out.push_back(method_name(m, true));
            else
                for (bool f : baseline_frozen) out.push_back(method_name(m, f));
        }
        return out;
    }
};

/// One long-format result row.
struct MetricRow {
    std::string method;
    std::string env;
    std::string scenario;
    std::uint64_t seed = 0;
    std::size_t query_count = 0;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline bool row_less(const MetricRow& a, const MetricRow& b) {
    return std::tie(a.env, a.scenario, a.metric, a.method, a.seed, a.query_count) <
           std::tie(b.env, b.scenario, b.metric, b.method, b.seed, b.query_count);
}

struct ExperimentResult {
    ExperimentPlan plan;
    /// metric "reward_accuracy": mean over the test rewards, per method/seed/count.
    std::vector<MetricRow> rows;
    /// Pre-training and evaluation diagnostics: "mse", "head_accuracy",
    /// "evaluable_pairs" (query_count holds the test-reward index).
    std::vector<MetricRow> diagnostics;
};

// ---- metrics ---------------------------------------------------------------------

inline double metric_mse(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.empty()) throw Error("empty test set");
    if (predicted.size() != truth.size()) throw Error("prediction/truth size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - truth[i]) * (predicted[i] - truth[i]);
    return s / static_cast<double>(predicted.size());
}

inline double metric_mse(const CalibratedFeature& cf, const Featurizer& fz, std::span<const State> test_states) {
    const Eigen::RowVectorXd pred = cf.values(fz, test_states);
    std::vector<double> p(pred.data(), pred.data() + pred.size()), t;
    t.reserve(test_states.size());
    for (const auto& s : test_states) t.push_back(gt_feature_value(fz.env, fz.norm, cf.slot, s));
    return metric_mse(p, t);
}

using IndexPair = std::pair<std::size_t, std::size_t>;

struct AccuracyResult {
    double accuracy = 0.0;
    std::size_t evaluable = 0;
};

/// Fraction of pairs whose predicted ordering matches the ground truth,
/// skipping pairs the ground truth considers equivalent. Predicted ties count
/// as wrong.
inline AccuracyResult metric_reward_accuracy(std::span<const double> model, std::span<const double> gt,
                                             std::span<const IndexPair> pairs, double epsilon) {
    std::size_t correct = 0, evaluable = 0;
    for (const auto& [a, b] : pairs) {
        const double dg = gt[a] - gt[b];
        if (std::abs(dg) <= epsilon) continue;
        ++evaluable;
        const double dm = model[a] - model[b];
        if ((dm > 0.0 && dg > 0.0) || (dm < 0.0 && dg < 0.0)) ++correct;
    }
    if (evaluable == 0) throw Error("no evaluable pairs");
    return {static_cast<double>(correct) / static_cast<double>(evaluable), evaluable};
}

inline std::vector<IndexPair> sample_index_pairs(std::size_t n, std::size_t count, Rng& rng) {
    if (n < 2) throw Error("need at least two states to form a pair");
    std::vector<IndexPair> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t a = rng.uniform_int(n);
        std::size_t b = rng.uniform_int(n - 1);
        if (b >= a) ++b;
        out.emplace_back(a, b);
    }
    return out;
}

inline std::vector<double> to_std(const Eigen::RowVectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---- per-seed context ---------------------------------------------------------------

/// Everything derived from (environment, seed) that all methods share.
struct SeedContext {
    EnvironmentSpec env;
    StateSet set;
    Featurizer fz;
    std::vector<State> test_states;
    std::vector<IndexPair> eval_pairs;  // indices into test_states
    RewardGrids grids;
};

inline SeedContext make_seed_context(const ExperimentConfig& cfg, EnvName env_name, std::uint64_t seed) {
    SeedContext ctx;
    ctx.env = EnvironmentSpec::make(env_name, cfg.layout, cfg.workspace);
    ctx.set = build_state_set(ctx.env, cfg.state_count, seed, cfg.state_seed);
    ctx.fz = Featurizer{ctx.env, fit_normalizer(ctx.set, ctx.env)};
    for (auto i : ctx.set.test_idx) ctx.test_states.push_back(ctx.set.states[i]);
    Rng rng(derive_seed(seed, {hash_tag("eval-pairs"), static_cast<std::uint64_t>(env_name)}));
    ctx.eval_pairs = sample_index_pairs(ctx.test_states.size(), cfg.eval_pairs, rng);
    ctx.grids = make_reward_grids(cfg.grid_seed);
    return ctx;
}

inline std::uint64_t scenario_tag(const Scenario& sc) { return sc.single_slot ? *sc.single_slot : 99; }

/// Contextual feature queries for one slot, answered by the simulated human,
/// then a calibrated feature trained on them. Independent of the scenario,
/// so the same features serve every downstream reward in an environment.
inline CalibratedFeature pretrain_feature(const SeedContext& ctx, const ExperimentConfig& cfg,
                                          std::size_t slot, std::size_t budget, std::uint64_t seed) {
    const auto env_tag = static_cast<std::uint64_t>(ctx.env.name);
    Rng rng(derive_seed(seed, {hash_tag("cf-queries"), env_tag, slot}));
    const ValueFn truth = [&](const State& s) { return gt_feature_value(ctx.env, ctx.fz.norm, slot, s); };
    const auto d = collect_queries(ctx.set.states, ctx.set.train_idx, truth, cfg.oracle, budget, false, rng);
    return train_calibrated_feature(ctx.fz, slot, d, cfg.cf_rep, derive_seed(seed, {hash_tag("cf-init"), env_tag, slot}));
}

inline MultiTaskRep pretrain_multitask(const SeedContext& ctx, const ExperimentConfig& cfg, const Scenario& sc,
                                       std::size_t n_rewards, std::size_t budget, std::uint64_t seed) {
    const auto env_tag = static_cast<std::uint64_t>(ctx.env.name);
    const auto rewards = ctx.grids.train(n_rewards);
    const auto budgets = split_budget(budget, n_rewards);
    std::vector<QueryDataset> data;
    for (std::size_t i = 0; i < n_rewards; ++i) {
        Rng rng(derive_seed(seed, {hash_tag("mt-queries"), env_tag, scenario_tag(sc), n_rewards, i}));
        const ValueFn truth = [&](const State& s) { return gt_reward(rewards[i], ctx.env, ctx.fz.norm, sc, s); };
        data.push_back(collect_queries(ctx.set.states, ctx.set.train_idx, truth, cfg.oracle, budgets[i], false, rng));
    }
    return train_multitask(ctx.fz, data, cfg.mt_rep,
                           derive_seed(seed, {hash_tag("mt-init"), env_tag, scenario_tag(sc), n_rewards}));
}

inline std::vector<double> gt_reward_values(const SeedContext& ctx, const RewardWeights& w, const Scenario& sc,
                                            std::span<const State> states) {
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(gt_reward(w, ctx.env, ctx.fz.norm, sc, s));
    return out;
}

/// Calibrated slots for a scenario and the pre-training budget each receives.
inline std::vector<std::pair<std::size_t, std::size_t>> feature_budgets(const Scenario& sc, std::size_t budget) {
    if (sc.single_slot) return {{*sc.single_slot, budget}};
    const auto split = split_budget(budget, kFeaturesPerEnv);
    return {{0, split[0]}, {1, split[1]}, {2, split[2]}};
}

/// Full pipeline for one seed of a plan.
inline ExperimentResult run_seed(const ExperimentPlan& plan, std::uint64_t seed) {
    const auto& cfg = plan.config;
    const SeedContext ctx = make_seed_context(cfg, plan.env, seed);
    const std::string env_name(to_string(plan.env));
    const std::string sc_name = to_string(plan.scenario, ctx.env);
    const auto env_tag = static_cast<std::uint64_t>(plan.env);
    const auto sc_tag = scenario_tag(plan.scenario);
    ExperimentResult out;
    out.plan = plan;
    auto diag = [&](std::string method, std::size_t qc, std::string metric, double v) {
        out.diagnostics.push_back({std::move(method), env_name, sc_name, seed, qc, std::move(metric), v});
    };

    const std::size_t max_q = plan.reward_query_grid.empty()
                                  ? 0
                                  : *std::max_element(plan.reward_query_grid.begin(), plan.reward_query_grid.end());
    const bool want_cf = std::find(plan.methods.begin(), plan.methods.end(), Method::CalibratedFeatures) != plan.methods.end();

    // Representation learning.
    CalibratedRepresentation cf_rep;
    Eigen::MatrixXd cf_test_features;
    if (want_cf) {
        for (const auto& [slot, budget] : feature_budgets(plan.scenario, plan.pretrain_budget)) {
            cf_rep.features[slot] = pretrain_feature(ctx, cfg, slot, budget, seed);
            diag("CF:" + std::string(to_string(ctx.env.features[slot])), budget, "mse",
                 metric_mse(*cf_rep.features[slot], ctx.fz, ctx.test_states));
        }
        cf_test_features = cf_rep.encode(ctx.fz, ctx.test_states);
    }

    struct Baseline {
        Method method;
        MultiTaskRep rep;
        Eigen::MatrixXd test_latent;
    };
    std::vector<Baseline> baselines;
    for (auto m : plan.methods) {
        if (m == Method::CalibratedFeatures) continue;
        const std::size_t n = training_rewards(m);
        Baseline b{m, pretrain_multitask(ctx, cfg, plan.scenario, n, plan.pretrain_budget, seed), {}};
        b.test_latent = b.rep.encode(ctx.fz, ctx.test_states);
        const auto rewards = ctx.grids.train(n);
        double acc_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto gt = gt_reward_values(ctx, rewards[i], plan.scenario, ctx.test_states);
            const auto pred = to_std(b.rep.head_values(i, b.test_latent));
            try {
                acc_sum += metric_reward_accuracy(pred, gt, ctx.eval_pairs, cfg.oracle.epsilon).accuracy;
                ++counted;
            } catch (const Error&) {
                // A training reward with no evaluable pairs has no accuracy.
            }
        }
        if (counted > 0) diag(method_base_name(m), plan.pretrain_budget, "head_accuracy", acc_sum / static_cast<double>(counted));
        baselines.push_back(std::move(b));
    }

    // Downstream reward learning on held-out test rewards.
    std::map<std::pair<std::string, std::size_t>, double> acc_sum;
    const auto& tests = ctx.grids.test;
    for (std::size_t r = 0; r < tests.size(); ++r) {
        const auto gt = gt_reward_values(ctx, tests[r], plan.scenario, ctx.test_states);
        std::size_t evaluable = 0;
        for (const auto& [a, b] : ctx.eval_pairs)
            if (std::abs(gt[a] - gt[b]) > cfg.oracle.epsilon) ++evaluable;
        diag("oracle", r, "evaluable_pairs", static_cast<double>(evaluable));

        const ValueFn truth = [&](const State& s) { return gt_reward(tests[r], ctx.env, ctx.fz.norm, plan.scenario, s); };
        // Sign-flipped partner rewards share initializations.
        const std::uint64_t pair_tag = r / 2;

        if (want_cf) {
            Rng rng(derive_seed(seed, {hash_tag("cf-reward-queries"), env_tag, sc_tag, r}));
            const auto stream = collect_queries(ctx.set.states, ctx.set.train_idx, truth, cfg.oracle, max_q, true, rng);
            for (auto q : plan.reward_query_grid) {
                const auto model = train_reward(ctx.fz, cf_rep, stream.prefix(q), cfg.cf_reward, true,
                                                derive_seed(seed, {hash_tag("cf-reward"), env_tag, sc_tag, pair_tag}));
                const auto pred = to_std(std::get<LinearReward>(model.model).values_from_features(cf_test_features));
                acc_sum[{method_name(Method::CalibratedFeatures, true), q}] +=
                    metric_reward_accuracy(pred, gt, ctx.eval_pairs, cfg.oracle.epsilon).accuracy;
            }
        }
        if (!baselines.empty()) {
            Rng rng(derive_seed(seed, {hash_tag("mt-reward-queries"), env_tag, sc_tag, r}));
            const auto stream = collect_queries(ctx.set.states, ctx.set.train_idx, truth, cfg.oracle, max_q, false, rng);
            for (const auto& b : baselines) {
                const std::size_t n = training_rewards(b.method);
                for (bool frozen : plan.baseline_frozen) {
                    for (auto q : plan.reward_query_grid) {
                        const auto model = train_reward(ctx.fz, b.rep, stream.prefix(q), cfg.mt_reward, frozen,
                                                        derive_seed(seed, {hash_tag("mt-reward"), env_tag, sc_tag, n, pair_tag}));
                        const auto& head = std::get<MlpHeadReward>(model.model);
                        const auto pred = to_std(frozen ? head.values_from_latent(b.test_latent)
                                                        : head.values(ctx.fz, ctx.test_states));
                        acc_sum[{method_name(b.method, frozen), q}] +=
                            metric_reward_accuracy(pred, gt, ctx.eval_pairs, cfg.oracle.epsilon).accuracy;
                    }
                }
            }
        }
    }
    for (const auto& [key, sum] : acc_sum)
        out.rows.push_back({key.first, env_name, sc_name, seed, key.second, "reward_accuracy",
                            sum / static_cast<double>(tests.size())});
    std::sort(out.rows.begin(), out.rows.end(), row_less);
    std::sort(out.diagnostics.begin(), out.diagnostics.end(), row_less);
    return out;
}

/// Run several plans; every (plan, seed) cell is an independent task.
inline std::vector<ExperimentResult> run_experiments(const std::vector<ExperimentPlan>& plans,
                                                     std::size_t workers = default_workers()) {
    std::vector<std::pair<std::size_t, std::uint64_t>> cells;
    for (std::size_t p = 0; p < plans.size(); ++p)
        for (auto s : plans[p].seeds) cells.emplace_back(p, s);
    std::vector<ExperimentResult> partial(cells.size());
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        partial[i] = run_seed(plans[cells[i].first], cells[i].second);
    });
    std::vector<ExperimentResult> out(plans.size());
    for (std::size_t p = 0; p < plans.size(); ++p) out[p].plan = plans[p];
    for (std::size_t i = 0; i < cells.size(); ++i) {
        auto& dst = out[cells[i].first];
        auto& src = partial[i];
        dst.rows.insert(dst.rows.end(), src.rows.begin(), src.rows.end());
        dst.diagnostics.insert(dst.diagnostics.end(), src.diagnostics.begin(), src.diagnostics.end());
    }
    for (auto& r : out) {
        std::sort(r.rows.begin(), r.rows.end(), row_less);
        std::sort(r.diagnostics.begin(), r.diagnostics.end(), row_less);
    }
    return out;
}

inline ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t workers = default_workers()) {
    return std::move(run_experiments({plan}, workers).front());
}

/// Test MSE of each environment feature's calibrated model as a function of
/// the number of contextual feature queries. Budget 0 is the untrained model.
inline std::vector<MetricRow> run_feature_curve(EnvName env, const std::vector<std::size_t>& budgets,
                                                const std::vector<std::uint64_t>& seeds,
                                                const ExperimentConfig& cfg = {},
                                                std::size_t workers = default_workers()) {
    std::vector<std::vector<MetricRow>> partial(seeds.size());
    parallel_for(seeds.size(), workers, [&](std::size_t i) {
        const auto ctx = make_seed_context(cfg, env, seeds[i]);
        for (std::size_t slot = 0; slot < kFeaturesPerEnv; ++slot)
            for (auto b : budgets) {
                const auto cf = pretrain_feature(ctx, cfg, slot, b, seeds[i]);
                partial[i].push_back({"CF:" + std::string(to_string(ctx.env.features[slot])),
                                      std::string(to_string(env)), "feature", seeds[i], b, "mse",
                                      metric_mse(cf, ctx.fz, ctx.test_states)});
            }
    });
    std::vector<MetricRow> out;
    for (auto& p : partial) out.insert(out.end(), p.begin(), p.end());
    std::sort(out.begin(), out.end(), row_less);
    return out;
}

// ---- aggregation ----------------------------------------------------------------------

struct Aggregate {
    double mean = 0.0;
    double se = 0.0;  // standard error across seeds
    std::size_t n = 0;
};

inline Aggregate aggregate(std::span<const double> per_seed) {
    Aggregate a;
    a.n = per_seed.size();
    if (a.n == 0) return a;
    for (double v : per_seed) a.mean += v;
    a.mean /= static_cast<double>(a.n);
    if (a.n > 1) {
        double ss = 0.0;
        for (double v : per_seed) ss += (v - a.mean) * (v - a.mean);
        a.se = std::sqrt(ss / static_cast<double>(a.n - 1)) / std::sqrt(static_cast<double>(a.n));
    }
    return a;
}

/// Key (env, scenario, method, metric, query_count) -> seed aggregate.
using AggregateKey = std::tuple<std::string, std::string, std::string, std::string, std::size_t>;

inline std::map<AggregateKey, Aggregate> aggregate_rows(std::span<const MetricRow> rows) {
    std::map<AggregateKey, std::vector<double>> groups;
    for (const auto& r : rows) groups[{r.env, r.scenario, r.method, r.metric, r.query_count}].push_back(r.value);
    std::map<AggregateKey, Aggregate> out;
    for (const auto& [k, v] : groups) out[k] = aggregate(v);
    return out;
}

// ---- point clouds ---------------------------------------------------------------------------

/// Evenly spaced discrete values in [0, 1] used for visualization and the
/// teaching sessions.
inline std::size_t discrete_context_count(std::string_view context_name) {
    if (context_name == "stove_heat") return 8;
    if (context_name == "block_weight") return 16;
    if (context_name == "cup_fullness") return 6;
    if (context_name == "utensil_sharpness") return 4;
    throw Error("unknown context element '" + std::string(context_name) + "'");
}

inline std::vector<double> discrete_context_values(std::string_view context_name) {
    const std::size_t n = discrete_context_count(context_name);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline double snap_to_grid(double x, std::span<const double> grid) {
    if (grid.empty()) throw Error("empty context grid");
    return *std::min_element(grid.begin(), grid.end(),
                             [x](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
}

struct CloudPoint {
    Vec3 position{};
    double value = 0.0;
};

/// Clouds for every discrete value of one context element, normalized
/// jointly across all of them.
struct PointCloudSet {
    std::string context_name;
    std::size_t context_index = 0;
    std::vector<double> context_values;
    std::vector<std::vector<CloudPoint>> clouds;

    /// Four spread-out entries of the discrete grid.
    [[nodiscard]] std::vector<std::size_t> display_indices() const {
        const std::size_t n = context_values.size();
        if (n <= 4) {
            std::vector<std::size_t> all(n);
            for (std::size_t i = 0; i < n; ++i) all[i] = i;
            return all;
        }
        std::vector<std::size_t> out;
        for (int k = 0; k < 4; ++k)
            out.push_back(static_cast<std::size_t>(std::lround(static_cast<double>(k) * static_cast<double>(n - 1) / 3.0)));
        return out;
    }

    [[nodiscard]] std::size_t nearest_index(double context) const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < context_values.size(); ++i)
            if (std::abs(context_values[i] - context) < std::abs(context_values[best] - context)) best = i;
        return best;
    }

    /// Nearest of the four display contexts.
    [[nodiscard]] std::size_t display_index(double context) const {
        const auto idx = display_indices();
        std::size_t best = idx.front();
        for (auto i : idx)
            if (std::abs(context_values[i] - context) < std::abs(context_values[best] - context)) best = i;
        return best;
    }
};

using StateBatchFn = std::function<std::vector<double>(std::span<const State>)>;

/// Evaluate `values` at n_points random EE poses for each discrete value of
/// `context_name`, other context elements held at zero.
inline PointCloudSet pointcloud(const StateBatchFn& values, const EnvironmentSpec& env,
                                std::string_view context_name, std::size_t n_points, std::uint64_t seed = 0) {
    PointCloudSet set;
    set.context_name = std::string(context_name);
    auto it = std::find(env.context_names.begin(), env.context_names.end(), context_name);
    if (it == env.context_names.end()) throw Error("unknown context element '" + std::string(context_name) + "'");
    set.context_index = static_cast<std::size_t>(it - env.context_names.begin());
    set.context_values = discrete_context_values(context_name);

    Rng rng(derive_seed(seed, {hash_tag("pointcloud"), static_cast<std::uint64_t>(env.name)}));
    std::vector<State> base(n_points);
    for (auto& s : base) {
        s = sample_state(env, rng);
        s.context = {0.0, 0.0};
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double c : set.context_values) {
        std::vector<State> states = base;
        for (auto& s : states) s.context[set.context_index] = c;
        const auto v = values(states);
        if (v.size() != states.size()) throw Error("value function returned wrong size");
        std::vector<CloudPoint> cloud(n_points);
        for (std::size_t i = 0; i < n_points; ++i) {
            cloud[i] = {states[i].ee_pos, v[i]};
            lo = std::min(lo, v[i]);
            hi = std::max(hi, v[i]);
        }
        set.clouds.push_back(std::move(cloud));
    }
    const double range = hi - lo;
    for (auto& cloud : set.clouds)
        for (auto& p : cloud) p.value = range > 0.0 ? (p.value - lo) / range : 0.0;
    return set;
}

/// Value sources for point clouds.
inline StateBatchFn base_feature_values(const Featurizer& fz, std::size_t slot) {
    return [fz, slot](std::span<const State> states) {
        std::vector<double> out;
        out.reserve(states.size());
        for (const auto& s : states) out.push_back(fz.base(slot, s));
        return out;
    };
}

inline StateBatchFn calibrated_values(const Featurizer& fz, const CalibratedFeature& cf) {
    return [fz, cf](std::span<const State> states) { return to_std(cf.values(fz, states)); };
}

inline StateBatchFn gt_values(const Featurizer& fz, std::size_t slot) {
    return [fz, slot](std::span<const State> states) {
        std::vector<double> out;
        out.reserve(states.size());
        for (const auto& s : states) out.push_back(gt_feature_value(fz.env, fz.norm, slot, s));
        return out;
    };
}

}  // namespace calib
