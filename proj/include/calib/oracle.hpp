// Simulated human: ground-truth calibrated features, linear ground-truth
// rewards and Bradley-Terry responses with an equivalence threshold.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/geometry_env.hpp"
#include "calib/rng.hpp"

namespace calib {

// ---- base shape functions --------------------------------------------------

inline double gaussian(double phi, double c, double sigma, double mu_phi, double mu_c, double n,
                       double b) {
    const double r2 = (phi - mu_phi) * (phi - mu_phi) + (c - mu_c) * (c - mu_c);
    return n / (2.0 * std::numbers::pi * sigma * sigma) * std::exp(-r2 / (2.0 * sigma * sigma)) + b;
}

inline double logistic(double phi, double l, double k, double mu_phi, double b) {
    return l / (1.0 + std::exp(-k * (phi - mu_phi))) + b;
}

inline double bowl(double phi, double c, double n_phi, double n_c, double mu_phi, double mu_c,
                   double b) {
    return n_phi * (phi - mu_phi) * (phi - mu_phi) + n_c * (c - mu_c) * (c - mu_c) + b;
}

/// Logistic variant whose exponential scales the offset instead of sitting
/// inside it: L / (1 + e^{-k} (phi - mu)) + b.
inline double modlogistic(double phi, double l, double k, double mu_phi, double b) {
    const double denom = 1.0 + std::exp(-k) * (phi - mu_phi);
    if (std::abs(denom) < 1e-12) throw Error("pole");
    return l / denom + b;
}

// ---- ground-truth calibrated features -----------------------------------------

enum class GtFn { Stove, Table, LaptopByWeight, CupAngle, LaptopByFullness, Human, Point };
inline constexpr std::array<GtFn, 7> kAllGtFns{GtFn::Stove,           GtFn::Table,
                                               GtFn::LaptopByWeight,  GtFn::CupAngle,
                                               GtFn::LaptopByFullness, GtFn::Human,
                                               GtFn::Point};

inline std::string_view to_string(GtFn f) {
    switch (f) {
        case GtFn::Stove: return "stove";
        case GtFn::Table: return "table";
        case GtFn::LaptopByWeight: return "laptop_by_weight";
        case GtFn::CupAngle: return "cup_angle";
        case GtFn::LaptopByFullness: return "laptop_by_fullness";
        case GtFn::Human: return "human";
        case GtFn::Point: return "point";
    }
    throw Error("unknown calibrated function id");
}

inline double clamp01(double x) { return std::min(std::max(x, 0.0), 1.0); }

/// Ground-truth calibrated value for base feature value `phi` (normalized)
/// under the relevant context element `c`.
inline double gt_calibrated(GtFn fn, double phi, double c) {
    switch (fn) {
        case GtFn::Stove:
            if (c == 0.0) return 1.0;
            return clamp01(bowl(phi, c, 1, 2, -1, 1, -3));
        case GtFn::Table:
            // The bowl is non-negative, so only the upper clamp is active.
            return clamp01(std::min(bowl(phi, c, 1.8, 1.5, 1, 1, 0), 1.0));
        case GtFn::LaptopByWeight:
            if (c == 0.0 || phi >= 1.0) return 1.0;
            return clamp01(bowl(phi, c, 2.5, 2.5, 0, 1, -1));
        case GtFn::CupAngle:
            if (c == 0.0 || phi >= 1.0) return 1.0;
            return clamp01(modlogistic(phi, -2, -1.1, 2, -0.65) + bowl(phi, c, 0.5, 1.2, -0.2, 1, -1));
        case GtFn::LaptopByFullness:
            if (c == 0.0 || phi >= 1.0) return 1.0;
            return clamp01(bowl(phi, c, 2, 1.5, 0, 1, -1.5));
        case GtFn::Human:
            if (phi >= 1.0) return 1.0;
            return clamp01(gaussian(phi, c, 0.2, 1, 0, 6, -0.55) + modlogistic(phi, -2, -1.1, 2, -0.4));
        case GtFn::Point:
            if (phi < 1.0 / 3.0) return 1.0;
            return clamp01(modlogistic(phi, 0.2, -1, 0.5, 0) + gaussian(phi, c, 0.5, 0.4, 0, 2, -0.5));
    }
    throw Error("unknown calibrated function id");
}

/// Ground-truth function for each feature slot of an environment.
inline std::array<GtFn, kFeaturesPerEnv> gt_fns(EnvName env) {
    switch (env) {
        case EnvName::WeightedBlock: return {GtFn::Stove, GtFn::Table, GtFn::LaptopByWeight};
        case EnvName::Cup: return {GtFn::Stove, GtFn::CupAngle, GtFn::LaptopByFullness};
        case EnvName::Utensil: return {GtFn::Stove, GtFn::Human, GtFn::Point};
    }
    throw Error("unknown environment");
}

/// Index into State::context of the element that modulates `fn`.
inline std::size_t context_index(GtFn fn) { return fn == GtFn::Stove ? 0 : 1; }

/// Feature saliency used to answer contextual feature queries for one slot.
inline double gt_feature_value(const EnvironmentSpec& env, const Normalizer& norm,
                               std::size_t slot, const State& s) {
    const GtFn fn = gt_fns(env.name)[slot];
    const double phi = norm.feature(slot, base_feature(env.features[slot], s, env.layout.table_z));
    return gt_calibrated(fn, phi, s.context[context_index(fn)]);
}

// ---- rewards ---------------------------------------------------------------

inline constexpr std::array<double, 5> kWeightGrid{-1.0, -0.5, 0.0, 0.5, 1.0};

struct RewardWeights {
    std::array<double, kFeaturesPerEnv> theta{};
    friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
    friend auto operator<=>(const RewardWeights&, const RewardWeights&) = default;
};

/// Which features are context-affected in the ground truth: one slot, or all.
struct Scenario {
    std::optional<std::size_t> single_slot;

    static Scenario all() { return {}; }
    static Scenario single(std::size_t slot) { return {slot}; }

    [[nodiscard]] bool calibrated(std::size_t slot) const {
        return !single_slot || *single_slot == slot;
    }
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline std::string to_string(const Scenario& sc, const EnvironmentSpec& env) {
    if (!sc.single_slot) return "all";
    return "single:" + std::string(to_string(env.features.at(*sc.single_slot)));
}

inline Scenario scenario_from_string(std::string_view text, const EnvironmentSpec& env) {
    if (text == "all") return Scenario::all();
    constexpr std::string_view prefix = "single:";
    if (text.substr(0, prefix.size()) != prefix)
        throw Error("scenario must be 'all' or 'single:<feature>'");
    return Scenario::single(env.slot_of(feature_from_string(text.substr(prefix.size()))));
}

/// Per-slot ground-truth feature values: calibrated where the scenario says
/// so, the normalized base feature otherwise.
inline std::array<double, kFeaturesPerEnv> gt_features(const EnvironmentSpec& env,
                                                       const Normalizer& norm,
                                                       const Scenario& sc, const State& s) {
    std::array<double, kFeaturesPerEnv> out{};
    for (std::size_t j = 0; j < kFeaturesPerEnv; ++j)
        out[j] = sc.calibrated(j) ? gt_feature_value(env, norm, j, s)
                                  : norm.feature(j, base_feature(env.features[j], s, env.layout.table_z));
    return out;
}

inline double gt_reward(const RewardWeights& w, const EnvironmentSpec& env, const Normalizer& norm,
                        const Scenario& sc, const State& s) {
    const auto f = gt_features(env, norm, sc, s);
    double r = 0.0;
    for (std::size_t j = 0; j < kFeaturesPerEnv; ++j) r += w.theta[j] * f[j];
    return r;
}

// ---- responses -------------------------------------------------------------

enum class Label { First, Equal, Second };

inline double label_target(Label l) {
    switch (l) {
        case Label::First: return 1.0;
        case Label::Equal: return 0.5;
        case Label::Second: return 0.0;
    }
    throw Error("unknown label");
}

inline std::string_view to_string(Label l) {
    switch (l) {
        case Label::First: return "first";
        case Label::Equal: return "equal";
        case Label::Second: return "second";
    }
    throw Error("unknown label");
}

inline Label label_from_string(std::string_view s) {
    if (s == "first") return Label::First;
    if (s == "equal") return Label::Equal;
    if (s == "second") return Label::Second;
    throw Error("label must be one of first|equal|second");
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// P(first preferred) under Bradley-Terry with rationality beta.
inline double bt_prob(double v1, double v2, double beta) { return sigmoid(beta * (v1 - v2)); }

struct OracleConfig {
    double beta = 20.0;
    double epsilon = 0.01;

    void validate() const {
        if (!(beta > 0.0)) throw Error("beta must be positive");
        if (!(epsilon >= 0.0)) throw Error("epsilon must be non-negative");
    }
};

inline Label respond(double v1, double v2, const OracleConfig& cfg, Rng& rng) {
    if (std::abs(v1 - v2) <= cfg.epsilon) return Label::Equal;
    return rng.bernoulli(bt_prob(v1, v2, cfg.beta)) ? Label::First : Label::Second;
}

struct PairedQuery {
    State s1;
    State s2;
};

inline Label respond(const PairedQuery& q, const std::function<double(const State&)>& value_fn,
                     const OracleConfig& cfg, Rng& rng) {
    return respond(value_fn(q.s1), value_fn(q.s2), cfg, rng);
}

// ---- reward grids ----------------------------------------------------------

inline constexpr std::size_t kMaxTrainRewards = 50;
inline constexpr std::size_t kTestRewards = 10;
inline constexpr std::uint64_t kDefaultGridSeed = 7;

/// Held-out test rewards and a nested ordering of training rewards:
/// train(N) is the first N entries of `joint`, and joint[0] is [1, 1, 1].
struct RewardGrids {
    std::uint64_t seed = kDefaultGridSeed;
    std::vector<RewardWeights> joint;
    std::vector<RewardWeights> test;

    [[nodiscard]] std::vector<RewardWeights> train(std::size_t n) const {
        if (n != 1 && n != 10 && n != 25 && n != 50)
            throw Error("training grid size must be one of 1, 10, 25, 50");
        return {joint.begin(), joint.begin() + static_cast<std::ptrdiff_t>(n)};
    }
    [[nodiscard]] std::vector<RewardWeights> single_pref() const { return train(1); }
};

inline std::vector<RewardWeights> all_grid_rewards() {
    std::vector<RewardWeights> out;
    for (double a : kWeightGrid)
        for (double b : kWeightGrid)
            for (double c : kWeightGrid) out.push_back({{a, b, c}});
    return out;
}

/// Test rewards come in sign-flipped pairs (theta, -theta) so that a reward
/// model that has learned nothing scores exactly 0.5 on average.
inline RewardGrids make_reward_grids(std::uint64_t seed = kDefaultGridSeed) {
    const RewardWeights ones{{1, 1, 1}}, neg_ones{{-1, -1, -1}}, zero{{0, 0, 0}};
    auto negate = [](RewardWeights w) {
        for (auto& t : w.theta) t = -t;
        return w;
    };
    Rng rng(derive_seed(seed, {0x6E1D}));
    std::vector<RewardWeights> pool;
    for (const auto& w : all_grid_rewards())
        if (w != ones && w != neg_ones && w != zero) pool.push_back(w);

    RewardGrids g;
    g.seed = seed;
    std::vector<RewardWeights> candidates = pool;
    rng.shuffle(candidates);
    for (const auto& w : candidates) {
        if (g.test.size() == kTestRewards) break;
        if (std::find(g.test.begin(), g.test.end(), w) != g.test.end()) continue;
        g.test.push_back(w);
        g.test.push_back(negate(w));
    }

    std::vector<RewardWeights> rest;
    for (const auto& w : all_grid_rewards())
        if (w != ones && w != zero && std::find(g.test.begin(), g.test.end(), w) == g.test.end())
            rest.push_back(w);
    rng.shuffle(rest);
    g.joint.push_back(ones);
    g.joint.insert(g.joint.end(), rest.begin(), rest.begin() + (kMaxTrainRewards - 1));
    return g;
}

inline nlohmann::json to_json(const RewardWeights& w) { return w.theta; }

inline nlohmann::json to_json(const RewardGrids& g) {
    nlohmann::json joint = nlohmann::json::array(), test = nlohmann::json::array();
    for (const auto& w : g.joint) joint.push_back(to_json(w));
    for (const auto& w : g.test) test.push_back(to_json(w));
    return {{"seed", g.seed}, {"joint", joint}, {"test", test}};
}

inline nlohmann::json to_json(const OracleConfig& c) {
    return {{"beta", c.beta}, {"epsilon", c.epsilon}};
}

}  // namespace calib
