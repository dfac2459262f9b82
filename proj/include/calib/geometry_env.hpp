// Tabletop environments: state layout, state sampling, the six closed-form
// base features and min-max normalization.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/rng.hpp"

namespace calib {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline constexpr std::size_t kStateDim = 23;
inline constexpr std::size_t kFeaturesPerEnv = 3;
inline constexpr std::size_t kContextsPerEnv = 2;
inline constexpr int kStateFormatVersion = 1;

using StateVector = std::array<double, kStateDim>;

/// One tabletop scene. Object positions are constant per environment but
/// still part of the state vector.
struct State {
    Vec3 ee_pos{};
    Mat3 ee_rot{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 human_pos{};
    Vec3 stove_pos{};
    Vec3 laptop_pos{};
    std::array<double, kContextsPerEnv> context{};

    [[nodiscard]] StateVector to_vector() const {
        StateVector v{};
        auto it = v.begin();
        it = std::copy(ee_pos.begin(), ee_pos.end(), it);
        it = std::copy(ee_rot.begin(), ee_rot.end(), it);
        it = std::copy(human_pos.begin(), human_pos.end(), it);
        it = std::copy(stove_pos.begin(), stove_pos.end(), it);
        it = std::copy(laptop_pos.begin(), laptop_pos.end(), it);
        std::copy(context.begin(), context.end(), it);
        return v;
    }

    static State from_vector(std::span<const double> v) {
        if (v.size() != kStateDim) throw Error("state vector must have 23 entries");
        State s;
        auto it = v.begin();
        auto take = [&it](auto& dst) {
            std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
            it += static_cast<std::ptrdiff_t>(dst.size());
        };
        take(s.ee_pos);
        take(s.ee_rot);
        take(s.human_pos);
        take(s.stove_pos);
        take(s.laptop_pos);
        take(s.context);
        return s;
    }

    friend bool operator==(const State&, const State&) = default;
};

enum class FeatureId { TableDist, LaptopDist, HumanDist, PointAtHuman, CupAngle, StoveDist };
inline constexpr std::array<FeatureId, 6> kAllFeatures{
    FeatureId::TableDist, FeatureId::LaptopDist, FeatureId::HumanDist,
    FeatureId::PointAtHuman, FeatureId::CupAngle, FeatureId::StoveDist};

enum class EnvName { WeightedBlock, Cup, Utensil };
inline constexpr std::array<EnvName, 3> kAllEnvs{EnvName::WeightedBlock, EnvName::Cup,
                                                 EnvName::Utensil};

inline std::string_view to_string(FeatureId id) {
    switch (id) {
        case FeatureId::TableDist: return "table_dist";
        case FeatureId::LaptopDist: return "laptop_dist";
        case FeatureId::HumanDist: return "human_dist";
        case FeatureId::PointAtHuman: return "point_at_human";
        case FeatureId::CupAngle: return "cup_angle";
        case FeatureId::StoveDist: return "stove_dist";
    }
    throw Error("unknown feature id");
}

inline FeatureId feature_from_string(std::string_view name) {
    for (auto id : kAllFeatures)
        if (to_string(id) == name) return id;
    throw Error("unknown feature '" + std::string(name) + "'");
}

inline std::string_view to_string(EnvName e) {
    switch (e) {
        case EnvName::WeightedBlock: return "weighted_block";
        case EnvName::Cup: return "cup";
        case EnvName::Utensil: return "utensil";
    }
    throw Error("unknown environment");
}

inline EnvName env_from_string(std::string_view name) {
    for (auto e : kAllEnvs)
        if (to_string(e) == name) return e;
    throw Error("unknown environment '" + std::string(name) + "'");
}

struct ObjectLayout {
    double table_z = 0.0;
    Vec3 human{-0.60, 0.00, 0.0};
    Vec3 stove{0.40, 0.30, 0.0};
    Vec3 laptop{0.30, -0.30, 0.0};
};

/// Axis-aligned bounds for end-effector positions.
struct WorkspaceBox {
    Vec3 lo{-0.8, -0.8, 0.0};
    Vec3 hi{0.8, 0.8, 0.8};

    [[nodiscard]] bool contains(const Vec3& p) const {
        for (int i = 0; i < 3; ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }
};

struct EnvironmentSpec {
    EnvName name = EnvName::WeightedBlock;
    std::array<FeatureId, kFeaturesPerEnv> features{};
    /// context[0] is always stove heat; context[1] is the carried-object property.
    std::array<std::string, kContextsPerEnv> context_names{};
    ObjectLayout layout{};
    WorkspaceBox workspace{};

    /// Feature order matches the per-environment rows of the results table:
    /// stove first, then the two object-specific features.
    static EnvironmentSpec make(EnvName name, ObjectLayout layout = {}, WorkspaceBox box = {}) {
        EnvironmentSpec env;
        env.name = name;
        env.layout = layout;
        env.workspace = box;
        switch (name) {
            case EnvName::WeightedBlock:
                env.features = {FeatureId::StoveDist, FeatureId::TableDist, FeatureId::LaptopDist};
                env.context_names = {"stove_heat", "block_weight"};
                break;
            case EnvName::Cup:
                env.features = {FeatureId::StoveDist, FeatureId::CupAngle, FeatureId::LaptopDist};
                env.context_names = {"stove_heat", "cup_fullness"};
                break;
            case EnvName::Utensil:
                env.features = {FeatureId::StoveDist, FeatureId::HumanDist, FeatureId::PointAtHuman};
                env.context_names = {"stove_heat", "utensil_sharpness"};
                break;
        }
        return env;
    }

    [[nodiscard]] std::size_t slot_of(FeatureId id) const {
        for (std::size_t i = 0; i < features.size(); ++i)
            if (features[i] == id) return i;
        throw Error("feature '" + std::string(to_string(id)) + "' not in environment '" +
                    std::string(to_string(name)) + "'");
    }
};

/// Uniform rotation over SO(3) from a uniform unit quaternion (Shoemake).
inline Mat3 sample_rotation(Rng& rng) {
    const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
    const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    const double tau = 2.0 * std::numbers::pi;
    const double x = a * std::sin(tau * u2), y = a * std::cos(tau * u2);
    const double z = b * std::sin(tau * u3), w = b * std::cos(tau * u3);
    return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
            2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
            2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

inline State sample_state(const EnvironmentSpec& env, Rng& rng) {
    const auto& box = env.workspace;
    for (int i = 0; i < 3; ++i)
        if (!(box.hi[i] > box.lo[i])) throw Error("degenerate workspace box");
    State s;
    for (int i = 0; i < 3; ++i) s.ee_pos[i] = rng.uniform(box.lo[i], box.hi[i]);
    s.ee_rot = sample_rotation(rng);
    s.human_pos = env.layout.human;
    s.stove_pos = env.layout.stove;
    s.laptop_pos = env.layout.laptop;
    for (auto& c : s.context) c = rng.uniform();
    return s;
}

namespace detail {
inline double planar_dist(const Vec3& a, const Vec3& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}
}  // namespace detail

inline constexpr double kLaptopCap = 0.8;
inline constexpr double kHumanCap = 1.0;
inline constexpr double kStoveCap = 0.8;

/// Raw (pre-normalization) base feature value.
inline double base_feature(FeatureId id, const State& s, double table_z = 0.0) {
    switch (id) {
        case FeatureId::TableDist:
            return s.ee_pos[2] - table_z;
        case FeatureId::LaptopDist:
            return std::min(detail::planar_dist(s.ee_pos, s.laptop_pos), kLaptopCap);
        case FeatureId::HumanDist:
            return std::min(detail::planar_dist(s.ee_pos, s.human_pos), kHumanCap);
        case FeatureId::StoveDist:
            return std::min(detail::planar_dist(s.ee_pos, s.stove_pos), kStoveCap);
        case FeatureId::PointAtHuman: {
            Vec3 d{s.human_pos[0] - s.ee_pos[0], s.human_pos[1] - s.ee_pos[1],
                   s.human_pos[2] - s.ee_pos[2]};
            const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
            if (n == 0.0) throw Error("coincident positions");
            // EE x-axis in world frame is the first column of the rotation.
            const double dot = s.ee_rot[0] * d[0] + s.ee_rot[3] * d[1] + s.ee_rot[6] * d[2];
            return std::clamp(dot / n, -1.0, 1.0);
        }
        case FeatureId::CupAngle:
            return s.ee_rot[6];
    }
    throw Error("unknown feature id");
}

inline std::array<double, kFeaturesPerEnv> base_features(const EnvironmentSpec& env,
                                                         const State& s) {
    std::array<double, kFeaturesPerEnv> out{};
    for (std::size_t i = 0; i < kFeaturesPerEnv; ++i)
        out[i] = base_feature(env.features[i], s, env.layout.table_z);
    return out;
}

struct StateSet {
    EnvName env = EnvName::WeightedBlock;
    std::uint64_t seed = 0;
    std::uint64_t state_seed = 0;
    ObjectLayout layout{};
    std::vector<State> states;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

/// Seed for the environment-level state sample. Seeds passed to
/// build_state_set only change the train/test partition.
inline constexpr std::uint64_t kDefaultStateSeed = 20250101;
inline constexpr std::size_t kDefaultStateCount = 10000;

inline StateSet build_state_set(const EnvironmentSpec& env, std::size_t n, std::uint64_t seed,
                                std::uint64_t state_seed = kDefaultStateSeed) {
    if (n < 10) throw Error("state set needs at least 10 states");
    StateSet set;
    set.env = env.name;
    set.seed = seed;
    set.state_seed = state_seed;
    set.layout = env.layout;
    Rng state_rng(derive_seed(state_seed, {static_cast<std::uint64_t>(env.name)}));
    set.states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) set.states.push_back(sample_state(env, state_rng));

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng split_rng(derive_seed(seed, {0x5B117, static_cast<std::uint64_t>(env.name)}));
    split_rng.shuffle(idx);
    const std::size_t n_train = (n * 8) / 10;
    set.train_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    set.test_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(set.train_idx.begin(), set.train_idx.end());
    std::sort(set.test_idx.begin(), set.test_idx.end());
    return set;
}

/// Min-max scaling of base features and of raw state dimensions.
///
/// Feature columns must have a non-zero range. Constant state dimensions
/// (the fixed object positions) map to 0.
struct Normalizer {
    std::array<double, kFeaturesPerEnv> feature_min{};
    std::array<double, kFeaturesPerEnv> feature_max{};
    StateVector state_min{};
    StateVector state_max{};

    [[nodiscard]] double feature(std::size_t slot, double raw) const {
        return (raw - feature_min[slot]) / (feature_max[slot] - feature_min[slot]);
    }

    [[nodiscard]] StateVector state(const State& s) const {
        StateVector v = s.to_vector();
        for (std::size_t i = 0; i < kStateDim; ++i) {
            const double range = state_max[i] - state_min[i];
            v[i] = range > 0.0 ? (v[i] - state_min[i]) / range : 0.0;
        }
        return v;
    }

    [[nodiscard]] std::array<double, kFeaturesPerEnv> features(const EnvironmentSpec& env,
                                                               const State& s) const {
        auto raw = base_features(env, s);
        for (std::size_t i = 0; i < kFeaturesPerEnv; ++i) raw[i] = feature(i, raw[i]);
        return raw;
    }
};

inline Normalizer fit_normalizer(std::span<const State> states, const EnvironmentSpec& env) {
    if (states.empty()) throw Error("cannot fit normalizer on an empty state set");
    Normalizer n;
    n.feature_min.fill(std::numeric_limits<double>::infinity());
    n.feature_max.fill(-std::numeric_limits<double>::infinity());
    n.state_min.fill(std::numeric_limits<double>::infinity());
    n.state_max.fill(-std::numeric_limits<double>::infinity());
    for (const auto& s : states) {
        const auto f = base_features(env, s);
        for (std::size_t i = 0; i < kFeaturesPerEnv; ++i) {
            n.feature_min[i] = std::min(n.feature_min[i], f[i]);
            n.feature_max[i] = std::max(n.feature_max[i], f[i]);
        }
        const auto v = s.to_vector();
        for (std::size_t i = 0; i < kStateDim; ++i) {
            n.state_min[i] = std::min(n.state_min[i], v[i]);
            n.state_max[i] = std::max(n.state_max[i], v[i]);
        }
    }
    for (std::size_t i = 0; i < kFeaturesPerEnv; ++i)
        if (!(n.feature_max[i] > n.feature_min[i])) throw Error("degenerate feature range");
    return n;
}

inline Normalizer fit_normalizer(const StateSet& set, const EnvironmentSpec& env) {
    return fit_normalizer(std::span<const State>(set.states), env);
}

// ---- serialization -------------------------------------------------------

inline nlohmann::json to_json(const ObjectLayout& l) {
    return {{"table_z", l.table_z}, {"human", l.human}, {"stove", l.stove}, {"laptop", l.laptop}};
}

inline ObjectLayout layout_from_json(const nlohmann::json& j) {
    ObjectLayout l;
    l.table_z = j.at("table_z").get<double>();
    l.human = j.at("human").get<Vec3>();
    l.stove = j.at("stove").get<Vec3>();
    l.laptop = j.at("laptop").get<Vec3>();
    return l;
}

inline nlohmann::json to_json(const StateSet& set) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : set.states) states.push_back(s.to_vector());
    return {{"version", kStateFormatVersion},
            {"env", std::string(to_string(set.env))},
            {"seed", set.seed},
            {"state_seed", set.state_seed},
            {"n", set.states.size()},
            {"layout", to_json(set.layout)},
            {"states", std::move(states)},
            {"train_idx", set.train_idx},
            {"test_idx", set.test_idx}};
}

inline StateSet state_set_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kStateFormatVersion)
        throw Error("unsupported state set version");
    StateSet set;
    set.env = env_from_string(j.at("env").get<std::string>());
    set.seed = j.at("seed").get<std::uint64_t>();
    set.state_seed = j.value("state_seed", kDefaultStateSeed);
    set.layout = layout_from_json(j.at("layout"));
    for (const auto& row : j.at("states")) {
        const auto v = row.get<std::vector<double>>();
        set.states.push_back(State::from_vector(v));
    }
    if (set.states.size() != j.at("n").get<std::size_t>()) throw Error("state count mismatch");
    set.train_idx = j.at("train_idx").get<std::vector<std::size_t>>();
    set.test_idx = j.at("test_idx").get<std::vector<std::size_t>>();
    return set;
}

}  // namespace calib
