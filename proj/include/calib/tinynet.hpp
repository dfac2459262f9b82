// Small fully-connected networks: batched forward pass, exact reverse-mode
// gradients, Adam with coupled L2 weight decay, and logit-range tracking.
//
// Batches are column-major: one sample per column, so a layer computes
// W * X + b with X of shape (in, batch).

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/rng.hpp"

namespace calib {

enum class OutputActivation { Identity, Softplus };
enum class InitMode { XavierLeaky, UniformFanIn };

inline constexpr int kCheckpointVersion = 1;

struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden;
    double leaky_slope = 0.01;  // 0 gives a plain ReLU
    int output_dim = 1;
    OutputActivation output = OutputActivation::Identity;

    void validate() const {
        if (input_dim < 1 || output_dim < 1) throw Error("layer widths must be >= 1");
        for (int h : hidden)
            if (h < 1) throw Error("layer widths must be >= 1");
    }

    /// Calibrated feature net: [base feature, state] -> positive scalar.
    static MlpSpec calibrated_feature(int input_dim = 24) {
        return {input_dim, {32, 32, 32}, 0.01, 1, OutputActivation::Softplus};
    }
    /// Shared multi-task trunk: state -> latent.
    static MlpSpec trunk(int input_dim = 23, int latent = 7) {
        return {input_dim, {32, 32, 32}, 0.01, latent, OutputActivation::Identity};
    }
    static MlpSpec linear(int input_dim, int output_dim = 1) {
        return {input_dim, {}, 0.0, output_dim, OutputActivation::Identity};
    }
    /// Downstream reward head on a latent: one 32-unit ReLU layer.
    static MlpSpec reward_head(int input_dim = 7) {
        return {input_dim, {32}, 0.0, 1, OutputActivation::Identity};
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Layer {
    Eigen::MatrixXd weight;  // (out, in)
    Eigen::VectorXd bias;    // (out)
};
using Params = std::vector<Layer>;

struct AdamState {
    Params m;
    Params v;
    std::int64_t step = 0;
};

/// Raw-output range seen during training; (0, 1) until something is tracked.
struct LogitRange {
    double min = 0.0;
    double max = 1.0;
    bool tracked = false;
};

struct MlpModel {
    MlpSpec spec;
    Params layers;
    AdamState adam;
    LogitRange logit_range;
};

inline Params zeros_like(const Params& p) {
    Params z;
    z.reserve(p.size());
    for (const auto& l : p)
        z.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                     Eigen::VectorXd::Zero(l.bias.size())});
    return z;
}

inline std::size_t parameter_count(const Params& p) {
    std::size_t n = 0;
    for (const auto& l : p) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

/// Visit every scalar parameter in a fixed order (layer, weight col-major, bias).
template <typename P, typename F>
void for_each_parameter(P& params, F&& fn) {
    for (auto& l : params) {
        for (Eigen::Index i = 0; i < l.weight.size(); ++i) fn(l.weight.data()[i]);
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) fn(l.bias.data()[i]);
    }
}

inline double leaky_relu_gain(double slope) { return std::sqrt(2.0 / (1.0 + slope * slope)); }

inline MlpModel init(const MlpSpec& spec, std::uint64_t seed,
                     InitMode mode = InitMode::XavierLeaky) {
    spec.validate();
    MlpModel m;
    m.spec = spec;
    Rng rng(derive_seed(seed, {0x1417}));
    std::vector<int> dims{spec.input_dim};
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(spec.output_dim);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int fan_in = dims[i], fan_out = dims[i + 1];
        Layer l{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        if (mode == InitMode::XavierLeaky) {
            const double bound = leaky_relu_gain(spec.leaky_slope) *
                                 std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (Eigen::Index k = 0; k < l.weight.size(); ++k)
                l.weight.data()[k] = rng.uniform(-bound, bound);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index k = 0; k < l.weight.size(); ++k)
                l.weight.data()[k] = rng.uniform(-bound, bound);
            for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias[k] = rng.uniform(-bound, bound);
        }
        m.layers.push_back(std::move(l));
    }
    m.adam.m = zeros_like(m.layers);
    m.adam.v = zeros_like(m.layers);
    return m;
}

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Intermediate values kept for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;   // affine outputs per layer
    std::vector<Eigen::MatrixXd> post;  // activations per layer
};

inline Eigen::MatrixXd forward(const MlpModel& m, const Eigen::MatrixXd& x,
                               ForwardCache* cache = nullptr) {
    if (x.rows() != m.spec.input_dim) throw Error("dimension mismatch");
    if (cache) {
        cache->input = x;
        cache->pre.clear();
        cache->post.clear();
    }
    Eigen::MatrixXd a = x;
    const std::size_t n = m.layers.size();
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::MatrixXd z = m.layers[i].weight * a;
        z.colwise() += m.layers[i].bias;
        if (i + 1 < n) {
            const double slope = m.spec.leaky_slope;
            a = z.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
        } else if (m.spec.output == OutputActivation::Softplus) {
            a = z.unaryExpr([](double v) { return softplus(v); });
        } else {
            a = z;
        }
        if (cache) {
            cache->pre.push_back(std::move(z));
            cache->post.push_back(a);
        }
    }
    return a;
}

inline Eigen::VectorXd forward(const MlpModel& m, std::span<const double> x) {
    Eigen::MatrixXd col = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (col.rows() != m.spec.input_dim) throw Error("dimension mismatch");
    return forward(m, col).col(0);
}

struct Gradients {
    Params params;
    Eigen::MatrixXd input;  // d loss / d input, same shape as the batch
};

/// Reverse pass given d loss / d output (shape (output_dim, batch)).
inline Gradients backward(const MlpModel& m, const ForwardCache& cache,
                          const Eigen::MatrixXd& output_grad) {
    const std::size_t n = m.layers.size();
    if (cache.pre.size() != n) throw Error("forward cache does not match model");
    Gradients g;
    g.params = zeros_like(m.layers);
    Eigen::MatrixXd delta = output_grad;
    if (m.spec.output == OutputActivation::Softplus)
        delta = delta.cwiseProduct(cache.pre[n - 1].unaryExpr([](double v) {
            return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        }));
    for (std::size_t i = n; i-- > 0;) {
        const Eigen::MatrixXd& a_prev = i == 0 ? cache.input : cache.post[i - 1];
        g.params[i].weight.noalias() = delta * a_prev.transpose();
        g.params[i].bias = delta.rowwise().sum();
        Eigen::MatrixXd back = m.layers[i].weight.transpose() * delta;
        if (i > 0) {
            const double slope = m.spec.leaky_slope;
            back = back.cwiseProduct(
                cache.pre[i - 1].unaryExpr([slope](double v) { return v >= 0.0 ? 1.0 : slope; }));
        }
        delta = std::move(back);
    }
    g.input = std::move(delta);
    return g;
}

struct AdamHyper {
    double lr = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update with bias correction. Weight decay is added to the
/// gradient before the moment updates (coupled L2).
inline void adam_step(MlpModel& m, const Params& grads, const AdamHyper& h) {
    if (grads.size() != m.layers.size()) throw Error("gradient shape mismatch");
    m.adam.step += 1;
    const double t = static_cast<double>(m.adam.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    auto update = [&](auto& p, const auto& g, auto& mom, auto& vel) {
        if (p.rows() != g.rows() || p.cols() != g.cols()) throw Error("gradient shape mismatch");
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double gk = g.data()[k] + h.weight_decay * p.data()[k];
            double& mk = mom.data()[k];
            double& vk = vel.data()[k];
            mk = h.beta1 * mk + (1.0 - h.beta1) * gk;
            vk = h.beta2 * vk + (1.0 - h.beta2) * gk * gk;
            p.data()[k] -= h.lr * (mk / c1) / (std::sqrt(vk / c2) + h.eps);
        }
    };
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        update(m.layers[i].weight, grads[i].weight, m.adam.m[i].weight, m.adam.v[i].weight);
        update(m.layers[i].bias, grads[i].bias, m.adam.m[i].bias, m.adam.v[i].bias);
    }
}

/// Fold training-time raw outputs into the model's logit range. The first
/// call replaces the (0, 1) defaults.
inline void track_logits(MlpModel& m, const Eigen::MatrixXd& outputs) {
    if (outputs.size() == 0) return;
    const double lo = outputs.minCoeff(), hi = outputs.maxCoeff();
    if (!m.logit_range.tracked) {
        m.logit_range = {lo, hi, true};
        return;
    }
    m.logit_range.min = std::min(m.logit_range.min, lo);
    m.logit_range.max = std::max(m.logit_range.max, hi);
}

/// Affine rescale of a raw output by the logit range. Not clamped.
inline double normalize_logit(const MlpModel& m, double raw) {
    const double range = m.logit_range.max - m.logit_range.min;
    if (!(range > 0.0)) throw Error("collapsed logit range");
    return (raw - m.logit_range.min) / range;
}

inline double normalized_output(const MlpModel& m, std::span<const double> x) {
    return normalize_logit(m, forward(m, x)[0]);
}

// ---- checkpoints -----------------------------------------------------------

inline nlohmann::json to_json(const MlpSpec& s) {
    return {{"input_dim", s.input_dim},
            {"hidden", s.hidden},
            {"leaky_slope", s.leaky_slope},
            {"output_dim", s.output_dim},
            {"output", s.output == OutputActivation::Softplus ? "softplus" : "identity"}};
}

inline MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
    MlpSpec s;
    s.input_dim = j.at("input_dim").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.leaky_slope = j.at("leaky_slope").get<double>();
    s.output_dim = j.at("output_dim").get<int>();
    const auto out = j.at("output").get<std::string>();
    if (out == "softplus") s.output = OutputActivation::Softplus;
    else if (out == "identity") s.output = OutputActivation::Identity;
    else throw Error("unknown output activation '" + out + "'");
    s.validate();
    return s;
}

/// Versioned checkpoint; weights stored row-major.
inline nlohmann::json to_json(const MlpModel& m, const nlohmann::json& train_meta = nlohmann::json::object()) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"weights", std::move(w)},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return {{"version", kCheckpointVersion},
            {"spec", to_json(m.spec)},
            {"layers", std::move(layers)},
            {"logit_range",
             {{"min", m.logit_range.min}, {"max", m.logit_range.max}, {"tracked", m.logit_range.tracked}}},
            {"train_meta", train_meta}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kCheckpointVersion) throw Error("unsupported checkpoint version");
    MlpModel m = init(mlp_spec_from_json(j.at("spec")), 0);
    const auto& layers = j.at("layers");
    if (layers.size() != m.layers.size()) throw Error("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& l = m.layers[i];
        const auto rows = layers[i].at("rows").get<Eigen::Index>();
        const auto cols = layers[i].at("cols").get<Eigen::Index>();
        if (rows != l.weight.rows() || cols != l.weight.cols()) throw Error("checkpoint layer shape mismatch");
        const auto w = layers[i].at("weights").get<std::vector<double>>();
        const auto b = layers[i].at("bias").get<std::vector<double>>();
        if (w.size() != static_cast<std::size_t>(rows * cols) || b.size() != static_cast<std::size_t>(rows))
            throw Error("checkpoint layer size mismatch");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        for (Eigen::Index r = 0; r < rows; ++r) l.bias[r] = b[static_cast<std::size_t>(r)];
    }
    const auto& lr = j.at("logit_range");
    m.logit_range = {lr.at("min").get<double>(), lr.at("max").get<double>(), lr.at("tracked").get<bool>()};
    return m;
}

}  // namespace calib
