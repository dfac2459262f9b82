// Pairwise-comparison losses and the three trainers: calibrated features from
// contextual feature queries, the multi-task baseline representation, and
// downstream rewards on top of either representation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/geometry_env.hpp"
#include "calib/oracle.hpp"
#include "calib/rng.hpp"
#include "calib/tinynet.hpp"

namespace calib {

struct Query {
    State s1;
    State s2;
    Label y = Label::Equal;
};

struct QueryDataset {
    std::vector<Query> queries;

    [[nodiscard]] std::size_t size() const { return queries.size(); }
    [[nodiscard]] bool empty() const { return queries.empty(); }

    [[nodiscard]] QueryDataset pref() const {
        QueryDataset d;
        for (const auto& q : queries)
            if (q.y != Label::Equal) d.queries.push_back(q);
        return d;
    }
    [[nodiscard]] QueryDataset equiv() const {
        QueryDataset d;
        for (const auto& q : queries)
            if (q.y == Label::Equal) d.queries.push_back(q);
        return d;
    }
    [[nodiscard]] QueryDataset prefix(std::size_t n) const {
        QueryDataset d;
        d.queries.assign(queries.begin(),
                         queries.begin() + static_cast<std::ptrdiff_t>(std::min(n, queries.size())));
        return d;
    }
};

// ---- losses ----------------------------------------------------------------

/// Learner-side Bradley-Terry probability (rationality fixed to 1).
inline double bt_learn_prob(double v1, double v2) { return sigmoid(v1 - v2); }

/// -y log P(1 > 2) - (1 - y) log P(2 > 1) in log-sum-exp form.
inline double pair_cross_entropy(double v1, double v2, double y) {
    const double d = v1 - v2;
    return y * softplus(-d) + (1.0 - y) * softplus(d);
}

using ValueFn = std::function<double(const State&)>;

inline double ce_loss(const ValueFn& f, const QueryDataset& d) {
    double sum = 0.0;
    for (const auto& q : d.queries) sum += pair_cross_entropy(f(q.s1), f(q.s2), label_target(q.y));
    return sum;
}

inline double reg_loss(const ValueFn& f, const QueryDataset& d) {
    double sum = 0.0;
    for (const auto& q : d.queries) {
        const double a = f(q.s1), b = f(q.s2);
        sum += a * a + b * b;
    }
    return sum;
}

struct TrainHyper {
    double lr = 1e-3;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    double lambda_reg = 0.0;
    double lambda_equiv = 1.0;
    std::size_t epochs = 1;

    [[nodiscard]] AdamHyper adam() const { return {lr, weight_decay}; }

    static TrainHyper calibrated_features() { return {1e-3, 32, 0.01, 1e-4, 10.0, 500}; }
    static TrainHyper multitask_representation() { return {1e-3, 32, 0.01, 1e-4, 10.0, 3000}; }
    /// Equivalence pairs never reach this trainer, so lambda_equiv is unused.
    static TrainHyper calibrated_reward() { return {1e-2, 32, 0.0, 0.0, 0.0, 200}; }
    static TrainHyper multitask_reward() { return {1e-4, 64, 1e-3, 1e-3, 1.0, 500}; }

    friend bool operator==(const TrainHyper&, const TrainHyper&) = default;
};

inline nlohmann::json to_json(const TrainHyper& h) {
    return {{"lr", h.lr},
            {"batch_size", h.batch_size},
            {"weight_decay", h.weight_decay},
            {"lambda_reg", h.lambda_reg},
            {"lambda_equiv", h.lambda_equiv},
            {"epochs", h.epochs}};
}

/// Missing keys keep the values of `base`.
inline TrainHyper train_hyper_from_json(const nlohmann::json& j, TrainHyper base = {}) {
    base.lr = j.value("lr", base.lr);
    base.batch_size = j.value("batch_size", base.batch_size);
    base.weight_decay = j.value("weight_decay", base.weight_decay);
    base.lambda_reg = j.value("lambda_reg", base.lambda_reg);
    base.lambda_equiv = j.value("lambda_equiv", base.lambda_equiv);
    base.epochs = j.value("epochs", base.epochs);
    return base;
}

/// Loss over a batch of pair values and its gradient w.r.t. those values.
struct PairLoss {
    double value = 0.0;
    Eigen::VectorXd grad_v1;
    Eigen::VectorXd grad_v2;
};

/// (lambda_equiv * CE(equiv) + CE(pref) + lambda_reg * reg) / denom
inline PairLoss composite_loss(const Eigen::VectorXd& v1, const Eigen::VectorXd& v2,
                               std::span<const double> y, double lambda_equiv, double lambda_reg,
                               double denom) {
    const auto n = v1.size();
    if (v2.size() != n || static_cast<Eigen::Index>(y.size()) != n) throw Error("pair size mismatch");
    if (!(denom > 0.0)) throw Error("empty dataset");
    PairLoss out{0.0, Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const double yk = y[static_cast<std::size_t>(k)];
        const double w = yk == 0.5 ? lambda_equiv : 1.0;
        const double a = v1[k], b = v2[k];
        out.value += w * pair_cross_entropy(a, b, yk) + lambda_reg * (a * a + b * b);
        const double dd = w * (sigmoid(a - b) - yk);
        out.grad_v1[k] = (dd + 2.0 * lambda_reg * a) / denom;
        out.grad_v2[k] = (-dd + 2.0 * lambda_reg * b) / denom;
    }
    out.value /= denom;
    return out;
}

/// Full-dataset loss, normalized by |D| (not by subset sizes).
inline double total_loss(const ValueFn& f, const QueryDataset& d, const TrainHyper& h) {
    if (d.empty()) throw Error("empty dataset");
    const double n = static_cast<double>(d.size());
    return (h.lambda_equiv * ce_loss(f, d.equiv()) + ce_loss(f, d.pref()) +
            h.lambda_reg * reg_loss(f, d)) / n;
}

// ---- state encoding ---------------------------------------------------------

/// Environment plus its fitted normalizer: turns states into network inputs.
struct Featurizer {
    EnvironmentSpec env;
    Normalizer norm;

    [[nodiscard]] double base(std::size_t slot, const State& s) const {
        return norm.feature(slot, base_feature(env.features[slot], s, env.layout.table_z));
    }

    [[nodiscard]] Eigen::MatrixXd state_inputs(std::span<const State> states) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(kStateDim), static_cast<Eigen::Index>(states.size()));
        for (std::size_t c = 0; c < states.size(); ++c) {
            const auto v = norm.state(states[c]);
            for (std::size_t r = 0; r < kStateDim; ++r)
                x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r];
        }
        return x;
    }

    /// [normalized base feature of `slot`, normalized state] per column.
    [[nodiscard]] Eigen::MatrixXd feature_inputs(std::size_t slot, std::span<const State> states) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(kStateDim + 1), static_cast<Eigen::Index>(states.size()));
        x.bottomRows(static_cast<Eigen::Index>(kStateDim)) = state_inputs(states);
        for (std::size_t c = 0; c < states.size(); ++c)
            x(0, static_cast<Eigen::Index>(c)) = base(slot, states[c]);
        return x;
    }
};

/// States of a dataset laid out as [all s1..., all s2...].
inline std::vector<State> stacked_states(const QueryDataset& d) {
    std::vector<State> out;
    out.reserve(2 * d.size());
    for (const auto& q : d.queries) out.push_back(q.s1);
    for (const auto& q : d.queries) out.push_back(q.s2);
    return out;
}

inline std::vector<double> targets(const QueryDataset& d) {
    std::vector<double> y;
    y.reserve(d.size());
    for (const auto& q : d.queries) y.push_back(label_target(q.y));
    return y;
}

// ---- generic minibatch loop ---------------------------------------------------

/// Per-epoch mean training loss.
struct TrainLog {
    std::vector<double> epoch_loss;
};

/// Shuffle [0, n) every epoch and hand out batches; the final partial batch
/// is kept. `step` returns the batch loss (already averaged over the batch).
template <typename Step>
void minibatch_loop(std::size_t n, const TrainHyper& h, Rng& rng, TrainLog* log, Step&& step) {
    if (n == 0 || h.batch_size == 0) return;
    std::vector<std::size_t> order(n);
    for (std::size_t e = 0; e < h.epochs; ++e) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        double sum = 0.0;
        for (std::size_t start = 0; start < n; start += h.batch_size) {
            const std::size_t end = std::min(n, start + h.batch_size);
            std::span<const std::size_t> batch(order.data() + start, end - start);
            sum += step(batch) * static_cast<double>(batch.size());
        }
        if (log) log->epoch_loss.push_back(sum / static_cast<double>(n));
    }
}

/// Gather columns `idx` and `offset + idx` of a stacked [s1..., s2...] matrix.
inline Eigen::MatrixXd gather_pairs(const Eigen::MatrixXd& stacked, std::size_t offset,
                                    std::span<const std::size_t> idx) {
    const auto b = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd out(stacked.rows(), 2 * b);
    for (Eigen::Index k = 0; k < b; ++k) {
        const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]);
        out.col(k) = stacked.col(i);
        out.col(b + k) = stacked.col(static_cast<Eigen::Index>(offset) + i);
    }
    return out;
}

/// One gradient evaluation of the composite loss for a scalar-output model on
/// stacked pair inputs. Returns the loss; fills `grads` and the raw outputs.
inline double pair_loss_gradient(const MlpModel& m, const Eigen::MatrixXd& x,
                                 std::span<const double> y, double lambda_equiv, double lambda_reg,
                                 Gradients& grads, Eigen::MatrixXd* outputs = nullptr) {
    const Eigen::Index b = x.cols() / 2;
    ForwardCache cache;
    Eigen::MatrixXd out = forward(m, x, &cache);
    const Eigen::VectorXd v1 = out.row(0).head(b).transpose();
    const Eigen::VectorXd v2 = out.row(0).tail(b).transpose();
    const auto loss = composite_loss(v1, v2, y, lambda_equiv, lambda_reg, static_cast<double>(b));
    Eigen::MatrixXd dout(1, 2 * b);
    dout.row(0).head(b) = loss.grad_v1.transpose();
    dout.row(0).tail(b) = loss.grad_v2.transpose();
    grads = backward(m, cache, dout);
    if (outputs) *outputs = std::move(out);
    return loss.value;
}

// ---- calibrated features -------------------------------------------------------

struct CalibratedFeature {
    FeatureId base_id = FeatureId::StoveDist;
    std::size_t slot = 0;
    MlpModel net;
    std::size_t query_count = 0;

    /// Raw network outputs (1 x n) for the given states.
    [[nodiscard]] Eigen::RowVectorXd raw(const Featurizer& fz, std::span<const State> states) const {
        return forward(net, fz.feature_inputs(slot, states)).row(0);
    }

    /// Logit-range-normalized values; may leave [0, 1] off the training data.
    [[nodiscard]] Eigen::RowVectorXd values(const Featurizer& fz, std::span<const State> states) const {
        Eigen::RowVectorXd r = raw(fz, states);
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = normalize_logit(net, r[i]);
        return r;
    }

    [[nodiscard]] double value(const Featurizer& fz, const State& s) const {
        return values(fz, std::span<const State>(&s, 1))[0];
    }
};

inline CalibratedFeature train_calibrated_feature(const Featurizer& fz, std::size_t slot,
                                                  const QueryDataset& d, const TrainHyper& h,
                                                  std::uint64_t seed, TrainLog* log = nullptr) {
    CalibratedFeature cf;
    cf.slot = slot;
    cf.base_id = fz.env.features.at(slot);
    cf.net = init(MlpSpec::calibrated_feature(static_cast<int>(kStateDim + 1)), seed);
    cf.query_count = d.size();
    if (d.empty()) return cf;

    const auto states = stacked_states(d);
    const Eigen::MatrixXd x = fz.feature_inputs(slot, states);
    const auto y = targets(d);
    Rng rng(derive_seed(seed, {0xCF}));
    std::vector<double> yb;
    Gradients g;
    Eigen::MatrixXd outputs;
    minibatch_loop(d.size(), h, rng, log, [&](std::span<const std::size_t> batch) {
        yb.clear();
        for (auto i : batch) yb.push_back(y[i]);
        const double loss = pair_loss_gradient(cf.net, gather_pairs(x, d.size(), batch), yb,
                                               h.lambda_equiv, h.lambda_reg, g, &outputs);
        track_logits(cf.net, outputs);
        adam_step(cf.net, g.params, h.adam());
        return loss;
    });
    if (!(cf.net.logit_range.max > cf.net.logit_range.min)) throw Error("collapsed logit range");
    return cf;
}

/// Three feature slots; empty slots pass the normalized base feature through.
struct CalibratedRepresentation {
    std::array<std::optional<CalibratedFeature>, kFeaturesPerEnv> features;

    /// Feature matrix (3 x n).
    [[nodiscard]] Eigen::MatrixXd encode(const Featurizer& fz, std::span<const State> states) const {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(kFeaturesPerEnv), static_cast<Eigen::Index>(states.size()));
        for (std::size_t j = 0; j < kFeaturesPerEnv; ++j) {
            const auto row = static_cast<Eigen::Index>(j);
            if (features[j]) {
                out.row(row) = features[j]->values(fz, states);
            } else {
                for (std::size_t c = 0; c < states.size(); ++c)
                    out(row, static_cast<Eigen::Index>(c)) = fz.base(j, states[c]);
            }
        }
        return out;
    }
};

// ---- multi-task baseline ---------------------------------------------------------

inline constexpr int kLatentDim = 7;

struct MultiTaskRep {
    MlpModel trunk;
    std::vector<MlpModel> heads;

    [[nodiscard]] Eigen::MatrixXd encode(const Featurizer& fz, std::span<const State> states) const {
        return forward(trunk, fz.state_inputs(states));
    }

    /// Training-head reward values (1 x n).
    [[nodiscard]] Eigen::RowVectorXd head_values(std::size_t head, const Eigen::MatrixXd& latent) const {
        return forward(heads.at(head), latent).row(0);
    }
};

/// Split `budget` queries over `heads`; the remainder goes to the lowest
/// indices, one each.
inline std::vector<std::size_t> split_budget(std::size_t budget, std::size_t heads) {
    if (heads == 0) throw Error("need at least one head");
    std::vector<std::size_t> out(heads, budget / heads);
    for (std::size_t i = 0; i < budget % heads; ++i) out[i] += 1;
    return out;
}

/// Joint training of the trunk and all linear heads. The step loss is the
/// unweighted sum of per-head composite losses over each head's batch.
inline MultiTaskRep train_multitask(const Featurizer& fz, const std::vector<QueryDataset>& per_head,
                                    const TrainHyper& h, std::uint64_t seed, TrainLog* log = nullptr) {
    if (per_head.empty()) throw Error("need at least one head");
    MultiTaskRep rep;
    rep.trunk = init(MlpSpec::trunk(static_cast<int>(kStateDim), kLatentDim), seed);
    for (std::size_t i = 0; i < per_head.size(); ++i)
        rep.heads.push_back(init(MlpSpec::linear(kLatentDim), derive_seed(seed, {0x4EAD, i}),
                                 InitMode::UniformFanIn));

    struct HeadData {
        Eigen::MatrixXd x;  // stacked state inputs
        std::vector<double> y;
        std::vector<std::size_t> order;
    };
    std::vector<HeadData> data(per_head.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < per_head.size(); ++i) {
        data[i].x = fz.state_inputs(stacked_states(per_head[i]));
        data[i].y = targets(per_head[i]);
        data[i].order.resize(per_head[i].size());
        total += per_head[i].size();
    }
    if (total == 0) return rep;

    Rng rng(derive_seed(seed, {0x3717}));
    const std::size_t bs = std::max<std::size_t>(h.batch_size, 1);
    for (std::size_t e = 0; e < h.epochs; ++e) {
        std::size_t steps = 0;
        for (auto& hd : data) {
            for (std::size_t k = 0; k < hd.order.size(); ++k) hd.order[k] = k;
            rng.shuffle(hd.order);
            steps = std::max(steps, (hd.order.size() + bs - 1) / bs);
        }
        double epoch_sum = 0.0;
        for (std::size_t step = 0; step < steps; ++step) {
            // Assemble every participating head's batch into one trunk pass.
            struct Part { std::size_t head, col, n; std::vector<double> y; };
            std::vector<Part> parts;
            std::vector<Eigen::MatrixXd> blocks;
            Eigen::Index cols = 0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& hd = data[i];
                const std::size_t start = step * bs;
                if (start >= hd.order.size()) continue;
                const std::size_t end = std::min(hd.order.size(), start + bs);
                std::span<const std::size_t> idx(hd.order.data() + start, end - start);
                Part p{i, static_cast<std::size_t>(cols), idx.size(), {}};
                for (auto k : idx) p.y.push_back(hd.y[k]);
                blocks.push_back(gather_pairs(hd.x, hd.y.size(), idx));
                cols += blocks.back().cols();
                parts.push_back(std::move(p));
            }
            Eigen::MatrixXd x(static_cast<Eigen::Index>(kStateDim), cols);
            for (std::size_t b = 0, c = 0; b < blocks.size(); ++b) {
                x.middleCols(static_cast<Eigen::Index>(c), blocks[b].cols()) = blocks[b];
                c += static_cast<std::size_t>(blocks[b].cols());
            }
            ForwardCache trunk_cache;
            const Eigen::MatrixXd latent = forward(rep.trunk, x, &trunk_cache);
            Eigen::MatrixXd latent_grad = Eigen::MatrixXd::Zero(latent.rows(), latent.cols());
            double step_loss = 0.0;
            for (const auto& p : parts) {
                const auto c0 = static_cast<Eigen::Index>(p.col);
                const auto w = static_cast<Eigen::Index>(2 * p.n);
                Gradients g;
                step_loss += pair_loss_gradient(rep.heads[p.head], latent.middleCols(c0, w), p.y,
                                                h.lambda_equiv, h.lambda_reg, g);
                latent_grad.middleCols(c0, w) = g.input;
                adam_step(rep.heads[p.head], g.params, h.adam());
            }
            const Gradients tg = backward(rep.trunk, trunk_cache, latent_grad);
            adam_step(rep.trunk, tg.params, h.adam());
            epoch_sum += step_loss;
        }
        if (log) log->epoch_loss.push_back(epoch_sum / static_cast<double>(std::max<std::size_t>(steps, 1)));
    }
    return rep;
}

// ---- downstream rewards ----------------------------------------------------------

/// Linear reward over the three calibrated (or pass-through) features.
struct LinearReward {
    CalibratedRepresentation rep;
    MlpModel weights;  // linear 3 -> 1

    [[nodiscard]] Eigen::RowVectorXd values_from_features(const Eigen::MatrixXd& features) const {
        return forward(weights, features).row(0);
    }
    [[nodiscard]] Eigen::RowVectorXd values(const Featurizer& fz, std::span<const State> states) const {
        return values_from_features(rep.encode(fz, states));
    }
};

/// One-hidden-layer head over the multi-task latent; the trunk copy is
/// fine-tuned unless frozen.
struct MlpHeadReward {
    MlpModel trunk;
    MlpModel head;
    bool frozen = true;

    [[nodiscard]] Eigen::RowVectorXd values_from_latent(const Eigen::MatrixXd& latent) const {
        return forward(head, latent).row(0);
    }
    [[nodiscard]] Eigen::RowVectorXd values(const Featurizer& fz, std::span<const State> states) const {
        return values_from_latent(forward(trunk, fz.state_inputs(states)));
    }
};

struct RewardModel {
    std::variant<LinearReward, MlpHeadReward> model;

    [[nodiscard]] bool frozen() const {
        return std::holds_alternative<LinearReward>(model) || std::get<MlpHeadReward>(model).frozen;
    }
    [[nodiscard]] Eigen::RowVectorXd values(const Featurizer& fz, std::span<const State> states) const {
        return std::visit([&](const auto& m) { return m.values(fz, states); }, model);
    }
    [[nodiscard]] double value(const Featurizer& fz, const State& s) const {
        return values(fz, std::span<const State>(&s, 1))[0];
    }
};

/// Linear reward on a frozen calibrated representation. Equivalence-labeled
/// queries are ignored; callers collect non-equivalent queries instead.
inline RewardModel train_reward(const Featurizer& fz, const CalibratedRepresentation& rep,
                                const QueryDataset& d, const TrainHyper& h, bool frozen,
                                std::uint64_t seed, TrainLog* log = nullptr) {
    if (!frozen) throw Error("calibrated representation is always frozen");
    LinearReward r{rep, init(MlpSpec::linear(static_cast<int>(kFeaturesPerEnv)), seed, InitMode::UniformFanIn)};
    const QueryDataset pref = d.pref();
    if (!pref.empty()) {
        const Eigen::MatrixXd f = rep.encode(fz, stacked_states(pref));
        const auto y = targets(pref);
        Rng rng(derive_seed(seed, {0x7EED}));
        std::vector<double> yb;
        Gradients g;
        minibatch_loop(pref.size(), h, rng, log, [&](std::span<const std::size_t> batch) {
            yb.clear();
            for (auto i : batch) yb.push_back(y[i]);
            const double loss = pair_loss_gradient(r.weights, gather_pairs(f, pref.size(), batch), yb,
                                                   h.lambda_equiv, h.lambda_reg, g);
            adam_step(r.weights, g.params, h.adam());
            return loss;
        });
    }
    return {std::move(r)};
}

/// Reward head on a multi-task latent, trunk frozen or fine-tuned.
inline RewardModel train_reward(const Featurizer& fz, const MultiTaskRep& rep, const QueryDataset& d,
                                const TrainHyper& h, bool frozen, std::uint64_t seed,
                                TrainLog* log = nullptr) {
    MlpHeadReward r{rep.trunk, init(MlpSpec::reward_head(kLatentDim), seed, InitMode::UniformFanIn), frozen};
    r.trunk.adam = AdamState{zeros_like(r.trunk.layers), zeros_like(r.trunk.layers), 0};
    if (d.empty()) return {std::move(r)};
    const auto y = targets(d);
    Rng rng(derive_seed(seed, {0x7EED}));
    std::vector<double> yb;
    Gradients g;
    if (frozen) {
        const Eigen::MatrixXd latent = forward(r.trunk, fz.state_inputs(stacked_states(d)));
        minibatch_loop(d.size(), h, rng, log, [&](std::span<const std::size_t> batch) {
            yb.clear();
            for (auto i : batch) yb.push_back(y[i]);
            const double loss = pair_loss_gradient(r.head, gather_pairs(latent, d.size(), batch), yb,
                                                   h.lambda_equiv, h.lambda_reg, g);
            adam_step(r.head, g.params, h.adam());
            return loss;
        });
    } else {
        const Eigen::MatrixXd x = fz.state_inputs(stacked_states(d));
        minibatch_loop(d.size(), h, rng, log, [&](std::span<const std::size_t> batch) {
            yb.clear();
            for (auto i : batch) yb.push_back(y[i]);
            ForwardCache tc;
            const Eigen::MatrixXd latent = forward(r.trunk, gather_pairs(x, d.size(), batch), &tc);
            const double loss = pair_loss_gradient(r.head, latent, yb, h.lambda_equiv, h.lambda_reg, g);
            const Gradients tg = backward(r.trunk, tc, g.input);
            adam_step(r.head, g.params, h.adam());
            adam_step(r.trunk, tg.params, h.adam());
            return loss;
        });
    }
    return {std::move(r)};
}

// ---- query collection --------------------------------------------------------------

/// Sample labeled pairs of distinct states from `pool` (indices into
/// `states`); no pair is asked twice. With `skip_equivalent`, Equal answers
/// are dropped and a new pair is drawn until the budget is met.
inline QueryDataset collect_queries(std::span<const State> states, std::span<const std::size_t> pool,
                                    const ValueFn& value_fn, const OracleConfig& cfg,
                                    std::size_t budget, bool skip_equivalent, Rng& rng) {
    if (pool.size() < 2 && budget > 0) throw Error("need at least two states to form a query");
    QueryDataset d;
    std::set<std::pair<std::size_t, std::size_t>> asked;
    const std::size_t max_attempts = 1000 * std::max<std::size_t>(budget, 1);
    std::size_t attempts = 0;
    while (d.size() < budget) {
        if (++attempts > max_attempts) throw Error("could not collect enough non-equivalent queries");
        const std::size_t ia = rng.uniform_int(pool.size());
        std::size_t ib = rng.uniform_int(pool.size() - 1);
        if (ib >= ia) ++ib;
        const std::size_t a = pool[ia], b = pool[ib];
        if (!asked.insert({std::min(a, b), std::max(a, b)}).second) continue;
        const Label y = respond(value_fn(states[a]), value_fn(states[b]), cfg, rng);
        if (skip_equivalent && y == Label::Equal) continue;
        d.queries.push_back({states[a], states[b], y});
    }
    return d;
}

}  // namespace calib
