// Live teaching sessions: a person answers a fixed list of contextual feature
// queries, calibrated features are trained at label checkpoints, and trained
// models are inspected through point clouds.
//
// The core is transport-free: every operation returns {status, json}. See
// teach_http.hpp for the REST binding.

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/experiments.hpp"
#include "calib/geometry_env.hpp"
#include "calib/learning.hpp"
#include "calib/oracle.hpp"
#include "calib/rng.hpp"

namespace calib::teach {

using nlohmann::json;

inline constexpr std::size_t kSessionQueries = 100;
inline constexpr std::array<std::size_t, 4> kCheckpoints{0, 25, 50, 100};
inline constexpr std::size_t kCloudPoints = 5000;
inline constexpr int kLogVersion = 1;
inline constexpr std::uint64_t kQueryListSeed = 20231105;

struct Reply {
    int status = 200;
    json body = json::object();
};

inline Reply error_reply(int status, const std::string& message) { return {status, {{"error", message}}}; }

inline bool is_checkpoint(std::size_t k) {
    return std::find(kCheckpoints.begin(), kCheckpoints.end(), k) != kCheckpoints.end();
}

inline std::string prompt_for(FeatureId f) {
    switch (f) {
        case FeatureId::StoveDist: return "In which state is the distance to the stove better respected, given how hot the stove is?";
        case FeatureId::TableDist: return "In which state is the height above the table better respected, given the object?";
        case FeatureId::LaptopDist: return "In which state is the distance to the laptop better respected, given the object?";
        case FeatureId::HumanDist: return "In which state is the distance to the person better respected, given the utensil?";
        case FeatureId::PointAtHuman: return "In which state is pointing away from the person better respected, given the utensil?";
        case FeatureId::CupAngle: return "In which state is keeping the cup upright better respected, given how full it is?";
    }
    throw Error("unknown feature id");
}

/// Snap every context element to its discrete display grid.
inline State discretize_contexts(const EnvironmentSpec& env, State s) {
    for (std::size_t i = 0; i < kContextsPerEnv; ++i) {
        const auto grid = discrete_context_values(env.context_names[i]);
        s.context[i] = snap_to_grid(s.context[i], grid);
    }
    return s;
}

/// The fixed query list for one (env, feature): identical for every session.
inline std::vector<PairedQuery> session_queries(const EnvironmentSpec& env, FeatureId feature,
                                                std::size_t n = kSessionQueries) {
    Rng rng(derive_seed(kQueryListSeed, {hash_tag("teach-queries"), static_cast<std::uint64_t>(env.name),
                                         static_cast<std::uint64_t>(feature)}));
    std::vector<PairedQuery> out(n);
    for (auto& q : out) {
        q.s1 = discretize_contexts(env, sample_state(env, rng));
        q.s2 = discretize_contexts(env, sample_state(env, rng));
    }
    return out;
}

inline json state_to_json(const EnvironmentSpec& env, const State& s) {
    json labels = json::array();
    for (std::size_t i = 0; i < kContextsPerEnv; ++i) {
        const auto grid = discrete_context_values(env.context_names[i]);
        const auto idx = static_cast<std::size_t>(
            std::min_element(grid.begin(), grid.end(),
                             [&](double a, double b) { return std::abs(a - s.context[i]) < std::abs(b - s.context[i]); }) -
            grid.begin());
        labels.push_back({{"name", env.context_names[i]}, {"index", idx}, {"count", grid.size()}, {"value", s.context[i]}});
    }
    return {{"ee_pos", s.ee_pos},
            {"ee_rot", s.ee_rot},
            {"objects", {{"human", s.human_pos}, {"stove", s.stove_pos}, {"laptop", s.laptop_pos}, {"table_z", env.layout.table_z}}},
            {"context", s.context},
            {"discrete_context_labels", labels}};
}

enum class JobStatus { Queued, Running, Done, Failed };

inline std::string_view to_string(JobStatus s) {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "failed";
}

/// Payload of a finished model. Immutable once published.
struct TrainedModel {
    std::optional<CalibratedFeature> feature;  // empty for checkpoint 0 (base feature)
    PointCloudSet cloud;
    json checkpoint;  // serialized network (null for checkpoint 0)
    double train_seconds = 0.0;
};

struct ModelEntry {
    std::string id;
    std::string session_id;
    std::size_t checkpoint = 0;
    std::atomic<JobStatus> status{JobStatus::Queued};
    std::string error;
    std::shared_ptr<const TrainedModel> result;  // written before status becomes Done
};

struct Session {
    std::string id;
    EnvName env = EnvName::WeightedBlock;
    FeatureId feature = FeatureId::StoveDist;
    std::uint64_t seed = 0;
    std::vector<PairedQuery> queries;
    std::vector<Label> labels;
    std::map<std::size_t, std::shared_ptr<ModelEntry>> models;  // by checkpoint
    std::vector<std::size_t> display_order;                     // anonymized checkpoint order
    std::mutex mutex;
};

/// Background training workers; jobs run in submission order per worker.
class JobQueue {
public:
    explicit JobQueue(std::size_t workers) {
        for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i)
            threads_.emplace_back([this] { run(); });
    }
    ~JobQueue() {
        {
            std::lock_guard lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }
    JobQueue(const JobQueue&) = delete;
    JobQueue& operator=(const JobQueue&) = delete;

    void submit(std::function<void()> job) {
        {
            std::lock_guard lk(m_);
            jobs_.push_back(std::move(job));
            ++pending_;
        }
        cv_.notify_one();
    }

    /// Block until all submitted jobs have finished.
    void wait_idle() {
        std::unique_lock lk(m_);
        idle_.wait(lk, [this] { return pending_ == 0; });
    }

private:
    void run() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock lk(m_);
                cv_.wait(lk, [this] { return stop_ || !jobs_.empty(); });
                if (jobs_.empty()) return;
                job = std::move(jobs_.front());
                jobs_.pop_front();
            }
            job();
            {
                std::lock_guard lk(m_);
                --pending_;
            }
            idle_.notify_all();
        }
    }

    std::mutex m_;
    std::condition_variable cv_, idle_;
    std::deque<std::function<void()>> jobs_;
    std::size_t pending_ = 0;
    bool stop_ = false;
    std::vector<std::thread> threads_;
};

struct ServiceOptions {
    std::filesystem::path data_dir = "teach_data";
    EnvName default_env = EnvName::Utensil;
    FeatureId default_feature = FeatureId::HumanDist;
    std::size_t workers = 1;
    std::size_t cloud_points = kCloudPoints;
    TrainHyper hyper = TrainHyper::calibrated_features();
};

class TeachService {
public:
    explicit TeachService(ServiceOptions opt) : opt_(std::move(opt)), jobs_(opt_.workers) {
        std::error_code ec;
        std::filesystem::create_directories(opt_.data_dir, ec);
        if (ec) throw Error("cannot create data directory " + opt_.data_dir.string() + ": " + ec.message());
        restore();
    }

    ~TeachService() { jobs_.wait_idle(); }

    [[nodiscard]] const ServiceOptions& options() const { return opt_; }

    // POST /session {env?, feature?, seed?, id?}
    Reply create_session(const json& body) {
        EnvName env = opt_.default_env;
        FeatureId feature = opt_.default_feature;
        std::uint64_t seed = 0;
        std::string id;
        try {
            if (body.contains("env")) env = env_from_string(body.at("env").get<std::string>());
            if (body.contains("feature")) feature = feature_from_string(body.at("feature").get<std::string>());
            if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
            if (body.contains("id")) id = body.at("id").get<std::string>();
            (void)EnvironmentSpec::make(env).slot_of(feature);
        } catch (const std::exception& e) {
            return error_reply(400, e.what());
        }
        if (!id.empty() && !valid_id(id)) return error_reply(400, "session id must be [A-Za-z0-9_-]+");
        std::shared_ptr<Session> s;
        {
            std::lock_guard lk(mutex_);
            if (id.empty()) id = fresh_id_locked();
            if (sessions_.count(id) || std::filesystem::exists(log_path(id)))
                return error_reply(409, "session '" + id + "' already exists");
            s = make_session(id, env, feature, seed);
            sessions_[id] = s;
        }
        append_log(id, {{"event", "create"}, {"version", kLogVersion}, {"id", id}, {"env", std::string(to_string(env))},
                        {"feature", std::string(to_string(feature))}, {"seed", seed}});
        {
            std::lock_guard lk(s->mutex);
            schedule_locked(*s, 0);
        }
        return {201, session_summary(*s)};
    }

    // GET /session/{id}
    Reply session_info(const std::string& id) {
        auto s = find_session(id);
        if (!s) return error_reply(404, "unknown session '" + id + "'");
        std::lock_guard lk(s->mutex);
        return {200, session_summary(*s)};
    }

    // GET /session/{id}/query/next
    Reply next_query(const std::string& id) {
        auto s = find_session(id);
        if (!s) return error_reply(404, "unknown session '" + id + "'");
        std::lock_guard lk(s->mutex);
        const std::size_t i = s->labels.size();
        if (i >= s->queries.size()) return error_reply(409, "all queries labeled");
        const auto env = EnvironmentSpec::make(s->env);
        return {200,
                {{"index", i},
                 {"total", s->queries.size()},
                 {"state1", state_to_json(env, s->queries[i].s1)},
                 {"state2", state_to_json(env, s->queries[i].s2)},
                 {"prompt", prompt_for(s->feature)}}};
    }

    // POST /session/{id}/label {index, label}
    Reply label(const std::string& id, const json& body) {
        auto s = find_session(id);
        if (!s) return error_reply(404, "unknown session '" + id + "'");
        std::size_t index = 0;
        Label y{};
        try {
            index = body.at("index").get<std::size_t>();
            y = label_from_string(body.at("label").get<std::string>());
        } catch (const std::exception& e) {
            return error_reply(400, std::string("bad label request: ") + e.what());
        }
        std::lock_guard lk(s->mutex);
        if (index < s->labels.size()) return error_reply(400, "query " + std::to_string(index) + " is already labeled");
        if (index != s->labels.size())
            return error_reply(400, "out-of-order label: expected index " + std::to_string(s->labels.size()));
        if (index >= s->queries.size()) return error_reply(400, "index beyond the query list");
        append_log(id, {{"event", "label"}, {"index", index}, {"label", std::string(to_string(y))}});
        s->labels.push_back(y);
        json reply{{"accepted", true}, {"labeled", s->labels.size()}};
        if (is_checkpoint(s->labels.size())) {
            reply["next_checkpoint"] = s->labels.size();
            schedule_locked(*s, s->labels.size());
            reply["model_id"] = s->models.at(s->labels.size())->id;
        }
        return {200, reply};
    }

    // POST /session/{id}/train {checkpoint}
    Reply train(const std::string& id, const json& body) {
        auto s = find_session(id);
        if (!s) return error_reply(404, "unknown session '" + id + "'");
        std::size_t k = 0;
        try {
            k = body.at("checkpoint").get<std::size_t>();
        } catch (const std::exception& e) {
            return error_reply(400, std::string("bad train request: ") + e.what());
        }
        if (!is_checkpoint(k)) return error_reply(400, "checkpoint must be one of 0, 25, 50, 100");
        std::lock_guard lk(s->mutex);
        if (s->labels.size() < k)
            return error_reply(409, "checkpoint " + std::to_string(k) + " not reached (" +
                                        std::to_string(s->labels.size()) + " labels)");
        if (auto it = s->models.find(k); it != s->models.end()) {
            const auto st = it->second->status.load();
            if (st == JobStatus::Done) return error_reply(409, "checkpoint " + std::to_string(k) + " already trained");
            if (st != JobStatus::Failed)
                return {202, {{"model_id", it->second->id}, {"status", std::string(to_string(st))}}};
            s->models.erase(it);
        }
        schedule_locked(*s, k);
        return {202, {{"model_id", s->models.at(k)->id}, {"status", "queued"}}};
    }

    // GET /session/{id}/models
    Reply models(const std::string& id) {
        auto s = find_session(id);
        if (!s) return error_reply(404, "unknown session '" + id + "'");
        std::lock_guard lk(s->mutex);
        json list = json::array();
        for (auto k : s->display_order) {
            auto it = s->models.find(k);
            if (it == s->models.end()) continue;
            list.push_back({{"model_id", it->second->id}, {"status", std::string(to_string(it->second->status.load()))}});
        }
        return {200, {{"session", id}, {"models", list}}};
    }

    // GET /model/{id}
    Reply model_status(const std::string& model_id) {
        auto m = find_model(model_id);
        if (!m) return error_reply(404, "unknown model '" + model_id + "'");
        json body{{"model_id", m->id}, {"status", std::string(to_string(m->status.load()))}};
        if (m->status.load() == JobStatus::Failed) body["error"] = m->error;
        return {200, body};
    }

    // GET /model/{id}/pointcloud?context_step=x
    /// x is a slider position in [0, 1]; it snaps to the nearest of the four
    /// display contexts of the feature's relevant context element.
    Reply pointcloud(const std::string& model_id, const std::optional<std::string>& context_step) {
        auto m = find_model(model_id);
        if (!m) return error_reply(404, "unknown model '" + model_id + "'");
        double x = 0.0;
        if (context_step) {
            try {
                std::size_t used = 0;
                x = std::stod(*context_step, &used);
                if (used != context_step->size() || !std::isfinite(x)) throw Error("not a number");
            } catch (const std::exception&) {
                return error_reply(400, "context_step must be a number in [0, 1]");
            }
            if (x < 0.0 || x > 1.0) return error_reply(400, "context_step must be a number in [0, 1]");
        }
        const auto st = m->status.load(std::memory_order_acquire);
        if (st != JobStatus::Done)
            return {409, {{"error", "model not ready"}, {"status", std::string(to_string(st))}}};
        const auto& cloud = m->result->cloud;
        const auto di = cloud.display_index(x);
        json display = json::array();
        for (auto i : cloud.display_indices()) display.push_back(cloud.context_values[i]);
        json points = json::array();
        for (const auto& p : cloud.clouds[di]) points.push_back({p.position[0], p.position[1], p.position[2], p.value});
        return {200,
                {{"model_id", m->id},
                 {"context_name", cloud.context_name},
                 {"context_value", cloud.context_values[di]},
                 {"display_contexts", display},
                 {"points", std::move(points)}}};
    }

    /// Serialized network for a finished checkpoint (null for the base feature).
    [[nodiscard]] std::optional<json> checkpoint_json(const std::string& session_id, std::size_t k) {
        auto s = find_session(session_id);
        if (!s) return std::nullopt;
        std::shared_ptr<ModelEntry> m;
        {
            std::lock_guard lk(s->mutex);
            auto it = s->models.find(k);
            if (it == s->models.end()) return std::nullopt;
            m = it->second;
        }
        if (m->status.load(std::memory_order_acquire) != JobStatus::Done) return std::nullopt;
        return std::optional<json>(m->result->checkpoint);
    }

    [[nodiscard]] std::optional<double> train_seconds(const std::string& session_id, std::size_t k) {
        auto s = find_session(session_id);
        if (!s) return std::nullopt;
        std::lock_guard lk(s->mutex);
        auto it = s->models.find(k);
        if (it == s->models.end() || it->second->status.load() != JobStatus::Done) return std::nullopt;
        return it->second->result->train_seconds;
    }

    void wait_idle() { jobs_.wait_idle(); }

    [[nodiscard]] std::filesystem::path log_path(const std::string& id) const { return opt_.data_dir / (id + ".jsonl"); }
    [[nodiscard]] std::filesystem::path checkpoint_path(const std::string& id, std::size_t k) const {
        return opt_.data_dir / (id + ".ckpt" + std::to_string(k) + ".json");
    }

private:
    static bool valid_id(const std::string& id) {
        return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](char c) {
                   return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
               });
    }

    std::string fresh_id_locked() {
        for (;;) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "s%04zu", ++counter_);
            if (!sessions_.count(buf) && !std::filesystem::exists(log_path(buf))) return buf;
        }
    }

    static std::string model_id_for(const std::string& session_id, std::size_t k) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(derive_seed(hash_tag(session_id), {hash_tag("model"), k})));
        return buf;
    }

    std::shared_ptr<Session> make_session(const std::string& id, EnvName env, FeatureId feature, std::uint64_t seed) {
        auto s = std::make_shared<Session>();
        s->id = id;
        s->env = env;
        s->feature = feature;
        s->seed = seed;
        s->queries = session_queries(EnvironmentSpec::make(env), feature);
        s->display_order.assign(kCheckpoints.begin(), kCheckpoints.end());
        Rng rng(derive_seed(hash_tag(id), {hash_tag("display-order")}));
        rng.shuffle(s->display_order);
        return s;
    }

    std::shared_ptr<Session> find_session(const std::string& id) {
        std::lock_guard lk(mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    std::shared_ptr<ModelEntry> find_model(const std::string& id) {
        std::lock_guard lk(mutex_);
        auto it = models_.find(id);
        return it == models_.end() ? nullptr : it->second;
    }

    const Featurizer& featurizer(EnvName env) {
        std::lock_guard lk(fz_mutex_);
        auto it = featurizers_.find(env);
        if (it == featurizers_.end()) {
            const auto spec = EnvironmentSpec::make(env);
            const auto set = build_state_set(spec, kDefaultStateCount, 0);
            it = featurizers_.emplace(env, Featurizer{spec, fit_normalizer(set, spec)}).first;
        }
        return it->second;
    }

    void append_log(const std::string& id, const json& event) {
        std::ofstream f(log_path(id), std::ios::app | std::ios::binary);
        if (!f) throw Error("cannot append to " + log_path(id).string());
        f << event.dump() << "\n";
        f.flush();
        if (!f) throw Error("failed writing " + log_path(id).string());
    }

    /// Requires s.mutex. Creates the model entry and enqueues training.
    void schedule_locked(Session& s, std::size_t k) {
        if (s.models.count(k)) return;
        auto m = std::make_shared<ModelEntry>();
        m->id = model_id_for(s.id, k);
        m->session_id = s.id;
        m->checkpoint = k;
        s.models[k] = m;
        {
            std::lock_guard lk(mutex_);
            models_[m->id] = m;
        }
        QueryDataset d;
        for (std::size_t i = 0; i < k; ++i) d.queries.push_back({s.queries[i].s1, s.queries[i].s2, s.labels[i]});
        const auto env = s.env;
        const auto feature = s.feature;
        const auto seed = s.seed;
        jobs_.submit([this, m, d = std::move(d), env, feature, seed] { run_training(*m, d, env, feature, seed); });
    }

    void run_training(ModelEntry& m, const QueryDataset& d, EnvName env_name, FeatureId feature, std::uint64_t seed) {
        m.status.store(JobStatus::Running);
        try {
            const auto t0 = std::chrono::steady_clock::now();
            const Featurizer& fz = featurizer(env_name);
            const std::size_t slot = fz.env.slot_of(feature);
            auto out = std::make_shared<TrainedModel>();
            const auto ctx_name = fz.env.context_names[context_index(gt_fns(env_name)[slot])];
            if (m.checkpoint == 0) {
                out->checkpoint = nullptr;
                out->cloud = calib::pointcloud(base_feature_values(fz, slot), fz.env, ctx_name, opt_.cloud_points);
            } else {
                const auto path = checkpoint_path(m.session_id, m.checkpoint);
                CalibratedFeature cf;
                if (std::filesystem::exists(path)) {
                    out->checkpoint = json::parse(read_file(path));
                    cf.slot = slot;
                    cf.base_id = feature;
                    cf.net = mlp_from_json(out->checkpoint);
                    cf.query_count = d.size();
                } else {
                    const auto train_seed = derive_seed(seed, {hash_tag("teach-train"), static_cast<std::uint64_t>(env_name),
                                                               static_cast<std::uint64_t>(feature), m.checkpoint});
                    cf = train_calibrated_feature(fz, slot, d, opt_.hyper, train_seed);
                    out->checkpoint = to_json(cf.net, {{"session", m.session_id},
                                                       {"checkpoint", m.checkpoint},
                                                       {"env", std::string(to_string(env_name))},
                                                       {"feature", std::string(to_string(feature))},
                                                       {"seed", train_seed},
                                                       {"hyper", to_json(opt_.hyper)}});
                    write_file(path, out->checkpoint.dump() + "\n");
                }
                out->cloud = calib::pointcloud(calibrated_values(fz, cf), fz.env, ctx_name, opt_.cloud_points);
                out->feature = std::move(cf);
            }
            out->train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            m.result = std::move(out);
            m.status.store(JobStatus::Done, std::memory_order_release);
        } catch (const std::exception& e) {
            m.error = e.what();
            m.status.store(JobStatus::Failed, std::memory_order_release);
        }
    }

    static std::string read_file(const std::filesystem::path& p) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw Error("cannot open " + p.string());
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    static void write_file(const std::filesystem::path& p, const std::string& text) {
        const auto tmp = p.string() + ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary);
            f << text;
            if (!f) throw Error("cannot write " + tmp);
        }
        std::filesystem::rename(tmp, p);
    }

    json session_summary(const Session& s) const {
        json ready = json::array();
        for (auto k : kCheckpoints)
            if (s.labels.size() >= k) ready.push_back(k);
        return {{"session_id", s.id},
                {"env", std::string(to_string(s.env))},
                {"feature", std::string(to_string(s.feature))},
                {"seed", s.seed},
                {"labeled", s.labels.size()},
                {"total", s.queries.size()},
                {"checkpoints_reached", ready},
                {"prompt", prompt_for(s.feature)}};
    }

    /// Rebuild sessions from their logs and re-enqueue every reached checkpoint.
    void restore() {
        for (const auto& entry : std::filesystem::directory_iterator(opt_.data_dir)) {
            if (entry.path().extension() != ".jsonl") continue;
            std::ifstream f(entry.path());
            std::string line;
            std::shared_ptr<Session> s;
            std::size_t line_no = 0;
            while (std::getline(f, line)) {
                ++line_no;
                if (line.empty()) continue;
                json ev;
                try {
                    ev = json::parse(line);
                } catch (const json::exception&) {
                    break;  // torn final write; keep what was committed
                }
                const auto kind = ev.at("event").get<std::string>();
                if (kind == "create") {
                    if (ev.at("version").get<int>() != kLogVersion)
                        throw Error("unsupported session log version in " + entry.path().string());
                    s = make_session(ev.at("id").get<std::string>(), env_from_string(ev.at("env").get<std::string>()),
                                     feature_from_string(ev.at("feature").get<std::string>()), ev.at("seed").get<std::uint64_t>());
                } else if (kind == "label") {
                    if (!s || ev.at("index").get<std::size_t>() != s->labels.size())
                        throw Error("corrupt session log " + entry.path().string() + " at line " + std::to_string(line_no));
                    s->labels.push_back(label_from_string(ev.at("label").get<std::string>()));
                }
            }
            if (!s) continue;
            {
                std::lock_guard lk(mutex_);
                sessions_[s->id] = s;
            }
            std::lock_guard lk(s->mutex);
            for (auto k : kCheckpoints)
                if (s->labels.size() >= k) schedule_locked(*s, k);
        }
    }

    ServiceOptions opt_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::map<std::string, std::shared_ptr<ModelEntry>> models_;
    std::size_t counter_ = 0;
    std::mutex fz_mutex_;
    std::map<EnvName, Featurizer> featurizers_;
    JobQueue jobs_;  // last member: workers stop before the state they touch
};

}  // namespace calib::teach
