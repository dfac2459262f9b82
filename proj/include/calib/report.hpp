// Result export: long-format CSV, JSON manifests, markdown summaries and SVG
// accuracy / MSE plots.

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "calib/error.hpp"
#include "calib/experiments.hpp"

namespace calib {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kCsvHeader = "method,env,scenario,seed,query_count,metric,value";

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(std::span<const MetricRow> rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows)
        out += r.method + "," + r.env + "," + r.scenario + "," + std::to_string(r.seed) + "," +
               std::to_string(r.query_count) + "," + r.metric + "," + format_double(r.value) + "\n";
    return out;
}

inline std::vector<MetricRow> rows_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw Error("unexpected CSV header");
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw Error("malformed CSV row: " + line);
        rows.push_back({f[0], f[1], f[2], std::stoull(f[3]), std::stoul(f[4]), f[5], std::stod(f[6])});
    }
    return rows;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("failed writing " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---- manifest / config --------------------------------------------------------

inline nlohmann::json to_json(const WorkspaceBox& b) { return {{"lo", b.lo}, {"hi", b.hi}}; }

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"cf_rep", to_json(c.cf_rep)},
            {"mt_rep", to_json(c.mt_rep)},
            {"cf_reward", to_json(c.cf_reward)},
            {"mt_reward", to_json(c.mt_reward)},
            {"oracle", to_json(c.oracle)},
            {"state_count", c.state_count},
            {"state_seed", c.state_seed},
            {"grid_seed", c.grid_seed},
            {"eval_pairs", c.eval_pairs},
            {"layout", to_json(c.layout)},
            {"workspace", to_json(c.workspace)}};
}

/// Overlay a (possibly partial) JSON config onto `base`.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {}) {
    if (j.contains("cf_rep")) base.cf_rep = train_hyper_from_json(j["cf_rep"], base.cf_rep);
    if (j.contains("mt_rep")) base.mt_rep = train_hyper_from_json(j["mt_rep"], base.mt_rep);
    if (j.contains("cf_reward")) base.cf_reward = train_hyper_from_json(j["cf_reward"], base.cf_reward);
    if (j.contains("mt_reward")) base.mt_reward = train_hyper_from_json(j["mt_reward"], base.mt_reward);
    if (j.contains("oracle")) {
        base.oracle.beta = j["oracle"].value("beta", base.oracle.beta);
        base.oracle.epsilon = j["oracle"].value("epsilon", base.oracle.epsilon);
        base.oracle.validate();
    }
    base.state_count = j.value("state_count", base.state_count);
    base.state_seed = j.value("state_seed", base.state_seed);
    base.grid_seed = j.value("grid_seed", base.grid_seed);
    base.eval_pairs = j.value("eval_pairs", base.eval_pairs);
    if (j.contains("layout")) base.layout = layout_from_json(j["layout"]);
    if (j.contains("workspace")) {
        base.workspace.lo = j["workspace"].at("lo").get<Vec3>();
        base.workspace.hi = j["workspace"].at("hi").get<Vec3>();
    }
    return base;
}

inline nlohmann::json to_json(const ExperimentPlan& p) {
    const auto env = p.env_spec();
    std::vector<std::string> methods;
    for (auto m : p.methods) methods.push_back(method_base_name(m));
    return {{"env", std::string(to_string(p.env))},
            {"scenario", to_string(p.scenario, env)},
            {"pretrain_budget", p.pretrain_budget},
            {"reward_query_grid", p.reward_query_grid},
            {"seeds", p.seeds},
            {"methods", methods},
            {"baseline_frozen", p.baseline_frozen},
            {"config", to_json(p.config)}};
}

inline ExperimentPlan plan_from_json(const nlohmann::json& j) {
    ExperimentPlan p;
    p.env = env_from_string(j.at("env").get<std::string>());
    p.config = config_from_json(j.at("config"));
    p.scenario = scenario_from_string(j.at("scenario").get<std::string>(), p.env_spec());
    p.pretrain_budget = j.at("pretrain_budget").get<std::size_t>();
    p.reward_query_grid = j.at("reward_query_grid").get<std::vector<std::size_t>>();
    p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    p.methods.clear();
    for (const auto& m : j.at("methods")) p.methods.push_back(method_from_string(m.get<std::string>()));
    p.baseline_frozen = j.at("baseline_frozen").get<std::vector<bool>>();
    return p;
}

inline nlohmann::json manifest(const std::vector<ExperimentResult>& results) {
    nlohmann::json plans = nlohmann::json::array();
    for (const auto& r : results) plans.push_back(to_json(r.plan));
    const ExperimentConfig cfg = results.empty() ? ExperimentConfig{} : results.front().plan.config;
    return {{"version", kManifestVersion},
            {"tool", "calib-lab"},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"reward_grids", to_json(make_reward_grids(cfg.grid_seed))},
            {"plans", plans}};
}

inline std::vector<ExperimentPlan> plans_from_manifest(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kManifestVersion) throw Error("unsupported manifest version");
    std::vector<ExperimentPlan> out;
    for (const auto& p : j.at("plans")) out.push_back(plan_from_json(p));
    return out;
}

// ---- summaries --------------------------------------------------------------------

inline bool is_baseline(const std::string& method) { return method != "CF" && method.rfind("CF:", 0) != 0; }

/// CF against the best baseline variant at one query count, from seed means.
struct Comparison {
    std::string env, scenario;
    std::size_t query_count = 0;
    Aggregate cf;
    std::string best_baseline;
    Aggregate baseline;
    [[nodiscard]] double delta() const { return cf.mean - baseline.mean; }
};

inline std::vector<Comparison> compare_to_best_baseline(std::span<const MetricRow> rows,
                                                        const std::vector<std::size_t>& query_counts) {
    const auto agg = aggregate_rows(rows);
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& r : rows)
        if (r.metric == "reward_accuracy") cells.insert({r.env, r.scenario});
    std::vector<Comparison> out;
    for (const auto& [env, sc] : cells)
        for (auto q : query_counts) {
            Comparison c{env, sc, q, {}, "", {-1.0, 0.0, 0}};
            for (const auto& [k, a] : agg) {
                const auto& [kenv, ksc, method, metric, kq] = k;
                if (kenv != env || ksc != sc || metric != "reward_accuracy" || kq != q) continue;
                if (method == "CF") c.cf = a;
                else if (is_baseline(method) && a.mean > c.baseline.mean) {
                    c.baseline = a;
                    c.best_baseline = method;
                }
            }
            out.push_back(c);
        }
    return out;
}

inline std::string summary_markdown(std::span<const MetricRow> rows, std::span<const MetricRow> diagnostics = {}) {
    std::ostringstream md;
    char buf[64];
    auto pm = [&](const Aggregate& a) {
        std::snprintf(buf, sizeof buf, "%.3f ± %.3f", a.mean, a.se);
        return std::string(buf);
    };
    const auto agg = aggregate_rows(rows);
    std::map<std::pair<std::string, std::string>, std::pair<std::set<std::size_t>, std::set<std::string>>> cells;
    for (const auto& [k, a] : agg) {
        const auto& [env, sc, method, metric, q] = k;
        if (metric != "reward_accuracy") continue;
        cells[{env, sc}].first.insert(q);
        cells[{env, sc}].second.insert(method);
    }
    md << "# Reward accuracy (mean ± SE over seeds)\n";
    for (const auto& [cell, content] : cells) {
        md << "\n## " << cell.first << " / " << cell.second << "\n\n| method |";
        for (auto q : content.first) md << " " << q << "q |";
        md << "\n|---|";
        for (std::size_t i = 0; i < content.first.size(); ++i) md << "---|";
        md << "\n";
        for (const auto& m : content.second) {
            md << "| " << m << " |";
            for (auto q : content.first) {
                auto it = agg.find({cell.first, cell.second, m, "reward_accuracy", q});
                md << " " << (it == agg.end() ? std::string("-") : pm(it->second)) << " |";
            }
            md << "\n";
        }
    }
    md << "\n# CF vs best baseline\n\n| env | scenario | q | CF | best baseline | baseline | Δ (pp) |\n|---|---|---|---|---|---|---|\n";
    for (const auto& c : compare_to_best_baseline(rows, {5, 10})) {
        std::snprintf(buf, sizeof buf, "%+.1f", 100.0 * c.delta());
        md << "| " << c.env << " | " << c.scenario << " | " << c.query_count << " | " << pm(c.cf) << " | "
           << c.best_baseline << " | " << pm(c.baseline) << " | " << buf << " |\n";
    }
    if (!diagnostics.empty()) {
        const auto dagg = aggregate_rows(diagnostics);
        md << "\n# Diagnostics\n\n| env | scenario | method | metric | q | value |\n|---|---|---|---|---|---|\n";
        for (const auto& [k, a] : dagg) {
            const auto& [env, sc, method, metric, q] = k;
            if (metric == "evaluable_pairs") continue;
            md << "| " << env << " | " << sc << " | " << method << " | " << metric << " | " << q << " | " << pm(a) << " |\n";
        }
        std::vector<double> ev;
        for (const auto& r : diagnostics)
            if (r.metric == "evaluable_pairs") ev.push_back(r.value);
        if (!ev.empty()) {
            std::sort(ev.begin(), ev.end());
            const auto a = aggregate(ev);
            std::snprintf(buf, sizeof buf, "%.1f (median %.0f, min %.0f, n=%zu)", a.mean, ev[ev.size() / 2], ev.front(), ev.size());
            md << "\nEvaluable pairs per test set: mean " << buf << "\n";
        }
    }
    return md.str();
}

// ---- SVG plots ------------------------------------------------------------------------

namespace detail {
inline constexpr std::array<const char*, 10> kPalette{"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                                     "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b15928"};

inline std::string svg_line_plot(const std::string& title, const std::string& y_label,
                                 const std::vector<std::size_t>& xs,
                                 const std::map<std::string, std::map<std::size_t, Aggregate>>& series,
                                 double y_lo, double y_hi) {
    const double w = 640, h = 400, left = 60, right = 170, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](std::size_t i) { return left + (xs.size() <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(xs.size() - 1)); };
    auto py = [&](double v) { return top + ph * (1.0 - (std::clamp(v, y_lo, y_hi) - y_lo) / (y_hi - y_lo)); };
    std::ostringstream s;
    char buf[128];
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = y_lo + (y_hi - y_lo) * t / 5.0;
        std::snprintf(buf, sizeof buf, "%.2f", v);
        s << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
          << "\" stroke=\"#ddd\"/><text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    for (std::size_t i = 0; i < xs.size(); ++i)
        s << "<text x=\"" << px(i) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << xs[i] << "</text>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">queries</text>\n";
    s << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";
    std::size_t color = 0;
    for (const auto& [name, pts] : series) {
        const char* c = kPalette[color++ % kPalette.size()];
        std::string upper, lower, line;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto it = pts.find(xs[i]);
            if (it == pts.end()) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(it->second.mean + it->second.se));
            upper += buf;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(it->second.mean - it->second.se));
            lower = buf + lower;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(i), py(it->second.mean));
            line += buf;
        }
        s << "<polygon points=\"" << upper << lower << "\" fill=\"" << c << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        s << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
        const double ly = top + 14.0 * static_cast<double>(color);
        s << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 28 << "\" y1=\"" << ly << "\" y2=\"" << ly
          << "\" stroke=\"" << c << "\" stroke-width=\"2\"/><text x=\"" << left + pw + 32 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}
}  // namespace detail

/// Accuracy-vs-query-count plot with standard-error bands, one per (env, scenario).
inline std::string accuracy_plot_svg(std::span<const MetricRow> rows, const std::string& env, const std::string& scenario) {
    std::map<std::string, std::map<std::size_t, Aggregate>> series;
    std::set<std::size_t> xs;
    for (const auto& [k, a] : aggregate_rows(rows)) {
        const auto& [kenv, ksc, method, metric, q] = k;
        if (kenv != env || ksc != scenario || metric != "reward_accuracy") continue;
        series[method][q] = a;
        xs.insert(q);
    }
    return detail::svg_line_plot(env + " / " + scenario, "reward accuracy", {xs.begin(), xs.end()}, series, 0.4, 1.0);
}

inline std::string mse_plot_svg(std::span<const MetricRow> rows, const std::string& env) {
    std::map<std::string, std::map<std::size_t, Aggregate>> series;
    std::set<std::size_t> xs;
    double hi = 0.1;
    for (const auto& [k, a] : aggregate_rows(rows)) {
        const auto& [kenv, ksc, method, metric, q] = k;
        if (kenv != env || metric != "mse") continue;
        series[method][q] = a;
        xs.insert(q);
        hi = std::max(hi, a.mean + a.se);
    }
    return detail::svg_line_plot(env + " calibrated features", "test MSE", {xs.begin(), xs.end()}, series, 0.0, hi);
}

inline std::string file_safe(std::string s) {
    for (auto& c : s)
        if (c == ':' || c == '/') c = '_';
    return s;
}

/// Write one SVG per (env, scenario) found in the rows, plus MSE curves.
inline std::vector<std::filesystem::path> emit_plots(std::span<const MetricRow> rows, const std::filesystem::path& dir) {
    std::set<std::pair<std::string, std::string>> cells;
    std::set<std::string> mse_envs;
    for (const auto& r : rows) {
        if (r.metric == "reward_accuracy") cells.insert({r.env, r.scenario});
        if (r.metric == "mse") mse_envs.insert(r.env);
    }
    std::vector<std::filesystem::path> out;
    for (const auto& [env, sc] : cells) {
        auto p = dir / ("accuracy_" + file_safe(env + "_" + sc) + ".svg");
        write_text(p, accuracy_plot_svg(rows, env, sc));
        out.push_back(p);
    }
    for (const auto& env : mse_envs) {
        auto p = dir / ("mse_" + file_safe(env) + ".svg");
        write_text(p, mse_plot_svg(rows, env));
        out.push_back(p);
    }
    return out;
}

/// results.csv, diagnostics.csv, manifest.json, summary.md and plots/.
inline void export_results(const std::vector<ExperimentResult>& results, const std::filesystem::path& dir,
                           std::span<const MetricRow> extra_diagnostics = {}) {
    std::vector<MetricRow> rows, diags(extra_diagnostics.begin(), extra_diagnostics.end());
    for (const auto& r : results) {
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
        diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
    }
    std::sort(rows.begin(), rows.end(), row_less);
    std::sort(diags.begin(), diags.end(), row_less);
    write_text(dir / "results.csv", to_csv(rows));
    write_text(dir / "diagnostics.csv", to_csv(diags));
    write_text(dir / "manifest.json", manifest(results).dump(2) + "\n");
    write_text(dir / "summary.md", summary_markdown(rows, diags));
    std::vector<MetricRow> all = rows;
    all.insert(all.end(), diags.begin(), diags.end());
    emit_plots(all, dir / "plots");
}

}  // namespace calib
