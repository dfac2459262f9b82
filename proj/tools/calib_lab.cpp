// calib-lab: run reward-learning experiments, summarize results, and host
// live teaching sessions.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "calib/experiments.hpp"
#include "calib/parallel.hpp"
#include "calib/report.hpp"
#include "calib/teach_service.hpp"
#include "calib/teach_http.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using namespace calib;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

std::vector<Scenario> parse_scenarios(const std::string& text, const EnvironmentSpec& env) {
    if (text == "table") {
        std::vector<Scenario> out{Scenario::all()};
        for (std::size_t i = 0; i < kFeaturesPerEnv; ++i) out.push_back(Scenario::single(i));
        return out;
    }
    return {scenario_from_string(text, env)};
}

std::vector<MetricRow> load_rows(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw Error("cannot open " + p.string());
    return rows_from_csv(f);
}

int cmd_run(const std::vector<std::string>& envs, const std::string& scenario, std::size_t seeds,
            const fs::path& out, const std::string& config_path, std::size_t workers, bool mse_curve) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = config_from_json(nlohmann::json::parse(read_text(config_path)));
    std::vector<ExperimentPlan> plans;
    std::vector<std::uint64_t> seed_list(seeds);
    for (std::size_t i = 0; i < seeds; ++i) seed_list[i] = i;
    for (const auto& e : envs) {
        const auto env = env_from_string(e);
        for (const auto& sc : parse_scenarios(scenario, EnvironmentSpec::make(env))) {
            auto p = ExperimentPlan::standard(env, sc);
            p.seeds = seed_list;
            p.config = cfg;
            plans.push_back(std::move(p));
        }
    }
    std::cerr << "running " << plans.size() << " plan(s) x " << seeds << " seed(s) on " << workers << " worker(s)\n";
    const auto results = run_experiments(plans, workers);
    std::vector<MetricRow> curve;
    if (mse_curve)
        for (const auto& e : envs) {
            auto rows = run_feature_curve(env_from_string(e), kDefaultFeatureBudgets, seed_list, cfg, workers);
            curve.insert(curve.end(), rows.begin(), rows.end());
        }
    export_results(results, out, curve);
    std::cout << read_text(out / "summary.md");
    std::cerr << "wrote " << (out / "results.csv").string() << "\n";
    return 0;
}

int cmd_rerun(const fs::path& manifest_path, const fs::path& out, std::size_t workers) {
    const auto plans = plans_from_manifest(nlohmann::json::parse(read_text(manifest_path)));
    export_results(run_experiments(plans, workers), out);
    std::cerr << "wrote " << (out / "results.csv").string() << "\n";
    return 0;
}

int cmd_report(const fs::path& in) {
    const auto rows = load_rows(in / "results.csv");
    std::vector<MetricRow> diags;
    if (fs::exists(in / "diagnostics.csv")) diags = load_rows(in / "diagnostics.csv");
    const auto md = summary_markdown(rows, diags);
    write_text(in / "summary.md", md);
    std::vector<MetricRow> all = rows;
    all.insert(all.end(), diags.begin(), diags.end());
    emit_plots(all, in / "plots");
    std::cout << md;
    return 0;
}

int cmd_serve(const std::string& host, int port, const std::string& env, const std::string& feature,
              const fs::path& data_dir, std::size_t workers) {
    teach::ServiceOptions opt;
    opt.default_env = env_from_string(env);
    opt.default_feature = feature_from_string(feature);
    (void)EnvironmentSpec::make(opt.default_env).slot_of(opt.default_feature);
    opt.data_dir = data_dir;
    opt.workers = workers;
    teach::TeachService service(opt);
    httplib::Server server;
    teach::mount(service, server);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << env << "/" << feature << " on http://" << host << ":" << port << " (data: " << data_dir.string()
              << ")\n";
    if (!server.listen(host, port)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibrated-feature reward learning lab"};
    app.require_subcommand(1);

    std::size_t workers = default_workers();
    app.add_option("--workers", workers, std::string("Worker threads (env ") + kWorkersEnvVar + ")")->check(CLI::PositiveNumber);

    auto* run = app.add_subcommand("run", "Run experiments and write CSV, manifest, summary and plots");
    std::vector<std::string> envs;
    std::string scenario = "all", config_path;
    std::size_t seeds = kDefaultSeeds.size();
    fs::path out;
    bool mse_curve = false;
    run->add_option("--env", envs, "weighted_block | cup | utensil (repeatable)")->required();
    run->add_option("--scenario", scenario, "all | single:<feature> | table (all + each single feature)");
    run->add_option("--seeds", seeds, "Number of seeds (0..n-1)")->check(CLI::PositiveNumber);
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--config", config_path, "JSON file overriding hyperparameters")->check(CLI::ExistingFile);
    run->add_flag("--mse-curve", mse_curve, "Also record feature MSE against query budget");

    auto* rerun = app.add_subcommand("rerun", "Re-run the plans recorded in a manifest");
    fs::path manifest_path, rerun_out;
    rerun->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", rerun_out)->required();

    auto* report = app.add_subcommand("report", "Summarize a results directory");
    fs::path in;
    report->add_option("--in", in, "Directory written by run")->required()->check(CLI::ExistingDirectory);

    auto* serve = app.add_subcommand("serve", "Host live teaching sessions over HTTP");
    std::string host = "127.0.0.1", env = "utensil", feature = "human_dist";
    int port = 8080;
    fs::path data_dir = "teach_data";
    serve->add_option("--host", host);
    serve->add_option("--port", port)->check(CLI::Range(1, 65535));
    serve->add_option("--env", env, "Default environment for new sessions");
    serve->add_option("--feature", feature, "Default feature for new sessions");
    serve->add_option("--data-dir", data_dir, "Session logs and checkpoints");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(envs, scenario, seeds, out, config_path, workers, mse_curve);
        if (*rerun) return cmd_rerun(manifest_path, rerun_out, workers);
        if (*report) return cmd_report(in);
        if (*serve) return cmd_serve(host, port, env, feature, data_dir, workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
