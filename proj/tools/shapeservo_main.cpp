// Command-line front end: run scenarios, repeat them with warm-started
// weights, sweep a directory, fit oracle weights, and verify a run against
// the Lyapunov diagnostics.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "shapeservo/lyapunov.hpp"
#include "shapeservo/runner.hpp"

namespace fs = std::filesystem;
using namespace shapeservo;

namespace {

ScenarioConfig load_scenario(const std::string& path, bool seed_set, std::uint64_t seed) {
    ScenarioConfig cfg = scenario_from_file(path);
    if (seed_set) {
        cfg.seed = seed;
        cfg.seed_set = true;
    }
    return cfg;
}

// Oracle fit grid over the scenario's operating region (around q0 and q_d
// when both are posed; the whole actuation box otherwise).
std::vector<Eigen::VectorXd> scenario_fit_grid(const PlantConfig& plant_cfg,
                                               const ScenarioConfig& cfg) {
    if (cfg.q0.size() > 0 && cfg.q_d.size() > 0) {
        const Eigen::VectorXd center = 0.5 * (cfg.q0 + cfg.q_d);
        const double radius =
            0.5 * (cfg.q_d - cfg.q0).lpNorm<Eigen::Infinity>() + 0.3;
        return make_fit_grid(plant_cfg, cfg.feature, cfg.markers, 0, 0.05, &center,
                             radius);
    }
    return make_fit_grid(plant_cfg, cfg.feature, cfg.markers);
}

void print_run_summary(const RunResult& result) {
    const auto& s = result.summary;
    std::printf("scenario      : %s\n", result.config.name.c_str());
    std::printf("steps         : %zu\n", result.records.size());
    std::printf("epsilon_e     : %.6g\n", s.epsilon_e);
    if (s.metrics.converged) {
        std::printf("converged at  : %.2f s\n", s.metrics.time_to_threshold_s);
    } else {
        std::printf("converged at  : never\n");
    }
    std::printf("|e| initial/final    : %.6g / %.6g\n", s.initial_norm_e,
                s.metrics.final_norm_e);
    std::printf("|x~| initial/final   : %.6g / %.6g\n", s.initial_norm_xtilde,
                s.metrics.final_norm_xtilde);
    std::printf("|x~.| peak/final     : %.6g / %.6g\n", s.metrics.peak_norm_xtildedot,
                s.metrics.final_norm_xtildedot);
    std::printf("max consecutive clamp: %d\n", s.max_consecutive_clamped);
    std::printf("min rank             : %d\n", s.min_rank);
    std::printf("gain conditions      : k_s margin %.4g (%s), beta_x margin %.4g (%s)\n",
                s.gain_report.ks_margin, s.gain_report.ks_ok ? "ok" : "FAIL",
                s.gain_report.beta_margin, s.gain_report.beta_ok ? "ok" : "FAIL");
    if (s.nan_detected) std::printf("NaN DETECTED\n");
    if (!s.abort_reason.empty()) {
        std::printf("ABORTED: %s\n", s.abort_reason.c_str());
    }
}

int cmd_run(const std::string& path, const std::string& out_dir, bool seed_set,
            std::uint64_t seed, bool no_plots) {
    const ScenarioConfig cfg = load_scenario(path, seed_set, seed);
    const RunResult result = run_scenario(cfg);
    print_run_summary(result);
    const EmitPaths paths = emit_outputs(result, out_dir, !no_plots);
    std::printf("telemetry     : %s\n", paths.csv.c_str());
    std::printf("summary       : %s\n", paths.summary_json.c_str());
    return result.summary.abort_reason.empty() ? 0 : 1;
}

int cmd_repeat(const std::string& path, int times, const std::string& out_dir,
               bool seed_set, std::uint64_t seed, bool no_plots) {
    const ScenarioConfig cfg = load_scenario(path, seed_set, seed);
    fs::create_directories(out_dir);
    const std::string bank_path = out_dir + "/" + cfg.name + "_bank.json";
    const RepeatResult rep = run_repeat(cfg, times, bank_path);
    for (std::size_t r = 0; r < rep.runs.size(); ++r) {
        RunResult run = rep.runs[r];
        run.config.name = cfg.name + "_run" + std::to_string(r + 1);
        emit_outputs(run, out_dir, !no_plots);
        if (rep.convergence_times_s[r] >= 0.0) {
            std::printf("run %zu converged at %.2f s\n", r + 1,
                        rep.convergence_times_s[r]);
        } else {
            std::printf("run %zu never converged\n", r + 1);
        }
    }
    std::printf("warm-start speedup: %.1f%%\n", 100.0 * rep.warm_start_speedup);
    std::printf("bank: %s\n", rep.bank_path.c_str());
    return 0;
}

int cmd_sweep(const std::string& dir, const std::string& out_dir, bool no_plots) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            paths.push_back(entry.path().string());
        }
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) {
        std::fprintf(stderr, "no scenario JSON files in %s\n", dir.c_str());
        return 1;
    }

    // Independent scenarios run in parallel; every run is seeded by its own
    // config, so the schedule cannot change any output.
    std::vector<std::future<std::pair<std::string, bool>>> futures;
    for (const auto& p : paths) {
        futures.push_back(std::async(std::launch::async, [&, p] {
            try {
                const ScenarioConfig cfg = scenario_from_file(p);
                const RunResult result = run_scenario(cfg);
                emit_outputs(result, out_dir, !no_plots);
                return std::make_pair(p, result.summary.abort_reason.empty());
            } catch (const std::exception& e) {
                std::fprintf(stderr, "%s: %s\n", p.c_str(), e.what());
                return std::make_pair(p, false);
            }
        }));
    }
    int failures = 0;
    for (auto& f : futures) {
        const auto [p, ok] = f.get();
        std::printf("%-4s %s\n", ok ? "ok" : "FAIL", p.c_str());
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

int cmd_oracle(const std::string& path, const std::string& out_dir, bool seed_set,
               std::uint64_t seed) {
    ScenarioConfig cfg = load_scenario(path, seed_set, seed);
    if (cfg.k_neurons == 0) cfg.k_neurons = scenario_defaults(cfg.plant).k_neurons;
    if (cfg.q0.size() == 0) cfg.q0 = scenario_defaults(cfg.plant).q0;
    const PlantConfig plant_cfg = plant_preset(cfg.plant);
    const RbfBank basis =
        init_bank({feature_dim(cfg.feature), plant_cfg.n, cfg.k_neurons},
                  plant_cfg.q_min, plant_cfg.q_max, cfg.seed, cfg.weight_scale);
    const auto grid = scenario_fit_grid(plant_cfg, cfg);
    const OracleWeights oracle =
        fit_oracle_weights(plant_cfg, basis, cfg.feature, cfg.markers, grid);

    RbfBank oracle_bank = basis;
    set_weights_from_vector(oracle_bank, oracle.w_bar);
    fs::create_directories(out_dir);
    const std::string out_path = out_dir + "/" + cfg.name + "_oracle.json";
    save_bank(oracle_bank, out_path, /*oracle=*/true);
    std::printf("fit grid size : %zu\n", grid.size());
    std::printf("fit residual  : %.6g\n", oracle.fit_residual);
    std::printf("oracle bank   : %s\n", out_path.c_str());
    return 0;
}

int cmd_verify(const std::string& path, const std::string& out_dir, bool seed_set,
               std::uint64_t seed, bool no_plots) {
    const ScenarioConfig cfg = load_scenario(path, seed_set, seed);
    RunOptions options;
    options.record_weights = true;
    const RunResult result = run_scenario(cfg, options);
    print_run_summary(result);
    emit_outputs(result, out_dir, !no_plots);

    bool ok = result.summary.abort_reason.empty() && !result.summary.nan_detected;

    const PlantConfig plant_cfg = plant_preset(result.config.plant);
    const auto grid = scenario_fit_grid(plant_cfg, result.config);
    const OracleWeights oracle = fit_oracle_weights(
        plant_cfg, result.bank, result.config.feature, result.config.markers, grid);
    const LyapunovTrace trace = build_lyapunov_trace(result, oracle);
    const MonotonicityReport mono =
        monotonicity_check(trace, 1e-3 * trace.v.front());
    std::printf("oracle fit residual  : %.6g\n", oracle.fit_residual);
    std::printf("V(0)                 : %.6g\n", mono.v0);
    std::printf("V monotone fraction  : %.4f\n", mono.compliant_fraction);
    std::printf("min R(t)             : %.6g\n", mono.min_r);

    const bool noiseless = result.config.sensor.position_noise_std_mm == 0.0 &&
                           result.config.disturbances.empty();
    if (noiseless && result.summary.gain_report.all_ok &&
        result.summary.metrics.converged) {
        if (mono.compliant_fraction < 0.99) {
            std::printf("FAIL: V not monotone on >= 99%% of steps\n");
            ok = false;
        }
        if (mono.min_r < -1e-6 * mono.v0) {
            std::printf("FAIL: R(t) dipped below -1e-6 V(0)\n");
            ok = false;
        }
    }
    std::printf("verify: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven 3-D shape servoing workbench for simulated continuum robots"};
    app.require_subcommand(1);

    std::string scenario_path, dir_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool no_plots = false;
    int times = 4;

    auto add_common = [&](CLI::App* sub, bool with_seed = true) {
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_flag("--no-plots", no_plots, "Skip SVG plots");
        if (with_seed) {
            sub->add_option("--seed", seed, "Override the scenario seed");
        }
    };

    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_common(run);

    auto* repeat = app.add_subcommand("repeat", "Repeat with warm-started weights");
    repeat->add_option("scenario", scenario_path, "Scenario JSON")->required();
    repeat->add_option("--times", times, "Number of repeats")->check(CLI::Range(2, 100));
    add_common(repeat);

    auto* sweep = app.add_subcommand("sweep", "Run every scenario in a directory");
    sweep->add_option("dir", dir_path, "Directory of scenario JSONs")->required();
    add_common(sweep, /*with_seed=*/false);

    auto* oracle = app.add_subcommand("oracle", "Fit and persist oracle weights");
    oracle->add_option("scenario", scenario_path, "Scenario JSON")->required();
    oracle->add_option("--out", out_dir, "Output directory");
    oracle->add_option("--seed", seed, "Override the scenario seed");

    auto* verify = app.add_subcommand("verify",
                                      "Run plus Lyapunov diagnostics and gain report");
    verify->add_option("scenario", scenario_path, "Scenario JSON")->required();
    add_common(verify);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, out_dir, run->count("--seed") > 0, seed,
                           no_plots);
        }
        if (repeat->parsed()) {
            return cmd_repeat(scenario_path, times, out_dir,
                              repeat->count("--seed") > 0, seed, no_plots);
        }
        if (sweep->parsed()) {
            return cmd_sweep(dir_path, out_dir, no_plots);
        }
        if (oracle->parsed()) {
            return cmd_oracle(scenario_path, out_dir, oracle->count("--seed") > 0, seed);
        }
        if (verify->parsed()) {
            return cmd_verify(scenario_path, out_dir, verify->count("--seed") > 0, seed,
                              no_plots);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
