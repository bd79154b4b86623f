#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shapeservo/scenario.hpp"
#include "shapeservo/telemetry.hpp"

namespace shapeservo {

struct RunOptions {
    // Keep a per-step snapshot of the vectorized weights (for the Lyapunov
    // diagnostics).
    bool record_weights = false;
    // When set, the loop appends each phase name per step; used by the
    // loop-order test.
    std::vector<std::string>* phase_trace = nullptr;
};

struct RunSummary {
    ConvergenceMetrics metrics;
    double epsilon_e = 0.0;
    double initial_norm_e = 0.0;
    double initial_norm_xtilde = 0.0;
    int max_consecutive_clamped = 0;
    int min_rank = 0;
    bool nan_detected = false;
    std::string abort_reason;  // empty on a clean run
    GainConditionReport gain_report;
};

struct RunResult {
    ScenarioConfig config;           // with resolved gains/bounds
    std::vector<TelemetryRecord> records;
    RunSummary summary;
    RbfBank bank;                    // final weights
    RbfBank fresh_bank;              // as initialized, before warmup/servo
    Eigen::VectorXd x_d;
    Eigen::VectorXd x0;
    std::vector<Eigen::VectorXd> weight_history;  // per record, if requested
    double loop_dt_s = 0.0;
};

// Executes the servoing loop at the configured rate until the error norm has
// held below epsilon_e for one second (when stop_on_converge) or the maximum
// duration is reached. Plant faults and non-finite values abort the run and
// preserve the partial telemetry in the result.
RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

struct RepeatResult {
    std::vector<RunResult> runs;
    std::vector<double> convergence_times_s;  // per run; <0 if never converged
    double warm_start_speedup = 0.0;  // 1 - mean(t_2..N)/t_1
    std::string bank_path;
};

// Runs the scenario `repeats` times, persisting and reloading the bank
// between runs and servoing back to the initial shape (adaptation active)
// before each repeat.
RepeatResult run_repeat(const ScenarioConfig& cfg, int repeats,
                        const std::string& bank_path, const RunOptions& options = {});

struct EmitPaths {
    std::string csv;
    std::string summary_json;
    std::vector<std::string> plots;
};

// Writes <name>_telemetry.csv, <name>_summary.json and (optionally) SVG
// plots of the error norms into `dir`.
EmitPaths emit_outputs(const RunResult& result, const std::string& dir,
                       bool with_plots = true);

std::string summary_to_json_text(const RunResult& result);

}  // namespace shapeservo
