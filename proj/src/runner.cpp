#include "shapeservo/runner.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace shapeservo {

namespace {

void trace(const RunOptions& options, const char* phase) {
    if (options.phase_trace) options.phase_trace->emplace_back(phase);
}

// Algorithm steps 4-14: predict, read q, adapt, build the Jacobian, control,
// command, measure, error. Consumes the plant and bank in place so repeats
// can chain phases.
RunResult run_servo(Plant& plant, RbfBank& bank, const ScenarioConfig& cfg,
                    const Eigen::VectorXd& x_d, const RunOptions& options) {
    const double dt = 1.0 / cfg.loop_hz;
    const int n = plant.config().n;
    const int m = feature_dim(cfg.feature);

    RunResult result;
    result.config = cfg;
    result.x_d = x_d;
    result.loop_dt_s = dt;

    const double t_start = plant.state().t_s;
    plant.set_event_epoch(t_start);

    Eigen::VectorXd x_meas =
        extract_feature(cfg.feature, plant.measurement(), cfg.markers).values;
    bool meas_disturbed = plant.disturbance_active();
    result.x0 = x_meas;

    // Estimated shape initialized to zero, so x_tilde = x at t = 0.
    PredictorState predictor = PredictorState::init(x_meas);

    Eigen::VectorXd e = x_meas - x_d;
    double epsilon_e = cfg.controller.epsilon_e;
    if (epsilon_e <= 0.0) {
        epsilon_e = std::max(0.5, 0.01 * e.norm());
    }
    result.config.controller.epsilon_e = epsilon_e;
    result.summary.epsilon_e = epsilon_e;
    result.summary.initial_norm_e = e.norm();
    result.summary.initial_norm_xtilde = predictor.x_tilde.norm();
    result.summary.min_rank = std::min(m, n);
    result.summary.gain_report =
        check_gain_conditions(cfg.controller, cfg.learner);

    Eigen::VectorXd q_prev = plant.state().q;
    Eigen::VectorXd qdot_prev = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd x_tilde_dot = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd r_x = cfg.learner.alpha_x * predictor.x_tilde;

    const long max_steps = static_cast<long>(std::ceil(cfg.max_duration_s * cfg.loop_hz));
    double hold_s = 0.0;
    int clamp_streak = 0;

    try {
        for (long k = 0; k < max_steps; ++k) {
            const double t_k = plant.state().t_s - t_start;
            if (k > 0) {
                trace(options, "predict");
                const PredictorStep ps = advance_predictor(
                    predictor, bank, q_prev, qdot_prev, x_meas, dt, cfg.learner);
                x_tilde_dot = ps.x_tilde_dot;
                r_x = ps.r_x;
            } else {
                trace(options, "predict");
            }

            trace(options, "read_q");
            const Eigen::VectorXd q_cur = plant.state().q;

            trace(options, "adapt");
            adapt_weights(bank, q_prev, qdot_prev, e, predictor.x_tilde, r_x,
                          cfg.learner, dt);
            if (options.record_weights) {
                result.weight_history.push_back(vectorize_weights(bank));
            }

            trace(options, "jacobian");
            const Eigen::MatrixXd J_hat = estimate_jacobian(bank, q_cur);

            trace(options, "control");
            SafetyReport safety;
            const Eigen::VectorXd qdot = control(J_hat, e, cfg.controller, &safety);

            TelemetryRecord row;
            row.t_s = t_k;
            row.q = q_cur;
            row.qdot = qdot;
            row.x = x_meas;
            row.x_hat = predictor.x_hat;
            row.e = e;
            row.x_tilde = predictor.x_tilde;
            row.x_tilde_dot = x_tilde_dot;
            row.norm_e = e.norm();
            row.norm_xtilde = predictor.x_tilde.norm();
            row.norm_xtildedot = x_tilde_dot.norm();
            row.jacobian_rank = safety.jacobian_rank;
            row.min_singular_value = safety.min_singular_value;
            row.velocity_clamped = safety.velocity_clamped;
            row.disturbance_active = meas_disturbed;
            result.records.push_back(std::move(row));

            result.summary.min_rank =
                std::min(result.summary.min_rank, safety.jacobian_rank);
            if (safety.velocity_clamped) {
                clamp_streak += 1;
                result.summary.max_consecutive_clamped =
                    std::max(result.summary.max_consecutive_clamped, clamp_streak);
            } else {
                clamp_streak = 0;
            }
            if (safety.nan_detected) result.summary.nan_detected = true;

            trace(options, "command");
            const BackbonePoints& meas = plant.step(qdot, dt);
            meas_disturbed = plant.disturbance_active();

            trace(options, "measure");
            const Eigen::VectorXd x_new =
                extract_feature(cfg.feature, meas, cfg.markers).values;

            trace(options, "error");
            const Eigen::VectorXd e_new = x_new - x_d;
            if (!x_new.allFinite() || !e_new.allFinite()) {
                result.summary.nan_detected = true;
                throw NonFinite("measured feature contains NaN/Inf");
            }

            q_prev = q_cur;
            qdot_prev = qdot;
            x_meas = x_new;
            e = e_new;

            if (e.norm() <= epsilon_e) {
                hold_s += dt;
            } else {
                hold_s = 0.0;
            }
            // Run past the hold window so the telemetry itself shows a full
            // second below threshold (the loop logs e one step behind).
            if (cfg.stop_on_converge && hold_s >= 1.0 + 2.0 * dt - 1e-9) break;
        }
    } catch (const Error& err) {
        result.summary.abort_reason = err.what();
    }

    result.summary.metrics =
        convergence_metrics(result.records, epsilon_e, 1.0);
    result.bank = bank;
    return result;
}

struct Setup {
    ScenarioConfig cfg;  // resolved
    PlantConfig plant_cfg;
    Eigen::VectorXd x_d;
};

ScenarioConfig resolve_config(const ScenarioConfig& raw) {
    ScenarioConfig cfg = raw;
    const ScenarioConfig defaults = scenario_defaults(cfg.plant);
    if (cfg.q0.size() == 0) cfg.q0 = defaults.q0;
    if (cfg.k_neurons == 0) cfg.k_neurons = defaults.k_neurons;
    cfg.validate();
    return cfg;
}

Eigen::VectorXd resolve_desired(const ScenarioConfig& cfg, const PlantConfig& plant_cfg) {
    if (cfg.x_d.size() > 0) return cfg.x_d;
    try {
        const ShapeSample posed = forward_shape_sample(plant_cfg, cfg.q_d, false);
        return extract_feature(cfg.feature, posed.points, cfg.markers).values;
    } catch (const Error& err) {
        throw ConfigError(std::string("cannot pose desired shape: ") + err.what());
    }
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& raw_cfg, const RunOptions& options) {
    ScenarioConfig cfg = resolve_config(raw_cfg);
    const PlantConfig plant_cfg = plant_preset(cfg.plant);
    detail::validate_markers(cfg.markers, plant_cfg.l);

    Plant plant(plant_cfg, cfg.sensor, cfg.disturbances, cfg.seed, cfg.q0);

    RbfBank bank;
    if (!cfg.warm_start_bank.empty()) {
        bank = load_bank(cfg.warm_start_bank);
        const BankDims want{feature_dim(cfg.feature), plant_cfg.n, cfg.k_neurons};
        if (bank.dims.m != want.m || bank.dims.n != want.n || bank.dims.k != want.k) {
            throw ConfigError("warm-start bank dims do not match the scenario");
        }
    } else {
        bank = init_bank({feature_dim(cfg.feature), plant_cfg.n, cfg.k_neurons},
                         plant_cfg.q_min, plant_cfg.q_max, cfg.seed,
                         cfg.weight_scale);
    }
    RbfBank fresh = bank;

    if (cfg.warmup.duration_s > 0.0) {
        const WarmupResult wr = warmup(plant, bank, cfg.feature, cfg.markers,
                                       cfg.learner, cfg.warmup, cfg.loop_hz, cfg.seed);
        if (cfg.learner.b_delta1 <= 0.0) cfg.learner.b_delta1 = wr.b_delta1;
        if (cfg.learner.b_delta2 <= 0.0) cfg.learner.b_delta2 = wr.b_delta2;
    }

    const Eigen::VectorXd x_d = resolve_desired(cfg, plant_cfg);
    RunResult result = run_servo(plant, bank, cfg, x_d, options);
    result.fresh_bank = std::move(fresh);
    return result;
}

RepeatResult run_repeat(const ScenarioConfig& raw_cfg, int repeats,
                        const std::string& bank_path, const RunOptions& options) {
    if (repeats < 2) throw ConfigError("run_repeat needs repeats >= 2");
    ScenarioConfig cfg = resolve_config(raw_cfg);
    const PlantConfig plant_cfg = plant_preset(cfg.plant);
    detail::validate_markers(cfg.markers, plant_cfg.l);

    Plant plant(plant_cfg, cfg.sensor, cfg.disturbances, cfg.seed, cfg.q0);
    RbfBank bank;
    if (!cfg.warm_start_bank.empty()) {
        bank = load_bank(cfg.warm_start_bank);
    } else {
        bank = init_bank({feature_dim(cfg.feature), plant_cfg.n, cfg.k_neurons},
                         plant_cfg.q_min, plant_cfg.q_max, cfg.seed, cfg.weight_scale);
    }
    RbfBank fresh = bank;

    if (cfg.warmup.duration_s > 0.0) {
        const WarmupResult wr = warmup(plant, bank, cfg.feature, cfg.markers,
                                       cfg.learner, cfg.warmup, cfg.loop_hz, cfg.seed);
        if (cfg.learner.b_delta1 <= 0.0) cfg.learner.b_delta1 = wr.b_delta1;
        if (cfg.learner.b_delta2 <= 0.0) cfg.learner.b_delta2 = wr.b_delta2;
    }

    const Eigen::VectorXd x_d = resolve_desired(cfg, plant_cfg);
    const Eigen::VectorXd x_home =
        extract_feature(cfg.feature, forward_shape(plant_cfg, cfg.q0), cfg.markers)
            .values;

    RepeatResult out;
    out.bank_path = bank_path;

    ScenarioConfig servo_cfg = cfg;
    servo_cfg.stop_on_converge = true;

    for (int r = 0; r < repeats; ++r) {
        RunResult run = run_servo(plant, bank, servo_cfg, x_d, options);
        if (r == 0) {
            // Pin the threshold from run 1 so repeat timings are comparable.
            servo_cfg.controller.epsilon_e = run.summary.epsilon_e;
            run.fresh_bank = fresh;
        }
        out.convergence_times_s.push_back(run.summary.metrics.converged
                                              ? run.summary.metrics.time_to_threshold_s
                                              : -1.0);
        out.runs.push_back(std::move(run));

        save_bank(bank, bank_path);
        bank = load_bank(bank_path);

        if (r + 1 < repeats) {
            // Servo back to the initial shape with adaptation active.
            ScenarioConfig back_cfg = servo_cfg;
            back_cfg.controller.epsilon_e = 0.0;  // re-derive from the return error
            run_servo(plant, bank, back_cfg, x_home, RunOptions{});
        }
    }

    const double t1 = out.convergence_times_s.front();
    double warm_sum = 0.0;
    int warm_count = 0;
    for (std::size_t i = 1; i < out.convergence_times_s.size(); ++i) {
        if (out.convergence_times_s[i] >= 0.0) {
            warm_sum += out.convergence_times_s[i];
            ++warm_count;
        }
    }
    if (t1 > 0.0 && warm_count > 0) {
        out.warm_start_speedup = 1.0 - (warm_sum / warm_count) / t1;
    }
    return out;
}

EmitPaths emit_outputs(const RunResult& result, const std::string& dir,
                       bool with_plots) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);

    const int n = static_cast<int>(result.config.q0.size());
    const int m = feature_dim(result.config.feature);
    const std::string base = dir + "/" + result.config.name;

    EmitPaths paths;
    paths.csv = base + "_telemetry.csv";
    write_telemetry_csv(result.records, n, m, paths.csv);

    paths.summary_json = base + "_summary.json";
    {
        std::ofstream f(paths.summary_json, std::ios::binary);
        if (!f) throw IoError("cannot open for write: " + paths.summary_json);
        f << summary_to_json_text(result);
    }

    if (with_plots) {
        std::vector<double> t;
        std::vector<double> ne, nxt, nxtd;
        t.reserve(result.records.size());
        for (const auto& r : result.records) {
            t.push_back(r.t_s);
            ne.push_back(r.norm_e);
            nxt.push_back(r.norm_xtilde);
            nxtd.push_back(r.norm_xtildedot);
        }
        const struct {
            const char* suffix;
            const char* title;
            const std::vector<double>* series;
        } plots[] = {{"_norm_e.svg", "|e| vs time", &ne},
                     {"_norm_xtilde.svg", "|x_tilde| vs time", &nxt},
                     {"_norm_xtildedot.svg", "|x_tilde_dot| vs time", &nxtd}};
        for (const auto& p : plots) {
            const std::string path = base + p.suffix;
            write_svg_plot(p.title, t, *p.series, path);
            paths.plots.push_back(path);
        }
    }
    return paths;
}

std::string summary_to_json_text(const RunResult& result) {
    nlohmann::json doc;
    doc["scenario"] = nlohmann::json::parse(scenario_to_json_text(result.config));
    doc["seed"] = result.config.seed;
    doc["steps"] = result.records.size();
    doc["epsilon_e"] = result.summary.epsilon_e;
    doc["converged"] = result.summary.metrics.converged;
    doc["never_converged"] = result.summary.metrics.never_converged;
    doc["time_to_threshold_s"] = result.summary.metrics.time_to_threshold_s;
    doc["initial_norm_e"] = result.summary.initial_norm_e;
    doc["initial_norm_xtilde"] = result.summary.initial_norm_xtilde;
    doc["final_norm_e"] = result.summary.metrics.final_norm_e;
    doc["final_norm_xtilde"] = result.summary.metrics.final_norm_xtilde;
    doc["final_norm_xtildedot"] = result.summary.metrics.final_norm_xtildedot;
    doc["peak_norm_xtildedot"] = result.summary.metrics.peak_norm_xtildedot;
    doc["max_consecutive_clamped"] = result.summary.max_consecutive_clamped;
    doc["min_rank"] = result.summary.min_rank;
    doc["nan_detected"] = result.summary.nan_detected;
    doc["abort_reason"] = result.summary.abort_reason;
    doc["gain_conditions"] = {{"ks_margin", result.summary.gain_report.ks_margin},
                              {"beta_margin", result.summary.gain_report.beta_margin},
                              {"ks_ok", result.summary.gain_report.ks_ok},
                              {"beta_ok", result.summary.gain_report.beta_ok},
                              {"all_ok", result.summary.gain_report.all_ok},
                              {"b_delta1", result.config.learner.b_delta1},
                              {"b_delta2", result.config.learner.b_delta2}};
    return doc.dump(2) + "\n";
}

}  // namespace shapeservo
