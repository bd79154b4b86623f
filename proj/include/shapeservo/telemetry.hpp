#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "shapeservo/controller.hpp"

namespace shapeservo {

// One row per control step.
struct TelemetryRecord {
    double t_s = 0.0;
    Eigen::VectorXd q;
    Eigen::VectorXd qdot;
    Eigen::VectorXd x;
    Eigen::VectorXd x_hat;
    Eigen::VectorXd e;
    Eigen::VectorXd x_tilde;
    Eigen::VectorXd x_tilde_dot;
    double norm_e = 0.0;
    double norm_xtilde = 0.0;
    double norm_xtildedot = 0.0;
    int jacobian_rank = 0;
    double min_singular_value = 0.0;
    bool velocity_clamped = false;
    bool disturbance_active = false;
};

struct ConvergenceMetrics {
    bool converged = false;
    bool never_converged = true;
    double time_to_threshold_s = 0.0;
    double final_norm_e = 0.0;           // mean over the last second
    double final_norm_xtilde = 0.0;
    double final_norm_xtildedot = 0.0;
    double peak_norm_xtildedot = 0.0;
};

// First time |e| <= epsilon held for hold_s (default one second), plus final
// norms averaged over the trailing second.
ConvergenceMetrics convergence_metrics(const std::vector<TelemetryRecord>& records,
                                       double epsilon_e, double hold_s = 1.0);

// Header: t,q0..,qdot0..,x0..,xhat0..,e0..,norm_e,norm_xtilde,norm_xtildedot,
// rank,min_sv,clamped,disturbance. Deterministic formatting (%.17g).
std::string telemetry_to_csv(const std::vector<TelemetryRecord>& records, int n, int m);
void write_telemetry_csv(const std::vector<TelemetryRecord>& records, int n, int m,
                         const std::string& path);

// Minimal line plot; the svg root carries data-xmin/xmax/ymin/ymax covering
// the series with a 5% margin.
std::string render_svg_plot(const std::string& title, const std::vector<double>& t,
                            const std::vector<double>& values);
void write_svg_plot(const std::string& title, const std::vector<double>& t,
                    const std::vector<double>& values, const std::string& path);

}  // namespace shapeservo
