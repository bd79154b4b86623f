#pragma once

#include <Eigen/Dense>

#include "shapeservo/learner.hpp"

namespace shapeservo {

struct ControllerGains {
    double k_c = 0.32;
    double k_s = 0.04;
    double eps_sat_e = 0.5;       // saturation width for the control error
    double qdot_max = 1.0;        // actuator units per second
    double sigma_min_ratio = 1e-4;  // pseudo-inverse truncation ratio
    double epsilon_e = 0.0;       // convergence threshold; 0 = auto from |e(0)|

    void validate() const;
};

struct SafetyReport {
    int jacobian_rank = 0;
    double min_singular_value = 0.0;  // smallest retained singular value
    bool velocity_clamped = false;
    bool nan_detected = false;
};

// Truncated SVD pseudo-inverse: singular values below ratio * sigma_max are
// dropped rather than damped; rank loss is surfaced in the report.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double sigma_min_ratio,
                               SafetyReport* report = nullptr);

// qdot = -k_c J^+ e - k_s J^+ sat(e), clamped componentwise to +-qdot_max.
Eigen::VectorXd control(const Eigen::MatrixXd& J_hat, const Eigen::VectorXd& e,
                        const ControllerGains& gains, SafetyReport* report = nullptr);

struct GainConditionReport {
    double ks_margin = 0.0;    // k_s - b_delta1
    double beta_margin = 0.0;  // beta_x - (b_delta1 + b_delta2 / alpha_x)
    bool ks_ok = false;
    bool beta_ok = false;
    bool all_ok = false;
};

GainConditionReport check_gain_conditions(const ControllerGains& ctrl,
                                          const LearnerGains& learner);

}  // namespace shapeservo
