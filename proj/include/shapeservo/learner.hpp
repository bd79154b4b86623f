#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "shapeservo/plant.hpp"
#include "shapeservo/rbf.hpp"

namespace shapeservo {

struct LearnerGains {
    double alpha_x = 0.3;
    double beta_x = 0.04;
    double k_e = 0.01;
    double k_x = 0.01;
    double k_r = 0.2;
    double gamma_w_inv = 0.1;  // scalar diagonal adaptation gain
    double eps_sat = 0.5;      // saturation boundary-layer width, feature units
    double w_max = 100.0;      // box projection bound on the NN weights
    // Assumed perturbation bounds; estimated during warmup or set in config.
    // Consumed only by the gain-condition checker.
    double b_delta1 = 0.0;
    double b_delta2 = 0.0;

    void validate() const;
};

// Componentwise boundary-layer saturation: v/eps inside |v| <= eps, sign(v)
// outside.
Eigen::VectorXd saturate(const Eigen::VectorXd& v, double eps);

// Shape-flow predictor state. x_hat integrates the predicted flow; x_tilde
// is the shape estimation error x - x_hat.
struct PredictorState {
    Eigen::VectorXd x_hat;
    Eigen::VectorXd x_tilde;
    Eigen::VectorXd last_x;
    double t_s = 0.0;

    // x_hat starts at zero, so x_tilde = x at t = 0.
    static PredictorState init(const Eigen::VectorXd& x0);
};

// Predicted shape flow J_hat(q) qdot + alpha_x x_tilde + beta_x sat(x_tilde).
Eigen::VectorXd predict_flow(const RbfBank& bank, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& qdot,
                             const Eigen::VectorXd& x_tilde,
                             const LearnerGains& gains);

struct PredictorStep {
    Eigen::VectorXd x_tilde_dot;  // measured flow minus predicted flow
    Eigen::VectorXd r_x;          // filtered error x_tilde_dot + alpha_x x_tilde
};

// Integrates the predictor one step against the new measurement. The flow is
// evaluated at the pre-update state; x_tilde_dot uses the backward difference
// of the measurements over the same interval.
PredictorStep advance_predictor(PredictorState& state, const RbfBank& bank,
                                const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                                const Eigen::VectorXd& x_meas, double dt,
                                const LearnerGains& gains);

// Composite adaptation: W += dt * gamma_w_inv * proj{M^T (k_e e + k_x x_tilde
// + k_r r_x)}. The box projection zeroes outward update components at
// +-w_max and clamps the result.
void adapt_weights(RbfBank& bank, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                   const Eigen::VectorXd& e, const Eigen::VectorXd& x_tilde,
                   const Eigen::VectorXd& r_x, const LearnerGains& gains, double dt);

struct WarmupSpec {
    double duration_s = 0.0;  // 0 disables warmup
    double amplitude = 0.1;   // actuator units around the initial q
    double base_freq_hz = 0.5;

    void validate() const;
};

struct WarmupResult {
    PredictorState predictor;
    double b_delta1 = 0.0;
    double b_delta2 = 0.0;
};

// Slow sinusoidal excitation around the current configuration with the
// controller disabled (e = 0 in the adaptation). Distinct frequencies per
// actuator keep the excitation rich; a short ramp returns q to its start.
// Also estimates the perturbation bounds b_delta from the steady tail of the
// run. Deterministic under a fixed seed.
WarmupResult warmup(Plant& plant, RbfBank& bank, FeatureKind kind,
                    const SectionMarkers& markers, const LearnerGains& gains,
                    const WarmupSpec& spec, double loop_hz, std::uint64_t seed);

}  // namespace shapeservo
