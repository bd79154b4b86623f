#include "shapeservo/learner.hpp"

#include <cmath>

namespace shapeservo {

void LearnerGains::validate() const {
    if (alpha_x <= 0 || beta_x <= 0 || k_e <= 0 || k_x <= 0 || k_r <= 0 ||
        gamma_w_inv <= 0 || eps_sat <= 0 || w_max <= 0) {
        throw ConfigError("learner gains must be strictly positive");
    }
    if (b_delta1 < 0 || b_delta2 < 0) {
        throw ConfigError("perturbation bounds must be >= 0");
    }
}

Eigen::VectorXd saturate(const Eigen::VectorXd& v, double eps) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v(i) > eps) {
            out(i) = 1.0;
        } else if (v(i) < -eps) {
            out(i) = -1.0;
        } else {
            out(i) = v(i) / eps;
        }
    }
    return out;
}

PredictorState PredictorState::init(const Eigen::VectorXd& x0) {
    PredictorState s;
    s.x_hat = Eigen::VectorXd::Zero(x0.size());
    s.x_tilde = x0;
    s.last_x = x0;
    s.t_s = 0.0;
    return s;
}

Eigen::VectorXd predict_flow(const RbfBank& bank, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& qdot,
                             const Eigen::VectorXd& x_tilde,
                             const LearnerGains& gains) {
    return estimate_jacobian(bank, q) * qdot + gains.alpha_x * x_tilde +
           gains.beta_x * saturate(x_tilde, gains.eps_sat);
}

PredictorStep advance_predictor(PredictorState& state, const RbfBank& bank,
                                const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                                const Eigen::VectorXd& x_meas, double dt,
                                const LearnerGains& gains) {
    if (dt <= 0.0) throw ConfigError("dt must be > 0");
    const Eigen::VectorXd flow = predict_flow(bank, q, qdot, state.x_tilde, gains);
    state.x_hat += dt * flow;
    state.x_tilde = x_meas - state.x_hat;
    PredictorStep step;
    step.x_tilde_dot = (x_meas - state.last_x) / dt - flow;
    step.r_x = step.x_tilde_dot + gains.alpha_x * state.x_tilde;
    state.last_x = x_meas;
    state.t_s += dt;
    return step;
}

void adapt_weights(RbfBank& bank, const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                   const Eigen::VectorXd& e, const Eigen::VectorXd& x_tilde,
                   const Eigen::VectorXd& r_x, const LearnerGains& gains, double dt) {
    if (dt <= 0.0) throw ConfigError("dt must be > 0");
    const auto [m, n, k] = bank.dims;
    if (e.size() != m || x_tilde.size() != m || r_x.size() != m) {
        throw DimensionMismatch("error vectors must have size m");
    }
    const Eigen::VectorXd v = gains.k_e * e + gains.k_x * x_tilde + gains.k_r * r_x;

    for (int i = 0; i < m; ++i) {
        auto& net = bank.nets[static_cast<std::size_t>(i)];
        const Eigen::VectorXd theta = rbf_activation(net, q);
        // Drive = M^T v restricted to net i's block: theta_j * qdot_a * v_i.
        for (int j = 0; j < k; ++j) {
            const double scale = dt * gains.gamma_w_inv * theta(j) * v(i);
            for (int a = 0; a < n; ++a) {
                const double update = scale * qdot(a);
                double& w = net.weights(a, j);
                const bool outward = (w >= gains.w_max && update > 0.0) ||
                                     (w <= -gains.w_max && update < 0.0);
                if (!outward) {
                    w = std::clamp(w + update, -gains.w_max, gains.w_max);
                }
            }
        }
    }
}

void WarmupSpec::validate() const {
    if (duration_s < 0.0) throw ConfigError("warmup duration must be >= 0");
    if (amplitude < 0.0) throw ConfigError("warmup amplitude must be >= 0");
    if (base_freq_hz <= 0.0) throw ConfigError("warmup base frequency must be > 0");
}

WarmupResult warmup(Plant& plant, RbfBank& bank, FeatureKind kind,
                    const SectionMarkers& markers, const LearnerGains& gains,
                    const WarmupSpec& spec, double loop_hz, std::uint64_t seed) {
    spec.validate();
    gains.validate();
    const double dt = 1.0 / loop_hz;
    const int n = plant.config().n;
    const Eigen::VectorXd q_start = plant.state().q;
    const Eigen::VectorXd e_zero = Eigen::VectorXd::Zero(bank.dims.m);

    Eigen::VectorXd x0 = extract_feature(kind, plant.measurement(), markers).values;
    WarmupResult result;
    result.predictor = PredictorState::init(x0);

    const int steps = static_cast<int>(std::round(spec.duration_s * loop_hz));
    if (steps == 0) return result;

    // Distinct per-actuator frequencies and seeded phases.
    Rng rng = Rng::derive(seed, 77);
    Eigen::VectorXd omega(n), phase(n);
    for (int a = 0; a < n; ++a) {
        omega(a) = 2.0 * M_PI * spec.base_freq_hz * (1.0 + 0.35 * a);
        phase(a) = rng.uniform(0.0, 2.0 * M_PI);
    }

    struct Sample {
        Eigen::VectorXd q, qdot, x_tilde_dot, weights;
    };
    std::vector<Sample> tail;
    const int tail_start = (3 * steps) / 4;
    tail.reserve(static_cast<std::size_t>(steps - tail_start) + 1);

    Eigen::VectorXd q_prev = plant.state().q;
    Eigen::VectorXd qdot_prev = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd x_meas = x0;

    for (int s = 0; s < steps; ++s) {
        const PredictorStep ps = advance_predictor(result.predictor, bank, q_prev,
                                                   qdot_prev, x_meas, dt, gains);
        adapt_weights(bank, q_prev, qdot_prev, e_zero, result.predictor.x_tilde,
                      ps.r_x, gains, dt);
        if (s >= tail_start) {
            tail.push_back({q_prev, qdot_prev, ps.x_tilde_dot, vectorize_weights(bank)});
        }

        const double t = plant.state().t_s;
        Eigen::VectorXd qdot(n);
        for (int a = 0; a < n; ++a) {
            qdot(a) = spec.amplitude * omega(a) * std::cos(omega(a) * t + phase(a));
        }
        // Keep the excitation within both the plant limit and the small region.
        const double cap = plant.config().qdot_max;
        qdot = qdot.cwiseMax(-cap).cwiseMin(cap);

        q_prev = plant.state().q;
        qdot_prev = qdot;
        x_meas = extract_feature(kind, plant.step(qdot, dt), markers).values;
    }

    // Ramp back to the starting configuration over one second.
    const int ramp_steps = static_cast<int>(loop_hz);
    for (int s = 0; s < ramp_steps; ++s) {
        const PredictorStep ps = advance_predictor(result.predictor, bank, q_prev,
                                                   qdot_prev, x_meas, dt, gains);
        adapt_weights(bank, q_prev, qdot_prev, e_zero, result.predictor.x_tilde,
                      ps.r_x, gains, dt);
        const double remaining = (ramp_steps - s) * dt;
        Eigen::VectorXd qdot = (q_start - plant.state().q) / remaining;
        const double cap = plant.config().qdot_max;
        qdot = qdot.cwiseMax(-cap).cwiseMin(cap);
        q_prev = plant.state().q;
        qdot_prev = qdot;
        x_meas = extract_feature(kind, plant.step(qdot, dt), markers).values;
    }

    // Perturbation-bound estimate from the steady tail: the observed residual
    // v = x_tilde_dot - M (W_final - W(t)) stands in for delta of the flow
    // parameterization; bounds are inflated 3x.
    if (!tail.empty()) {
        const Eigen::VectorXd w_final = vectorize_weights(bank);
        double max_v = 0.0, max_dv = 0.0;
        Eigen::VectorXd prev_v;
        for (const auto& s : tail) {
            const Eigen::MatrixXd M = build_parameterization(bank, s.q, s.qdot);
            const Eigen::VectorXd v = s.x_tilde_dot - M * (w_final - s.weights);
            max_v = std::max(max_v, v.norm());
            if (prev_v.size() > 0) {
                max_dv = std::max(max_dv, (v - prev_v).norm() / dt);
            }
            prev_v = v;
        }
        result.b_delta1 = 3.0 * max_v;
        result.b_delta2 = 3.0 * max_dv;
    }
    return result;
}

}  // namespace shapeservo
