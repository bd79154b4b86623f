#include "shapeservo/controller.hpp"

namespace shapeservo {

void ControllerGains::validate() const {
    if (k_c <= 0 || k_s <= 0 || eps_sat_e <= 0 || qdot_max <= 0 ||
        sigma_min_ratio <= 0) {
        throw ConfigError("controller gains must be strictly positive");
    }
    if (epsilon_e < 0) throw ConfigError("epsilon_e must be >= 0");
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double sigma_min_ratio,
                               SafetyReport* report) {
    if (!J.allFinite()) throw NonFinite("Jacobian contains NaN/Inf");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? sigma_min_ratio * sv(0) : 0.0;

    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    int rank = 0;
    double min_kept = 0.0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff && sv(i) > 0.0) {
            inv(i) = 1.0 / sv(i);
            min_kept = sv(i);  // singular values are sorted descending
            ++rank;
        }
    }
    if (report) {
        report->jacobian_rank = rank;
        report->min_singular_value = min_kept;
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd control(const Eigen::MatrixXd& J_hat, const Eigen::VectorXd& e,
                        const ControllerGains& gains, SafetyReport* report) {
    if (!e.allFinite()) throw NonFinite("control error contains NaN/Inf");
    SafetyReport local;
    const Eigen::MatrixXd pinv = pseudo_inverse(J_hat, gains.sigma_min_ratio, &local);
    Eigen::VectorXd qdot = -gains.k_c * (pinv * e) -
                           gains.k_s * (pinv * saturate(e, gains.eps_sat_e));
    local.nan_detected = !qdot.allFinite();
    for (Eigen::Index a = 0; a < qdot.size(); ++a) {
        if (std::abs(qdot(a)) > gains.qdot_max) {
            qdot(a) = qdot(a) > 0 ? gains.qdot_max : -gains.qdot_max;
            local.velocity_clamped = true;
        }
    }
    if (report) *report = local;
    return qdot;
}

GainConditionReport check_gain_conditions(const ControllerGains& ctrl,
                                          const LearnerGains& learner) {
    GainConditionReport r;
    r.ks_margin = ctrl.k_s - learner.b_delta1;
    r.beta_margin =
        learner.beta_x - (learner.b_delta1 + learner.b_delta2 / learner.alpha_x);
    r.ks_ok = r.ks_margin >= 0.0;
    r.beta_ok = r.beta_margin >= 0.0;
    r.all_ok = r.ks_ok && r.beta_ok;
    return r;
}

}  // namespace shapeservo
