#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "shapeservo/runner.hpp"

namespace shapeservo {

// Least-squares stand-in for the ideal weight vector: for the simulated plant
// the RBF basis can be fit against the finite-difference Jacobian, which
// makes the Lyapunov machinery evaluable. Simulation-only by construction.
struct OracleWeights {
    Eigen::VectorXd w_bar;      // kmn, same grouping as vectorize_weights
    double fit_residual = 0.0;  // max row-wise error norm over the fit grid
};

// Tensor grid for low-dimensional plants, scrambled lattice plus per-axis
// sweeps otherwise; configurations where the feature is undefined or
// near-singular are skipped. When `center` is given, the grid covers the
// box center +- radius (clipped to the actuator limits) instead of the
// whole actuation range, matching the scenario's operating region.
std::vector<Eigen::VectorXd> make_fit_grid(const PlantConfig& cfg, FeatureKind kind,
                                           const SectionMarkers& markers,
                                           int points_per_dim = 0,
                                           double margin = 0.05,
                                           const Eigen::VectorXd* center = nullptr,
                                           double radius = 0.0);

using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Per network i: min_W sum_grid |W theta_i(q) - jac_row_i(q)^T|^2, solved
// through a truncated SVD of the Gram matrix. Structural rank deficiency
// (e.g. a single-point grid) resolves to the minimum-norm interpolant;
// near-dependent but nonzero spectra raise IllConditionedFit.
OracleWeights fit_oracle_weights(const RbfBank& basis,
                                 const std::vector<Eigen::VectorXd>& q_grid,
                                 const JacobianFn& jac);

// Convenience overload against the plant's finite-difference Jacobian.
OracleWeights fit_oracle_weights(const PlantConfig& cfg, const RbfBank& basis,
                                 FeatureKind kind, const SectionMarkers& markers,
                                 const std::vector<Eigen::VectorXd>& q_grid);

// delta = measured flow - M(q, qdot) W_bar.
Eigen::VectorXd delta_proxy(const Eigen::VectorXd& x_meas_flow, const RbfBank& basis,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                            const OracleWeights& oracle);

struct LyapunovTerms {
    double total = 0.0;
    double term_e = 0.0;       // 1/2 k_e e'e
    double term_xtilde = 0.0;  // 1/2 k_x x_tilde'x_tilde
    double term_w = 0.0;       // 1/2 W_tilde' Gamma_W W_tilde
    double term_r = 0.0;       // k_r R
};

LyapunovTerms lyapunov_value(const Eigen::VectorXd& e, const Eigen::VectorXd& x_tilde,
                             const Eigen::VectorXd& w_hat, const OracleWeights& oracle,
                             const LearnerGains& gains, double r_t);

struct LyapunovTrace {
    std::vector<double> t_s;
    std::vector<double> v;
    std::vector<double> term_e, term_xtilde, term_w, term_r;
    std::vector<double> r_aux;       // R(t)
    std::vector<double> h_aux;       // H(t)
    std::vector<double> delta_norm;  // |delta proxy|
};

// Reconstructs V(t), R(t), H(t) and the delta proxy from a finished run.
// Requires the run to have been recorded with record_weights = true.
LyapunovTrace build_lyapunov_trace(const RunResult& run, const OracleWeights& oracle);

struct MonotonicityReport {
    double compliant_fraction = 0.0;  // steps with V(t+dt) <= V(t) + tol
    double worst_violation = 0.0;     // max over steps of V(t+dt) - V(t) - tol
    double min_r = 0.0;               // min of R(t)
    double v0 = 0.0;
    int steps = 0;
};

MonotonicityReport monotonicity_check(const LyapunovTrace& trace, double tol);

}  // namespace shapeservo
