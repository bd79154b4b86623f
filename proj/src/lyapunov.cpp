#include "shapeservo/lyapunov.hpp"

#include <cmath>

namespace shapeservo {

std::vector<Eigen::VectorXd> make_fit_grid(const PlantConfig& cfg, FeatureKind kind,
                                           const SectionMarkers& markers,
                                           int points_per_dim, double margin,
                                           const Eigen::VectorXd* center,
                                           double radius) {
    const int n = cfg.n;
    Eigen::VectorXd lo = cfg.q_min + margin * (cfg.q_max - cfg.q_min);
    Eigen::VectorXd hi = cfg.q_max - margin * (cfg.q_max - cfg.q_min);
    if (center != nullptr && radius > 0.0) {
        lo = lo.cwiseMax(*center - Eigen::VectorXd::Constant(n, radius));
        hi = hi.cwiseMin(*center + Eigen::VectorXd::Constant(n, radius));
    }

    std::vector<Eigen::VectorXd> raw;
    if (n <= 3) {
        const int g = points_per_dim > 0 ? points_per_dim : 9;
        const long total = static_cast<long>(std::pow(g, n));
        for (long idx = 0; idx < total; ++idx) {
            Eigen::VectorXd q(n);
            long rem = idx;
            for (int d = 0; d < n; ++d) {
                const int i = static_cast<int>(rem % g);
                rem /= g;
                q(d) = lo(d) + (hi(d) - lo(d)) * i / (g - 1);
            }
            raw.push_back(q);
        }
    } else {
        // Scrambled Weyl lattice plus sweeps along each axis through the
        // midpoint, enough coverage without a 6-D tensor grid.
        const int count = points_per_dim > 0 ? points_per_dim * 100 : 500;
        static const double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
        const Eigen::VectorXd mid = 0.5 * (lo + hi);
        for (int j = 0; j < count; ++j) {
            Eigen::VectorXd q(n);
            for (int d = 0; d < n; ++d) {
                const double frac = std::fmod((j + 0.5) * std::sqrt(primes[d % 12]), 1.0);
                q(d) = lo(d) + (hi(d) - lo(d)) * frac;
            }
            raw.push_back(q);
        }
        const int sweep = 7;
        for (int d = 0; d < n; ++d) {
            for (int i = 0; i < sweep; ++i) {
                Eigen::VectorXd q = mid;
                q(d) = lo(d) + (hi(d) - lo(d)) * i / (sweep - 1);
                raw.push_back(q);
            }
        }
    }

    // Angle features blow up near straight poses (twist gradient ~ 1/radius,
    // bending gradient ~ 1/sin); such rows are unlearnable and would swamp
    // the least-squares target, so near-singular configurations are skipped
    // along with undefined ones.
    constexpr double kMaxFeatureGradient = 10.0;  // feature units per mm
    std::vector<Eigen::VectorXd> grid;
    grid.reserve(raw.size());
    for (const auto& q : raw) {
        try {
            const BackbonePoints pts = forward_shape(cfg, q);
            extract_feature(kind, pts, markers);
            const Eigen::MatrixXd Jx = feature_jacobian(kind, pts, markers);
            if (Jx.cwiseAbs().maxCoeff() > kMaxFeatureGradient) continue;
            grid.push_back(q);
        } catch (const Error&) {
            // Degenerate or near-singular feature: skip.
        }
    }
    return grid;
}

OracleWeights fit_oracle_weights(const RbfBank& basis,
                                 const std::vector<Eigen::VectorXd>& q_grid,
                                 const JacobianFn& jac_fn) {
    const auto [m, n, k] = basis.dims;
    if (q_grid.empty()) throw BadRange("empty fit grid");

    std::vector<Eigen::MatrixXd> jac;
    jac.reserve(q_grid.size());
    for (const auto& q : q_grid) {
        jac.push_back(jac_fn(q));
    }

    OracleWeights out;
    out.w_bar.resize(basis.dims.weight_count());

    for (int i = 0; i < m; ++i) {
        const auto& net = basis.nets[static_cast<std::size_t>(i)];
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k, n);
        std::vector<Eigen::VectorXd> thetas;
        thetas.reserve(q_grid.size());
        for (std::size_t g = 0; g < q_grid.size(); ++g) {
            const Eigen::VectorXd theta = rbf_activation(net, q_grid[g]);
            gram += theta * theta.transpose();
            rhs += theta * jac[g].row(i);
            thetas.push_back(theta);
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            gram, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = svd.singularValues();
        const double sv_max = sv(0);
        // Exact structural zeros are truncated (minimum-norm interpolation);
        // a nonzero but wildly spread spectrum is a genuine conditioning
        // failure.
        const double structural = sv_max * 1e-15;
        double sv_min_nonzero = sv_max;
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
        for (Eigen::Index s = 0; s < sv.size(); ++s) {
            if (sv(s) > structural) {
                inv(s) = 1.0 / sv(s);
                sv_min_nonzero = sv(s);
            }
        }
        if (sv_max / sv_min_nonzero > 1e12) {
            throw IllConditionedFit("regressor Gram matrix condition > 1e12");
        }
        const Eigen::MatrixXd gram_pinv =
            svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
        // W_i row a solves gram w = rhs col a; W_i is n x k.
        const Eigen::MatrixXd W = (gram_pinv * rhs).transpose();

        for (int j = 0; j < k; ++j) {
            out.w_bar.segment((i * k + j) * n, n) = W.col(j);
        }
        for (std::size_t g = 0; g < q_grid.size(); ++g) {
            const double err = (W * thetas[g] - jac[g].row(i).transpose()).norm();
            out.fit_residual = std::max(out.fit_residual, err);
        }
    }
    return out;
}

OracleWeights fit_oracle_weights(const PlantConfig& cfg, const RbfBank& basis,
                                 FeatureKind kind, const SectionMarkers& markers,
                                 const std::vector<Eigen::VectorXd>& q_grid) {
    return fit_oracle_weights(basis, q_grid, [&](const Eigen::VectorXd& q) {
        return plant_jacobian_fd(cfg, q, kind, markers);
    });
}

Eigen::VectorXd delta_proxy(const Eigen::VectorXd& x_meas_flow, const RbfBank& basis,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& qdot,
                            const OracleWeights& oracle) {
    if (x_meas_flow.size() != basis.dims.m) {
        throw DimensionMismatch("flow dimension does not match the bank");
    }
    if (oracle.w_bar.size() != basis.dims.weight_count()) {
        throw DimensionMismatch("oracle weights do not match the bank dims");
    }
    return x_meas_flow - build_parameterization(basis, q, qdot) * oracle.w_bar;
}

LyapunovTerms lyapunov_value(const Eigen::VectorXd& e, const Eigen::VectorXd& x_tilde,
                             const Eigen::VectorXd& w_hat, const OracleWeights& oracle,
                             const LearnerGains& gains, double r_t) {
    if (w_hat.size() != oracle.w_bar.size()) {
        throw DimensionMismatch("weight vector sizes differ");
    }
    LyapunovTerms out;
    out.term_e = 0.5 * gains.k_e * e.squaredNorm();
    out.term_xtilde = 0.5 * gains.k_x * x_tilde.squaredNorm();
    const Eigen::VectorXd w_tilde = oracle.w_bar - w_hat;
    out.term_w = 0.5 * (1.0 / gains.gamma_w_inv) * w_tilde.squaredNorm();
    out.term_r = gains.k_r * r_t;
    out.total = out.term_e + out.term_xtilde + out.term_w + out.term_r;
    return out;
}

LyapunovTrace build_lyapunov_trace(const RunResult& run, const OracleWeights& oracle) {
    const auto& records = run.records;
    if (records.empty()) throw EmptyTrace("run has no telemetry");
    if (run.weight_history.size() != records.size()) {
        throw DimensionMismatch("run must be recorded with record_weights");
    }
    const LearnerGains& gains = run.config.learner;
    const double dt = run.loop_dt_s;
    const std::size_t count = records.size();

    // delta proxy per step; step k uses the flow over (k-1, k].
    std::vector<Eigen::VectorXd> delta(count);
    for (std::size_t k = 1; k < count; ++k) {
        const Eigen::VectorXd flow = (records[k].x - records[k - 1].x) / dt;
        delta[k] =
            delta_proxy(flow, run.bank, records[k - 1].q, records[k - 1].qdot, oracle);
    }
    // delta(0) is taken from the first available sample.
    delta[0] = count > 1 ? delta[1]
                         : Eigen::VectorXd::Zero(records[0].x.size());

    // R(0) from its explicit t = 0 terms, H(0) = 0.
    const Eigen::VectorXd& xt0 = records[0].x_tilde;
    const double r0 =
        gains.beta_x * xt0.lpNorm<1>() - xt0.dot(delta[0]);

    LyapunovTrace tr;
    tr.t_s.reserve(count);
    double h = 0.0;
    double prev_hdot = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const auto& rec = records[k];
        const Eigen::VectorXd r_x = rec.x_tilde_dot + gains.alpha_x * rec.x_tilde;
        const double hdot =
            r_x.dot(delta[k] - gains.beta_x * saturate(rec.x_tilde, gains.eps_sat));
        if (k > 0) h += 0.5 * (prev_hdot + hdot) * dt;  // trapezoid
        prev_hdot = hdot;

        const double r_t = r0 - h;
        const LyapunovTerms terms = lyapunov_value(
            rec.e, rec.x_tilde, run.weight_history[k], oracle, gains, r_t);
        tr.t_s.push_back(rec.t_s);
        tr.v.push_back(terms.total);
        tr.term_e.push_back(terms.term_e);
        tr.term_xtilde.push_back(terms.term_xtilde);
        tr.term_w.push_back(terms.term_w);
        tr.term_r.push_back(terms.term_r);
        tr.r_aux.push_back(r_t);
        tr.h_aux.push_back(h);
        tr.delta_norm.push_back(delta[k].norm());
    }
    return tr;
}

MonotonicityReport monotonicity_check(const LyapunovTrace& trace, double tol) {
    if (trace.v.size() < 2) throw EmptyTrace("need at least two trace entries");
    MonotonicityReport rep;
    rep.v0 = trace.v.front();
    rep.min_r = trace.r_aux.front();
    rep.steps = static_cast<int>(trace.v.size()) - 1;
    int compliant = 0;
    rep.worst_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < trace.v.size(); ++k) {
        const double rise = trace.v[k] - trace.v[k - 1];
        if (rise <= tol) {
            ++compliant;
        }
        rep.worst_violation = std::max(rep.worst_violation, rise - tol);
        rep.min_r = std::min(rep.min_r, trace.r_aux[k]);
    }
    rep.compliant_fraction = static_cast<double>(compliant) / rep.steps;
    return rep;
}

}  // namespace shapeservo
