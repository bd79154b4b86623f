#include <doctest.h>

#include "shapeservo/lyapunov.hpp"

using namespace shapeservo;

TEST_SUITE_BEGIN("lyapunov");

namespace {

// Sum-of-squares fit objective over a grid, for the nested-grid check.
double fit_objective(const RbfBank& basis, const OracleWeights& oracle,
                     const std::vector<Eigen::VectorXd>& grid, const JacobianFn& jac) {
    RbfBank bank = basis;
    set_weights_from_vector(bank, oracle.w_bar);
    double total = 0.0;
    for (const auto& q : grid) {
        total += (estimate_jacobian(bank, q) - jac(q)).squaredNorm();
    }
    return total;
}

std::vector<Eigen::VectorXd> grid_2d(double lo, double hi, int per_dim) {
    std::vector<Eigen::VectorXd> grid;
    for (int i = 0; i < per_dim; ++i) {
        for (int j = 0; j < per_dim; ++j) {
            grid.push_back(Eigen::Vector2d(lo + (hi - lo) * i / (per_dim - 1),
                                           lo + (hi - lo) * j / (per_dim - 1)));
        }
    }
    return grid;
}

}  // namespace

TEST_CASE("constant Jacobian is fit with near-zero residual") {
    Eigen::MatrixXd J_const(3, 2);
    J_const << 12.0, -3.0, 0.5, 7.0, -2.0, 4.0;
    const auto grid = grid_2d(-0.9, 0.9, 7);
    const JacobianFn jac = [&](const Eigen::VectorXd&) { return J_const; };

    // Nine wide Gaussians approximate a constant to about a percent; a
    // denser basis must do strictly better.
    const RbfBank basis9 = init_bank({3, 2, 9}, Eigen::Vector2d(-1, -1),
                                     Eigen::Vector2d(1, 1), 4, 0.0);
    const OracleWeights fit9 = fit_oracle_weights(basis9, grid, jac);
    CHECK(fit9.fit_residual < 0.02 * J_const.norm());

    const RbfBank basis25 = init_bank({3, 2, 25}, Eigen::Vector2d(-1, -1),
                                      Eigen::Vector2d(1, 1), 4, 0.0);
    const OracleWeights fit25 = fit_oracle_weights(basis25, grid, jac);
    CHECK(fit25.fit_residual < fit9.fit_residual);
}

TEST_CASE("single-point grid interpolates exactly") {
    Eigen::MatrixXd J_val(2, 2);
    J_val << 5.0, 1.0, -2.0, 3.0;
    const RbfBank basis = init_bank({2, 2, 9}, Eigen::Vector2d(-1, -1),
                                    Eigen::Vector2d(1, 1), 4, 0.0);
    const std::vector<Eigen::VectorXd> grid{Eigen::Vector2d(0.2, -0.3)};
    const OracleWeights oracle =
        fit_oracle_weights(basis, grid, [&](const Eigen::VectorXd&) { return J_val; });
    CHECK(oracle.fit_residual < 1e-9);
}

TEST_CASE("nested grids: the optimal sum-of-squares residual is monotone") {
    const PlantConfig cfg = plant_preset("racs2");
    const SectionMarkers mk = default_markers(cfg);
    const JacobianFn jac = [&](const Eigen::VectorXd& q) {
        return plant_jacobian_fd(cfg, q, FeatureKind::TwoPoints, mk);
    };
    const RbfBank basis = init_bank({6, 2, 9}, cfg.q_min, cfg.q_max, 4, 0.0);

    // The coarse grid is a subset of the dense one (odd indices align).
    const auto coarse = grid_2d(-0.9, 0.9, 5);
    const auto dense = grid_2d(-0.9, 0.9, 9);
    const OracleWeights fit_coarse = fit_oracle_weights(basis, coarse, jac);
    const OracleWeights fit_dense = fit_oracle_weights(basis, dense, jac);
    const double obj_coarse = fit_objective(basis, fit_coarse, coarse, jac);
    const double obj_dense = fit_objective(basis, fit_dense, dense, jac);
    // More constraints can only raise the attainable sum of squares.
    CHECK(obj_coarse <= obj_dense + 1e-9);
    // And on the coarse grid, the coarse fit is optimal.
    CHECK(obj_coarse <=
          fit_objective(basis, fit_dense, coarse, jac) + 1e-9);
}

TEST_CASE("fit grid respects the operating region and skips degenerate poses") {
    const PlantConfig pc = plant_preset("scm6");
    const SectionMarkers mk = default_markers(pc);

    Eigen::VectorXd bent(6);
    bent << 0.55, 0.2, -0.1, 0.5, -0.05, 0.15;
    const auto region =
        make_fit_grid(pc, FeatureKind::DepBta, mk, 0, 0.05, &bent, 0.25);
    CHECK(region.size() > 50);
    for (const auto& q : region) {
        CHECK((q - bent).lpNorm<Eigen::Infinity>() <= 0.25 + 1e-12);
    }

    // Around the straight pose every DepBta sample is degenerate or near
    // singular (undefined twist, bending at 180), so nothing survives.
    const Eigen::VectorXd straight = Eigen::VectorXd::Zero(6);
    const auto empty =
        make_fit_grid(pc, FeatureKind::DepBta, mk, 0, 0.05, &straight, 0.05);
    CHECK(empty.empty());
}

TEST_CASE("near-duplicate centers make the fit ill-conditioned") {
    // Two nearly coincident neurons give a Gram matrix with a huge but
    // nonzero spread, which must be reported rather than silently solved.
    RbfBank basis;
    basis.dims = {1, 1, 2};
    RbfNetwork net;
    net.centers = Eigen::MatrixXd(1, 2);
    net.centers << 0.0, 1e-6;
    net.widths = Eigen::Vector2d(1.0, 1.0);
    net.weights = Eigen::MatrixXd::Zero(1, 2);
    basis.nets.push_back(net);

    std::vector<Eigen::VectorXd> grid;
    for (int i = 0; i < 5; ++i) {
        grid.push_back(Eigen::VectorXd::Constant(1, -0.8 + 0.4 * i));
    }
    CHECK_THROWS_AS(fit_oracle_weights(
                        basis, grid,
                        [](const Eigen::VectorXd&) {
                            return Eigen::MatrixXd::Constant(1, 1, 3.0);
                        }),
                    IllConditionedFit);
}

TEST_CASE("delta proxy vanishes for a static noiseless plant") {
    const RbfBank basis = init_bank({6, 2, 9}, Eigen::Vector2d(-1, -1),
                                    Eigen::Vector2d(1, 1), 4, 0.0);
    OracleWeights oracle;
    oracle.w_bar = Eigen::VectorXd::Zero(basis.dims.weight_count());
    Rng rng(6);
    for (int i = 0; i < oracle.w_bar.size(); ++i) oracle.w_bar(i) = rng.gauss(0, 5);
    const Eigen::VectorXd delta =
        delta_proxy(Eigen::VectorXd::Zero(6), basis, Eigen::Vector2d(0.1, 0.2),
                    Eigen::Vector2d::Zero(), oracle);
    CHECK(delta.norm() == 0.0);
}

TEST_CASE("delta proxy is bounded by the fit residual on the grid") {
    const PlantConfig cfg = plant_preset("racs2");
    const SectionMarkers mk = default_markers(cfg);
    const RbfBank basis = init_bank({6, 2, 9}, cfg.q_min, cfg.q_max, 4, 0.0);
    const auto grid = grid_2d(-0.9, 0.9, 9);
    const OracleWeights oracle =
        fit_oracle_weights(cfg, basis, FeatureKind::TwoPoints, mk, grid);

    // Exact continuous-time flow at grid points: J_fd(q) qdot. With the
    // residual defined as the max row-wise error, the vector bound carries a
    // sqrt(m) factor.
    Rng rng(17);
    const double row_bound = std::sqrt(6.0) * oracle.fit_residual;
    for (const auto& q : grid) {
        Eigen::Vector2d qdot(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        const Eigen::VectorXd flow =
            plant_jacobian_fd(cfg, q, FeatureKind::TwoPoints, mk) * qdot;
        const Eigen::VectorXd delta = delta_proxy(flow, basis, q, qdot, oracle);
        CHECK(delta.norm() <= row_bound * qdot.norm() + 1e-9);
    }
}

TEST_CASE("lyapunov value is zero at the global minimum and quadratic in e") {
    LearnerGains g;
    g.k_e = 0.01;
    g.k_x = 0.01;
    g.gamma_w_inv = 0.1;
    g.k_r = 0.2;
    OracleWeights oracle;
    oracle.w_bar = Eigen::VectorXd::Constant(4, 2.0);

    const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
    const LyapunovTerms at_min =
        lyapunov_value(zero2, zero2, oracle.w_bar, oracle, g, 0.0);
    CHECK(at_min.total == 0.0);

    Eigen::VectorXd e(2);
    e << 1.0, -2.0;
    const LyapunovTerms v1 = lyapunov_value(e, zero2, oracle.w_bar, oracle, g, 0.0);
    const LyapunovTerms v2 =
        lyapunov_value(2.0 * e, zero2, oracle.w_bar, oracle, g, 0.0);
    CHECK(v2.term_e == doctest::Approx(4.0 * v1.term_e));
    CHECK(v2.term_xtilde == v1.term_xtilde);
    CHECK(v2.term_w == v1.term_w);
}

TEST_CASE("scalar lyapunov value matches the hand evaluation") {
    LearnerGains g;
    g.k_e = 0.01;
    g.k_x = 0.01;
    g.gamma_w_inv = 0.1;  // Gamma_W = 10
    g.k_r = 0.2;
    OracleWeights oracle;
    oracle.w_bar = Eigen::VectorXd::Constant(1, 0.1);
    const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::VectorXd xt = Eigen::VectorXd::Constant(1, 1.0);
    const Eigen::VectorXd w_hat = Eigen::VectorXd::Zero(1);  // w_tilde = 0.1
    const LyapunovTerms v = lyapunov_value(e, xt, w_hat, oracle, g, 0.0);
    CHECK(v.term_e == doctest::Approx(0.005));
    CHECK(v.term_xtilde == doctest::Approx(0.005));
    CHECK(v.term_w == doctest::Approx(0.05));
    CHECK(v.total == doctest::Approx(0.06));
}

TEST_CASE("monotonicity check on synthetic traces") {
    LyapunovTrace flat;
    for (int k = 0; k < 100; ++k) {
        flat.t_s.push_back(0.05 * k);
        flat.v.push_back(0.0);
        flat.r_aux.push_back(0.0);
    }
    const MonotonicityReport r = monotonicity_check(flat, 1e-6);
    CHECK(r.compliant_fraction == 1.0);
    CHECK(r.min_r == 0.0);

    LyapunovTrace empty;
    CHECK_THROWS_AS(monotonicity_check(empty, 1e-6), EmptyTrace);

    LyapunovTrace one_bump = flat;
    one_bump.v[50] = 1.0;  // one rise at step 50, one drop at 51
    const MonotonicityReport rb = monotonicity_check(one_bump, 1e-6);
    CHECK(rb.compliant_fraction == doctest::Approx(98.0 / 99.0));
    CHECK(rb.worst_violation == doctest::Approx(1.0 - 1e-6));
}

TEST_CASE("convergence metrics on constructed traces") {
    auto make_records = [](const std::vector<double>& norms) {
        std::vector<TelemetryRecord> recs;
        for (std::size_t k = 0; k < norms.size(); ++k) {
            TelemetryRecord r;
            r.t_s = 0.05 * static_cast<double>(k);
            r.norm_e = norms[k];
            recs.push_back(r);
        }
        return recs;
    };

    SUBCASE("always below threshold converges at t = 0") {
        const auto recs = make_records(std::vector<double>(60, 0.1));
        const ConvergenceMetrics cm = convergence_metrics(recs, 0.5);
        CHECK(cm.converged);
        CHECK(cm.time_to_threshold_s == 0.0);
    }
    SUBCASE("monotone decay crossing at step 100 converges at 5 s") {
        std::vector<double> norms;
        for (int k = 0; k < 200; ++k) {
            norms.push_back(k < 100 ? 10.0 - 0.09 * k : 0.4);
        }
        const ConvergenceMetrics cm = convergence_metrics(make_records(norms), 0.5);
        CHECK(cm.converged);
        CHECK(cm.time_to_threshold_s == doctest::Approx(5.0));
    }
    SUBCASE("a dip shorter than the hold does not count") {
        std::vector<double> norms(100, 10.0);
        for (int k = 40; k < 50; ++k) norms[static_cast<std::size_t>(k)] = 0.1;
        const ConvergenceMetrics cm = convergence_metrics(make_records(norms), 0.5);
        CHECK_FALSE(cm.converged);
        CHECK(cm.never_converged);
    }
}

TEST_CASE("impulse shows up as a delta-proxy spike") {
    ScenarioConfig cfg = scenario_defaults("racs2");
    cfg.seed = 9;
    cfg.seed_set = true;
    cfg.q_d = Eigen::Vector2d(0.4, -0.3);
    cfg.max_duration_s = 20.0;
    cfg.stop_on_converge = false;
    cfg.sensor.position_noise_std_mm = 0.0;
    cfg.sensor.rate_hz = 20.0;
    cfg.warmup = {60.0, 0.15, 0.5};
    DisturbanceEvent ev;
    ev.kind = DisturbanceKind::Impulse;
    ev.onset_s = 12.0;
    ev.offset_mm = Eigen::Vector3d(0, 0, 6);
    cfg.disturbances.push_back(ev);

    RunOptions opt;
    opt.record_weights = true;
    const RunResult run = run_scenario(cfg, opt);

    const PlantConfig pc = plant_preset("racs2");
    const auto grid = make_fit_grid(pc, cfg.feature, cfg.markers, 7);
    const OracleWeights oracle =
        fit_oracle_weights(pc, run.bank, cfg.feature, cfg.markers, grid);
    const LyapunovTrace tr = build_lyapunov_trace(run, oracle);

    double quiet = 0.0, spike = 0.0;
    for (std::size_t k = 0; k < tr.t_s.size(); ++k) {
        if (tr.t_s[k] > 9.0 && tr.t_s[k] < 11.5) quiet = std::max(quiet, tr.delta_norm[k]);
        if (tr.t_s[k] >= 12.0 && tr.t_s[k] < 12.5) spike = std::max(spike, tr.delta_norm[k]);
    }
    CHECK(spike > 10.0 * std::max(quiet, 1e-6));

    // Any Lyapunov-decrease violations must sit inside the impulse window.
    const double tol = 1e-3 * tr.v.front();
    for (std::size_t k = 1; k < tr.v.size(); ++k) {
        if (tr.v[k] - tr.v[k - 1] > tol) {
            CHECK(tr.t_s[k] >= ev.onset_s - 0.2);
            CHECK(tr.t_s[k] <= ev.onset_s + ev.decay_s + 1.0);
        }
    }
}

TEST_SUITE_END();
