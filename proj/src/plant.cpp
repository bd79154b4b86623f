#include "shapeservo/plant.hpp"

#include <cmath>

namespace shapeservo {

namespace {

// Minimum fraction of the rest length an extensible section may compress to.
constexpr double kMinLengthFraction = 0.2;
constexpr double kMaxLengthFraction = 3.0;

double sinc(double a) {
    if (std::abs(a) < 1e-3) {
        const double a2 = a * a;
        return 1.0 - a2 / 6.0 * (1.0 - a2 / 20.0);
    }
    return std::sin(a) / a;
}

// (1 - cos a) / a^2; the series branch avoids the 1 - cos cancellation that
// otherwise corrupts finite-difference Jacobians near the straight pose.
double versine_over_sq(double a) {
    if (std::abs(a) < 1e-3) {
        const double a2 = a * a;
        return 0.5 - a2 / 24.0 * (1.0 - a2 / 30.0);
    }
    return (1.0 - std::cos(a)) / (a * a);
}

}  // namespace

void PlantConfig::validate() const {
    if (n < 1) throw ConfigError("plant needs at least one actuator");
    if (sections.empty()) throw ConfigError("plant needs at least one section");
    if (l < 5) throw ConfigError("backbone sample count must be >= 5");
    const int s = static_cast<int>(sections.size());
    if ((l - 1) % s != 0) {
        throw ConfigError("(l - 1) must be divisible by the section count");
    }
    for (const auto& sec : sections) {
        if (sec.rest_length_mm <= 0.0) throw ConfigError("section length must be > 0");
    }
    if (cable_gain.rows() != 3 * s || cable_gain.cols() != n) {
        throw ConfigError("cable_gain must be (3 x sections) x n");
    }
    if (q_min.size() != n || q_max.size() != n) {
        throw ConfigError("actuator limits must have size n");
    }
    if (((q_max - q_min).array() <= 0.0).any()) {
        throw ConfigError("q_max must exceed q_min");
    }
    if (qdot_max <= 0.0) throw ConfigError("qdot_max must be > 0");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cable_gain);
    if (svd.rank() < n) {
        throw ConfigError("cable_gain must have full column rank");
    }
}

double PlantConfig::total_rest_length() const {
    double total = 0.0;
    for (const auto& s : sections) total += s.rest_length_mm;
    return total;
}

PlantConfig plant_preset(const std::string& name) {
    PlantConfig cfg;
    cfg.name = name;
    if (name == "racs2") {
        cfg.n = 2;
        cfg.sections = {{120.0, false, 2}};
        cfg.l = 9;
        cfg.cable_gain = Eigen::MatrixXd::Zero(3, 2);
        cfg.cable_gain(0, 0) = 0.9;  // bend_y per q1
        cfg.cable_gain(1, 1) = 0.9;  // bend_z per q2
    } else if (name == "scm6") {
        cfg.n = 6;
        cfg.sections = {{90.0, true, 3}, {90.0, true, 3}};
        cfg.l = 11;
        cfg.cable_gain = Eigen::MatrixXd::Zero(6, 6);
        // Three cables at 120 degrees per section; pulling all three together
        // extends the section.
        Eigen::MatrixXd block(3, 3);
        const double bend = 1.0;
        const double ext = 0.25;
        const double s3 = std::sqrt(3.0) / 2.0;
        block << bend * 1.0, bend * -0.5, bend * -0.5,
                 0.0,        bend * s3,   bend * -s3,
                 ext / 3.0,  ext / 3.0,   ext / 3.0;
        cfg.cable_gain.block<3, 3>(0, 0) = block;
        cfg.cable_gain.block<3, 3>(3, 3) = block;
    } else {
        throw ConfigError("unknown plant preset: " + name);
    }
    cfg.q_min = Eigen::VectorXd::Constant(cfg.n, -1.0);
    cfg.q_max = Eigen::VectorXd::Constant(cfg.n, 1.0);
    cfg.qdot_max = 1.0;
    cfg.validate();
    return cfg;
}

SectionMarkers default_markers(const PlantConfig& cfg) {
    SectionMarkers mk;
    mk.distal = 0;
    mk.base = cfg.l - 1;
    mk.middle = (cfg.l - 1) / 2;
    return mk;
}

DisturbanceKind disturbance_kind_from_name(const std::string& name) {
    if (name == "impulse") return DisturbanceKind::Impulse;
    if (name == "tip_payload") return DisturbanceKind::TipPayload;
    if (name == "contact_spring") return DisturbanceKind::ContactSpring;
    if (name == "actuation_noise") return DisturbanceKind::ActuationNoise;
    throw ConfigError("unknown disturbance kind: " + name);
}

const char* disturbance_kind_name(DisturbanceKind kind) {
    switch (kind) {
        case DisturbanceKind::Impulse: return "impulse";
        case DisturbanceKind::TipPayload: return "tip_payload";
        case DisturbanceKind::ContactSpring: return "contact_spring";
        case DisturbanceKind::ActuationNoise: return "actuation_noise";
    }
    return "?";
}

void DisturbanceEvent::validate() const {
    if (onset_s < 0.0) throw ConfigError("disturbance onset must be >= 0");
    if (stiffness < 0.0) throw ConfigError("contact stiffness must be >= 0");
    if (noise_std < 0.0) throw ConfigError("actuation noise std must be >= 0");
    if (decay_s <= 0.0) throw ConfigError("impulse decay window must be > 0");
    if (kind == DisturbanceKind::ContactSpring && plane_normal.norm() < 1e-12) {
        throw ConfigError("contact plane normal must be nonzero");
    }
}

ShapeSample forward_shape_sample(const PlantConfig& cfg, const Eigen::VectorXd& q,
                                 bool enforce_limits) {
    if (q.size() != cfg.n) throw DimensionMismatch("q has wrong size");
    const double tol = 1e-9;
    if (enforce_limits && (((q - cfg.q_min).array() < -tol).any() ||
                           ((cfg.q_max - q).array() < -tol).any())) {
        throw OutOfRange("actuator position outside limits");
    }

    const int num_sections = static_cast<int>(cfg.sections.size());
    const int per_section = (cfg.l - 1) / num_sections;
    const Eigen::VectorXd params = cfg.cable_gain * q;

    // Generated base -> tip, reversed at the end (index 0 = distal endpoint).
    std::vector<Eigen::Vector3d> pts;
    std::vector<double> arcs;
    pts.reserve(static_cast<std::size_t>(cfg.l));
    arcs.reserve(static_cast<std::size_t>(cfg.l));
    pts.emplace_back(Eigen::Vector3d::Zero());
    arcs.push_back(0.0);

    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    double arc = 0.0;

    for (int s = 0; s < num_sections; ++s) {
        const double wy = params(3 * s);
        const double wz = params(3 * s + 1);
        const double ext = cfg.sections[static_cast<std::size_t>(s)].extensible
                               ? params(3 * s + 2)
                               : 0.0;
        const double rest = cfg.sections[static_cast<std::size_t>(s)].rest_length_mm;
        const double len =
            rest * std::clamp(1.0 + ext, kMinLengthFraction, kMaxLengthFraction);
        const double theta = std::hypot(wy, wz);

        for (int j = 1; j <= per_section; ++j) {
            const double f = static_cast<double>(j) / per_section;
            const double a = theta * f;
            Eigen::Vector3d local;
            local.x() = len * f * sinc(a);
            // Lateral offset len*f*(1-cos a)/a resolved along (wy, wz)/theta,
            // written via (1-cos a)/a^2 so the straight limit is exact.
            const double lat_coeff = len * f * f * versine_over_sq(a);
            local.y() = lat_coeff * wy;
            local.z() = lat_coeff * wz;
            pts.emplace_back(p + R * local);
            arcs.push_back(arc + len * f);
        }

        // Advance the frame to the section end.
        Eigen::Vector3d end_local;
        end_local.x() = len * sinc(theta);
        const double end_lat = len * versine_over_sq(theta);
        end_local.y() = end_lat * wy;
        end_local.z() = end_lat * wz;
        p += R * end_local;
        if (theta > 1e-12) {
            const Eigen::Vector3d axis(0.0, -wz / theta, wy / theta);
            R = R * Eigen::AngleAxisd(theta, axis).toRotationMatrix();
        }
        arc += len;
    }

    ShapeSample out;
    out.total_length_mm = arc;
    out.points.points.assign(pts.rbegin(), pts.rend());
    out.arc_from_base_mm.assign(arcs.rbegin(), arcs.rend());
    return out;
}

BackbonePoints forward_shape(const PlantConfig& cfg, const Eigen::VectorXd& q) {
    return forward_shape_sample(cfg, q).points;
}

Eigen::MatrixXd plant_jacobian_fd(const PlantConfig& cfg, const Eigen::VectorXd& q,
                                  FeatureKind kind, const SectionMarkers& markers,
                                  double step) {
    if (((q.array() - cfg.q_min.array()) < step).any() ||
        ((cfg.q_max.array() - q.array()) < step).any()) {
        throw OutOfRange("q too close to limits for the finite-difference step");
    }
    const int m = feature_dim(kind);
    Eigen::MatrixXd J(m, cfg.n);
    Eigen::VectorXd qp = q, qm = q;
    for (int a = 0; a < cfg.n; ++a) {
        qp(a) = q(a) + step;
        qm(a) = q(a) - step;
        const Eigen::VectorXd fp =
            extract_feature(kind, forward_shape(cfg, qp), markers).values;
        const Eigen::VectorXd fm =
            extract_feature(kind, forward_shape(cfg, qm), markers).values;
        J.col(a) = (fp - fm) / (2.0 * step);
        qp(a) = q(a);
        qm(a) = q(a);
    }
    return J;
}

Plant::Plant(PlantConfig cfg, SensorModel sensor, std::vector<DisturbanceEvent> events,
             std::uint64_t seed, const Eigen::VectorXd& q0)
    : cfg_(std::move(cfg)),
      sensor_(sensor),
      events_(std::move(events)),
      actuation_rng_(Rng::derive(seed, 101)),
      sensor_rng_(Rng::derive(seed, 202)) {
    cfg_.validate();
    if (sensor_.rate_hz <= 0.0) throw ConfigError("sensor rate must be > 0");
    if (sensor_.position_noise_std_mm < 0.0) {
        throw ConfigError("sensor noise std must be >= 0");
    }
    for (const auto& e : events_) e.validate();
    state_.q = q0;
    state_.t_s = 0.0;
    state_.step_count = 0;
    held_measurement_ = measure_at(0.0, state_.q, &disturbance_active_);
}

BackbonePoints Plant::measure_at(double t, const Eigen::VectorXd& q_at, bool* active) {
    ShapeSample sample = forward_shape_sample(cfg_, q_at);
    bool any_active = false;
    const double total = sample.total_length_mm;
    const double t_rel = t - event_epoch_s_;

    for (const auto& ev : events_) {
        if (t_rel + 1e-12 < ev.onset_s) continue;
        switch (ev.kind) {
            case DisturbanceKind::Impulse: {
                const double decay = 1.0 - (t_rel - ev.onset_s) / ev.decay_s;
                if (decay <= 0.0) break;
                any_active = true;
                for (int i = 0; i < sample.points.count(); ++i) {
                    const double from_tip =
                        1.0 - sample.arc_from_base_mm[static_cast<std::size_t>(i)] / total;
                    double taper = 0.0;
                    if (from_tip <= 0.3) {
                        taper = 1.0;
                    } else if (from_tip < 0.5) {
                        taper = (0.5 - from_tip) / 0.2;
                    }
                    sample.points.points[static_cast<std::size_t>(i)] +=
                        decay * taper * ev.offset_mm;
                }
                break;
            }
            case DisturbanceKind::TipPayload: {
                any_active = true;
                const Eigen::Vector3d tip = sample.points.points.front();
                // Moment arm: gravity-normal reach of the tip, normalized.
                const double arm = std::hypot(tip.x(), tip.y()) / total;
                for (int i = 0; i < sample.points.count(); ++i) {
                    const double sbar =
                        sample.arc_from_base_mm[static_cast<std::size_t>(i)] / total;
                    // Cantilever end-load deflection shape, 1 at the tip.
                    const double shape = sbar * sbar * (3.0 - sbar) / 2.0;
                    sample.points.points[static_cast<std::size_t>(i)].z() -=
                        ev.payload_gain_mm * arm * shape;
                }
                break;
            }
            case DisturbanceKind::ContactSpring: {
                const Eigen::Vector3d n = ev.plane_normal.normalized();
                const double pushback = ev.stiffness / (1.0 + ev.stiffness);
                for (auto& pt : sample.points.points) {
                    const double depth = n.dot(pt - ev.plane_point_mm);
                    if (depth < 0.0) {
                        any_active = true;
                        pt -= pushback * depth * n;
                    }
                }
                break;
            }
            case DisturbanceKind::ActuationNoise:
                // Applied to the state in step(), not to the measurement.
                any_active = true;
                break;
        }
    }

    if (sensor_.position_noise_std_mm > 0.0) {
        for (auto& pt : sample.points.points) {
            for (int a = 0; a < 3; ++a) {
                pt(a) += sensor_rng_.gauss(0.0, sensor_.position_noise_std_mm);
            }
        }
    }
    if (active) *active = any_active;
    return sample.points;
}

const BackbonePoints& Plant::step(const Eigen::VectorXd& qdot, double dt) {
    if (dt <= 0.0) throw ConfigError("dt must be > 0");
    if (qdot.size() != cfg_.n) throw DimensionMismatch("qdot has wrong size");
    if (!qdot.allFinite()) throw NonFinite("qdot contains NaN/Inf");
    if (qdot.lpNorm<Eigen::Infinity>() > cfg_.qdot_max * (1.0 + 1e-9) + 1e-12) {
        throw VelocityLimit("commanded velocity above plant limit");
    }

    const Eigen::VectorXd q_old = state_.q;
    const double t_old = state_.t_s;
    Eigen::VectorXd q_new = q_old + qdot * dt;

    for (const auto& ev : events_) {
        if (ev.kind == DisturbanceKind::ActuationNoise &&
            t_old + dt - event_epoch_s_ >= ev.onset_s) {
            for (int a = 0; a < cfg_.n; ++a) {
                q_new(a) += actuation_rng_.gauss(0.0, ev.noise_std * std::sqrt(dt));
            }
        }
    }
    q_new = q_new.cwiseMax(cfg_.q_min).cwiseMin(cfg_.q_max);

    state_.step_count += 1;
    const double t_new = t_old + dt;

    // Sensor instants falling inside (t_old, t_new]; q interpolates linearly.
    const double period = 1.0 / sensor_.rate_hz;
    while (static_cast<double>(next_sensor_sample_) * period <= t_new + 1e-9) {
        const double ts = static_cast<double>(next_sensor_sample_) * period;
        const double frac = std::clamp((ts - t_old) / dt, 0.0, 1.0);
        const Eigen::VectorXd q_at = q_old + frac * (q_new - q_old);
        held_measurement_ = measure_at(ts, q_at, &disturbance_active_);
        next_sensor_sample_ += 1;
    }

    state_.q = q_new;
    state_.t_s = t_new;
    return held_measurement_;
}

}  // namespace shapeservo
