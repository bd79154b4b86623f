#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "shapeservo/geometry.hpp"
#include "shapeservo/rng.hpp"

namespace shapeservo {

struct SectionSpec {
    double rest_length_mm = 100.0;
    bool extensible = false;
    int cable_count = 3;
};

// Ground-truth piecewise-constant-curvature plant. The controller treats it
// as a black box; only the test oracles may query its Jacobian.
struct PlantConfig {
    std::string name = "custom";
    int n = 2;                           // actuator count
    std::vector<SectionSpec> sections;   // ordered base -> tip
    int l = 9;                           // backbone sample count
    // Rows are (bend_y, bend_z, extension) per section in radians /
    // length-fraction per actuator unit; columns are actuators.
    Eigen::MatrixXd cable_gain;
    Eigen::VectorXd q_min;
    Eigen::VectorXd q_max;
    double qdot_max = 1.0;               // actuator units per second

    void validate() const;
    double total_rest_length() const;
};

// "racs2" (2-DOF single section, 120 mm) or "scm6" (6-DOF two extensible
// sections, 180 mm).
PlantConfig plant_preset(const std::string& name);
SectionMarkers default_markers(const PlantConfig& cfg);

enum class DisturbanceKind { Impulse, TipPayload, ContactSpring, ActuationNoise };

DisturbanceKind disturbance_kind_from_name(const std::string& name);
const char* disturbance_kind_name(DisturbanceKind kind);

struct DisturbanceEvent {
    DisturbanceKind kind = DisturbanceKind::Impulse;
    double onset_s = 0.0;

    // Impulse: offset added to the distal points, fading to zero over decay_s.
    Eigen::Vector3d offset_mm = Eigen::Vector3d::Zero();
    double decay_s = 0.5;

    // TipPayload: peak tip deflection in mm along -z, scaled by the
    // gravity-normal moment arm of the tip.
    double payload_gain_mm = 0.0;

    // ContactSpring: plane through plane_point_mm with outward normal;
    // penetrating points are pushed back by stiffness/(1+stiffness).
    Eigen::Vector3d plane_point_mm = Eigen::Vector3d::Zero();
    Eigen::Vector3d plane_normal = Eigen::Vector3d::UnitZ();
    double stiffness = 0.0;

    // ActuationNoise: diffusion on the integrated q, std per sqrt(second).
    double noise_std = 0.0;

    void validate() const;
};

struct SensorModel {
    double position_noise_std_mm = 0.1;  // i.i.d. per coordinate
    double rate_hz = 25.0;
};

// Backbone points plus their arc positions (distal-first, mm from base).
struct ShapeSample {
    BackbonePoints points;
    std::vector<double> arc_from_base_mm;
    double total_length_mm = 0.0;
};

// Noiseless, disturbance-free kinematics: per-section constant-curvature arcs
// with parameters affine in q through cable_gain. Point 0 is the distal
// endpoint, the last point the base at the origin; undeflected axis is +x.
// `enforce_limits = false` lets desired-shape authoring pose the plant
// outside its actuator box.
BackbonePoints forward_shape(const PlantConfig& cfg, const Eigen::VectorXd& q);
ShapeSample forward_shape_sample(const PlantConfig& cfg, const Eigen::VectorXd& q,
                                 bool enforce_limits = true);

// Central finite differences of extract_feature(forward_shape(q)); oracle
// only, the learner must never read it.
Eigen::MatrixXd plant_jacobian_fd(const PlantConfig& cfg, const Eigen::VectorXd& q,
                                  FeatureKind kind, const SectionMarkers& markers,
                                  double step = 1e-5);

struct PlantState {
    Eigen::VectorXd q;
    double t_s = 0.0;
    long step_count = 0;
};

// Owns the simulated robot state, the disturbance schedule, and the sensor.
// The sensor runs on its own clock (default 25 Hz); step() holds the latest
// sample (zero-order hold) for the consumer. Fully deterministic under a
// fixed seed.
class Plant {
public:
    Plant(PlantConfig cfg, SensorModel sensor, std::vector<DisturbanceEvent> events,
          std::uint64_t seed, const Eigen::VectorXd& q0);

    const PlantConfig& config() const { return cfg_; }
    const PlantState& state() const { return state_; }
    const BackbonePoints& measurement() const { return held_measurement_; }
    bool disturbance_active() const { return disturbance_active_; }

    // Disturbance onsets are relative to this epoch; the runner re-bases it
    // at the start of the servo phase so warmup does not consume the events.
    void set_event_epoch(double t_s) { event_epoch_s_ = t_s; }

    // Integrates q, applies disturbances, samples the sensor; returns the
    // held (latest) measurement. Throws VelocityLimit when |qdot|_inf
    // exceeds the configured limit.
    const BackbonePoints& step(const Eigen::VectorXd& qdot, double dt);

private:
    BackbonePoints measure_at(double t, const Eigen::VectorXd& q_at, bool* active);

    PlantConfig cfg_;
    SensorModel sensor_;
    std::vector<DisturbanceEvent> events_;
    PlantState state_;
    Rng actuation_rng_;
    Rng sensor_rng_;
    BackbonePoints held_measurement_;
    bool disturbance_active_ = false;
    long next_sensor_sample_ = 1;
    double event_epoch_s_ = 0.0;
};

}  // namespace shapeservo
