#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapeservo/controller.hpp"
#include "shapeservo/learner.hpp"
#include "shapeservo/plant.hpp"

namespace shapeservo {

// A fully reproducible experiment description. Everything the run depends on
// is in here; the seed is mandatory.
struct ScenarioConfig {
    std::string name = "scenario";
    std::string plant = "racs2";
    FeatureKind feature = FeatureKind::TwoPoints;
    SectionMarkers markers;
    std::uint64_t seed = 0;
    bool seed_set = false;

    double loop_hz = 20.0;
    double max_duration_s = 60.0;
    bool stop_on_converge = true;

    Eigen::VectorXd q0;   // empty = preset default
    Eigen::VectorXd q_d;  // desired posed configuration (may exceed limits)
    Eigen::VectorXd x_d;  // explicit desired feature; wins over q_d

    int k_neurons = 0;    // 0 = preset default
    double weight_scale = 0.1;
    LearnerGains learner;
    ControllerGains controller;

    SensorModel sensor;
    std::vector<DisturbanceEvent> disturbances;
    WarmupSpec warmup;
    std::string warm_start_bank;  // optional path to a persisted bank

    void validate() const;
};

// Preset defaults: feature kind, neuron count, gains, markers, and a
// non-degenerate initial configuration for scm6 (a straight two-section arm
// has an undefined twist angle).
ScenarioConfig scenario_defaults(const std::string& plant_preset);

// Strict JSON: unknown keys are rejected at every level.
ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig scenario_from_file(const std::string& path);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

}  // namespace shapeservo
