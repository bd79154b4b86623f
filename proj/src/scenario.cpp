#include "shapeservo/scenario.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace shapeservo {

using nlohmann::json;

void ScenarioConfig::validate() const {
    if (!seed_set) throw ConfigError("scenario seed is mandatory");
    if (loop_hz <= 0.0) throw ConfigError("loop_hz must be > 0");
    if (max_duration_s <= 0.0) throw ConfigError("max_duration_s must be > 0");
    learner.validate();
    controller.validate();
    warmup.validate();
    for (const auto& d : disturbances) d.validate();
    const PlantConfig pc = plant_preset(plant);
    if (q0.size() != 0 && q0.size() != pc.n) {
        throw ConfigError("q0 size does not match the plant");
    }
    if (q_d.size() != 0 && q_d.size() != pc.n) {
        throw ConfigError("q_d size does not match the plant");
    }
    if (x_d.size() != 0 && x_d.size() != feature_dim(feature)) {
        throw ConfigError("x_d dimension does not match the feature kind");
    }
    if (x_d.size() == 0 && q_d.size() == 0) {
        throw ConfigError("scenario needs x_d or q_d");
    }
    if (k_neurons < 0) throw ConfigError("k_neurons must be >= 0");
    if (sensor.rate_hz <= 0.0) throw ConfigError("sensor rate must be > 0");
    if (sensor.position_noise_std_mm < 0.0) {
        throw ConfigError("sensor noise std must be >= 0");
    }
}

ScenarioConfig scenario_defaults(const std::string& plant_preset_name) {
    ScenarioConfig cfg;
    cfg.plant = plant_preset_name;
    const PlantConfig pc = plant_preset(plant_preset_name);
    cfg.markers = default_markers(pc);
    cfg.q0 = Eigen::VectorXd::Zero(pc.n);
    if (plant_preset_name == "racs2") {
        cfg.feature = FeatureKind::TwoPoints;
        cfg.k_neurons = 9;
        cfg.learner.alpha_x = 0.3;
        cfg.learner.beta_x = 0.04;
        cfg.learner.gamma_w_inv = 0.1;
        cfg.controller.k_c = 0.32;
        cfg.controller.k_s = 0.04;
    } else if (plant_preset_name == "scm6") {
        cfg.feature = FeatureKind::DepBta;
        cfg.k_neurons = 13;
        cfg.learner.alpha_x = 0.6;
        cfg.learner.beta_x = 0.12;
        cfg.learner.gamma_w_inv = 1.0;
        cfg.controller.k_c = 0.02;
        cfg.controller.k_s = 0.01;
        // A straight arm leaves the twist angle undefined; start bent.
        cfg.q0.resize(6);
        cfg.q0 << 0.35, 0.1, -0.1, 0.3, -0.1, 0.05;
    }
    cfg.learner.k_e = 0.01;
    cfg.learner.k_x = 0.01;
    cfg.learner.k_r = 0.2;
    return cfg;
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.contains(it.key())) {
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

Eigen::VectorXd vector_from_json(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw ConfigError(where + " must be an array");
    Eigen::VectorXd v(arr.size());
    Eigen::Index i = 0;
    for (const auto& x : arr) {
        if (!x.is_number()) throw ConfigError(where + " must contain numbers");
        v(i++) = x.get<double>();
    }
    return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

DisturbanceEvent disturbance_from_json(const json& obj) {
    reject_unknown(obj,
                   {"kind", "onset_s", "offset_mm", "decay_s", "payload_gain_mm",
                    "plane_point_mm", "plane_normal", "stiffness", "noise_std"},
                   "disturbance");
    DisturbanceEvent ev;
    ev.kind = disturbance_kind_from_name(obj.at("kind").get<std::string>());
    ev.onset_s = obj.value("onset_s", 0.0);
    if (obj.contains("offset_mm")) {
        const Eigen::VectorXd v = vector_from_json(obj["offset_mm"], "offset_mm");
        if (v.size() != 3) throw ConfigError("offset_mm must have 3 entries");
        ev.offset_mm = v;
    }
    ev.decay_s = obj.value("decay_s", 0.5);
    ev.payload_gain_mm = obj.value("payload_gain_mm", 0.0);
    if (obj.contains("plane_point_mm")) {
        const Eigen::VectorXd v =
            vector_from_json(obj["plane_point_mm"], "plane_point_mm");
        if (v.size() != 3) throw ConfigError("plane_point_mm must have 3 entries");
        ev.plane_point_mm = v;
    }
    if (obj.contains("plane_normal")) {
        const Eigen::VectorXd v = vector_from_json(obj["plane_normal"], "plane_normal");
        if (v.size() != 3) throw ConfigError("plane_normal must have 3 entries");
        ev.plane_normal = v;
    }
    ev.stiffness = obj.value("stiffness", 0.0);
    ev.noise_std = obj.value("noise_std", 0.0);
    ev.validate();
    return ev;
}

json disturbance_to_json(const DisturbanceEvent& ev) {
    json obj;
    obj["kind"] = disturbance_kind_name(ev.kind);
    obj["onset_s"] = ev.onset_s;
    switch (ev.kind) {
        case DisturbanceKind::Impulse:
            obj["offset_mm"] = vector_to_json(ev.offset_mm);
            obj["decay_s"] = ev.decay_s;
            break;
        case DisturbanceKind::TipPayload:
            obj["payload_gain_mm"] = ev.payload_gain_mm;
            break;
        case DisturbanceKind::ContactSpring:
            obj["plane_point_mm"] = vector_to_json(ev.plane_point_mm);
            obj["plane_normal"] = vector_to_json(ev.plane_normal);
            obj["stiffness"] = ev.stiffness;
            break;
        case DisturbanceKind::ActuationNoise:
            obj["noise_std"] = ev.noise_std;
            break;
    }
    return obj;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario JSON parse error: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("scenario must be a JSON object");
    reject_unknown(doc,
                   {"name", "plant", "feature", "markers", "seed", "loop_hz",
                    "max_duration_s", "stop_on_converge", "q0", "q_d", "x_d",
                    "k_neurons", "weight_scale", "gains", "sensor", "disturbances",
                    "warmup", "warm_start_bank"},
                   "scenario");

    if (!doc.contains("plant")) throw ConfigError("scenario needs a plant preset");
    ScenarioConfig cfg = scenario_defaults(doc.at("plant").get<std::string>());
    cfg.name = doc.value("name", std::string("scenario"));
    if (doc.contains("feature")) {
        cfg.feature = feature_kind_from_name(doc["feature"].get<std::string>());
    }
    if (doc.contains("markers")) {
        const json& mk = doc["markers"];
        reject_unknown(mk, {"distal", "middle", "base"}, "markers");
        cfg.markers.distal = mk.value("distal", cfg.markers.distal);
        cfg.markers.middle = mk.value("middle", cfg.markers.middle);
        cfg.markers.base = mk.value("base", cfg.markers.base);
    }
    if (!doc.contains("seed")) throw ConfigError("scenario seed is mandatory");
    cfg.seed = doc["seed"].get<std::uint64_t>();
    cfg.seed_set = true;
    cfg.loop_hz = doc.value("loop_hz", cfg.loop_hz);
    cfg.max_duration_s = doc.value("max_duration_s", cfg.max_duration_s);
    cfg.stop_on_converge = doc.value("stop_on_converge", cfg.stop_on_converge);
    if (doc.contains("q0")) cfg.q0 = vector_from_json(doc["q0"], "q0");
    if (doc.contains("q_d")) cfg.q_d = vector_from_json(doc["q_d"], "q_d");
    if (doc.contains("x_d")) cfg.x_d = vector_from_json(doc["x_d"], "x_d");
    cfg.k_neurons = doc.value("k_neurons", cfg.k_neurons);
    cfg.weight_scale = doc.value("weight_scale", cfg.weight_scale);

    if (doc.contains("gains")) {
        const json& g = doc["gains"];
        reject_unknown(g,
                       {"alpha_x", "beta_x", "k_e", "k_x", "k_r", "gamma_w_inv",
                        "eps_sat", "w_max", "b_delta1", "b_delta2", "k_c", "k_s",
                        "eps_sat_e", "qdot_max", "sigma_min_ratio", "epsilon_e"},
                       "gains");
        cfg.learner.alpha_x = g.value("alpha_x", cfg.learner.alpha_x);
        cfg.learner.beta_x = g.value("beta_x", cfg.learner.beta_x);
        cfg.learner.k_e = g.value("k_e", cfg.learner.k_e);
        cfg.learner.k_x = g.value("k_x", cfg.learner.k_x);
        cfg.learner.k_r = g.value("k_r", cfg.learner.k_r);
        cfg.learner.gamma_w_inv = g.value("gamma_w_inv", cfg.learner.gamma_w_inv);
        cfg.learner.eps_sat = g.value("eps_sat", cfg.learner.eps_sat);
        cfg.learner.w_max = g.value("w_max", cfg.learner.w_max);
        cfg.learner.b_delta1 = g.value("b_delta1", cfg.learner.b_delta1);
        cfg.learner.b_delta2 = g.value("b_delta2", cfg.learner.b_delta2);
        cfg.controller.k_c = g.value("k_c", cfg.controller.k_c);
        cfg.controller.k_s = g.value("k_s", cfg.controller.k_s);
        cfg.controller.eps_sat_e = g.value("eps_sat_e", cfg.controller.eps_sat_e);
        cfg.controller.qdot_max = g.value("qdot_max", cfg.controller.qdot_max);
        cfg.controller.sigma_min_ratio =
            g.value("sigma_min_ratio", cfg.controller.sigma_min_ratio);
        cfg.controller.epsilon_e = g.value("epsilon_e", cfg.controller.epsilon_e);
    }
    if (doc.contains("sensor")) {
        const json& s = doc["sensor"];
        reject_unknown(s, {"noise_std_mm", "rate_hz"}, "sensor");
        cfg.sensor.position_noise_std_mm =
            s.value("noise_std_mm", cfg.sensor.position_noise_std_mm);
        cfg.sensor.rate_hz = s.value("rate_hz", cfg.sensor.rate_hz);
    }
    if (doc.contains("disturbances")) {
        if (!doc["disturbances"].is_array()) {
            throw ConfigError("disturbances must be an array");
        }
        for (const auto& d : doc["disturbances"]) {
            cfg.disturbances.push_back(disturbance_from_json(d));
        }
    }
    if (doc.contains("warmup")) {
        const json& w = doc["warmup"];
        reject_unknown(w, {"duration_s", "amplitude", "base_freq_hz"}, "warmup");
        cfg.warmup.duration_s = w.value("duration_s", cfg.warmup.duration_s);
        cfg.warmup.amplitude = w.value("amplitude", cfg.warmup.amplitude);
        cfg.warmup.base_freq_hz = w.value("base_freq_hz", cfg.warmup.base_freq_hz);
    }
    cfg.warm_start_bank = doc.value("warm_start_bank", std::string());

    cfg.validate();
    return cfg;
}

ScenarioConfig scenario_from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scenario: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return scenario_from_json_text(text);
}

std::string scenario_to_json_text(const ScenarioConfig& cfg) {
    json doc;
    doc["name"] = cfg.name;
    doc["plant"] = cfg.plant;
    doc["feature"] = feature_kind_name(cfg.feature);
    doc["markers"] = {{"distal", cfg.markers.distal},
                      {"middle", cfg.markers.middle},
                      {"base", cfg.markers.base}};
    doc["seed"] = cfg.seed;
    doc["loop_hz"] = cfg.loop_hz;
    doc["max_duration_s"] = cfg.max_duration_s;
    doc["stop_on_converge"] = cfg.stop_on_converge;
    if (cfg.q0.size() > 0) doc["q0"] = vector_to_json(cfg.q0);
    if (cfg.q_d.size() > 0) doc["q_d"] = vector_to_json(cfg.q_d);
    if (cfg.x_d.size() > 0) doc["x_d"] = vector_to_json(cfg.x_d);
    doc["k_neurons"] = cfg.k_neurons;
    doc["weight_scale"] = cfg.weight_scale;
    doc["gains"] = {{"alpha_x", cfg.learner.alpha_x},
                    {"beta_x", cfg.learner.beta_x},
                    {"k_e", cfg.learner.k_e},
                    {"k_x", cfg.learner.k_x},
                    {"k_r", cfg.learner.k_r},
                    {"gamma_w_inv", cfg.learner.gamma_w_inv},
                    {"eps_sat", cfg.learner.eps_sat},
                    {"w_max", cfg.learner.w_max},
                    {"b_delta1", cfg.learner.b_delta1},
                    {"b_delta2", cfg.learner.b_delta2},
                    {"k_c", cfg.controller.k_c},
                    {"k_s", cfg.controller.k_s},
                    {"eps_sat_e", cfg.controller.eps_sat_e},
                    {"qdot_max", cfg.controller.qdot_max},
                    {"sigma_min_ratio", cfg.controller.sigma_min_ratio},
                    {"epsilon_e", cfg.controller.epsilon_e}};
    doc["sensor"] = {{"noise_std_mm", cfg.sensor.position_noise_std_mm},
                     {"rate_hz", cfg.sensor.rate_hz}};
    json dist = json::array();
    for (const auto& d : cfg.disturbances) dist.push_back(disturbance_to_json(d));
    doc["disturbances"] = dist;
    doc["warmup"] = {{"duration_s", cfg.warmup.duration_s},
                     {"amplitude", cfg.warmup.amplitude},
                     {"base_freq_hz", cfg.warmup.base_freq_hz}};
    if (!cfg.warm_start_bank.empty()) doc["warm_start_bank"] = cfg.warm_start_bank;
    return doc.dump(2);
}

}  // namespace shapeservo
