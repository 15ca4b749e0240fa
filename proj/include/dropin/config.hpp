#pragma once

#include <fstream>
#include <set>
#include <string>
#include <string_view>

#include "json.hpp"

#include "dropin/error.hpp"
#include "dropin/harness.hpp"
#include "dropin/scenario.hpp"

namespace dropin {

/// Experiment configuration as JSON.
///
/// Every key is optional; omitted keys keep the defaults of ExperimentPlan
/// and the three built-in scenarios. Each scenario entry names a `preset`
/// ("rct_10pct_dropout", "observational_50", "observational_20", or
/// "rct"/"observational" for a blank of that kind) and overrides any field.
/// `profiles.<name>` objects are merged over the top level when selected;
/// "desk" (200 iterations) and "full" (1000 iterations) are built in.
namespace config {

using nlohmann::json;

inline ScenarioConfig preset(std::string_view name) {
    if (name == "rct_10pct_dropout" || name == "rct") return rct_scenario(0.9);
    if (name == "observational_50" || name == "observational") return observational_scenario(0.5);
    if (name == "observational_20") return observational_scenario(0.2);
    throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
}

inline void reject_unknown(const json& j, const std::set<std::string, std::less<>>& known, std::string_view where) {
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw ConfigError("config: unknown key '" + k + "' in " + std::string(where));
}

inline ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: scenario entries must be objects");
    reject_unknown(j,
                   {"preset", "name", "phi", "theta_rct", "theta_obs", "target_pA0", "target_pA1", "target_pY", "beta_x0",
                    "beta_x1", "beta_a0", "beta_a1", "n_dev", "n_test"},
                   "scenario");
    ScenarioConfig c = preset(j.value("preset", std::string("observational_50")));
    if (j.contains("theta_rct")) {
        c.theta_rct = j.at("theta_rct").get<double>();
        if (!j.contains("name")) c.name = rct_scenario(*c.theta_rct).name;
    }
    if (j.contains("theta_obs")) c.theta_obs = j.at("theta_obs").get<double>();
    auto set = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    set("name", c.name);
    set("phi", c.phi);
    set("target_pA0", c.target_pA0);
    set("target_pA1", c.target_pA1);
    set("target_pY", c.target_pY);
    set("beta_x0", c.beta_x0);
    set("beta_x1", c.beta_x1);
    set("beta_a0", c.beta_a0);
    set("beta_a1", c.beta_a1);
    set("n_dev", c.n_dev);
    set("n_test", c.n_test);
    c.validate();
    return c;
}

inline json scenario_to_json(const ScenarioConfig& c) {
    json j{{"name", c.name},
           {"preset", c.kind == ScenarioKind::RCT ? "rct" : "observational"},
           {"phi", c.phi},
           {"target_pA0", c.target_pA0},
           {"target_pY", c.target_pY},
           {"beta_x0", c.beta_x0},
           {"beta_x1", c.beta_x1},
           {"beta_a0", c.beta_a0},
           {"beta_a1", c.beta_a1},
           {"n_dev", c.n_dev},
           {"n_test", c.n_test}};
    if (c.theta_rct) j["theta_rct"] = *c.theta_rct;
    if (c.theta_obs) {
        j["theta_obs"] = *c.theta_obs;
        j["target_pA1"] = c.target_pA1;
    }
    return j;
}

inline ExperimentPlan plan_from_json(json j, std::string_view profile = "desk") {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    int profile_iterations = profile == "full" ? 1000 : 200;
    if (profile != "desk" && profile != "full" && !(j.contains("profiles") && j["profiles"].contains(std::string(profile))))
        throw ConfigError("config: unknown profile '" + std::string(profile) + "'");
    if (j.contains("profiles")) {
        const json profiles = j["profiles"];
        j.erase("profiles");
        if (profiles.contains(std::string(profile))) {
            const json& over = profiles.at(std::string(profile));
            if (!over.is_object()) throw ConfigError("config: profiles must be objects");
            for (const auto& [k, v] : over.items()) j[k] = v;
        }
    }
    reject_unknown(j,
                   {"master_seed", "iterations", "gamma_grid", "thresholds", "workers", "resolve_intercepts_per_gamma",
                    "intercept_solver", "msm_interactions", "weight_truncation", "scenarios"},
                   "plan");

    ExperimentPlan plan;
    plan.iterations = profile_iterations;
    try {
        if (j.contains("master_seed")) plan.master_seed = j["master_seed"].get<Seed>();
        if (j.contains("iterations")) plan.iterations = j["iterations"].get<int>();
        if (j.contains("gamma_grid")) plan.gamma_grid = j["gamma_grid"].get<std::vector<double>>();
        if (j.contains("thresholds")) plan.thresholds = j["thresholds"].get<std::vector<double>>();
        if (j.contains("workers")) plan.workers = j["workers"].get<int>();
        if (j.contains("resolve_intercepts_per_gamma"))
            plan.resolve_intercepts_per_gamma = j["resolve_intercepts_per_gamma"].get<bool>();
        if (j.contains("intercept_solver")) {
            const auto& s = j["intercept_solver"];
            reject_unknown(s, {"n_mc", "tol", "seed"}, "intercept_solver");
            plan.intercept_solver.n_mc = s.value("n_mc", plan.intercept_solver.n_mc);
            plan.intercept_solver.tol = s.value("tol", plan.intercept_solver.tol);
            plan.intercept_solver.seed = s.value("seed", plan.intercept_solver.seed);
        }
        if (j.contains("msm_interactions")) plan.strategy_options.msm_interactions = j["msm_interactions"].get<bool>();
        if (j.contains("weight_truncation") && !j["weight_truncation"].is_null()) {
            const auto q = j["weight_truncation"].get<std::vector<double>>();
            if (q.size() != 2) throw ConfigError("config: weight_truncation must be [lower, upper] quantiles");
            plan.strategy_options.weight_truncation = std::make_pair(q[0], q[1]);
        }
        if (j.contains("scenarios")) {
            for (const auto& s : j["scenarios"]) plan.scenarios.push_back(scenario_from_json(s));
        } else {
            plan.scenarios = default_scenarios();
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    plan.validate();
    return plan;
}

inline ExperimentPlan load_plan_file(const std::string& path, std::string_view profile = "desk") {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return plan_from_json(std::move(j), profile);
}

inline json plan_to_json(const ExperimentPlan& p) {
    json j{{"master_seed", p.master_seed},
           {"iterations", p.iterations},
           {"gamma_grid", p.gamma_grid},
           {"thresholds", p.thresholds},
           {"workers", p.workers},
           {"resolve_intercepts_per_gamma", p.resolve_intercepts_per_gamma},
           {"intercept_solver", {{"n_mc", p.intercept_solver.n_mc}, {"tol", p.intercept_solver.tol}, {"seed", p.intercept_solver.seed}}},
           {"msm_interactions", p.strategy_options.msm_interactions},
           {"weight_truncation", nullptr},
           {"scenarios", json::array()}};
    if (p.strategy_options.weight_truncation)
        j["weight_truncation"] = {p.strategy_options.weight_truncation->first, p.strategy_options.weight_truncation->second};
    for (const auto& s : p.scenarios) j["scenarios"].push_back(scenario_to_json(s));
    return j;
}

}  // namespace config
}  // namespace dropin
