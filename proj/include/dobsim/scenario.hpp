#pragma once

#include "dobsim/analysis.hpp"
#include "dobsim/simulation.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>

namespace dobsim {

/// Schema violation with the path to the offending field ("sim.dt",
/// "model.links[1].mass", ...).
struct ScenarioError : std::runtime_error {
    std::string field_path;
    ScenarioError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), field_path(std::move(path)) {}
};

struct Scenario {
    ManipulatorModel model;
    ControllerConfig controller;
    Reference reference;  // operational-circle kept raw until build_reference
    DisturbanceSchedule disturbances;
    SimConfig sim;
    AnalysisConfig analysis;
    std::string out_dir = "out";
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

/// Resolves the scenario's reference into a runnable one (converts an
/// operational circle to joint samples at half the integrator step).
Reference build_reference(const Scenario& sc);

/// build_reference + run_scenario.
RunLog execute(const Scenario& sc);

}  // namespace dobsim
