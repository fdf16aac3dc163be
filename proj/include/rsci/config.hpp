#pragma once

#include "rsci/bsde.hpp"
#include "rsci/sim.hpp"

#include <json.hpp>

namespace rsci {

/// Everything one run needs: model, constraint set, utility, grids, sim.
struct RunSpec {
    MarketModel model;
    ConstraintSet theta;
    Utility utility = Utility::Power;
    double gamma = 0.5;
    double beta = 1.0;
    TimeGrid grid{1.0, 2000};
    int picard = 0;
    SimConfig sim;
    double x0 = 1.0;
    int i0 = 0;                 // 0-based internally; 1-based in configs
    std::string out_dir = "out";
    bool dump_paths = false;
    std::string sweep_param;    // "gamma" or "beta"
    std::vector<double> sweep_values;
    std::string model_hash;

    AssumptionMode assumption_mode() const;
};

MarketModel parse_model(const nlohmann::json& j);
ConstraintSet parse_constraints(const nlohmann::json& j, const MarketModel& model);
RunSpec parse_run_config(const nlohmann::json& j);

/// Canonical serialization of the parsed model, for hashing and the summary.
nlohmann::json model_to_json(const MarketModel& m);

} // namespace rsci
