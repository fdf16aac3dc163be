#include "rsci/config.hpp"
#include "rsci/csvio.hpp"

#include <doctest.h>

using namespace rsci;
using nlohmann::json;

namespace {

json merton_config() {
    return json::parse(R"({
        "horizon": 1.0,
        "assets": {"m": 1, "n": 1},
        "delta": 0.01,
        "generator": [[-1.0, 1.0], [0.5, -0.5]],
        "regimes": [
            {"r": [{"t_start": 0.0, "value": 0.02}],
             "mu": [{"t_start": 0.0, "value": [0.06]}],
             "sigma": [{"t_start": 0.0, "value": [[0.2]]}],
             "rho": 0.0},
            {"r": 0.01,
             "mu": [{"t_start": 0.0, "value": [0.05]}, {"t_start": 0.5, "value": [0.04]}],
             "sigma": 0.25,
             "rho": 0.1}
        ],
        "constraints": {"family": "budget-simplex"},
        "utility": {"kind": "power", "gamma": 0.5},
        "grid": {"n": 1000},
        "sim": {"paths": 5000, "seed": 7, "dt": 0.001},
        "x0": 1.0,
        "i0": 1
    })");
}

} // namespace

TEST_CASE("parse_model reads curves, shorthands and breakpoints") {
    MarketModel m = parse_model(merton_config());
    CHECK(m.ell() == 2);
    CHECK(m.m == 1);
    CHECK(m.horizon == 1.0);
    CHECK(m.generator.q(0, 1) == 1.0);
    CHECK(coeff_at(m, 0.2, 0).r == 0.02);
    CHECK(coeff_at(m, 0.2, 1).mu[0] == 0.05);
    CHECK(coeff_at(m, 0.7, 1).mu[0] == 0.04);   // second piece
    CHECK(coeff_at(m, 0.7, 1).sigma(0, 0) == 0.25);
    CHECK(validate_model(m, AssumptionMode::PowerLog).passed());
}

TEST_CASE("parse_run_config resolves utility, grid, sim and indices") {
    RunSpec spec = parse_run_config(merton_config());
    CHECK(spec.utility == Utility::Power);
    CHECK(spec.gamma == 0.5);
    CHECK(spec.grid.N == 1000);
    CHECK(spec.grid.T == 1.0);
    CHECK(spec.sim.n_paths == 5000);
    CHECK(spec.sim.seed == 7);
    CHECK(spec.i0 == 0);   // 1-based in config
    CHECK(spec.theta.family == Family::BudgetSimplex);
    CHECK(spec.theta.epsilon == 1.0);   // default: largest feasible capped at 1
    CHECK_FALSE(spec.model_hash.empty());
}

TEST_CASE("exp utility rate detection from the factor slopes") {
    json j = merton_config();
    j["utility"] = {{"kind", "exp"}, {"beta", 1.0}};
    j["generator"] = json::parse("[[0.0]]");
    j["regimes"] = json::array({j["regimes"][0]});
    CHECK(parse_run_config(j).utility == Utility::ExpDet);

    j["factor"] = {{"enabled", true}, {"kappa", 1.0}, {"theta", 0.0}, {"x0", 0.0},
                   {"vol", json::array({0.3})}, {"x_min", -1.0}, {"x_max", 1.0},
                   {"nodes", 21}};
    j["regimes"][0]["r_slope"] = json::array({{{"t_start", 0.0}, {"value", 0.05}}});
    CHECK(parse_run_config(j).utility == Utility::ExpRandom);

    j["utility"]["rate"] = "deterministic";
    CHECK(parse_run_config(j).utility == Utility::ExpDet);
}

TEST_CASE("config semantic errors raise ConfigError") {
    json j = merton_config();
    j["utility"]["gamma"] = 1.5;
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);

    j = merton_config();
    j["i0"] = 5;
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);

    j = merton_config();
    j["regimes"][0]["mu"] = json::array({1.0, 2.0});   // wrong length
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);

    j = merton_config();
    j["constraints"] = {{"family", "warp-drive"}};
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);
}

TEST_CASE("model hash is stable and content-sensitive") {
    RunSpec a = parse_run_config(merton_config());
    RunSpec b = parse_run_config(merton_config());
    CHECK(a.model_hash == b.model_hash);
    json j = merton_config();
    j["regimes"][0]["r"] = 0.03;
    RunSpec c = parse_run_config(j);
    CHECK(a.model_hash != c.model_hash);
}

TEST_CASE("fmt17 round-trips doubles exactly") {
    for (double x : {0.1, 1.0 / 3.0, 2.718281828459045, -1.2345678901234567e-7}) {
        CHECK(std::stod(fmt17(x)) == x);
    }
}

TEST_CASE("atomic_write_file leaves no temp artifacts") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "rsci_atomic_test";
    fs::remove_all(dir);
    atomic_write_file(dir, "a.txt", "hello\n");
    CHECK(fs::exists(dir / "a.txt"));
    int count = 0;
    for (auto& e : fs::directory_iterator(dir)) {
        ++count;
        CHECK(e.path().filename() == "a.txt");
    }
    CHECK(count == 1);
    fs::remove_all(dir);
}
