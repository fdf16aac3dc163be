#include "rsci/config.hpp"

#include "rsci/csvio.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace rsci {

using nlohmann::json;

namespace {

double num_at(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<double>();
}

Vec parse_vec(const json& v, int len, const std::string& what) {
    Vec out(len);
    if (v.is_number()) {
        if (len != 1) throw ConfigError(what + ": expected an array of length " +
                                        std::to_string(len));
        out[0] = v.get<double>();
        return out;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != len)
        throw ConfigError(what + ": expected an array of length " + std::to_string(len));
    for (int k = 0; k < len; ++k) out[k] = v.at(static_cast<size_t>(k)).get<double>();
    return out;
}

Mat parse_mat(const json& v, int rows, int cols, const std::string& what) {
    Mat out(rows, cols);
    if (v.is_number()) {
        if (rows != 1 || cols != 1)
            throw ConfigError(what + ": expected a " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " matrix");
        out(0, 0) = v.get<double>();
        return out;
    }
    if (v.is_array() && !v.empty() && v.at(0).is_number()) {
        // one row
        if (rows != 1 || static_cast<int>(v.size()) != cols)
            throw ConfigError(what + ": expected a " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " matrix");
        for (int c = 0; c < cols; ++c) out(0, c) = v.at(static_cast<size_t>(c)).get<double>();
        return out;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != rows)
        throw ConfigError(what + ": expected " + std::to_string(rows) + " rows");
    for (int r = 0; r < rows; ++r) {
        const json& row = v.at(static_cast<size_t>(r));
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ConfigError(what + ": expected " + std::to_string(cols) + " columns");
        for (int c = 0; c < cols; ++c) out(r, c) = row.at(static_cast<size_t>(c)).get<double>();
    }
    return out;
}

// step-curve entries: [{"t_start": ..., "value": ...}, ...]
struct StepEntries {
    std::vector<double> starts;
    std::vector<json> values;

    const json* at(double t) const {
        const json* best = nullptr;
        for (size_t k = 0; k < starts.size(); ++k)
            if (starts[k] <= t + 1e-15) best = &values[k];
        return best;
    }
};

StepEntries parse_steps(const json& j, const std::string& what) {
    StepEntries e;
    if (j.is_number()) {   // shorthand: constant curve
        e.starts.push_back(0.0);
        e.values.push_back(j);
        return e;
    }
    if (j.is_array() && !j.empty() && j.at(0).is_object()) {
        for (const auto& item : j) {
            e.starts.push_back(item.at("t_start").get<double>());
            e.values.push_back(item.at("value"));
        }
        return e;
    }
    // shorthand: constant vector/matrix curve
    e.starts.push_back(0.0);
    e.values.push_back(j);
    if (e.values.back().is_null()) throw ConfigError(what + ": malformed curve");
    return e;
}

} // namespace

MarketModel parse_model(const json& j) {
    MarketModel m;
    m.horizon = num_at(j, "horizon", 1.0);
    if (j.contains("assets")) {
        m.m = j.at("assets").value("m", 1);
        m.n = j.at("assets").value("n", m.m);
    }
    m.delta_floor = num_at(j, "delta", 1e-4);

    const json& gen = j.at("generator");
    int ell = static_cast<int>(gen.size());
    m.generator.ell = ell;
    m.generator.q = parse_mat(gen, ell, ell, "generator");

    const json& regs = j.at("regimes");
    if (static_cast<int>(regs.size()) != ell)
        throw ConfigError("regimes: expected " + std::to_string(ell) + " entries");

    if (j.contains("factor")) {
        const json& f = j.at("factor");
        m.factor.enabled = f.value("enabled", true);
        m.factor.kappa = num_at(f, "kappa", 0.0);
        m.factor.theta = num_at(f, "theta", 0.0);
        m.factor.x0 = num_at(f, "x0", 0.0);
        m.factor.vol = f.contains("vol") ? parse_vec(f.at("vol"), m.n, "factor.vol")
                                         : Vec::Zero(m.n);
        m.factor.x_min = num_at(f, "x_min", -1.0);
        m.factor.x_max = num_at(f, "x_max", 1.0);
        m.factor.nodes = f.value("nodes", 41);
    }

    bool any_slope = false;
    m.coefficients.pieces.resize(static_cast<size_t>(ell));
    for (int i = 0; i < ell; ++i) {
        const json& reg = regs.at(static_cast<size_t>(i));
        StepEntries r = parse_steps(reg.at("r"), "r");
        StepEntries mu = parse_steps(reg.at("mu"), "mu");
        StepEntries sg = parse_steps(reg.at("sigma"), "sigma");
        StepEntries rho = parse_steps(reg.at("rho"), "rho");
        StepEntries rs, ms;
        if (reg.contains("r_slope")) rs = parse_steps(reg.at("r_slope"), "r_slope");
        if (reg.contains("mu_slope")) ms = parse_steps(reg.at("mu_slope"), "mu_slope");

        std::set<double> starts;
        for (const auto* e : {&r, &mu, &sg, &rho, &rs, &ms})
            for (double s : e->starts) starts.insert(s);
        if (starts.empty() || *starts.begin() != 0.0)
            throw ConfigError("regime " + std::to_string(i + 1) +
                              ": coefficient curves must start at t = 0");

        for (double s : starts) {
            CoefficientPiece p;
            p.t_start = s;
            p.r = r.at(s)->get<double>();
            p.mu = parse_vec(*mu.at(s), m.m, "mu");
            p.sigma = parse_mat(*sg.at(s), m.m, m.n, "sigma");
            p.rho = rho.at(s)->get<double>();
            if (const json* v = rs.at(s)) p.r_slope = v->get<double>();
            if (const json* v = ms.at(s)) p.mu_slope = parse_vec(*v, m.m, "mu_slope");
            if (p.r_slope != 0.0 || (p.mu_slope.size() > 0 && p.mu_slope.any()))
                any_slope = true;
            m.coefficients.pieces[static_cast<size_t>(i)].push_back(std::move(p));
        }
    }
    m.coefficients.kind =
        any_slope ? CurveKind::AffineInFactor : CurveKind::PiecewiseConstant;
    return m;
}

ConstraintSet parse_constraints(const json& j, const MarketModel& model) {
    ConstraintSet t;
    t.m = model.m;
    if (j.is_null()) return t;
    t.family = family_from_name(j.value("family", std::string("unconstrained")));
    if (t.family == Family::Box) {
        t.box_lo = parse_vec(j.at("lo"), model.m, "constraints.lo");
        t.box_hi = parse_vec(j.at("hi"), model.m, "constraints.hi");
        t.c_lo = num_at(j, "c_lo", 0.0);
        t.c_hi = num_at(j, "c_hi", std::numeric_limits<double>::infinity());
    }
    if (t.family == Family::HalfSpace) {
        t.hs_a = parse_vec(j.at("a"), model.m, "constraints.a");
        t.hs_a0 = num_at(j, "a0", 0.0);
        t.hs_beta0 = num_at(j, "beta0", 1.0);
    }
    if (j.contains("epsilon")) {
        t.epsilon = j.at("epsilon").get<double>();
    } else {
        double lo = t.family == Family::Box ? std::max(t.c_lo, 0.0) : 0.0;
        double hi = t.sup_c_at_zero_pi();
        t.epsilon = std::clamp(1.0, lo, std::isfinite(hi) ? hi : 1.0);
        if (!(t.epsilon > 0.0)) t.epsilon = hi / 2.0;
    }
    return t;
}

RunSpec parse_run_config(const json& j) {
    RunSpec spec;
    spec.model = parse_model(j);
    spec.theta = parse_constraints(j.contains("constraints") ? j.at("constraints") : json(),
                                   spec.model);

    if (j.contains("utility")) {
        const json& u = j.at("utility");
        std::string kind = u.value("kind", std::string("power"));
        spec.gamma = num_at(u, "gamma", 0.5);
        spec.beta = num_at(u, "beta", 1.0);
        if (kind == "power") {
            spec.utility = Utility::Power;
        } else if (kind == "log") {
            spec.utility = Utility::Log;
        } else if (kind == "exp") {
            std::string rate = u.value("rate", std::string("auto"));
            bool random_rate = false;
            if (rate == "random") {
                random_rate = true;
            } else if (rate == "auto") {
                for (const auto& ps : spec.model.coefficients.pieces)
                    for (const auto& p : ps)
                        if (p.r_slope != 0.0) random_rate = true;
                random_rate = random_rate && spec.model.factor.enabled;
            } else if (rate != "deterministic") {
                throw ConfigError("utility.rate must be deterministic, random or auto");
            }
            spec.utility = random_rate ? Utility::ExpRandom : Utility::ExpDet;
        } else {
            throw ConfigError("utility.kind must be power, log or exp");
        }
    }
    if (spec.utility == Utility::Power && (spec.gamma == 0.0 || spec.gamma >= 1.0))
        throw ConfigError("gamma must lie in (-inf,0) or (0,1)");
    if (!(spec.beta > 0.0)) throw ConfigError("beta must be > 0");

    spec.grid.T = spec.model.horizon;
    spec.grid.N = 2000;
    spec.picard = 1;
    if (j.contains("grid")) {
        spec.grid.N = j.at("grid").value("n", 2000);
        spec.picard = j.at("grid").value("picard", 1);
    }
    if (spec.grid.N < 2) throw ConfigError("grid.n must be >= 2");

    if (j.contains("sim")) {
        const json& s = j.at("sim");
        spec.sim.n_paths = s.value("paths", 10000);
        spec.sim.seed = s.value("seed", 42ull);
        spec.sim.dt = num_at(s, "dt", 1e-3);
        spec.sim.antithetic = s.value("antithetic", false);
        spec.sim.threads = s.value("threads", 1);
    }
    spec.x0 = num_at(j, "x0", 1.0);
    spec.i0 = j.value("i0", 1) - 1;
    if (spec.i0 < 0 || spec.i0 >= spec.model.ell())
        throw ConfigError("i0 must name a regime in 1..ell");
    spec.out_dir = j.value("out", std::string("out"));

    if (j.contains("sweep")) {
        spec.sweep_param = j.at("sweep").value("parameter", std::string("gamma"));
        for (const auto& v : j.at("sweep").at("values"))
            spec.sweep_values.push_back(v.get<double>());
    }

    spec.model_hash = fnv1a_hex(model_to_json(spec.model).dump());
    return spec;
}

AssumptionMode RunSpec::assumption_mode() const {
    switch (utility) {
        case Utility::Power:
        case Utility::Log: return AssumptionMode::PowerLog;
        case Utility::ExpDet: return AssumptionMode::ExpDeterministic;
        case Utility::ExpRandom: return AssumptionMode::ExpRandom;
    }
    return AssumptionMode::PowerLog;
}

nlohmann::json model_to_json(const MarketModel& m) {
    json j;
    j["horizon"] = m.horizon;
    j["assets"] = {{"m", m.m}, {"n", m.n}};
    j["delta"] = m.delta_floor;
    json gen = json::array();
    for (int i = 0; i < m.ell(); ++i) {
        json row = json::array();
        for (int c = 0; c < m.ell(); ++c) row.push_back(m.generator.q(i, c));
        gen.push_back(row);
    }
    j["generator"] = gen;
    json regs = json::array();
    for (int i = 0; i < m.ell(); ++i) {
        json r = json::array(), mu = json::array(), sg = json::array(), rho = json::array();
        json rs = json::array(), ms = json::array();
        for (const auto& p : m.coefficients.pieces[static_cast<size_t>(i)]) {
            r.push_back({{"t_start", p.t_start}, {"value", p.r}});
            json muv = json::array();
            for (int c = 0; c < p.mu.size(); ++c) muv.push_back(p.mu[c]);
            mu.push_back({{"t_start", p.t_start}, {"value", muv}});
            json sgv = json::array();
            for (int rr = 0; rr < p.sigma.rows(); ++rr) {
                json row = json::array();
                for (int cc = 0; cc < p.sigma.cols(); ++cc) row.push_back(p.sigma(rr, cc));
                sgv.push_back(row);
            }
            sg.push_back({{"t_start", p.t_start}, {"value", sgv}});
            rho.push_back({{"t_start", p.t_start}, {"value", p.rho}});
            rs.push_back({{"t_start", p.t_start}, {"value", p.r_slope}});
            json msv = json::array();
            for (int c = 0; c < p.mu_slope.size(); ++c) msv.push_back(p.mu_slope[c]);
            ms.push_back({{"t_start", p.t_start}, {"value", msv}});
        }
        regs.push_back({{"r", r},
                        {"mu", mu},
                        {"sigma", sg},
                        {"rho", rho},
                        {"r_slope", rs},
                        {"mu_slope", ms}});
    }
    j["regimes"] = regs;
    if (m.factor.enabled) {
        json vol = json::array();
        for (int c = 0; c < m.factor.vol.size(); ++c) vol.push_back(m.factor.vol[c]);
        j["factor"] = {{"enabled", true},   {"kappa", m.factor.kappa},
                       {"theta", m.factor.theta}, {"x0", m.factor.x0},
                       {"vol", vol},        {"x_min", m.factor.x_min},
                       {"x_max", m.factor.x_max}, {"nodes", m.factor.nodes}};
    }
    return j;
}

} // namespace rsci
