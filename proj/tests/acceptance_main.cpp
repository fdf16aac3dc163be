// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criterion 11 drives the CLI binary given via --cli.

#include "helpers.hpp"
#include "oracle.hpp"

#include "rsci/config.hpp"
#include "rsci/csvio.hpp"
#include "rsci/sim.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace rsci;
using namespace rsci::testing;

namespace {

int g_failures = 0;

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

void report(int id, bool pass, const std::string& detail) {
    if (!pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// ---------------------------------------------------------------------------

void criterion_1() {
    Timer t;
    MarketModel m = single_regime(0.02, 0.02, 0.2, 0.01);   // b = 0, rho = gamma r
    RegimeField P = solve_power(m, 0.5, unconstrained(1), TimeGrid{1.0, 2000});
    double gap = std::abs(P.values[0](0, 0) - std::sqrt(2.0));
    double secs = t.seconds();
    report(1, gap <= 1e-6 && secs < 1.0,
           "closed-form power P_0: |P_0 - sqrt(2)| = " + fmt(gap) + ", " + fmt(secs) + " s");
}

void criterion_2() {
    MarketModel m2 = single_regime(0.02, 0.06, 0.2, 2.0);
    RegimeField h2 = solve_log_h(m2, TimeGrid{1.0, 2000});
    double expect = std::exp(-2.0) + (1.0 - std::exp(-2.0)) / 2.0;
    double gap2 = std::abs(h2.values[0](0, 0) - expect);

    MarketModel m1 = single_regime(0.02, 0.06, 0.2, 1.0);
    RegimeField h1 = solve_log_h(m1, TimeGrid{1.0, 2000});
    double gap1 = (h1.values[0].array() - 1.0).abs().maxCoeff();

    report(2, gap2 <= 1e-8 && gap1 <= 1e-12,
           "log h closed forms: rho=2 gap " + fmt(gap2) + ", rho=1 gap " + fmt(gap1));
}

void criterion_3() {
    MarketModel m = single_regime(0.0, 0.04, 0.2, 0.0);
    RegimeField h = solve_exp_h_deterministic(m, TimeGrid{1.0, 2000});
    double gap = std::abs(h.values[0](0, 0) - 0.5);
    report(3, gap <= 1e-10, "exp deterministic h_0: |h_0 - 0.5| = " + fmt(gap));
}

MarketModel random_model(TestRng& rng, bool shared_r, bool shared_all, bool factor) {
    int ell = 1 + rng.uniform_int(3);
    MarketModel m;
    m.m = m.n = 1;
    m.horizon = 1.0;
    m.generator.ell = ell;
    m.generator.q = Mat::Zero(ell, ell);
    for (int i = 0; i < ell; ++i) {
        double row = 0.0;
        for (int j = 0; j < ell; ++j) {
            if (i == j) continue;
            double rate = rng.uniform(0.0, 2.0);
            m.generator.q(i, j) = rate;
            row += rate;
        }
        m.generator.q(i, i) = -row;
    }
    double r0 = rng.uniform(0.0, 0.05);
    double mu0 = r0 + rng.uniform(-0.08, 0.08);
    double sg0 = rng.uniform(0.15, 0.5);
    double min_sigma = sg0;
    m.coefficients.pieces.resize(static_cast<size_t>(ell));
    for (int i = 0; i < ell; ++i) {
        CoefficientPiece p;
        p.t_start = 0.0;
        p.r = shared_r || shared_all ? r0 : rng.uniform(0.0, 0.05);
        p.mu = Vec::Constant(1, shared_all ? mu0 : p.r + rng.uniform(-0.08, 0.08));
        double sg = shared_all ? sg0 : rng.uniform(0.15, 0.5);
        min_sigma = std::min(min_sigma, sg);
        p.sigma = Mat::Constant(1, 1, sg);
        p.rho = rng.uniform(-0.5, 1.0);
        m.coefficients.pieces[static_cast<size_t>(i)].push_back(p);
    }
    m.delta_floor = 0.5 * min_sigma * min_sigma;
    if (factor) {
        m.factor.enabled = true;
        m.factor.kappa = rng.uniform(0.5, 1.5);
        m.factor.theta = 0.0;
        m.factor.x0 = 0.0;
        m.factor.vol = Vec::Constant(1, rng.uniform(0.15, 0.35));
        m.factor.x_min = -1.5;
        m.factor.x_max = 1.5;
        m.factor.nodes = 31;
        double slope = rng.uniform(0.0, 0.04);
        m.coefficients.kind = CurveKind::AffineInFactor;
        for (auto& ps : m.coefficients.pieces)
            for (auto& p : ps) p.r_slope = slope;
    }
    return m;
}

void criterion_4() {
    Timer t;
    TestRng rng(2024);
    const int per_case = 50;
    TimeGrid grid{1.0, 400};
    ConstraintSet unc = unconstrained(1);
    std::string fail;

    for (int trial = 0; trial < per_case && fail.empty(); ++trial) {
        {   // power, gamma in (0,1)
            MarketModel m = random_model(rng, false, false, false);
            UtilityCaseSpec cs{Utility::Power, 0.5, 1.0, 1.0};
            BoundsReport b = compute_bounds(m, cs, &grid);
            RegimeField P = solve_power(m, 0.5, unc, grid);
            for (const auto& M : P.values)
                if (M.minCoeff() < b.sandwich_lo - 1e-6 || M.maxCoeff() > b.sandwich_hi + 1e-6)
                    fail = "power(0,1) sandwich, trial " + std::to_string(trial);
        }
        {   // power, gamma < 0
            MarketModel m = random_model(rng, false, false, false);
            UtilityCaseSpec cs{Utility::Power, -1.0, 1.0, 1.0};
            BoundsReport b = compute_bounds(m, cs, &grid);
            RegimeField P = solve_power(m, -1.0, unc, grid);
            for (const auto& M : P.values)
                if (M.minCoeff() < b.sandwich_lo - 1e-6 || M.maxCoeff() > b.sandwich_hi + 1e-6)
                    fail = "power(<0) sandwich, trial " + std::to_string(trial);
        }
        {   // log floor
            MarketModel m = random_model(rng, false, false, false);
            UtilityCaseSpec cs{Utility::Log, 0.5, 1.0, 1.0};
            BoundsReport b = compute_bounds(m, cs, &grid);
            RegimeField h = solve_log_h(m, grid);
            for (const auto& M : h.values)
                if (M.minCoeff() < b.sandwich_lo - 1e-6)
                    fail = "log floor, trial " + std::to_string(trial);
        }
        {   // exp deterministic: P-form in [eps, a]
            MarketModel m = random_model(rng, true, false, false);
            double beta = rng.uniform(0.5, 2.0);
            UtilityCaseSpec cs{Utility::ExpDet, 0.5, beta, 1.0};
            BoundsReport b = compute_bounds(m, cs, &grid);
            RegimeField h = solve_exp_h_deterministic(m, grid);
            RegimeField P = solve_exp_P_form(m, unc, beta, h, grid);
            for (const auto& M : P.values)
                if (M.minCoeff() < b.sandwich_lo - 1e-6 || M.maxCoeff() > b.sandwich_hi + 1e-6)
                    fail = "exp-det sandwich, trial " + std::to_string(trial);
        }
        {   // exp random: |P| <= k
            MarketModel m = random_model(rng, true, true, true);
            double beta = rng.uniform(0.5, 2.0);
            TimeGrid gr{1.0, 200};
            UtilityCaseSpec cs{Utility::ExpRandom, 0.5, beta, 1.0};
            BoundsReport b = compute_bounds(m, cs, &gr);
            ExpRandomH hr = solve_exp_h_random(m, gr);
            RegimeField P = solve_exp_P_random(m, beta, hr, gr, {}, &b);
            for (const auto& M : P.values)
                if (M.cwiseAbs().maxCoeff() > b.get("k") + 1e-6)
                    fail = "exp-random |P| <= k, trial " + std::to_string(trial);
        }
    }
    double secs = t.seconds();
    report(4, fail.empty() && secs < 60.0,
           fail.empty() ? "bound sandwiches on 50 random models per case, " + fmt(secs) + " s"
                        : fail);
}

void criterion_5() {
    TimeGrid grid{1.0, 2000};
    std::ostringstream detail;
    bool ok = true;

    {   // power: exp(Y-form) vs P-form
        MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.0, 0.05, 0.3, 0.2);
        RegimeField P = solve_power(m, 0.5, unconstrained(1), grid);
        RegimeField Y = solve_power_logform(m, 0.5, unconstrained(1), grid);
        double worst = 0.0;
        for (int i = 0; i < 2; ++i)
            worst = std::max(worst, (Y.values[i].array().exp() - P.values[i].array())
                                        .abs()
                                        .maxCoeff());
        ok = ok && worst <= 1e-5;
        detail << "power " << fmt(worst);
    }
    {   // exp deterministic: e^{-beta Y} vs P-form
        MarketModel m = two_regime(0.7, 0.02, 0.06, 0.2, 0.1, 0.02, 0.04, 0.3, 0.4);
        RegimeField h = solve_exp_h_deterministic(m, grid);
        RegimeField Y = solve_exp_Y(m, unconstrained(1), 1.0, h, grid);
        RegimeField P = solve_exp_P_form(m, unconstrained(1), 1.0, h, grid);
        double worst = 0.0;
        for (int i = 0; i < 2; ++i)
            worst = std::max(worst, ((-Y.values[i].array()).exp() - P.values[i].array())
                                        .abs()
                                        .maxCoeff());
        ok = ok && worst <= 1e-5;
        detail << ", exp-det " << fmt(worst);
    }
    {   // exp random: h p = 1 and Y = h P
        MarketModel m = two_regime(0.6, 0.02, 0.06, 0.2, 0.1, 0.02, 0.06, 0.2, 0.4);
        enable_flat_factor(m, 0.25, 1.0, 0.03, 0.0, 31);
        ExpRandomH hr = solve_exp_h_random(m, grid, SolveOptions{3, true});
        double worst_hp = 0.0;
        for (int k = 0; k <= grid.N; ++k)
            for (int j = 0; j < hr.p.nx(); ++j)
                worst_hp = std::max(worst_hp, std::abs(hr.h.values[0](k, j) *
                                                           hr.p.values[0](k, j) -
                                                       1.0));
        RegimeField P = solve_exp_P_random(m, 1.0, hr, grid, SolveOptions{3, true});
        RegimeField Y = solve_exp_Y_random(m, 1.0, hr, grid, SolveOptions{3, true});
        double worst = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int k = 0; k <= grid.N; ++k)
                for (int j = 0; j < P.nx(); ++j)
                    worst = std::max(worst, std::abs(hr.h.values[0](k, j) * P.values[i](k, j) -
                                                     Y.values[i](k, j)));
        ok = ok && worst_hp <= 1e-12 && worst <= 1e-5;
        detail << ", hp-1 " << fmt(worst_hp) << ", Y-hP " << fmt(worst);
    }
    report(5, ok, "transform consistency: " + detail.str());
}

void criterion_6() {
    Timer t;
    TestRng rng(7001);
    long checked = 0;
    std::string fail;
    double worst_val = 0.0, worst_arg = 0.0;
    for (Utility util : {Utility::Power, Utility::Log, Utility::ExpDet}) {
        for (Family fam : {Family::Unconstrained, Family::NoShorting, Family::Box,
                           Family::BudgetSimplex, Family::HalfSpace}) {
            for (int trial = 0; trial < 200; ++trial) {
                HamiltonianInstance inst = random_instance(rng, util, fam);
                OracleCheck chk = oracle_check(inst, util);
                ++checked;
                worst_val = std::max(worst_val, chk.value_gap_rel);
                worst_arg = std::max(worst_arg, chk.argmax_objective_gap);
                if (!chk.boxed || chk.value_gap_rel > 1e-4 ||
                    chk.argmax_objective_gap > 1e-6) {
                    fail = "utility " + utility_name(util) + ", family " + family_name(fam) +
                           ", trial " + std::to_string(trial) + ": value gap " +
                           fmt(chk.value_gap_rel) + ", argmax gap " +
                           fmt(chk.argmax_objective_gap);
                    break;
                }
            }
            if (!fail.empty()) break;
        }
        if (!fail.empty()) break;
    }
    report(6, fail.empty(),
           fail.empty() ? std::to_string(checked) + " oracle checks, worst value gap " +
                              fmt(worst_val) + ", worst argmax gap " + fmt(worst_arg) + ", " +
                              fmt(t.seconds()) + " s"
                        : fail);
}

void criterion_7() {
    MarketModel m = single_regime(0.02, 0.06, 0.2, 0.0);
    ConstraintSet unc = unconstrained(1);
    TimeGrid grid{1.0, 1000};   // grid step 1e-3 = sim dt
    SimConfig cfg;
    cfg.n_paths = 100000;
    cfg.seed = 42;
    cfg.dt = 1e-3;
    cfg.threads = 2;
    bool ok = true;
    std::ostringstream detail;

    auto run_case = [&](Utility util, const SolvedFields& f, const char* tag) {
        Timer t;
        FeedbackStrategy s = extract_strategy(m, unc, f);
        double analytic = value_at(m, f, 1.0, 0).value;
        SimResult r = simulate_wealth(m, s, 1.0, 0, cfg);
        bool within = std::abs(r.mean - analytic) <= 3.0 * r.se && r.excluded == 0;

        Control c0 = s.at(0.0, 0, 1.0);
        double cbar = util == Utility::ExpDet ? 0.8 * c0.c : 0.5 * c0.c;
        std::vector<Perturbation> perts{{Perturbation::Kind::ScalePi, 0.8},
                                        {Perturbation::Kind::ConstC, cbar}};
        PerturbationReport pr = perturbation_test(m, s, perts, 1.0, 0, cfg);
        bool strict = true;
        for (const auto& row : pr.rows)
            strict = strict && !row.rejected && row.diff_mean < -3.0 * row.diff_se;
        double secs = t.seconds();
        ok = ok && within && strict && secs < 120.0;
        detail << tag << " |MC-V|/se " << fmt(std::abs(r.mean - analytic) / r.se) << " ("
               << fmt(secs) << " s) ";
        if (!strict)
            for (const auto& row : pr.rows)
                detail << "[" << row.label << " diff " << fmt(row.diff_mean) << " se "
                       << fmt(row.diff_se) << "]";
    };

    {
        SolvedFields f;
        f.utility = Utility::Power;
        f.gamma = 0.5;
        f.main = solve_power(m, 0.5, unc, grid);
        run_case(Utility::Power, f, "power");
    }
    {
        SolvedFields f;
        f.utility = Utility::Log;
        f.aux = solve_log_h(m, grid);
        f.main = solve_log_P(m, unc, f.aux, grid);
        run_case(Utility::Log, f, "log");
    }
    {
        SolvedFields f;
        f.utility = Utility::ExpDet;
        f.beta = 1.0;
        f.aux = solve_exp_h_deterministic(m, grid);
        f.main = solve_exp_Y(m, unc, 1.0, f.aux, grid);
        run_case(Utility::ExpDet, f, "exp");
    }
    report(7, ok, "MC verification at 1e5 paths: " + detail.str());
}

void criterion_8() {
    MarketModel m = single_regime(0.02, 0.06, 0.2, 0.0);
    TimeGrid grid{1.0, 1000};
    double eps = 0.3;

    ConstraintSet bx = box(Vec::Zero(1), Vec::Constant(1, 0.3), 0.0, 0.5);
    ConstraintSet sx = budget_simplex(1);
    ConstraintSet un = unconstrained(1);
    for (ConstraintSet* t : {&bx, &sx, &un}) t->epsilon = eps;
    ConstraintSet bxe = box(Vec::Constant(1, -0.1), Vec::Constant(1, 0.3), 0.0, 1.0);

    bool ok = true;
    std::ostringstream detail;
    auto chain = [&](const char* tag, double vb, double vs, double vu, bool expect_strict) {
        bool mono = vb <= vs + 1e-9 && vs <= vu + 1e-9;
        bool strict = !expect_strict || vu > vs + 1e-6;
        ok = ok && mono && strict;
        detail << tag << " [" << fmt(vb) << " <= " << fmt(vs) << " <= " << fmt(vu) << "] ";
    };

    for (double gamma : {0.5, -1.0}) {
        auto value = [&](const ConstraintSet& t) {
            SolvedFields f;
            f.utility = Utility::Power;
            f.gamma = gamma;
            f.main = solve_power(m, gamma, t, grid);
            return value_at(m, f, 1.0, 0).value;
        };
        chain(gamma > 0 ? "power(0.5)" : "power(-1)", value(bx), value(sx), value(un), true);
    }
    {
        auto value = [&](const ConstraintSet& t) {
            SolvedFields f;
            f.utility = Utility::Log;
            f.aux = solve_log_h(m, grid);
            f.main = solve_log_P(m, t, f.aux, grid);
            return value_at(m, f, 1.0, 0).value;
        };
        chain("log", value(bx), value(sx), value(un), true);
    }
    {
        auto value = [&](const ConstraintSet& t) {
            SolvedFields f;
            f.utility = Utility::ExpDet;
            f.beta = 1.0;
            f.aux = solve_exp_h_deterministic(m, grid);
            f.main = solve_exp_Y(m, t, 1.0, f.aux, grid);
            return value_at(m, f, 1.0, 0).value;
        };
        chain("exp", value(bxe), value(sx), value(un), true);
    }
    report(8, ok, "constraint monotonicity: " + detail.str());
}

void criterion_9() {
    TestRng rng(31415);
    TimeGrid grid{1.0, 200};
    int ordered = 0;
    std::string fail;
    for (int trial = 0; trial < 100; ++trial) {
        int ell = 1 + rng.uniform_int(3);
        Mat B0(ell, ell);
        for (int i = 0; i < ell; ++i)
            for (int j = 0; j < ell; ++j)
                B0(i, j) = i == j ? rng.uniform(-2.0, 0.5) : rng.uniform(0.0, 1.5);
        Vec alpha(ell), shift(ell), term(ell);
        for (int i = 0; i < ell; ++i) {
            alpha[i] = rng.uniform(-1.0, 1.0);
            shift[i] = rng.uniform(0.0, 1.0);
            term[i] = rng.uniform(-1.0, 1.0);
        }
        LinearBsdeSpec A{ell, [alpha](double) { return alpha; },
                         [B0](double) { return B0; }, term};
        LinearBsdeSpec B{ell, [alpha, shift](double) { return Vec(alpha + shift); },
                         [B0](double) { return B0; },
                         Vec(term.array() + rng.uniform(0.0, 0.5))};
        OrderingReport rep = check_comparison(A, B, grid);
        if (!rep.ordered) {
            fail = "pair " + std::to_string(trial) + " violates the ordering by " +
                   fmt(rep.max_excess);
            break;
        }
        ++ordered;
    }
    report(9, fail.empty(),
           fail.empty() ? std::to_string(ordered) + " random comparison pairs ordered" : fail);
}

void criterion_10() {
    MarketModel mo = single_regime(0.02, 0.06, 0.2, 0.0);
    MarketModel mf = mo;
    enable_flat_factor(mf, 0.3, 1.0, 0.0, 0.0, 31);
    TimeGrid grid{1.0, 2000};
    RegimeField Po = solve_power(mo, 0.5, unconstrained(1), grid);
    RegimeField Pf = solve_power(mf, 0.5, unconstrained(1), grid, SolveOptions{3, true});
    double spread = 0.0, gap = 0.0;
    for (int k = 0; k <= grid.N; ++k) {
        spread = std::max(spread,
                          Pf.values[0].row(k).maxCoeff() - Pf.values[0].row(k).minCoeff());
        gap = std::max(gap, std::abs(Pf.values[0](k, 15) - Po.values[0](k, 0)));
    }

    // log pipeline under the same degeneracy
    RegimeField ho = solve_log_h(mo, grid);
    RegimeField hf = solve_log_h(mf, grid, SolveOptions{3, true});
    double gap_h = 0.0;
    for (int k = 0; k <= grid.N; ++k)
        gap_h = std::max(gap_h, std::abs(hf.values[0](k, 15) - ho.values[0](k, 0)));

    report(10, spread <= 1e-8 && gap <= 1e-6 && gap_h <= 1e-6,
           "factor degeneracy: spread " + fmt(spread) + ", power gap " + fmt(gap) +
               ", log-h gap " + fmt(gap_h));
}

int run_cli(const std::string& cmd) {
    int rc = std::system(cmd.c_str());
    if (rc < 0) return -1;
    return WEXITSTATUS(rc);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void criterion_11(const std::string& cli) {
    namespace fs = std::filesystem;
    if (cli.empty()) {
        report(11, false, "no --cli binary supplied");
        return;
    }
    fs::path work = fs::temp_directory_path() / "rsci_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    fs::path cfg = work / "model.json";
    {
        std::ofstream os(cfg);
        os << R"({
  "horizon": 1.0,
  "assets": {"m": 1, "n": 1},
  "delta": 0.01,
  "generator": [[-1.0, 1.0], [1.0, -1.0]],
  "regimes": [
    {"r": 0.02, "mu": [0.06], "sigma": [[0.2]], "rho": 0.0},
    {"r": 0.02, "mu": [0.06], "sigma": [[0.2]], "rho": 0.0}
  ],
  "constraints": {"family": "unconstrained"},
  "utility": {"kind": "power", "gamma": 0.5},
  "grid": {"n": 1000},
  "sim": {"paths": 20000, "seed": 42, "dt": 0.001, "threads": 2},
  "x0": 1.0,
  "i0": 1
})";
    }
    std::string quiet = " > " + (work / "log.txt").string() + " 2>&1";
    int rc1 = run_cli(cli + " verify --model " + cfg.string() + " --out " +
                      (work / "a").string() + quiet);
    int rc2 = run_cli(cli + " verify --model " + cfg.string() + " --out " +
                      (work / "b").string() + quiet);
    bool ok = rc1 == 0 && rc2 == 0;
    std::string detail = "verify exit codes " + std::to_string(rc1) + "/" +
                         std::to_string(rc2);
    if (ok) {
        int compared = 0;
        for (const auto& e : fs::directory_iterator(work / "a")) {
            fs::path other = work / "b" / e.path().filename();
            if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
                ok = false;
                detail += ", artifact " + e.path().filename().string() + " differs";
                break;
            }
            ++compared;
        }
        if (ok) detail += ", " + std::to_string(compared) + " artifacts byte-identical";
    }
    report(11, ok, detail);
}

} // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

    Timer total;
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(cli);
    std::printf("%d/11 criteria passed in %.1f s\n", 11 - g_failures, total.seconds());
    return g_failures == 0 ? 0 : 1;
}
