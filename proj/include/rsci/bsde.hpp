#pragma once

#include "rsci/constraints.hpp"
#include "rsci/market.hpp"

#include <functional>
#include <vector>

namespace rsci {

// ============================================================================
// Coupled regime-indexed backward systems. With deterministic per-regime
// coefficients the systems are backward ODEs (gradients vanish); with the
// factor enabled they are one-factor backward PDEs solved by a theta-scheme.
// ============================================================================

struct TimeGrid {
    double T = 1.0;
    int N = 2;

    double dt() const { return T / N; }
    double node(int k) const { return T * static_cast<double>(k) / N; }
};

/// Numerical solution of one backward system: a scalar field per regime on
/// the time (x factor) grid plus the d/dx slope field used to reconstruct the
/// martingale integrand (Lambda/Z/eta = factor_vol * slope).
struct RegimeField {
    TimeGrid grid;
    int ell = 1;
    bool has_factor = false;
    Vec factor_nodes;            // size nx; {0} in ODE mode
    std::vector<Mat> values;     // per regime, (N+1) x nx
    std::vector<Mat> slope_x;    // per regime, (N+1) x nx; zero in ODE mode

    int nx() const { return static_cast<int>(factor_nodes.size()); }

    // node-level access, linear interpolation in the factor dimension
    double value_at(int k, int regime, double x) const;
    double slope_at(int k, int regime, double x) const;
    // left-node rule in time is applied by callers; these interpolate in t
    double value_tx(double t, int regime, double x) const;
    double slope_tx(double t, int regime, double x) const;

    int left_node(double t) const;
};

RegimeField make_field(const TimeGrid& grid, int ell, bool has_factor, const Vec& nodes);

/// CSV serialization: columns t, regime, [factor], value, grad_1..grad_n.
std::string field_to_csv(const RegimeField& f, const Vec& factor_vol);

struct UtilityCaseSpec {
    Utility kind = Utility::Power;
    double gamma = 0.5;
    double beta = 1.0;
    double epsilon = 1.0;   // the constraint set's declared epsilon (gamma < 0)
};

/// A-priori bound constants of the case, from the comparison arguments.
struct BoundsReport {
    std::string case_tag;
    std::vector<std::pair<std::string, double>> constants;
    double sandwich_lo = -std::numeric_limits<double>::infinity();
    double sandwich_hi = std::numeric_limits<double>::infinity();

    double get(const std::string& name) const;
};

BoundsReport compute_bounds(const MarketModel& model, const UtilityCaseSpec& spec,
                            const TimeGrid* grid = nullptr);

/// Re-evaluates each defining inequality on the grid; returns violations.
std::vector<std::string> recheck_bounds(const MarketModel& model, const UtilityCaseSpec& spec,
                                        const BoundsReport& rep,
                                        const TimeGrid* grid = nullptr);

struct SolveOptions {
    // Fixed-point sweeps per theta-scheme step: the predictor evaluates the
    // generator at the previous time level; each sweep re-centers it on the
    // trapezoidal average (second order in dt). 1 is the working default,
    // 3 for demanding cross-checks.
    int picard = 1;
    bool check_envelope = true;  // stability envelope guard
};

// --- power utility -----------------------------------------------------

RegimeField solve_power(const MarketModel& model, double gamma, const ConstraintSet& theta,
                        const TimeGrid& grid, const SolveOptions& opts = {});

RegimeField solve_power_logform(const MarketModel& model, double gamma,
                                const ConstraintSet& theta, const TimeGrid& grid,
                                const SolveOptions& opts = {});

/// Generator of the log-transformed power system; non-increasing in Y.
double power_logform_F(const ConstraintSet& theta, double gamma, double Y, const Vec& Z,
                       const CoefficientSet& coeffs);

// --- logarithmic utility -----------------------------------------------

RegimeField solve_log_h(const MarketModel& model, const TimeGrid& grid,
                        const SolveOptions& opts = {});

RegimeField solve_log_P(const MarketModel& model, const ConstraintSet& theta,
                        const RegimeField& h_field, const TimeGrid& grid,
                        const SolveOptions& opts = {});

// --- exponential utility, deterministic rate ----------------------------

/// Closed-form evaluation of the deterministic h curve on the grid (ell = 1).
RegimeField solve_exp_h_deterministic(const MarketModel& model, const TimeGrid& grid);

RegimeField solve_exp_Y(const MarketModel& model, const ConstraintSet& Pi, double beta,
                        const RegimeField& h_curve, const TimeGrid& grid,
                        const SolveOptions& opts = {});

/// The multiplicative form of the same system (terminal value 1).
RegimeField solve_exp_P_form(const MarketModel& model, const ConstraintSet& Pi, double beta,
                             const RegimeField& h_curve, const TimeGrid& grid,
                             const SolveOptions& opts = {});

// --- exponential utility, random rate ------------------------------------

struct ExpRandomH {
    RegimeField h;   // ell = 1, factor field; slope gives eta = vol * dh/dx
    RegimeField p;   // reciprocal field, p = 1/h
    double p_min = 0.0;
    double p_max = 0.0;
};

ExpRandomH solve_exp_h_random(const MarketModel& model, const TimeGrid& grid,
                              const SolveOptions& opts = {});

RegimeField solve_exp_P_random(const MarketModel& model, double beta, const ExpRandomH& hr,
                               const TimeGrid& grid, const SolveOptions& opts = {},
                               const BoundsReport* bounds = nullptr);

RegimeField solve_exp_Y_random(const MarketModel& model, double beta, const ExpRandomH& hr,
                               const TimeGrid& grid, const SolveOptions& opts = {});

// --- comparison lemma ----------------------------------------------------

/// Linear ell-dimensional system dY = -[alpha(t) + B(t) Y]dt + Z'dW, Y_T given.
struct LinearBsdeSpec {
    int ell = 1;
    std::function<Vec(double)> alpha;
    std::function<Mat(double)> coupling;
    Vec terminal;
};

struct OrderingReport {
    bool ordered = false;
    double max_excess = 0.0;   // max over nodes of Y_A - Y_B (<= tol when ordered)
    double min_gap = 0.0;      // min over nodes of Y_B - Y_A
    Vec gap_t0;                // Y_B - Y_A at the first node, per regime
    int worst_node = -1;
    int worst_regime = -1;
};

/// Checks the comparison-lemma hypotheses, solves both systems and verifies
/// Y_A <= Y_B + 1e-8 at every node. Hypothesis failures raise
/// PreconditionError.
OrderingReport check_comparison(const LinearBsdeSpec& A, const LinearBsdeSpec& B,
                                const TimeGrid& grid);

/// Explicit-coupling step-size rule dt <= 0.1 / max_i |q_ii|.
void check_step_rule(const MarketModel& model, const TimeGrid& grid);

} // namespace rsci
