#pragma once

#include "rsci/types.hpp"

#include <optional>
#include <vector>

namespace rsci {

// ============================================================================
// Market model: regime chain generator, per-regime coefficient curves and an
// optional one-dimensional mean-reverting factor driving r and mu.
// ============================================================================

/// Generator matrix of the continuous-time regime chain.
struct RegimeGenerator {
    int ell = 1;   // number of regimes
    Mat q;         // ell x ell, off-diagonals >= 0, rows sum to 0
};

/// One piece of a right-continuous step curve. Values hold for
/// t in [t_start, next piece). Slopes are the affine factor sensitivities
/// of r and mu; they are zero for purely piecewise-constant curves.
struct CoefficientPiece {
    double t_start = 0.0;
    double r = 0.0;
    Vec mu;          // length m
    Mat sigma;       // m x n
    double rho = 0.0;
    double r_slope = 0.0;
    Vec mu_slope;    // length m, zero when absent
};

enum class CurveKind { PiecewiseConstant, AffineInFactor };

struct CoefficientCurve {
    CurveKind kind = CurveKind::PiecewiseConstant;
    // pieces[i] is the sorted piece list of regime i; pieces[i][0].t_start == 0
    std::vector<std::vector<CoefficientPiece>> pieces;

    const CoefficientPiece& piece_at(int regime, double t) const;
};

/// One-dimensional mean-reverting diffusion dX = kappa*(theta - X)dt + vol'dW.
struct FactorSpec {
    bool enabled = false;
    double kappa = 0.0;
    double theta = 0.0;
    double x0 = 0.0;
    Vec vol;            // length n
    double x_min = -1.0;
    double x_max = 1.0;
    int nodes = 41;
};

struct MarketModel {
    RegimeGenerator generator;
    int m = 1;                   // risky assets
    int n = 1;                   // Brownian dimensions, m <= n
    double horizon = 1.0;
    double delta_floor = 1e-4;   // ellipticity constant: sigma*sigma' >= delta*I
    CoefficientCurve coefficients;
    FactorSpec factor;

    int ell() const { return generator.ell; }
};

/// Coefficient tuple at a point; b = mu - r*1 is derived here, never stored.
struct CoefficientSet {
    double r = 0.0;
    Vec mu;
    Mat sigma;
    Vec b;
    double rho = 0.0;
};

enum class AssumptionMode { PowerLog, ExpDeterministic, ExpRandom };

struct Violation {
    std::string message;
    int regime = -1;   // 1-based where applicable, -1 otherwise
    int piece = -1;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool passed() const { return violations.empty(); }
    bool mentions(const std::string& needle) const;
    std::string to_string() const;
};

/// Checks the standing assumptions for the requested utility mode. Violations
/// are report entries, never exceptions.
ValidationReport validate_model(const MarketModel& model, AssumptionMode mode);

/// Evaluates the coefficient curves at (t, regime, x). Pass x iff the factor
/// is enabled. Throws std::domain_error on out-of-range t or regime.
CoefficientSet coeff_at(const MarketModel& model, double t, int regime,
                        std::optional<double> x = std::nullopt);

/// Uniform grid of the factor dimension (size FactorSpec::nodes).
Vec factor_grid(const FactorSpec& f);

} // namespace rsci
