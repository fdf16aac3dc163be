#pragma once

#include "rsci/market.hpp"
#include "rsci/constraints.hpp"

#include <cmath>

namespace rsci::testing {

/// Single-regime model, m = n = 1, constant coefficients.
inline MarketModel single_regime(double r, double mu, double sigma, double rho,
                                 double T = 1.0) {
    MarketModel m;
    m.m = m.n = 1;
    m.horizon = T;
    m.delta_floor = 0.5 * sigma * sigma;
    m.generator.ell = 1;
    m.generator.q = Mat::Zero(1, 1);
    CoefficientPiece p;
    p.t_start = 0.0;
    p.r = r;
    p.mu = Vec::Constant(1, mu);
    p.sigma = Mat::Constant(1, 1, sigma);
    p.rho = rho;
    m.coefficients.pieces = {{p}};
    return m;
}

/// Two regimes with a symmetric switching rate.
inline MarketModel two_regime(double rate, double r1, double mu1, double sigma1, double rho1,
                              double r2, double mu2, double sigma2, double rho2,
                              double T = 1.0) {
    MarketModel m;
    m.m = m.n = 1;
    m.horizon = T;
    m.delta_floor = 0.5 * std::min(sigma1 * sigma1, sigma2 * sigma2);
    m.generator.ell = 2;
    m.generator.q = Mat(2, 2);
    m.generator.q << -rate, rate, rate, -rate;
    auto mk = [](double r, double mu, double sg, double rho) {
        CoefficientPiece p;
        p.t_start = 0.0;
        p.r = r;
        p.mu = Vec::Constant(1, mu);
        p.sigma = Mat::Constant(1, 1, sg);
        p.rho = rho;
        return p;
    };
    m.coefficients.pieces = {{mk(r1, mu1, sigma1, rho1)}, {mk(r2, mu2, sigma2, rho2)}};
    return m;
}

inline void enable_flat_factor(MarketModel& m, double vol, double kappa = 1.0,
                               double r_slope = 0.0, double mu_slope = 0.0, int nodes = 41,
                               double span = 1.5) {
    m.factor.enabled = true;
    m.factor.kappa = kappa;
    m.factor.theta = 0.0;
    m.factor.x0 = 0.0;
    m.factor.vol = Vec::Constant(m.n, vol);
    m.factor.x_min = -span;
    m.factor.x_max = span;
    m.factor.nodes = nodes;
    if (r_slope != 0.0 || mu_slope != 0.0) {
        m.coefficients.kind = CurveKind::AffineInFactor;
        for (auto& ps : m.coefficients.pieces)
            for (auto& p : ps) {
                p.r_slope = r_slope;
                p.mu_slope = Vec::Constant(m.m, mu_slope);
            }
    }
}

inline ConstraintSet unconstrained(int m = 1) {
    ConstraintSet t;
    t.m = m;
    t.family = Family::Unconstrained;
    return t;
}

inline ConstraintSet no_shorting(int m = 1) {
    ConstraintSet t;
    t.m = m;
    t.family = Family::NoShorting;
    return t;
}

inline ConstraintSet budget_simplex(int m = 1) {
    ConstraintSet t;
    t.m = m;
    t.family = Family::BudgetSimplex;
    return t;
}

inline ConstraintSet box(const Vec& lo, const Vec& hi, double c_lo, double c_hi) {
    ConstraintSet t;
    t.m = static_cast<int>(lo.size());
    t.family = Family::Box;
    t.box_lo = lo;
    t.box_hi = hi;
    t.c_lo = c_lo;
    t.c_hi = c_hi;
    t.epsilon = std::min(1.0, c_hi);
    if (!(t.epsilon > 0.0)) t.epsilon = c_hi;
    return t;
}

inline ConstraintSet half_space(const Vec& a, double a0, double beta0) {
    ConstraintSet t;
    t.m = static_cast<int>(a.size());
    t.family = Family::HalfSpace;
    t.hs_a = a;
    t.hs_a0 = a0;
    t.hs_beta0 = beta0;
    t.epsilon = a0 > 0.0 ? std::min(1.0, beta0 / a0) : 1.0;
    return t;
}

inline CoefficientSet coeffs1(double r, double mu, double sigma, double rho = 0.0) {
    CoefficientSet c;
    c.r = r;
    c.mu = Vec::Constant(1, mu);
    c.sigma = Mat::Constant(1, 1, sigma);
    c.rho = rho;
    c.b = c.mu - Vec::Constant(1, r);
    return c;
}

} // namespace rsci::testing
