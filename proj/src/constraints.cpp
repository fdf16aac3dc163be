#include "rsci/constraints.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace rsci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string family_name(Family f) {
    switch (f) {
        case Family::Unconstrained: return "unconstrained";
        case Family::NoShorting: return "no-shorting";
        case Family::Box: return "box";
        case Family::BudgetSimplex: return "budget-simplex";
        case Family::HalfSpace: return "half-space";
    }
    return "?";
}

Family family_from_name(const std::string& s) {
    if (s == "unconstrained") return Family::Unconstrained;
    if (s == "no-shorting") return Family::NoShorting;
    if (s == "box") return Family::Box;
    if (s == "budget-simplex") return Family::BudgetSimplex;
    if (s == "half-space") return Family::HalfSpace;
    throw ConfigError("unknown constraint family: " + s);
}

bool ConstraintSet::contains(Eigen::Ref<const Vec> pi, double c, double tol) const {
    if (pi.size() != m) return false;
    if (c < -tol) return false;
    switch (family) {
        case Family::Unconstrained:
            return true;
        case Family::NoShorting:
            return (pi.array() >= -tol).all();
        case Family::Box:
            return (pi.array() >= box_lo.array() - tol).all() &&
                   (pi.array() <= box_hi.array() + tol).all() && c >= c_lo - tol &&
                   c <= c_hi + tol;
        case Family::BudgetSimplex:
            return pi.sum() + c <= 1.0 + tol;
        case Family::HalfSpace:
            return hs_a.dot(pi) + hs_a0 * c <= hs_beta0 + tol;
    }
    return false;
}

bool ConstraintSet::contains_pi(Eigen::Ref<const Vec> pi, double tol) const {
    if (pi.size() != m) return false;
    switch (family) {
        case Family::Unconstrained:
            return true;
        case Family::NoShorting:
            return (pi.array() >= -tol).all();
        case Family::Box:
            return (pi.array() >= box_lo.array() - tol).all() &&
                   (pi.array() <= box_hi.array() + tol).all();
        case Family::BudgetSimplex:
            return pi.sum() <= 1.0 + tol;
        case Family::HalfSpace:
            return hs_a.dot(pi) <= hs_beta0 + tol;
    }
    return false;
}

namespace {

// Projection onto { u'x <= rhs, x_c >= cl } where x = (pi, c) and u = (a, a0).
// Enumerates the KKT active sets and takes the closest feasible candidate.
// Candidate feasibility is judged with a magnitude-scaled tolerance (the
// active-set formulas land on their hyperplanes only up to rounding), and the
// winner is snapped back onto the set exactly.
void project_two_halfspaces(Vec& pi, double& c, const Vec& a, double a0, double rhs,
                            double cl) {
    const Vec p0 = pi;
    const double q0 = c;
    const double feas_tol = 1e-12 * (1.0 + p0.cwiseAbs().maxCoeff() + std::abs(q0));
    auto feasible = [&](const Vec& p, double q) {
        return a.dot(p) + a0 * q <= rhs + feas_tol && q >= cl - feas_tol;
    };
    double best = kInf;
    Vec best_pi = pi;
    double best_c = std::max(c, cl);
    auto consider = [&](const Vec& p, double q) {
        if (!feasible(p, q)) return;
        double d = (p - p0).squaredNorm() + (q - q0) * (q - q0);
        if (d < best) {
            best = d;
            best_pi = p;
            best_c = q;
        }
    };

    const double denom = a.squaredNorm() + a0 * a0;
    consider(p0, q0);
    { // budget active
        double lam = (a.dot(p0) + a0 * q0 - rhs) / denom;
        consider(p0 - lam * a, q0 - lam * a0);
    }
    consider(p0, cl); // floor active
    { // both active
        double lam = (a.dot(p0) - (rhs - a0 * cl)) / a.squaredNorm();
        consider(p0 - lam * a, cl);
    }
    pi = best_pi;
    c = std::max(best_c, cl);
    double viol = a.dot(pi) + a0 * c - rhs;
    if (viol > 0.0) {
        pi -= (viol / denom) * a;
        c -= (viol / denom) * a0;
        if (c < cl) {
            c = cl;
            double v2 = a.dot(pi) - (rhs - a0 * cl);
            if (v2 > 0.0) pi -= (v2 / a.squaredNorm()) * a;
        }
    }
}

} // namespace

void ConstraintSet::project(Vec& pi, double& c, double c_floor) const {
    const double cl = std::max({0.0, c_floor, family == Family::Box ? c_lo : 0.0});
    switch (family) {
        case Family::Unconstrained:
        case Family::NoShorting:
            if (family == Family::NoShorting) pi = pi.cwiseMax(0.0);
            c = std::max(c, cl);
            return;
        case Family::Box:
            pi = pi.cwiseMax(box_lo).cwiseMin(box_hi);
            c = std::min(std::max(c, cl), c_hi);
            return;
        case Family::BudgetSimplex:
            project_two_halfspaces(pi, c, Vec::Ones(m), 1.0, 1.0, cl);
            return;
        case Family::HalfSpace:
            project_two_halfspaces(pi, c, hs_a, hs_a0, hs_beta0, cl);
            return;
    }
}

void ConstraintSet::project_pi(Vec& pi) const {
    switch (family) {
        case Family::Unconstrained:
            return;
        case Family::NoShorting:
            pi = pi.cwiseMax(0.0);
            return;
        case Family::Box:
            pi = pi.cwiseMax(box_lo).cwiseMin(box_hi);
            return;
        case Family::BudgetSimplex: {
            double s = pi.sum();
            if (s > 1.0) pi.array() -= (s - 1.0) / m;
            return;
        }
        case Family::HalfSpace: {
            double s = hs_a.dot(pi);
            if (s > hs_beta0) pi -= ((s - hs_beta0) / hs_a.squaredNorm()) * hs_a;
            return;
        }
    }
}

double ConstraintSet::sup_c_at_zero_pi() const {
    switch (family) {
        case Family::Unconstrained:
        case Family::NoShorting:
            return kInf;
        case Family::Box:
            return c_hi;
        case Family::BudgetSimplex:
            return 1.0;
        case Family::HalfSpace:
            return hs_a0 > 0.0 ? hs_beta0 / hs_a0 : kInf;
    }
    return kInf;
}

bool ConstraintSet::is_singleton() const {
    if (family != Family::Box) return false;
    return box_lo == box_hi && c_lo == c_hi;
}

void check_mode_support(const ConstraintSet& theta, Utility mode, double gamma) {
    if (theta.m < 1) throw ConfigError("constraint set has invalid asset dimension");
    if (theta.family == Family::Box) {
        if (theta.box_lo.size() != theta.m || theta.box_hi.size() != theta.m)
            throw ConfigError("box constraint bounds must have length m");
        if ((theta.box_lo.array() > theta.box_hi.array()).any() || theta.c_lo > theta.c_hi)
            throw ConfigError("box constraint is empty (lo > hi)");
    }
    if (theta.family == Family::HalfSpace) {
        if (theta.hs_a.size() != theta.m || theta.hs_a.norm() == 0.0)
            throw ConfigError("half-space normal must be a nonzero length-m vector");
    }

    const Vec zero = Vec::Zero(theta.m);
    switch (mode) {
        case Utility::Power:
            if (gamma > 0.0 && gamma < 1.0) {
                if (!theta.contains(zero, 0.0, 1e-12))
                    throw ConfigError("power gamma in (0,1) requires (0, 0) in Theta");
            } else {
                if (!(theta.epsilon > 0.0) || !theta.contains(zero, theta.epsilon, 1e-12))
                    throw ConfigError(
                        "power gamma < 0 requires (0, epsilon) in Theta with epsilon > 0");
            }
            break;
        case Utility::Log:
            if (!(theta.epsilon > 0.0) || !theta.contains(zero, theta.epsilon, 1e-12))
                throw ConfigError("log utility requires (0, epsilon) in Theta with epsilon > 0");
            break;
        case Utility::ExpDet:
        case Utility::ExpRandom:
            if (!theta.contains_pi(zero, 1e-12))
                throw ConfigError("exponential utility requires 0 in Pi");
            break;
    }
}

// ---------------------------------------------------------------------------
// Projected gradient ascent with backtracking line search. The objectives are
// strictly concave on the feasible set, so the converged point is the argmax.
// ---------------------------------------------------------------------------

namespace {

struct PgOut {
    Vec x;
    int iters = 0;
};

template <class Obj, class Grad, class Proj>
PgOut pg_ascent(Vec x0, Obj&& obj, Grad&& grad, Proj&& project, int max_iter = 10000,
                double tol = 1e-10) {
    Vec x = x0;
    project(x);
    double fx = obj(x);
    double step = 1.0;
    int it = 0;
    for (; it < max_iter; ++it) {
        Vec g = grad(x);
        double gn = g.norm();
        if (!std::isfinite(gn)) throw SolverError("hamiltonian: non-finite gradient");
        if (gn > 1e8) g *= 1e8 / gn;   // cap magnitude; direction is what matters

        Vec probe = x + g;
        project(probe);
        if ((x - probe).norm() <= tol) break;

        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        for (int ls = 0; ls < 120; ++ls) {
            Vec xn = x + step * g;
            project(xn);
            double fn = obj(xn);
            double dir = g.dot(xn - x);
            if (std::isfinite(fn) && fn >= fx + 1e-4 * dir && fn > fx - 1e-18) {
                x = std::move(xn);
                fx = fn;
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step * gn < 1e-18 * (1.0 + x.norm())) break;
        }
        if (!accepted) break;   // step underflow: stationary up to rounding
    }
    return {x, it};
}

Vec solve_spd(const Mat& A, const Vec& rhs) {
    return A.llt().solve(rhs);
}

} // namespace

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

HamiltonianResult power_hamiltonian(const ConstraintSet& theta, double gamma, double P,
                                    const Vec& Lambda, const CoefficientSet& coeffs,
                                    const HamiltonianResult* warm) {
    if (!(P > 0.0)) throw std::domain_error("power_hamiltonian: P must be > 0");
    if (!(gamma < 1.0) || gamma == 0.0)
        throw std::domain_error("power_hamiltonian: gamma must lie in (-inf,0) or (0,1)");
    const int m = theta.m;
    if (coeffs.sigma.rows() != m) throw ConfigError("power_hamiltonian: dimension mismatch");

    const Mat A = coeffs.sigma * coeffs.sigma.transpose();
    const Vec lin = P * coeffs.b + coeffs.sigma * Lambda;
    const double c_floor = gamma < 0.0 ? consumption_floor(theta) : 0.0;
    if (gamma < 0.0 && theta.sup_c_at_zero_pi() < c_floor &&
        theta.family == Family::Box)
        throw InfeasibleError("power_hamiltonian: no feasible consumption above c_min");

    auto objective = [&](const Vec& pi, double c) {
        double cpart = c > 0.0 ? std::pow(c, gamma) / gamma : (gamma > 0.0 ? 0.0 : -kInf);
        return -0.5 * (1.0 - gamma) * P * pi.dot(A * pi) + pi.dot(lin) + cpart - P * c;
    };

    HamiltonianResult res;
    if (theta.family == Family::Unconstrained) {
        res.argmax_pi = solve_spd(A, lin) / ((1.0 - gamma) * P);
        res.argmax_c = std::pow(P, 1.0 / (gamma - 1.0));
        res.value = gamma * objective(res.argmax_pi, res.argmax_c);
        return res;
    }
    if (theta.is_singleton()) {
        res.argmax_pi = theta.box_lo;
        res.argmax_c = theta.c_lo;
        if (gamma < 0.0 && res.argmax_c <= 0.0)
            throw InfeasibleError("power_hamiltonian: singleton set forces c = 0 with gamma < 0");
        res.value = gamma * objective(res.argmax_pi, res.argmax_c);
        return res;
    }

    Vec y0(m + 1);
    if (warm && warm->argmax_pi.size() == m) {
        y0.head(m) = warm->argmax_pi;
        y0[m] = warm->argmax_c;
    } else {
        y0.head(m) = solve_spd(A, lin) / ((1.0 - gamma) * P);
        y0[m] = std::pow(P, 1.0 / (gamma - 1.0));
    }

    auto obj = [&](const Vec& y) { return objective(y.head(m), y[m]); };
    auto grad = [&](const Vec& y) {
        Vec g(m + 1);
        g.head(m) = -(1.0 - gamma) * P * (A * y.head(m)) + lin;
        double c = std::max(y[m], 1e-12);
        g[m] = std::pow(c, gamma - 1.0) - P;
        return g;
    };
    auto proj = [&](Vec& y) {
        Vec pi = y.head(m);
        double c = y[m];
        theta.project(pi, c, c_floor);
        y.head(m) = pi;
        y[m] = c;
    };

    PgOut out = pg_ascent(std::move(y0), obj, grad, proj);
    res.argmax_pi = out.x.head(m);
    res.argmax_c = out.x[m];
    res.iterations = out.iters;
    res.value = gamma * objective(res.argmax_pi, res.argmax_c);
    return res;
}

HamiltonianResult log_hamiltonian(const ConstraintSet& theta, double h, const Vec& eta,
                                  const CoefficientSet& coeffs,
                                  const HamiltonianResult* warm) {
    if (!(h > 0.0)) throw std::domain_error("log_hamiltonian: h must be > 0");
    const int m = theta.m;
    if (coeffs.sigma.rows() != m) throw ConfigError("log_hamiltonian: dimension mismatch");

    const Mat A = coeffs.sigma * coeffs.sigma.transpose();
    const Vec lin = h * coeffs.b + coeffs.sigma * eta;
    const double c_floor = consumption_floor(theta);
    if (theta.family == Family::Box && theta.sup_c_at_zero_pi() < c_floor)
        throw InfeasibleError("log_hamiltonian: no feasible consumption above c_min");

    auto objective = [&](const Vec& pi, double c) {
        return -0.5 * h * pi.dot(A * pi) + pi.dot(lin) + (c > 0.0 ? std::log(c) : -kInf) -
               h * c;
    };

    HamiltonianResult res;
    if (theta.family == Family::Unconstrained) {
        res.argmax_pi = solve_spd(A, lin) / h;
        res.argmax_c = 1.0 / h;
        res.value = objective(res.argmax_pi, res.argmax_c);
        return res;
    }
    if (theta.is_singleton()) {
        if (theta.c_lo <= 0.0)
            throw InfeasibleError("log_hamiltonian: singleton set forces c = 0");
        res.argmax_pi = theta.box_lo;
        res.argmax_c = theta.c_lo;
        res.value = objective(res.argmax_pi, res.argmax_c);
        return res;
    }

    Vec y0(m + 1);
    if (warm && warm->argmax_pi.size() == m) {
        y0.head(m) = warm->argmax_pi;
        y0[m] = warm->argmax_c;
    } else {
        y0.head(m) = solve_spd(A, lin) / h;
        y0[m] = 1.0 / h;
    }

    auto obj = [&](const Vec& y) { return objective(y.head(m), y[m]); };
    auto grad = [&](const Vec& y) {
        Vec g(m + 1);
        g.head(m) = -h * (A * y.head(m)) + lin;
        g[m] = 1.0 / std::max(y[m], 1e-300) - h;
        return g;
    };
    auto proj = [&](Vec& y) {
        Vec pi = y.head(m);
        double c = y[m];
        theta.project(pi, c, c_floor);
        y.head(m) = pi;
        y[m] = c;
    };

    PgOut out = pg_ascent(std::move(y0), obj, grad, proj);
    res.argmax_pi = out.x.head(m);
    res.argmax_c = out.x[m];
    res.iterations = out.iters;
    res.value = objective(res.argmax_pi, res.argmax_c);
    return res;
}

HamiltonianResult exp_hamiltonian(const ConstraintSet& Pi, double beta, double h,
                                  const Vec& z, const CoefficientSet& coeffs,
                                  const HamiltonianResult* warm) {
    if (!(beta > 0.0)) throw std::domain_error("exp_hamiltonian: beta must be > 0");
    if (!(h > 0.0)) throw std::domain_error("exp_hamiltonian: h must be > 0");
    const int m = Pi.m;
    if (coeffs.sigma.rows() != m) throw ConfigError("exp_hamiltonian: dimension mismatch");

    const Mat A = coeffs.sigma * coeffs.sigma.transpose();
    const Vec lin = coeffs.b - beta * (coeffs.sigma * z);

    auto objective = [&](const Vec& pi) {
        return -0.5 * beta * h * pi.dot(A * pi) + pi.dot(lin);
    };

    HamiltonianResult res;
    if (Pi.family == Family::Unconstrained) {
        res.argmax_pi = solve_spd(A, lin) / (beta * h);
        res.value = h * objective(res.argmax_pi);
        return res;
    }
    if (Pi.family == Family::Box && Pi.box_lo == Pi.box_hi) {
        res.argmax_pi = Pi.box_lo;
        res.value = h * objective(res.argmax_pi);
        return res;
    }

    Vec y0 = (warm && warm->argmax_pi.size() == m) ? warm->argmax_pi
                                                   : Vec(solve_spd(A, lin) / (beta * h));
    auto obj = [&](const Vec& y) { return objective(y); };
    auto grad = [&](const Vec& y) { return Vec(-beta * h * (A * y) + lin); };
    auto proj = [&](Vec& y) { Pi.project_pi(y); };

    PgOut out = pg_ascent(std::move(y0), obj, grad, proj);
    res.argmax_pi = out.x;
    res.iterations = out.iters;
    res.value = h * objective(res.argmax_pi);
    return res;
}

} // namespace rsci
