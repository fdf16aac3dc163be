#include "rsci/bsde.hpp"

#include "rsci/csvio.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>

namespace rsci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// RegimeField
// ---------------------------------------------------------------------------

double RegimeField::value_at(int k, int regime, double x) const {
    const Mat& V = values[static_cast<size_t>(regime)];
    const int nxn = nx();
    if (!has_factor || nxn == 1) return V(k, 0);
    const double lo = factor_nodes[0], hi = factor_nodes[nxn - 1];
    if (x <= lo) return V(k, 0);
    if (x >= hi) return V(k, nxn - 1);
    double pos = (x - lo) / (hi - lo) * (nxn - 1);
    int j = std::min(static_cast<int>(pos), nxn - 2);
    double w = pos - j;
    return V(k, j) * (1.0 - w) + V(k, j + 1) * w;
}

double RegimeField::slope_at(int k, int regime, double x) const {
    const Mat& S = slope_x[static_cast<size_t>(regime)];
    const int nxn = nx();
    if (!has_factor || nxn == 1) return S(k, 0);
    const double lo = factor_nodes[0], hi = factor_nodes[nxn - 1];
    if (x <= lo) return S(k, 0);
    if (x >= hi) return S(k, nxn - 1);
    double pos = (x - lo) / (hi - lo) * (nxn - 1);
    int j = std::min(static_cast<int>(pos), nxn - 2);
    double w = pos - j;
    return S(k, j) * (1.0 - w) + S(k, j + 1) * w;
}

double RegimeField::value_tx(double t, int regime, double x) const {
    double pos = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.N));
    int k = std::min(static_cast<int>(pos), grid.N - 1);
    double w = pos - k;
    return value_at(k, regime, x) * (1.0 - w) + value_at(k + 1, regime, x) * w;
}

double RegimeField::slope_tx(double t, int regime, double x) const {
    double pos = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.N));
    int k = std::min(static_cast<int>(pos), grid.N - 1);
    double w = pos - k;
    return slope_at(k, regime, x) * (1.0 - w) + slope_at(k + 1, regime, x) * w;
}

int RegimeField::left_node(double t) const {
    int k = static_cast<int>(std::floor(t / grid.dt() + 1e-9));
    return std::clamp(k, 0, grid.N);
}

RegimeField make_field(const TimeGrid& grid, int ell, bool has_factor, const Vec& nodes) {
    RegimeField f;
    f.grid = grid;
    f.ell = ell;
    f.has_factor = has_factor;
    f.factor_nodes = nodes;
    f.values.assign(static_cast<size_t>(ell), Mat::Zero(grid.N + 1, nodes.size()));
    f.slope_x.assign(static_cast<size_t>(ell), Mat::Zero(grid.N + 1, nodes.size()));
    return f;
}

std::string field_to_csv(const RegimeField& f, const Vec& factor_vol) {
    std::ostringstream os;
    const int n = static_cast<int>(factor_vol.size());
    os << "t,regime";
    if (f.has_factor) os << ",factor";
    os << ",value";
    for (int c = 1; c <= n; ++c) os << ",grad_" << c;
    os << "\n";
    for (int k = 0; k <= f.grid.N; ++k) {
        for (int i = 0; i < f.ell; ++i) {
            for (int j = 0; j < f.nx(); ++j) {
                os << fmt17(f.grid.node(k)) << "," << (i + 1);
                if (f.has_factor) os << "," << fmt17(f.factor_nodes[j]);
                os << "," << fmt17(f.values[i](k, j));
                for (int c = 0; c < n; ++c)
                    os << "," << fmt17(factor_vol[c] * f.slope_x[i](k, j));
                os << "\n";
            }
        }
    }
    return os.str();
}

double BoundsReport::get(const std::string& name) const {
    for (const auto& kv : constants)
        if (kv.first == name) return kv.second;
    throw std::out_of_range("BoundsReport: no constant named " + name);
}

// ---------------------------------------------------------------------------
// Integration engines
// ---------------------------------------------------------------------------

namespace {

using GenFn =
    std::function<double(double t, int j, double x, int i, const Vec& u, const Vec& z)>;

struct EnvGuard {
    double lo = -kInf;
    double hi = kInf;
    const char* what = "solve";
};

void check_row(const RegimeField& F, int k, const EnvGuard& env) {
    for (int i = 0; i < F.ell; ++i) {
        for (int j = 0; j < F.nx(); ++j) {
            double v = F.values[i](k, j);
            if (!std::isfinite(v) || v < env.lo || v > env.hi)
                throw SolverError(std::string(env.what) +
                                  ": solution left the stability envelope at t = " +
                                  fmt17(F.grid.node(k)) +
                                  "; refine the time grid (increase N)");
        }
    }
}

// Classical RK4, backward in time, gradients identically zero.
void integrate_ode(RegimeField& F, int n_brownian, const GenFn& gen, const EnvGuard& env) {
    const int ell = F.ell;
    const int N = F.grid.N;
    const double dt = F.grid.dt();
    const double T = F.grid.T;
    const Vec z0 = Vec::Zero(n_brownian);

    auto G = [&](double t, const Vec& u, Vec& out) {
        double tc = std::clamp(t, 0.0, T);
        for (int i = 0; i < ell; ++i) out[i] = gen(tc, 0, 0.0, i, u, z0);
    };

    Vec y(ell), f1(ell), f2(ell), f3(ell), f4(ell), tmp(ell), out(ell);
    for (int k = N; k > 0; --k) {
        double t1 = F.grid.node(k);
        for (int i = 0; i < ell; ++i) y[i] = F.values[i](k, 0);
        const double h = -dt;
        G(t1, y, out);
        f1 = -out;
        tmp = y + (h / 2) * f1;
        G(t1 + h / 2, tmp, out);
        f2 = -out;
        tmp = y + (h / 2) * f2;
        G(t1 + h / 2, tmp, out);
        f3 = -out;
        tmp = y + h * f3;
        G(t1 + h, tmp, out);
        f4 = -out;
        tmp = y + (h / 6) * (f1 + 2 * f2 + 2 * f3 + f4);
        for (int i = 0; i < ell; ++i) F.values[i](k - 1, 0) = tmp[i];
        check_row(F, k - 1, env);
    }
}

void thomas_solve(const Vec& sub, Vec diag, const Vec& sup, Vec rhs, Eigen::Ref<Vec> out) {
    const int n = static_cast<int>(diag.size());
    for (int j = 1; j < n; ++j) {
        double w = sub[j] / diag[j - 1];
        diag[j] -= w * sup[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int j = n - 2; j >= 0; --j) out[j] = (rhs[j] - sup[j] * out[j + 1]) / diag[j];
}

struct PdeConf {
    std::function<double(double t, double x, int i)> advect;
    double diffusion = 0.0;   // 0.5 |v|^2
    Vec vol;                  // factor volatility vector
    GenFn gen;
    int picard = 0;
};

// Tridiagonal spatial operator rows: interior central differences, zero-slope
// (Neumann) boundaries.
void build_operator(double t, int i, const PdeConf& cf, const Vec& xs, double dx,
                    Vec& sub, Vec& diag, Vec& sup) {
    const int nx = static_cast<int>(xs.size());
    const double D = cf.diffusion;
    for (int j = 0; j < nx; ++j) {
        if (j == 0) {
            sub[j] = 0.0;
            diag[j] = -2.0 * D / (dx * dx);
            sup[j] = 2.0 * D / (dx * dx);
        } else if (j == nx - 1) {
            sub[j] = 2.0 * D / (dx * dx);
            diag[j] = -2.0 * D / (dx * dx);
            sup[j] = 0.0;
        } else {
            double a = cf.advect(t, xs[j], i);
            sub[j] = D / (dx * dx) - a / (2.0 * dx);
            diag[j] = -2.0 * D / (dx * dx);
            sup[j] = D / (dx * dx) + a / (2.0 * dx);
        }
    }
}

Vec central_slope(const Vec& u, double dx) {
    const int nx = static_cast<int>(u.size());
    Vec s = Vec::Zero(nx);
    for (int j = 1; j < nx - 1; ++j) s[j] = (u[j + 1] - u[j - 1]) / (2.0 * dx);
    return s;
}

// Crank-Nicolson in the linear advection-diffusion part; the semilinear
// generator (Hamiltonian, regime coupling) is explicit, with optional Picard
// corrections toward the trapezoidal average.
void integrate_pde(RegimeField& F, const PdeConf& cf, const EnvGuard& env) {
    const int ell = F.ell;
    const int N = F.grid.N;
    const int nx = F.nx();
    const double dt = F.grid.dt();
    const double theta = 0.5;
    const Vec& xs = F.factor_nodes;
    const double dx = nx > 1 ? (xs[nx - 1] - xs[0]) / (nx - 1) : 1.0;

    for (int i = 0; i < ell; ++i)
        F.slope_x[i].row(N) = central_slope(F.values[i].row(N).transpose(), dx).transpose();

    Vec sub(nx), diag(nx), sup(nx), rhs(nx);
    std::vector<Vec> u1(ell), unew(ell), snew(ell);
    Mat n0(ell, nx), nbar(ell, nx);
    Vec ucol(ell), z(cf.vol.size());

    auto eval_gen = [&](double t, const std::vector<Vec>& u, const std::vector<Vec>& s,
                        Mat& out) {
        for (int j = 0; j < nx; ++j) {
            for (int i = 0; i < ell; ++i) ucol[i] = u[i][j];
            for (int i = 0; i < ell; ++i) {
                z = cf.vol * s[i][j];
                out(i, j) = cf.gen(t, j, xs[j], i, ucol, z);
            }
        }
    };

    std::vector<Vec> s1(ell);
    for (int k = N; k > 0; --k) {
        const double t1 = F.grid.node(k);
        const double t0 = F.grid.node(k - 1);
        for (int i = 0; i < ell; ++i) {
            u1[i] = F.values[i].row(k).transpose();
            s1[i] = F.slope_x[i].row(k).transpose();
        }
        eval_gen(t1, u1, s1, n0);
        nbar = n0;

        for (int sweep = 0; sweep <= cf.picard; ++sweep) {
            for (int i = 0; i < ell; ++i) {
                build_operator(t1, i, cf, xs, dx, sub, diag, sup);
                // rhs = (I + (1-theta) dt L(t1)) u1 + dt nbar
                for (int j = 0; j < nx; ++j) {
                    double lu = diag[j] * u1[i][j];
                    if (j > 0) lu += sub[j] * u1[i][j - 1];
                    if (j < nx - 1) lu += sup[j] * u1[i][j + 1];
                    rhs[j] = u1[i][j] + (1.0 - theta) * dt * lu + dt * nbar(i, j);
                }
                build_operator(t0, i, cf, xs, dx, sub, diag, sup);
                Vec md = Vec::Ones(nx) - theta * dt * diag;
                Vec ms = -theta * dt * sub;
                Vec mp = -theta * dt * sup;
                unew[i].resize(nx);
                thomas_solve(ms, md, mp, rhs, unew[i]);
            }
            if (sweep < cf.picard) {
                for (int i = 0; i < ell; ++i) snew[i] = central_slope(unew[i], dx);
                eval_gen(t0, unew, snew, nbar);
                nbar = 0.5 * (n0 + nbar);
            }
        }

        for (int i = 0; i < ell; ++i) {
            F.values[i].row(k - 1) = unew[i].transpose();
            F.slope_x[i].row(k - 1) = central_slope(unew[i], dx).transpose();
        }
        check_row(F, k - 1, env);
    }
}

Vec ode_nodes() { return Vec::Zero(1); }

double clamp_pos(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw SolverError(std::string(what) +
                          ": field left the positive domain; refine the time grid (increase N)");
    return v;
}

// Shared solver scaffolding: validates, applies the step rule and dispatches
// to the ODE or PDE engine.
RegimeField run_system(const MarketModel& model, const TimeGrid& grid, double terminal,
                       const GenFn& gen, const EnvGuard& env, const SolveOptions& opts,
                       bool coupled) {
    if (grid.N < 2) throw PreconditionError("time grid needs N >= 2");
    if (coupled) check_step_rule(model, grid);
    const bool fac = model.factor.enabled;
    RegimeField F = make_field(grid, model.ell(), fac,
                               fac ? factor_grid(model.factor) : ode_nodes());
    for (int i = 0; i < F.ell; ++i) F.values[i].row(grid.N).setConstant(terminal);
    if (!fac) {
        integrate_ode(F, model.n, gen, env);
    } else {
        PdeConf cf;
        cf.vol = model.factor.vol;
        cf.diffusion = 0.5 * model.factor.vol.squaredNorm();
        const double kap = model.factor.kappa, th = model.factor.theta;
        cf.advect = [kap, th](double, double x, int) { return kap * (th - x); };
        cf.gen = gen;
        cf.picard = opts.picard;
        integrate_pde(F, cf, env);
    }
    return F;
}

std::optional<double> xarg(const MarketModel& model, double x) {
    if (model.factor.enabled) return x;
    return std::nullopt;
}

} // namespace

void check_step_rule(const MarketModel& model, const TimeGrid& grid) {
    double qmax = 0.0;
    for (int i = 0; i < model.ell(); ++i)
        qmax = std::max(qmax, std::abs(model.generator.q(i, i)));
    if (qmax > 0.0 && grid.dt() > 0.1 / qmax) {
        int needed = static_cast<int>(std::ceil(grid.T * qmax / 0.1));
        throw SolverError("time step violates dt <= 0.1/max|q_ii|; increase N to at least " +
                          std::to_string(needed));
    }
}

// ---------------------------------------------------------------------------
// Bound constants
// ---------------------------------------------------------------------------

namespace {

// Visits every (piece start time, regime, factor node) coefficient sample.
void for_each_piece_sample(const MarketModel& model,
                           const std::function<void(double, int, const CoefficientSet&)>& fn) {
    Vec xs = model.factor.enabled ? factor_grid(model.factor) : Vec();
    for (int i = 0; i < model.ell(); ++i) {
        for (const auto& p : model.coefficients.pieces[i]) {
            double t = std::min(p.t_start, model.horizon);
            if (!model.factor.enabled) {
                fn(t, i, coeff_at(model, t, i));
            } else {
                for (int j = 0; j < xs.size(); ++j) fn(t, i, coeff_at(model, t, i, xs[j]));
            }
        }
    }
}

// Visits time-grid node samples (needed when bounds involve solved curves).
void for_each_node_sample(const MarketModel& model, const TimeGrid& grid,
                          const std::function<void(int, double, int, const CoefficientSet&)>& fn) {
    Vec xs = model.factor.enabled ? factor_grid(model.factor) : Vec();
    for (int k = 0; k <= grid.N; ++k) {
        double t = grid.node(k);
        for (int i = 0; i < model.ell(); ++i) {
            if (!model.factor.enabled) {
                fn(k, t, i, coeff_at(model, t, i));
            } else {
                for (int j = 0; j < xs.size(); ++j) fn(k, t, i, coeff_at(model, t, i, xs[j]));
            }
        }
    }
}

double quad_form(const CoefficientSet& cs) {
    Mat A = cs.sigma * cs.sigma.transpose();
    return cs.b.dot(A.llt().solve(cs.b));
}

double expm1_over(double a, double T) {
    if (std::abs(a) < 1e-12) return T;
    return std::expm1(a * T) / a;
}

} // namespace

BoundsReport compute_bounds(const MarketModel& model, const UtilityCaseSpec& spec,
                            const TimeGrid* grid_in) {
    TimeGrid grid = grid_in ? *grid_in : TimeGrid{model.horizon, 512};
    const double T = model.horizon;
    BoundsReport rep;

    switch (spec.kind) {
        case Utility::Power: {
            const double g = spec.gamma;
            if (g > 0.0 && g < 1.0) {
                double req = 1.0 + 1e-9;   // strict a > 1
                for_each_piece_sample(model, [&](double, int, const CoefficientSet& cs) {
                    req = std::max(req, cs.rho - g * cs.r);
                    req = std::max(req,
                                   (g / (2.0 * (1.0 - g)) * quad_form(cs) - cs.rho + g * cs.r) /
                                       (1.0 - g));
                });
                double a1 = std::exp(-req * T);
                double a2 = 2.0 * std::exp(req * T);
                rep.case_tag = "power(0,1)";
                rep.constants = {{"a", req}, {"a1", a1}, {"a2", a2}};
                rep.sandwich_lo = a1;
                rep.sandwich_hi = a2;
            } else if (g < 0.0) {
                const double eps = spec.epsilon;
                double req = 1e-9;
                for_each_piece_sample(model, [&](double, int, const CoefficientSet& cs) {
                    req = std::max(req, (cs.rho - g * cs.r -
                                         g / (2.0 * (1.0 - g)) * quad_form(cs)) /
                                            (1.0 - g));
                    req = std::max(req, -cs.rho + g * cs.r - g * eps);
                });
                double a1p = std::exp(-req * (1.0 - g) * T);
                double a2p = std::exp(req * T) + std::pow(eps, g) * expm1_over(req, T);
                rep.case_tag = "power(<0)";
                rep.constants = {{"a_prime", req}, {"a1_prime", a1p}, {"a2_prime", a2p}};
                rep.sandwich_lo = a1p;
                rep.sandwich_hi = a2p;
            } else {
                throw std::domain_error("compute_bounds: gamma must lie in (-inf,0) or (0,1)");
            }
            break;
        }
        case Utility::Log: {
            double k = 1e-9;
            for_each_piece_sample(model, [&](double, int, const CoefficientSet& cs) {
                k = std::max(k, cs.rho);
            });
            rep.case_tag = "log";
            rep.constants = {{"k", k}, {"h_floor", std::exp(-k * T)}};
            rep.sandwich_lo = std::exp(-k * T);
            break;
        }
        case Utility::ExpDet: {
            RegimeField h = solve_exp_h_deterministic(model, grid);
            double a1 = 1e-9, a2 = 1e-9, a3 = kInf;
            for_each_node_sample(model, grid,
                                 [&](int k, double, int, const CoefficientSet& cs) {
                                     double hv = h.values[0](k, 0);
                                     double core = hv * (1.0 - std::log(hv));
                                     a1 = std::max(a1, -cs.rho + core);
                                     a2 = std::max(a2, cs.rho - 0.5 * quad_form(cs) - core);
                                     a3 = std::min(a3, hv);
                                 });
            double eps = std::exp(-(a2 / a3) * (1.0 - std::exp(-a3 * T)));
            double a = std::exp(a1 * T);
            rep.case_tag = "exp-deterministic";
            rep.constants = {{"a1", a1}, {"a2", a2}, {"a3", a3}, {"eps", eps}, {"a", a}};
            rep.sandwich_lo = eps;
            rep.sandwich_hi = a;
            break;
        }
        case Utility::ExpRandom: {
            const double beta = spec.beta;
            ExpRandomH hr = solve_exp_h_random(model, grid);
            double k1 = 1e-9;
            double rbar = -kInf;      // max of -r
            double gmax = 0.0;        // max of the positive part of the integrand
            Vec xs = factor_grid(model.factor);
            for (int k = 0; k <= grid.N; ++k) {
                double t = grid.node(k);
                for (int j = 0; j < xs.size(); ++j) {
                    CoefficientSet cs = coeff_at(model, t, 0, xs[j]);
                    rbar = std::max(rbar, -cs.r);
                    double hv = hr.h.values[0](k, j);
                    Vec eta = model.factor.vol * hr.h.slope_x[0](k, j);
                    Vec sb = cs.sigma.partialPivLu().solve(cs.b);
                    Vec w = hv * sb + eta;
                    double quad = w.squaredNorm() / (2.0 * beta * hv * hv * hv);
                    for (int i = 0; i < model.ell(); ++i) {
                        double rho = coeff_at(model, t, i, xs[j]).rho;
                        k1 = std::max(k1, (1.0 / beta) * (1.0 - std::log(hv)) - rho / (beta * hv));
                        double gi = quad + rho / (beta * hv) -
                                    (1.0 / beta) * (1.0 - std::log(hv)) -
                                    model.generator.q(i, i) / (beta * hv);
                        gmax = std::max(gmax, gi);
                    }
                }
            }
            k1 = std::max(k1, rbar);
            double mult = rbar > 0.0 ? expm1_over(rbar, T) : T;
            k1 = std::max(k1, mult * gmax);
            double k = std::max(std::exp(k1 * T), k1);
            rep.case_tag = "exp-random";
            rep.constants = {{"k1", k1}, {"k", k}};
            rep.sandwich_lo = -k;
            rep.sandwich_hi = k;
            break;
        }
    }
    return rep;
}

std::vector<std::string> recheck_bounds(const MarketModel& model, const UtilityCaseSpec& spec,
                                        const BoundsReport& rep, const TimeGrid* grid_in) {
    std::vector<std::string> bad;
    const double T = model.horizon;
    auto fail = [&](const std::string& s) { bad.push_back(s); };

    switch (spec.kind) {
        case Utility::Power: {
            const double g = spec.gamma;
            if (g > 0.0 && g < 1.0) {
                double a = rep.get("a");
                if (!(a > 1.0)) fail("a must exceed 1");
                for_each_piece_sample(model, [&](double t, int i, const CoefficientSet& cs) {
                    if (-cs.rho + g * cs.r < -a - 1e-12)
                        fail("inequality (a1) fails at t=" + fmt17(t) + " regime " +
                             std::to_string(i + 1));
                    if (g / (2.0 * (1.0 - g)) * quad_form(cs) - cs.rho + g * cs.r >
                        a * (1.0 - g) + 1e-12)
                        fail("inequality (a2) fails at t=" + fmt17(t) + " regime " +
                             std::to_string(i + 1));
                });
                if (std::abs(rep.get("a1") - std::exp(-a * T)) > 1e-12 * rep.get("a1"))
                    fail("a1 formula mismatch");
                if (std::abs(rep.get("a2") - 2.0 * std::exp(a * T)) > 1e-12 * rep.get("a2"))
                    fail("a2 formula mismatch");
            } else {
                double ap = rep.get("a_prime");
                const double eps = spec.epsilon;
                if (!(ap > 0.0)) fail("a' must be positive");
                for_each_piece_sample(model, [&](double t, int i, const CoefficientSet& cs) {
                    if (g / (2.0 * (1.0 - g)) * quad_form(cs) - cs.rho + g * cs.r <
                        -ap * (1.0 - g) - 1e-12)
                        fail("inequality (a'1) fails at t=" + fmt17(t) + " regime " +
                             std::to_string(i + 1));
                    if (-cs.rho + g * cs.r - g * eps > ap + 1e-12)
                        fail("inequality (a'2) fails at t=" + fmt17(t) + " regime " +
                             std::to_string(i + 1));
                });
            }
            break;
        }
        case Utility::Log: {
            double k = rep.get("k");
            if (!(k > 0.0)) fail("k must be positive");
            for_each_piece_sample(model, [&](double t, int i, const CoefficientSet& cs) {
                if (-cs.rho < -k - 1e-12)
                    fail("-rho >= -k fails at t=" + fmt17(t) + " regime " + std::to_string(i + 1));
            });
            if (std::abs(rep.get("h_floor") - std::exp(-k * T)) > 1e-12)
                fail("h floor formula mismatch");
            break;
        }
        case Utility::ExpDet: {
            TimeGrid grid = grid_in ? *grid_in : TimeGrid{model.horizon, 512};
            RegimeField h = solve_exp_h_deterministic(model, grid);
            double a1 = rep.get("a1"), a2 = rep.get("a2"), a3 = rep.get("a3");
            for_each_node_sample(model, grid,
                                 [&](int k, double t, int i, const CoefficientSet& cs) {
                                     double hv = h.values[0](k, 0);
                                     double core = hv * (1.0 - std::log(hv));
                                     if (-cs.rho + core > a1 + 1e-12)
                                         fail("exp (a1) fails at t=" + fmt17(t) + " regime " +
                                              std::to_string(i + 1));
                                     if (0.5 * quad_form(cs) - cs.rho + core < -a2 - 1e-12)
                                         fail("exp (a2) fails at t=" + fmt17(t) + " regime " +
                                              std::to_string(i + 1));
                                     if (hv < a3 - 1e-12) fail("h >= a3 fails at t=" + fmt17(t));
                                 });
            break;
        }
        case Utility::ExpRandom: {
            // The defining inequalities were computed from grid suprema and a
            // quadrature upper bound; re-derive and compare.
            BoundsReport fresh = compute_bounds(model, spec, grid_in);
            if (fresh.get("k1") > rep.get("k1") + 1e-9) fail("k1 no longer dominates the grid");
            if (fresh.get("k") > rep.get("k") + 1e-9) fail("k no longer dominates the grid");
            break;
        }
    }
    return bad;
}

// ---------------------------------------------------------------------------
// Power utility systems
// ---------------------------------------------------------------------------

double power_logform_F(const ConstraintSet& theta, double gamma, double Y, const Vec& Z,
                       const CoefficientSet& coeffs) {
    if (std::abs(Y) > 500.0) throw SolverError("power_logform_F: |Y| too large");
    double P = std::exp(Y);
    HamiltonianResult h = power_hamiltonian(theta, gamma, P, Vec(P * Z), coeffs);
    return h.value / P;
}

RegimeField solve_power(const MarketModel& model, double gamma, const ConstraintSet& theta,
                        const TimeGrid& grid, const SolveOptions& opts) {
    if ((!(gamma < 1.0)) || gamma == 0.0)
        throw std::domain_error("solve_power: gamma must lie in (-inf,0) or (0,1)");
    check_mode_support(theta, Utility::Power, gamma);
    ValidationReport vr = validate_model(model, AssumptionMode::PowerLog);
    if (!vr.passed())
        throw PreconditionError("solve_power: model fails validation:\n" + vr.to_string());

    UtilityCaseSpec cs{Utility::Power, gamma, 1.0, theta.epsilon};
    BoundsReport bounds = compute_bounds(model, cs, &grid);
    EnvGuard env{opts.check_envelope ? bounds.sandwich_lo / 2.0 : -kInf,
                 opts.check_envelope ? bounds.sandwich_hi * 2.0 : kInf, "solve_power"};

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    int nx = model.factor.enabled ? std::max(model.factor.nodes, 1) : 1;
    auto warm = std::make_shared<std::vector<HamiltonianResult>>(ell * nx);

    GenFn gen = [&, warm](double t, int j, double x, int i, const Vec& u, const Vec& z) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double P = clamp_pos(u[i], "solve_power");
        HamiltonianResult& w = (*warm)[static_cast<size_t>(i * nx + j)];
        HamiltonianResult res =
            power_hamiltonian(theta, gamma, P, z, co, w.argmax_pi.size() ? &w : nullptr);
        w = res;
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj) coupling += q(i, jj) * u[jj];
        return res.value - (co.rho - gamma * co.r) * P + coupling;
    };

    return run_system(model, grid, 1.0, gen, env, opts, true);
}

RegimeField solve_power_logform(const MarketModel& model, double gamma,
                                const ConstraintSet& theta, const TimeGrid& grid,
                                const SolveOptions& opts) {
    if ((!(gamma < 1.0)) || gamma == 0.0)
        throw std::domain_error("solve_power_logform: gamma must lie in (-inf,0) or (0,1)");
    check_mode_support(theta, Utility::Power, gamma);
    ValidationReport vr = validate_model(model, AssumptionMode::PowerLog);
    if (!vr.passed())
        throw PreconditionError("solve_power_logform: model fails validation:\n" + vr.to_string());

    UtilityCaseSpec cs{Utility::Power, gamma, 1.0, theta.epsilon};
    BoundsReport bounds = compute_bounds(model, cs, &grid);
    EnvGuard env{opts.check_envelope ? std::log(bounds.sandwich_lo) - M_LN2 : -kInf,
                 opts.check_envelope ? std::log(bounds.sandwich_hi) + M_LN2 : kInf,
                 "solve_power_logform"};

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    int nx = model.factor.enabled ? std::max(model.factor.nodes, 1) : 1;
    auto warm = std::make_shared<std::vector<HamiltonianResult>>(ell * nx);

    GenFn gen = [&, warm](double t, int j, double x, int i, const Vec& u, const Vec& z) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double Y = u[i];
        if (!std::isfinite(Y) || std::abs(Y) > 500.0)
            throw SolverError("solve_power_logform: field diverged; refine the time grid");
        double P = std::exp(Y);
        HamiltonianResult& w = (*warm)[static_cast<size_t>(i * nx + j)];
        HamiltonianResult res =
            power_hamiltonian(theta, gamma, P, Vec(P * z), co, w.argmax_pi.size() ? &w : nullptr);
        w = res;
        double F = res.value / P;
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj) coupling += q(i, jj) * std::exp(u[jj] - Y);
        return F + 0.5 * z.squaredNorm() - co.rho + gamma * co.r + coupling;
    };

    return run_system(model, grid, 0.0, gen, env, opts, true);
}

// ---------------------------------------------------------------------------
// Logarithmic utility systems
// ---------------------------------------------------------------------------

RegimeField solve_log_h(const MarketModel& model, const TimeGrid& grid,
                        const SolveOptions& opts) {
    ValidationReport vr = validate_model(model, AssumptionMode::PowerLog);
    if (!vr.passed())
        throw PreconditionError("solve_log_h: model fails validation:\n" + vr.to_string());

    UtilityCaseSpec cs{Utility::Log, 0.5, 1.0, 1.0};
    BoundsReport bounds = compute_bounds(model, cs, &grid);
    double k2 = 0.0;
    for_each_piece_sample(model, [&](double, int, const CoefficientSet& c) {
        k2 = std::max(k2, -c.rho);
    });
    double hbar = std::exp(k2 * model.horizon) + expm1_over(k2, model.horizon);
    EnvGuard env{opts.check_envelope ? bounds.sandwich_lo / 2.0 : -kInf,
                 opts.check_envelope ? 2.0 * hbar : kInf, "solve_log_h"};

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    GenFn gen = [&](double t, int, double x, int i, const Vec& u, const Vec&) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj) coupling += q(i, jj) * u[jj];
        return 1.0 - co.rho * u[i] + coupling;
    };

    return run_system(model, grid, 1.0, gen, env, opts, true);
}

RegimeField solve_log_P(const MarketModel& model, const ConstraintSet& theta,
                        const RegimeField& h_field, const TimeGrid& grid,
                        const SolveOptions& opts) {
    check_mode_support(theta, Utility::Log, 0.0);
    ValidationReport vr = validate_model(model, AssumptionMode::PowerLog);
    if (!vr.passed())
        throw PreconditionError("solve_log_P: model fails validation:\n" + vr.to_string());
    if (h_field.grid.N != grid.N || h_field.ell != model.ell())
        throw PreconditionError("solve_log_P: h field grid mismatch");

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    int nx = model.factor.enabled ? std::max(model.factor.nodes, 1) : 1;
    auto warm = std::make_shared<std::vector<HamiltonianResult>>(ell * nx);
    const Vec& vol = model.factor.vol;

    GenFn gen = [&, warm](double t, int j, double x, int i, const Vec& u, const Vec&) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double h = h_field.value_tx(t, i, x);
        if (!(h > 0.0)) throw SolverError("solve_log_P: h must stay positive");
        Vec eta = model.factor.enabled ? Vec(vol * h_field.slope_tx(t, i, x))
                                       : Vec(Vec::Zero(model.n));
        HamiltonianResult& w = (*warm)[static_cast<size_t>(i * nx + j)];
        HamiltonianResult res =
            log_hamiltonian(theta, h, eta, co, w.argmax_pi.size() ? &w : nullptr);
        w = res;
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj) coupling += q(i, jj) * u[jj];
        return res.value - co.rho * u[i] + co.r * h + coupling;
    };

    return run_system(model, grid, 0.0, gen, EnvGuard{-kInf, kInf, "solve_log_P"}, opts, true);
}

// ---------------------------------------------------------------------------
// Exponential utility, deterministic rate
// ---------------------------------------------------------------------------

RegimeField solve_exp_h_deterministic(const MarketModel& model, const TimeGrid& grid) {
    ValidationReport vr = validate_model(model, AssumptionMode::ExpDeterministic);
    if (!vr.passed())
        throw PreconditionError("solve_exp_h_deterministic: model fails validation:\n" +
                                vr.to_string());

    // r is deterministic and regime-independent: evaluate the closed form
    // exactly, piece by piece, accumulating from the horizon backward.
    std::vector<double> brk;
    for (const auto& p : model.coefficients.pieces[0]) brk.push_back(p.t_start);

    RegimeField F = make_field(grid, 1, false, ode_nodes());
    double E = 1.0;   // exp(-int_t^T r)
    double J = 0.0;   // int_t^T exp(-int_t^s r) ds
    F.values[0](grid.N, 0) = 1.0;
    for (int k = grid.N; k > 0; --k) {
        double lo = grid.node(k - 1), hi = grid.node(k);
        // walk sub-intervals of [lo, hi] from the top, splitting at breakpoints
        double w = hi;
        while (w > lo + 1e-15) {
            double u = lo;
            for (double b : brk)
                if (b < w - 1e-15 && b > u) u = b;
            double r = model.coefficients.piece_at(0, u).r;
            double d = w - u;
            double decay = std::exp(-r * d);
            J = -std::expm1(-r * d) * (std::abs(r) > 1e-14 ? 1.0 / r : 0.0) +
                (std::abs(r) <= 1e-14 ? d : 0.0) + decay * J;
            E *= decay;
            w = u;
        }
        F.values[0](k - 1, 0) = 1.0 / (E + J);
    }
    return F;
}

RegimeField solve_exp_Y(const MarketModel& model, const ConstraintSet& Pi, double beta,
                        const RegimeField& h_curve, const TimeGrid& grid,
                        const SolveOptions& opts) {
    if (!(beta > 0.0)) throw std::domain_error("solve_exp_Y: beta must be > 0");
    check_mode_support(Pi, Utility::ExpDet, 0.0);
    ValidationReport vr = validate_model(model, AssumptionMode::ExpDeterministic);
    if (!vr.passed())
        throw PreconditionError("solve_exp_Y: model fails validation:\n" + vr.to_string());

    UtilityCaseSpec cs{Utility::ExpDet, 0.5, beta, 1.0};
    BoundsReport bounds = compute_bounds(model, cs, &grid);
    // P in [eps, a] maps to Y = -ln(P)/beta
    double ylo = -(std::log(bounds.sandwich_hi) + M_LN2) / beta;
    double yhi = -(std::log(bounds.sandwich_lo) - M_LN2) / beta;
    EnvGuard env{opts.check_envelope ? ylo : -kInf, opts.check_envelope ? yhi : kInf,
                 "solve_exp_Y"};

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    int nx = model.factor.enabled ? std::max(model.factor.nodes, 1) : 1;
    auto warm = std::make_shared<std::vector<HamiltonianResult>>(ell * nx);

    GenFn gen = [&, warm](double t, int j, double x, int i, const Vec& u, const Vec& z) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double h = h_curve.value_tx(t, 0, 0.0);
        HamiltonianResult& w = (*warm)[static_cast<size_t>(i * nx + j)];
        HamiltonianResult res =
            exp_hamiltonian(Pi, beta, h, z, co, w.argmax_pi.size() ? &w : nullptr);
        w = res;
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj)
            coupling += q(i, jj) * (std::exp(-beta * (u[jj] - u[i])) - 1.0);
        return res.value - h * u[i] - 0.5 * beta * z.squaredNorm() + co.rho / beta -
               (h / beta) * (1.0 - std::log(h)) - coupling / beta;
    };

    return run_system(model, grid, 0.0, gen, env, opts, true);
}

RegimeField solve_exp_P_form(const MarketModel& model, const ConstraintSet& Pi, double beta,
                             const RegimeField& h_curve, const TimeGrid& grid,
                             const SolveOptions& opts) {
    if (!(beta > 0.0)) throw std::domain_error("solve_exp_P_form: beta must be > 0");
    check_mode_support(Pi, Utility::ExpDet, 0.0);
    ValidationReport vr = validate_model(model, AssumptionMode::ExpDeterministic);
    if (!vr.passed())
        throw PreconditionError("solve_exp_P_form: model fails validation:\n" + vr.to_string());

    UtilityCaseSpec cs{Utility::ExpDet, 0.5, beta, 1.0};
    BoundsReport bounds = compute_bounds(model, cs, &grid);
    EnvGuard env{opts.check_envelope ? bounds.sandwich_lo / 2.0 : -kInf,
                 opts.check_envelope ? bounds.sandwich_hi * 2.0 : kInf, "solve_exp_P_form"};

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    int nx = model.factor.enabled ? std::max(model.factor.nodes, 1) : 1;
    auto warm = std::make_shared<std::vector<HamiltonianResult>>(ell * nx);

    GenFn gen = [&, warm](double t, int j, double x, int i, const Vec& u, const Vec& z) {
        CoefficientSet co = coeff_at(model, t, i, xarg(model, x));
        double h = h_curve.value_tx(t, 0, 0.0);
        double P = clamp_pos(u[i], "solve_exp_P_form");
        Vec zf = -z / (beta * P);
        HamiltonianResult& w = (*warm)[static_cast<size_t>(i * nx + j)];
        HamiltonianResult res =
            exp_hamiltonian(Pi, beta, h, zf, co, w.argmax_pi.size() ? &w : nullptr);
        w = res;
        double f = -beta * P * res.value;
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj) coupling += q(i, jj) * u[jj];
        return f - h * P * std::log(P) - co.rho * P + h * (1.0 - std::log(h)) * P + coupling;
    };

    return run_system(model, grid, 1.0, gen, env, opts, true);
}

// ---------------------------------------------------------------------------
// Exponential utility, random rate (factor PDEs)
// ---------------------------------------------------------------------------

ExpRandomH solve_exp_h_random(const MarketModel& model, const TimeGrid& grid,
                              const SolveOptions& opts) {
    ValidationReport vr = validate_model(model, AssumptionMode::ExpRandom);
    if (!vr.passed())
        throw PreconditionError("solve_exp_h_random: model fails validation:\n" + vr.to_string());

    const Vec xs = factor_grid(model.factor);
    RegimeField p = make_field(grid, 1, true, xs);
    p.values[0].row(grid.N).setConstant(1.0);

    PdeConf cf;
    cf.vol = model.factor.vol;
    cf.diffusion = 0.5 * model.factor.vol.squaredNorm();
    const double kap = model.factor.kappa, th = model.factor.theta;
    cf.advect = [&, kap, th](double t, double x, int) {
        CoefficientSet co = coeff_at(model, t, 0, x);
        Vec sb = co.sigma.partialPivLu().solve(co.b);
        return kap * (th - x) - model.factor.vol.dot(sb);
    };
    cf.gen = [&](double t, int, double x, int, const Vec& u, const Vec&) {
        CoefficientSet co = coeff_at(model, t, 0, x);
        return 1.0 - co.r * u[0];
    };
    cf.picard = opts.picard;
    integrate_pde(p, cf, EnvGuard{-kInf, kInf, "solve_exp_h_random"});

    double pmin = p.values[0].minCoeff();
    double pmax = p.values[0].maxCoeff();
    if (!(pmin > 0.0))
        throw SolverError("solve_exp_h_random: p <= 0 on the grid; the reciprocal h = 1/p "
                          "is undefined (check r and the factor range)");

    ExpRandomH out;
    out.p = p;
    out.h = make_field(grid, 1, true, xs);
    out.h.values[0] = p.values[0].cwiseInverse();
    out.h.slope_x[0] = -p.slope_x[0].array() / (p.values[0].array() * p.values[0].array());
    out.p_min = pmin;
    out.p_max = pmax;
    return out;
}

RegimeField solve_exp_P_random(const MarketModel& model, double beta, const ExpRandomH& hr,
                               const TimeGrid& grid, const SolveOptions& opts,
                               const BoundsReport* bounds_in) {
    if (!(beta > 0.0)) throw std::domain_error("solve_exp_P_random: beta must be > 0");
    ValidationReport vr = validate_model(model, AssumptionMode::ExpRandom);
    if (!vr.passed())
        throw PreconditionError("solve_exp_P_random: model fails validation:\n" + vr.to_string());
    check_step_rule(model, grid);

    UtilityCaseSpec cs{Utility::ExpRandom, 0.5, beta, 1.0};
    BoundsReport bounds = bounds_in ? *bounds_in : compute_bounds(model, cs, &grid);
    const double kcap = bounds.get("k");
    auto psi = [kcap](double y) { return std::clamp(y, -kcap, kcap); };

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    const Vec xs = factor_grid(model.factor);

    RegimeField F = make_field(grid, ell, true, xs);
    for (int i = 0; i < ell; ++i) F.values[i].row(grid.N).setZero();

    PdeConf cf;
    cf.vol = model.factor.vol;
    cf.diffusion = 0.5 * model.factor.vol.squaredNorm();
    const double kap = model.factor.kappa, th = model.factor.theta;
    cf.advect = [&, kap, th](double t, double x, int) {
        CoefficientSet co = coeff_at(model, t, 0, x);
        Vec sb = co.sigma.partialPivLu().solve(co.b);
        return kap * (th - x) - model.factor.vol.dot(sb);
    };
    cf.gen = [&](double t, int, double x, int i, const Vec& u, const Vec&) {
        CoefficientSet co = coeff_at(model, t, i, x);
        double h = hr.h.value_tx(t, 0, x);
        Vec eta = model.factor.vol * hr.h.slope_tx(t, 0, x);
        Vec sb = co.sigma.partialPivLu().solve(co.b);
        Vec w = h * sb + eta;
        double quad = w.squaredNorm() / (2.0 * beta * h * h * h);
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj)
            coupling += q(i, jj) * std::exp(-beta * h * (psi(u[jj]) - psi(u[i])));
        return -co.r * u[i] + quad + co.rho / (beta * h) -
               (1.0 / beta) * (1.0 - std::log(h)) - coupling / (beta * h);
    };
    cf.picard = opts.picard;
    integrate_pde(F, cf,
                  EnvGuard{opts.check_envelope ? -2.0 * kcap : -kInf,
                           opts.check_envelope ? 2.0 * kcap : kInf, "solve_exp_P_random"});

    double pmax = 0.0;
    for (int i = 0; i < ell; ++i) pmax = std::max(pmax, F.values[i].cwiseAbs().maxCoeff());
    if (pmax >= kcap * (1.0 - 1e-12))
        throw SolverError("solve_exp_P_random: truncation psi is active at convergence "
                          "(|P| reached k); the bound constant is miscomputed");
    return F;
}

RegimeField solve_exp_Y_random(const MarketModel& model, double beta, const ExpRandomH& hr,
                               const TimeGrid& grid, const SolveOptions& opts) {
    if (!(beta > 0.0)) throw std::domain_error("solve_exp_Y_random: beta must be > 0");
    ValidationReport vr = validate_model(model, AssumptionMode::ExpRandom);
    if (!vr.passed())
        throw PreconditionError("solve_exp_Y_random: model fails validation:\n" + vr.to_string());
    check_step_rule(model, grid);

    const Mat& q = model.generator.q;
    const int ell = model.ell();
    const Vec xs = factor_grid(model.factor);

    RegimeField F = make_field(grid, ell, true, xs);
    for (int i = 0; i < ell; ++i) F.values[i].row(grid.N).setZero();

    PdeConf cf;
    cf.vol = model.factor.vol;
    cf.diffusion = 0.5 * model.factor.vol.squaredNorm();
    const double kap = model.factor.kappa, th = model.factor.theta;
    cf.advect = [&, kap, th](double t, double x, int) {
        CoefficientSet co = coeff_at(model, t, 0, x);
        double h = hr.h.value_tx(t, 0, x);
        Vec eta = model.factor.vol * hr.h.slope_tx(t, 0, x);
        Vec sb = co.sigma.partialPivLu().solve(co.b);
        return kap * (th - x) - model.factor.vol.dot(Vec(sb + eta / h));
    };
    cf.gen = [&](double t, int, double x, int i, const Vec& u, const Vec&) {
        CoefficientSet co = coeff_at(model, t, i, x);
        double h = hr.h.value_tx(t, 0, x);
        Vec eta = model.factor.vol * hr.h.slope_tx(t, 0, x);
        Vec sb = co.sigma.partialPivLu().solve(co.b);
        Vec w = h * sb + eta;
        double quad = w.squaredNorm() / (2.0 * beta * h * h);
        double coupling = 0.0;
        for (int jj = 0; jj < ell; ++jj)
            coupling += q(i, jj) * std::exp(-beta * (u[jj] - u[i]));
        return -h * u[i] + quad + co.rho / beta - (h / beta) * (1.0 - std::log(h)) -
               coupling / beta;
    };
    cf.picard = opts.picard;
    integrate_pde(F, cf, EnvGuard{-kInf, kInf, "solve_exp_Y_random"});
    return F;
}

// ---------------------------------------------------------------------------
// Comparison lemma
// ---------------------------------------------------------------------------

OrderingReport check_comparison(const LinearBsdeSpec& A, const LinearBsdeSpec& B,
                                const TimeGrid& grid) {
    if (A.ell != B.ell) throw PreconditionError("check_comparison: regime counts differ");
    const int ell = A.ell;
    if (A.terminal.size() != ell || B.terminal.size() != ell)
        throw PreconditionError("check_comparison: terminal vector size mismatch");
    if (((A.terminal - B.terminal).array() > 1e-12).any())
        throw PreconditionError("check_comparison: terminal values are not ordered");

    for (int k = 0; k <= grid.N; ++k) {
        for (double t : {grid.node(k), std::min(grid.node(k) + grid.dt() / 2, grid.T)}) {
            Mat BA = A.coupling(t);
            Mat BB = B.coupling(t);
            if (!BA.allFinite() || !BB.allFinite() || !A.alpha(t).allFinite() ||
                !B.alpha(t).allFinite())
                throw PreconditionError("check_comparison: non-finite system data");
            for (int i = 0; i < ell; ++i)
                for (int j = 0; j < ell; ++j)
                    if (i != j && BA(i, j) < -1e-12)
                        throw PreconditionError(
                            "check_comparison: generator of system A is not nondecreasing in "
                            "off-diagonal components");
        }
    }

    auto solve_linear = [&](const LinearBsdeSpec& S) {
        RegimeField F = make_field(grid, ell, false, ode_nodes());
        for (int i = 0; i < ell; ++i) F.values[i](grid.N, 0) = S.terminal[i];
        GenFn gen = [&S](double t, int, double, int i, const Vec& u, const Vec&) {
            return S.alpha(t)[i] + S.coupling(t).row(i).dot(u);
        };
        integrate_ode(F, 0, gen, EnvGuard{-kInf, kInf, "check_comparison"});
        return F;
    };

    RegimeField FB = solve_linear(B);
    for (int k = 0; k <= grid.N; ++k) {
        double t = grid.node(k);
        Vec yb(ell);
        for (int i = 0; i < ell; ++i) yb[i] = FB.values[i](k, 0);
        Vec ga = A.alpha(t) + A.coupling(t) * yb;
        Vec gb = B.alpha(t) + B.coupling(t) * yb;
        if (((ga - gb).array() > 1e-10).any())
            throw PreconditionError("check_comparison: generators are not pointwise ordered");
    }
    RegimeField FA = solve_linear(A);

    OrderingReport rep;
    rep.max_excess = -kInf;
    rep.min_gap = kInf;
    rep.gap_t0 = Vec(ell);
    for (int i = 0; i < ell; ++i) rep.gap_t0[i] = FB.values[i](0, 0) - FA.values[i](0, 0);
    for (int k = 0; k <= grid.N; ++k) {
        for (int i = 0; i < ell; ++i) {
            double d = FA.values[i](k, 0) - FB.values[i](k, 0);
            if (d > rep.max_excess) {
                rep.max_excess = d;
                rep.worst_node = k;
                rep.worst_regime = i + 1;
            }
            rep.min_gap = std::min(rep.min_gap, -d);
        }
    }
    rep.ordered = rep.max_excess <= 1e-8;
    return rep;
}

} // namespace rsci
