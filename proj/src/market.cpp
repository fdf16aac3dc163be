#include "rsci/market.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rsci {

std::string utility_name(Utility u) {
    switch (u) {
        case Utility::Power: return "power";
        case Utility::Log: return "log";
        case Utility::ExpDet: return "exp-deterministic";
        case Utility::ExpRandom: return "exp-random";
    }
    return "?";
}

const CoefficientPiece& CoefficientCurve::piece_at(int regime, double t) const {
    const auto& ps = pieces.at(static_cast<size_t>(regime));
    // right-continuous: last piece with t_start <= t
    size_t lo = 0;
    for (size_t k = 1; k < ps.size(); ++k) {
        if (ps[k].t_start <= t) lo = k; else break;
    }
    return ps[lo];
}

Vec factor_grid(const FactorSpec& f) {
    int nx = std::max(f.nodes, 1);
    Vec g(nx);
    if (nx == 1) { g[0] = f.x0; return g; }
    double dx = (f.x_max - f.x_min) / (nx - 1);
    for (int j = 0; j < nx; ++j) g[j] = f.x_min + j * dx;
    return g;
}

bool ValidationReport::mentions(const std::string& needle) const {
    for (const auto& v : violations)
        if (v.message.find(needle) != std::string::npos) return true;
    return false;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.message << "\n";
    return os.str();
}

namespace {

void add(ValidationReport& rep, std::string msg, int regime = -1, int piece = -1) {
    rep.violations.push_back({std::move(msg), regime, piece});
}

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

bool finite_vec(const Vec& v) { return v.allFinite(); }
bool finite_mat(const Mat& m) { return m.allFinite(); }

} // namespace

ValidationReport validate_model(const MarketModel& model, AssumptionMode mode) {
    ValidationReport rep;
    const int ell = model.generator.ell;
    const Mat& q = model.generator.q;

    if (ell < 1) add(rep, "generator: number of regimes must be >= 1");
    if (q.rows() != ell || q.cols() != ell)
        add(rep, "generator: matrix must be " + std::to_string(ell) + "x" + std::to_string(ell));
    else {
        for (int i = 0; i < ell; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < ell; ++j) {
                row_sum += q(i, j);
                if (i != j && q(i, j) < 0.0)
                    add(rep, "generator entry q[" + std::to_string(i + 1) + "][" +
                                 std::to_string(j + 1) + "] = " + num(q(i, j)) + " < 0",
                        i + 1);
            }
            if (std::abs(row_sum) > 1e-12)
                add(rep, "generator row sum != 0 at regime " + std::to_string(i + 1) +
                             " (sum = " + num(row_sum) + ")",
                    i + 1);
        }
    }

    if (model.m < 1 || model.n < 1) add(rep, "asset/Brownian dimensions must be >= 1");
    if (model.m > model.n)
        add(rep, "m = " + std::to_string(model.m) + " exceeds Brownian dimension n = " +
                     std::to_string(model.n));
    if (!(model.horizon > 0.0)) add(rep, "horizon T must be > 0");
    if (!(model.delta_floor > 0.0)) add(rep, "ellipticity constant delta must be > 0");

    if (static_cast<int>(model.coefficients.pieces.size()) != ell) {
        add(rep, "coefficient curves: expected one piece list per regime");
        return rep;
    }

    const auto& f = model.factor;
    if (f.enabled) {
        if (!finite_vec(f.vol) || f.vol.size() != model.n)
            add(rep, "factor volatility must be a finite vector of length n");
        if (!(f.x_min < f.x0 && f.x0 < f.x_max))
            add(rep, "factor grid must satisfy x_min < x0 < x_max");
        if (f.nodes < 3) add(rep, "factor grid needs at least 3 nodes");
        if (!std::isfinite(f.kappa) || !std::isfinite(f.theta))
            add(rep, "factor drift parameters must be finite");
    }

    for (int i = 0; i < ell; ++i) {
        const auto& ps = model.coefficients.pieces[i];
        if (ps.empty()) {
            add(rep, "regime " + std::to_string(i + 1) + " has no coefficient pieces", i + 1);
            continue;
        }
        if (ps.front().t_start != 0.0)
            add(rep, "first breakpoint must be t = 0 at regime " + std::to_string(i + 1), i + 1, 0);
        for (size_t k = 0; k < ps.size(); ++k) {
            const auto& p = ps[k];
            int pk = static_cast<int>(k);
            if (k > 0 && !(p.t_start > ps[k - 1].t_start))
                add(rep, "breakpoints must be strictly increasing at regime " +
                             std::to_string(i + 1) + ", piece " + std::to_string(pk),
                    i + 1, pk);
            if (p.t_start >= model.horizon && k > 0)
                add(rep, "breakpoint " + num(p.t_start) + " is outside [0, T) at regime " +
                             std::to_string(i + 1),
                    i + 1, pk);
            if (p.mu.size() != model.m)
                add(rep, "mu must have length m at regime " + std::to_string(i + 1), i + 1, pk);
            if (p.sigma.rows() != model.m || p.sigma.cols() != model.n)
                add(rep, "sigma must be m x n at regime " + std::to_string(i + 1), i + 1, pk);
            if (!std::isfinite(p.r) || !std::isfinite(p.rho) || !finite_vec(p.mu) ||
                !finite_mat(p.sigma) || !std::isfinite(p.r_slope) ||
                (p.mu_slope.size() > 0 && !finite_vec(p.mu_slope)))
                add(rep, "non-finite coefficient value at regime " + std::to_string(i + 1) +
                             ", piece " + std::to_string(pk),
                    i + 1, pk);
            if (p.mu_slope.size() > 0 && p.mu_slope.size() != model.m)
                add(rep, "mu_slope must have length m at regime " + std::to_string(i + 1), i + 1,
                    pk);

            if (p.sigma.rows() == model.m && p.sigma.cols() == model.n && finite_mat(p.sigma)) {
                Mat a = p.sigma * p.sigma.transpose();
                Eigen::SelfAdjointEigenSolver<Mat> es(a);
                double lam = es.eigenvalues().minCoeff();
                if (lam < model.delta_floor)
                    add(rep, "sigma*sigma' eigenvalue " + num(lam) + " < delta at regime " +
                                 std::to_string(i + 1) + ", piece " + std::to_string(pk),
                        i + 1, pk);
            }
        }
    }

    // curve kind consistency
    bool any_slope = false;
    for (const auto& ps : model.coefficients.pieces)
        for (const auto& p : ps)
            if (p.r_slope != 0.0 || (p.mu_slope.size() > 0 && p.mu_slope.any()))
                any_slope = true;
    if (any_slope && !f.enabled)
        add(rep, "factor sensitivities declared but the factor is disabled");
    if (any_slope && model.coefficients.kind != CurveKind::AffineInFactor)
        add(rep, "curve kind must be affine-in-factor when slopes are present");

    if (mode == AssumptionMode::ExpDeterministic || mode == AssumptionMode::ExpRandom) {
        // r (ExpDeterministic) resp. r, mu, sigma (ExpRandom) regime-independent
        for (int i = 1; i < ell; ++i) {
            const auto& p0 = model.coefficients.pieces[0];
            const auto& pi = model.coefficients.pieces[i];
            bool same_r = p0.size() == pi.size();
            bool same_mu_sigma = same_r;
            if (same_r) {
                for (size_t k = 0; k < p0.size(); ++k) {
                    if (p0[k].t_start != pi[k].t_start || p0[k].r != pi[k].r ||
                        p0[k].r_slope != pi[k].r_slope)
                        same_r = false;
                    if (p0[k].t_start != pi[k].t_start || p0[k].mu != pi[k].mu ||
                        p0[k].sigma != pi[k].sigma ||
                        (p0[k].mu_slope.size() != pi[k].mu_slope.size()) ||
                        (p0[k].mu_slope.size() > 0 && p0[k].mu_slope != pi[k].mu_slope))
                        same_mu_sigma = false;
                }
            }
            if (!same_r)
                add(rep, "interest rate must be regime-independent at regime " +
                             std::to_string(i + 1),
                    i + 1);
            if (mode == AssumptionMode::ExpRandom && !same_mu_sigma)
                add(rep, "mu and sigma must be regime-independent at regime " +
                             std::to_string(i + 1),
                    i + 1);
        }
    }
    if (mode == AssumptionMode::ExpDeterministic) {
        for (int i = 0; i < ell; ++i)
            for (size_t k = 0; k < model.coefficients.pieces[i].size(); ++k)
                if (model.coefficients.pieces[i][k].r_slope != 0.0)
                    add(rep, "interest rate must be deterministic (no factor slope) at regime " +
                                 std::to_string(i + 1),
                        i + 1, static_cast<int>(k));
    }
    if (mode == AssumptionMode::ExpRandom) {
        if (model.m != model.n)
            add(rep, "random-rate exponential case requires m = n");
        if (!f.enabled)
            add(rep, "random-rate exponential case requires the factor to be enabled");
    }

    return rep;
}

CoefficientSet coeff_at(const MarketModel& model, double t, int regime,
                        std::optional<double> x) {
    if (regime < 0 || regime >= model.ell())
        throw std::domain_error("coeff_at: regime index out of range");
    if (t < 0.0 || t > model.horizon)
        throw std::domain_error("coeff_at: time outside [0, T]");
    if (model.factor.enabled && !x.has_value())
        throw std::domain_error("coeff_at: factor value required for this model");
    if (!model.factor.enabled && x.has_value())
        throw std::domain_error("coeff_at: model has no factor");

    const CoefficientPiece& p = model.coefficients.piece_at(regime, t);
    CoefficientSet c;
    c.r = p.r;
    c.mu = p.mu;
    c.sigma = p.sigma;
    c.rho = p.rho;
    if (x.has_value()) {
        c.r += p.r_slope * (*x);
        if (p.mu_slope.size() > 0) c.mu += p.mu_slope * (*x);
    }
    c.b = c.mu - Vec::Constant(model.m, c.r);
    return c;
}

} // namespace rsci
