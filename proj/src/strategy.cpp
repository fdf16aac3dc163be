#include "rsci/strategy.hpp"

#include "rsci/csvio.hpp"

#include <Eigen/LU>
#include <cmath>
#include <sstream>

namespace rsci {

namespace {

// interpolation weights in the factor dimension
struct XWeights {
    int j0 = 0, j1 = 0;
    double w = 0.0;
};

XWeights xweights(const RegimeField& f, double x) {
    XWeights r;
    const int nx = f.nx();
    if (!f.has_factor || nx == 1) return r;
    const double lo = f.factor_nodes[0], hi = f.factor_nodes[nx - 1];
    if (x <= lo) return r;
    if (x >= hi) return {nx - 1, nx - 1, 0.0};
    double pos = (x - lo) / (hi - lo) * (nx - 1);
    r.j0 = std::min(static_cast<int>(pos), nx - 2);
    r.j1 = r.j0 + 1;
    r.w = pos - r.j0;
    return r;
}

} // namespace

FeedbackStrategy extract_strategy(const MarketModel& model, const ConstraintSet& theta,
                                  const SolvedFields& fields) {
    if (theta.m != model.m)
        throw ConfigError("extract_strategy: constraint set dimension does not match the model");
    if (fields.main.ell != model.ell())
        throw ConfigError("extract_strategy: field regime count does not match the model");
    check_mode_support(theta, fields.utility, fields.gamma);
    if (fields.utility == Utility::Log || fields.utility == Utility::ExpDet ||
        fields.utility == Utility::ExpRandom) {
        if (fields.aux.values.empty())
            throw ConfigError("extract_strategy: auxiliary field (h) is required");
    }
    if (fields.utility == Utility::ExpRandom && theta.family != Family::Unconstrained)
        throw ConfigError("extract_strategy: the random-rate exponential case requires Pi = R^m");

    FeedbackStrategy s;
    s.util_ = fields.utility;
    s.gamma_ = fields.gamma;
    s.beta_ = fields.beta;
    s.theta_ = theta;
    s.model_ = model;
    s.fields_ = fields;

    const RegimeField& main = s.fields_.main;
    const int N = main.grid.N;
    const int nx = main.nx();
    const int m = model.m;
    const Vec vol = model.factor.enabled ? model.factor.vol : Vec::Zero(model.n);

    if (s.util_ == Utility::Power || s.util_ == Utility::Log || s.util_ == Utility::ExpDet) {
        s.pi_cache_.assign(main.values.size(), Mat::Zero(N + 1, nx * m));
        s.c_cache_.assign(main.values.size(), Mat::Zero(N + 1, nx));
        for (int i = 0; i < main.ell; ++i) {
            HamiltonianResult warm;
            for (int k = 0; k <= N; ++k) {
                double t = main.grid.node(k);
                for (int j = 0; j < nx; ++j) {
                    double xj = main.has_factor ? main.factor_nodes[j] : 0.0;
                    CoefficientSet co =
                        coeff_at(model, t, i,
                                 model.factor.enabled ? std::optional<double>(xj) : std::nullopt);
                    HamiltonianResult res;
                    if (s.util_ == Utility::Power) {
                        double P = main.values[i](k, j);
                        Vec lam = vol * main.slope_x[i](k, j);
                        res = power_hamiltonian(theta, s.gamma_, P, lam, co,
                                                warm.argmax_pi.size() ? &warm : nullptr);
                        s.c_cache_[i](k, j) = res.argmax_c;
                    } else if (s.util_ == Utility::Log) {
                        double h = s.fields_.aux.values[i](k, j);
                        Vec eta = vol * s.fields_.aux.slope_x[i](k, j);
                        res = log_hamiltonian(theta, h, eta, co,
                                              warm.argmax_pi.size() ? &warm : nullptr);
                        s.c_cache_[i](k, j) = res.argmax_c;
                    } else {
                        double h = s.fields_.aux.values[0](k, 0);
                        Vec z = vol * main.slope_x[i](k, j);
                        res = exp_hamiltonian(theta, s.beta_, h, z, co,
                                              warm.argmax_pi.size() ? &warm : nullptr);
                    }
                    warm = res;
                    s.pi_cache_[i].block(k, j * m, 1, m) = res.argmax_pi.transpose();
                }
            }
        }
    }
    return s;
}

Vec FeedbackStrategy::cached_pi(int k, int regime, double x) const {
    const Mat& C = pi_cache_[static_cast<size_t>(regime)];
    const int m = model_.m;
    XWeights w = xweights(fields_.main, x);
    Vec a = C.block(k, w.j0 * m, 1, m).transpose();
    if (w.j1 == w.j0) return a;
    Vec b = C.block(k, w.j1 * m, 1, m).transpose();
    return (1.0 - w.w) * a + w.w * b;
}

double FeedbackStrategy::cached_c(int k, int regime, double x) const {
    const Mat& C = c_cache_[static_cast<size_t>(regime)];
    XWeights w = xweights(fields_.main, x);
    if (w.j1 == w.j0) return C(k, w.j0);
    return (1.0 - w.w) * C(k, w.j0) + w.w * C(k, w.j1);
}

Control FeedbackStrategy::at(double t, int regime, double wealth,
                             std::optional<double> factor) const {
    if (regime < 0 || regime >= model_.ell())
        throw std::domain_error("FeedbackStrategy::at: regime out of range");
    if (model_.factor.enabled && !factor.has_value())
        throw std::domain_error("FeedbackStrategy::at: factor value required");
    const double x = factor.value_or(0.0);
    const int k = fields_.main.left_node(t);
    const double tk = fields_.main.grid.node(k);

    Control ctl;
    switch (util_) {
        case Utility::Power:
        case Utility::Log:
            ctl.pi = cached_pi(k, regime, x);
            ctl.c = cached_c(k, regime, x);
            return ctl;
        case Utility::ExpDet: {
            ctl.pi = cached_pi(k, regime, x);
            double h = fields_.aux.values[0](k, 0);
            double Y = fields_.main.value_at(k, regime, x);
            ctl.c = h * wealth + Y - std::log(h) / beta_;
            return ctl;
        }
        case Utility::ExpRandom: {
            double h = fields_.aux.value_at(k, 0, x);
            Vec eta = model_.factor.vol * fields_.aux.slope_at(k, 0, x);
            double P = fields_.main.value_at(k, regime, x);
            Vec lam = model_.factor.vol * fields_.main.slope_at(k, regime, x);
            double Y = h * P;
            Vec Z = h * lam + P * eta;
            CoefficientSet co = coeff_at(model_, tk, regime, x);
            Vec sb = co.sigma.partialPivLu().solve(co.b);
            Vec w = beta_ * h * eta * wealth + beta_ * h * Z - h * sb - eta;
            ctl.pi = -co.sigma.transpose().partialPivLu().solve(w) / (beta_ * h * h);
            ctl.c = h * wealth + Y - std::log(h) / beta_;
            return ctl;
        }
    }
    throw ConfigError("FeedbackStrategy::at: unknown utility");
}

std::string FeedbackStrategy::to_csv() const {
    std::ostringstream os;
    const RegimeField& main = fields_.main;
    const int m = model_.m;
    const bool fac = main.has_factor;

    if (util_ == Utility::Power || util_ == Utility::Log) {
        os << "t,regime";
        if (fac) os << ",factor";
        for (int c = 1; c <= m; ++c) os << ",pi_" << c;
        os << ",c\n";
        for (int k = 0; k <= main.grid.N; ++k)
            for (int i = 0; i < main.ell; ++i)
                for (int j = 0; j < main.nx(); ++j) {
                    os << fmt17(main.grid.node(k)) << "," << (i + 1);
                    if (fac) os << "," << fmt17(main.factor_nodes[j]);
                    for (int c = 0; c < m; ++c) os << "," << fmt17(pi_cache_[i](k, j * m + c));
                    os << "," << fmt17(c_cache_[i](k, j)) << "\n";
                }
        return os.str();
    }

    // exponential: affine coefficients of wealth
    os << "t,regime";
    if (fac) os << ",factor";
    for (int c = 1; c <= m; ++c) os << ",pi_slope_" << c;
    for (int c = 1; c <= m; ++c) os << ",pi_intercept_" << c;
    os << ",c_slope,c_intercept\n";
    for (int k = 0; k <= main.grid.N; ++k) {
        double tk = main.grid.node(k);
        for (int i = 0; i < main.ell; ++i) {
            for (int j = 0; j < main.nx(); ++j) {
                double xj = fac ? main.factor_nodes[j] : 0.0;
                Vec slope = Vec::Zero(m), icept = Vec::Zero(m);
                double h, Y;
                if (util_ == Utility::ExpDet) {
                    h = fields_.aux.values[0](k, 0);
                    Y = main.values[i](k, j);
                    icept = pi_cache_[i].block(k, j * m, 1, m).transpose();
                } else {
                    h = fields_.aux.value_at(k, 0, xj);
                    Vec eta = model_.factor.vol * fields_.aux.slope_at(k, 0, xj);
                    double P = main.values[i](k, j);
                    Vec lam = model_.factor.vol * main.slope_x[i](k, j);
                    Y = h * P;
                    Vec Z = h * lam + P * eta;
                    CoefficientSet co = coeff_at(model_, tk, i, xj);
                    auto lu = co.sigma.transpose().partialPivLu();
                    Vec sb = co.sigma.partialPivLu().solve(co.b);
                    slope = -lu.solve(eta) / h;
                    icept = -lu.solve(Vec(beta_ * h * Z - h * sb - eta)) / (beta_ * h * h);
                }
                os << fmt17(tk) << "," << (i + 1);
                if (fac) os << "," << fmt17(xj);
                for (int c = 0; c < m; ++c) os << "," << fmt17(slope[c]);
                for (int c = 0; c < m; ++c) os << "," << fmt17(icept[c]);
                os << "," << fmt17(h) << "," << fmt17(Y - std::log(h) / beta_) << "\n";
            }
        }
    }
    return os.str();
}

ValueReport value_at(const MarketModel& model, const SolvedFields& fields, double x, int i0) {
    if (i0 < 0 || i0 >= model.ell())
        throw std::domain_error("value_at: regime out of range");
    const double x0f = model.factor.enabled ? model.factor.x0 : 0.0;
    ValueReport rep;
    switch (fields.utility) {
        case Utility::Power: {
            if (!(x > 0.0)) throw std::domain_error("value_at: wealth must be > 0");
            rep.main0 = fields.main.value_at(0, i0, x0f);
            rep.value = std::pow(x, fields.gamma) / fields.gamma * rep.main0;
            return rep;
        }
        case Utility::Log: {
            if (!(x > 0.0)) throw std::domain_error("value_at: wealth must be > 0");
            rep.aux0 = fields.aux.value_at(0, i0, x0f);
            rep.main0 = fields.main.value_at(0, i0, x0f);
            rep.value = rep.aux0 * std::log(x) + rep.main0;
            return rep;
        }
        case Utility::ExpDet: {
            rep.aux0 = fields.aux.values[0](0, 0);
            rep.main0 = fields.main.value_at(0, i0, x0f);
            rep.value = -std::exp(-fields.beta * (rep.aux0 * x + rep.main0));
            return rep;
        }
        case Utility::ExpRandom: {
            rep.aux0 = fields.aux.value_at(0, 0, x0f);
            rep.main0 = fields.main.value_at(0, i0, x0f);
            double Y0 = rep.aux0 * rep.main0;
            rep.value = -std::exp(-fields.beta * (rep.aux0 * x + Y0));
            return rep;
        }
    }
    throw ConfigError("value_at: unknown utility");
}

} // namespace rsci
