#include "rsci/sim.hpp"

#include "rsci/csvio.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace rsci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ99 = 2.5758293035489004;   // 99% two-sided normal quantile

uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

uint64_t rotl64(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
} // namespace

PathRng::PathRng(uint64_t seed, uint64_t path, uint64_t stream) {
    uint64_t x = seed ^ (path * 0xA24BAED4963EE407ull) ^ (stream * 0x9FB21C651E98DF25ull);
    for (auto& s : s_) s = splitmix64(x);
}

uint64_t PathRng::next_u64() {
    uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double PathRng::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double PathRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
}

double PathRng::exponential(double rate) { return -std::log(uniform()) / rate; }

int RegimePath::state_at(double t) const {
    int idx = 0;
    for (size_t j = 1; j < times.size(); ++j)
        if (times[j] <= t) idx = static_cast<int>(j);
    return states[static_cast<size_t>(idx)];
}

RegimePath simulate_chain(const RegimeGenerator& Q, int i0, double T, PathRng& rng) {
    if (i0 < 0 || i0 >= Q.ell) throw std::domain_error("simulate_chain: regime out of range");
    RegimePath p;
    p.times.push_back(0.0);
    p.states.push_back(i0);
    double t = 0.0;
    int i = i0;
    while (true) {
        double rate = -Q.q(i, i);
        if (!(rate > 0.0)) break;   // absorbing state
        t += rng.exponential(rate);
        if (t >= T) break;
        double u = rng.uniform() * rate;
        double acc = 0.0;
        int nxt = i;
        for (int j = 0; j < Q.ell; ++j) {
            if (j == i) continue;
            acc += Q.q(i, j);
            nxt = j;
            if (u <= acc) break;
        }
        i = nxt;
        p.times.push_back(t);
        p.states.push_back(i);
    }
    return p;
}

std::string Perturbation::label() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::ScalePi: return "scale-pi " + fmt17(value);
        case Kind::ConstC: return "const-c " + fmt17(value);
    }
    return "?";
}

bool PerturbationReport::all_pass() const {
    for (const auto& r : rows)
        if (!r.rejected && !r.pass) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Path engine
// ---------------------------------------------------------------------------

namespace {

struct UtilOps {
    Utility kind = Utility::Power;
    double gamma = 0.5;
    double beta = 1.0;

    bool proportional() const { return kind == Utility::Power || kind == Utility::Log; }
    double flow(double c, double X) const {
        switch (kind) {
            case Utility::Power: return std::pow(c * X, gamma) / gamma;
            case Utility::Log: return std::log(c * X);
            default: return -std::exp(-beta * c);
        }
    }
    double terminal(double X) const {
        switch (kind) {
            case Utility::Power: return std::pow(X, gamma) / gamma;
            case Utility::Log: return std::log(X);
            default: return -std::exp(-beta * X);
        }
    }
    double adm_diag(double X) const {
        switch (kind) {
            case Utility::Power: return std::pow(X, gamma);
            case Utility::Log: return std::abs(std::log(X));
            default: return std::exp(-beta * X);
        }
    }
};

using Recorder = std::function<void(long path, double t, int regime, double X, const Control&)>;

struct EngineCtx {
    const MarketModel* model = nullptr;
    UtilOps ops;
    const std::vector<ControlFn>* arms = nullptr;
    double x0 = 1.0;
    int i0 = 0;
    double dt = 1e-3;
    uint64_t seed = 42;
    bool antithetic = false;
    int steps = 0;
    // coefficient lookup without allocation for factor-free models
    bool fast_coeffs = false;
    std::vector<std::vector<double>> piece_starts;       // per regime
    std::vector<std::vector<CoefficientSet>> piece_sets; // per regime
    const Recorder* recorder = nullptr;
};

EngineCtx make_ctx(const MarketModel& model, const UtilitySpec& util,
                   const std::vector<ControlFn>& arms, double x0, int i0,
                   const SimConfig& cfg) {
    if (cfg.n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (cfg.antithetic && cfg.n_paths % 2 != 0)
        throw std::invalid_argument("antithetic sampling requires an even path count");
    if (i0 < 0 || i0 >= model.ell()) throw std::domain_error("initial regime out of range");

    double steps_f = model.horizon / cfg.dt;
    long steps = std::lround(steps_f);
    if (steps < 1 || std::abs(steps_f - static_cast<double>(steps)) > 1e-9)
        throw std::invalid_argument("dt must divide the horizon");

    EngineCtx ctx;
    ctx.model = &model;
    ctx.ops = {util.kind, util.gamma, util.beta};
    ctx.arms = &arms;
    ctx.x0 = x0;
    ctx.i0 = i0;
    ctx.dt = cfg.dt;
    ctx.seed = cfg.seed;
    ctx.antithetic = cfg.antithetic;
    ctx.steps = static_cast<int>(steps);
    ctx.fast_coeffs = !model.factor.enabled;
    if (ctx.fast_coeffs) {
        ctx.piece_starts.resize(static_cast<size_t>(model.ell()));
        ctx.piece_sets.resize(static_cast<size_t>(model.ell()));
        for (int i = 0; i < model.ell(); ++i) {
            for (const auto& p : model.coefficients.pieces[static_cast<size_t>(i)]) {
                ctx.piece_starts[static_cast<size_t>(i)].push_back(p.t_start);
                ctx.piece_sets[static_cast<size_t>(i)].push_back(coeff_at(model, p.t_start, i));
            }
        }
    }
    return ctx;
}

const CoefficientSet& lookup_coeffs(const EngineCtx& ctx, double t, int regime,
                                    CoefficientSet& scratch, double xi) {
    if (ctx.fast_coeffs) {
        const auto& starts = ctx.piece_starts[static_cast<size_t>(regime)];
        size_t idx = 0;
        for (size_t k = 1; k < starts.size(); ++k) {
            if (starts[k] <= t) idx = k;
            else break;
        }
        return ctx.piece_sets[static_cast<size_t>(regime)][idx];
    }
    scratch = coeff_at(*ctx.model, std::min(t, ctx.model->horizon), regime, xi);
    return scratch;
}

struct PathOut {
    std::vector<double> vals;        // per arm (pair-averaged when antithetic)
    double terminal_wealth = 0.0;
    bool nonpos_wealth = false;
    double max_abs_c = 0.0;
    double adm_max = 0.0;
    bool finite = true;
};

PathOut run_path(const EngineCtx& ctx, long path) {
    const MarketModel& model = *ctx.model;
    const int n_arms = static_cast<int>(ctx.arms->size());
    const int dirs = ctx.antithetic ? 2 : 1;
    const int n = model.n;
    const double T = model.horizon;
    const bool prop = ctx.ops.proportional();
    const bool fac = model.factor.enabled;

    PathRng rng_chain(ctx.seed, static_cast<uint64_t>(path), 0);
    PathRng rng_w(ctx.seed, static_cast<uint64_t>(path), 1);
    RegimePath chain = simulate_chain(model.generator, ctx.i0, T, rng_chain);

    // state per (direction, arm)
    std::vector<double> W(static_cast<size_t>(dirs * n_arms),
                          prop ? std::log(ctx.x0) : ctx.x0);
    std::vector<double> acc(static_cast<size_t>(dirs * n_arms), 0.0);
    std::vector<double> rho_int(static_cast<size_t>(dirs), 0.0);
    std::vector<double> xi(static_cast<size_t>(dirs), model.factor.x0);

    PathOut out;
    out.vals.assign(static_cast<size_t>(n_arms), 0.0);

    Vec dw(n);
    Vec pisig(n);
    CoefficientSet scratch;
    size_t jump_idx = 0;

    double s = 0.0;
    int kstep = 0;
    while (kstep < ctx.steps) {
        double t_end = (kstep + 1 == ctx.steps) ? T : (kstep + 1) * ctx.dt;
        double e = t_end;
        if (jump_idx + 1 < chain.times.size() && chain.times[jump_idx + 1] < e - 1e-15 &&
            chain.times[jump_idx + 1] > s + 1e-15)
            e = chain.times[jump_idx + 1];
        const int regime = chain.states[jump_idx];
        const double ds = e - s;
        const double sq = std::sqrt(ds);
        for (int c = 0; c < n; ++c) dw[c] = rng_w.normal() * sq;

        for (int d = 0; d < dirs; ++d) {
            const double sign = d == 0 ? 1.0 : -1.0;
            const CoefficientSet& co = lookup_coeffs(ctx, s, regime, scratch, xi[d]);
            const double disc = std::exp(-rho_int[d]);
            for (int a = 0; a < n_arms; ++a) {
                double& w = W[static_cast<size_t>(d * n_arms + a)];
                double X = prop ? std::exp(w) : w;
                Control ctl = (*ctx.arms)[static_cast<size_t>(a)](
                    s, regime, X, fac ? std::optional<double>(xi[d]) : std::nullopt);
                acc[static_cast<size_t>(d * n_arms + a)] += disc * ctx.ops.flow(ctl.c, X) * ds;
                if (ctx.recorder && d == 0 && a == 0) (*ctx.recorder)(path, s, regime, X, ctl);
                double pib = ctl.pi.dot(co.b);
                pisig.noalias() = co.sigma.transpose() * ctl.pi;
                double noise = sign * pisig.dot(dw);
                if (prop) {
                    w += (co.r + pib - ctl.c - 0.5 * pisig.squaredNorm()) * ds + noise;
                } else {
                    w += (co.r * X + pib - ctl.c) * ds + noise;
                }
                if (a == 0) {
                    double Xn = prop ? std::exp(w) : w;
                    out.max_abs_c = std::max(out.max_abs_c, std::abs(ctl.c));
                    if (!prop && Xn <= 0.0) out.nonpos_wealth = true;
                    out.adm_max = std::max(out.adm_max, ctx.ops.adm_diag(Xn));
                }
            }
            rho_int[d] += co.rho * ds;
            if (fac)
                xi[d] += model.factor.kappa * (model.factor.theta - xi[d]) * ds +
                         sign * model.factor.vol.dot(dw);
        }

        if (e < t_end) {
            ++jump_idx;   // crossed a regime jump
        } else {
            ++kstep;
        }
        s = e;
    }

    for (int d = 0; d < dirs; ++d) {
        const double disc = std::exp(-rho_int[d]);
        for (int a = 0; a < n_arms; ++a) {
            double w = W[static_cast<size_t>(d * n_arms + a)];
            double X = prop ? std::exp(w) : w;
            double v = acc[static_cast<size_t>(d * n_arms + a)] + disc * ctx.ops.terminal(X);
            out.vals[static_cast<size_t>(a)] += v / dirs;
            if (a == 0 && d == 0) out.terminal_wealth = X;
            if (a == 0 && !prop && X <= 0.0) out.nonpos_wealth = true;
        }
    }
    for (double v : out.vals)
        if (!std::isfinite(v)) out.finite = false;
    return out;
}

struct Totals {
    long n = 0, excluded = 0, nonpos = 0;
    double sum = 0.0, sumsq = 0.0;
    double tw_sum = 0.0, tw_min = kInf, tw_max = -kInf;
    double max_abs_c = 0.0, adm = 0.0;
    std::vector<double> arm_sum, diff_sum, diff_sumsq;

    void init(int n_arms) {
        arm_sum.assign(static_cast<size_t>(n_arms), 0.0);
        diff_sum.assign(static_cast<size_t>(n_arms), 0.0);
        diff_sumsq.assign(static_cast<size_t>(n_arms), 0.0);
    }
    void add(const PathOut& p) {
        if (!p.finite) {
            ++excluded;
            return;
        }
        ++n;
        sum += p.vals[0];
        sumsq += p.vals[0] * p.vals[0];
        tw_sum += p.terminal_wealth;
        tw_min = std::min(tw_min, p.terminal_wealth);
        tw_max = std::max(tw_max, p.terminal_wealth);
        if (p.nonpos_wealth) ++nonpos;
        max_abs_c = std::max(max_abs_c, p.max_abs_c);
        adm = std::max(adm, p.adm_max);
        for (size_t a = 0; a < p.vals.size(); ++a) {
            arm_sum[a] += p.vals[a];
            double d = p.vals[a] - p.vals[0];
            diff_sum[a] += d;
            diff_sumsq[a] += d * d;
        }
    }
    void merge(const Totals& o) {
        n += o.n;
        excluded += o.excluded;
        nonpos += o.nonpos;
        sum += o.sum;
        sumsq += o.sumsq;
        tw_sum += o.tw_sum;
        tw_min = std::min(tw_min, o.tw_min);
        tw_max = std::max(tw_max, o.tw_max);
        max_abs_c = std::max(max_abs_c, o.max_abs_c);
        adm = std::max(adm, o.adm);
        for (size_t a = 0; a < arm_sum.size(); ++a) {
            arm_sum[a] += o.arm_sum[a];
            diff_sum[a] += o.diff_sum[a];
            diff_sumsq[a] += o.diff_sumsq[a];
        }
    }
};

// Fixed-size chunks reduced in chunk order: results do not depend on the
// worker count.
Totals run_ensemble(const EngineCtx& ctx, long units, int n_arms, int threads) {
    const long chunk = 4096;
    const long nchunks = (units + chunk - 1) / chunk;
    std::vector<Totals> parts(static_cast<size_t>(nchunks));
    std::atomic<long> next{0};
    auto worker = [&]() {
        for (long c = next.fetch_add(1); c < nchunks; c = next.fetch_add(1)) {
            Totals t;
            t.init(n_arms);
            long lo = c * chunk, hi = std::min(units, lo + chunk);
            for (long p = lo; p < hi; ++p) t.add(run_path(ctx, p));
            parts[static_cast<size_t>(c)] = std::move(t);
        }
    };
    int nw = std::max(1, std::min<int>(threads, static_cast<int>(nchunks)));
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(nw));
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    Totals all;
    all.init(n_arms);
    for (const auto& p : parts) all.merge(p);
    return all;
}

SimResult totals_to_result(const Totals& t, long n_paths) {
    SimResult r;
    r.n_paths = n_paths;
    r.excluded = t.excluded;
    if (t.n > 0) {
        r.mean = t.sum / t.n;
        double var =
            t.n > 1 ? std::max(0.0, (t.sumsq - t.n * r.mean * r.mean) / (t.n - 1)) : 0.0;
        r.se = std::sqrt(var / t.n);
        r.ci_lo = r.mean - kZ99 * r.se;
        r.ci_hi = r.mean + kZ99 * r.se;
        r.terminal_wealth_mean = t.tw_sum / t.n;
        r.terminal_wealth_min = t.tw_min;
        r.terminal_wealth_max = t.tw_max;
    }
    r.nonpositive_wealth_paths = t.nonpos;
    r.max_abs_c = t.max_abs_c;
    r.admissibility_diag_max = t.adm;
    return r;
}

UtilitySpec util_of(const FeedbackStrategy& s) {
    const SolvedFields& f = s.fields();
    return {f.utility, f.gamma, f.beta};
}

void check_grid_alignment(const FeedbackStrategy& s, const SimConfig& cfg) {
    double gstep = s.grid().dt();
    double ratio = gstep / cfg.dt;
    if (ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9)
        throw std::invalid_argument("sim dt must divide the BSDE grid step");
}

} // namespace

SimResult simulate_controls(const MarketModel& model, const UtilitySpec& util,
                            const ControlFn& control, double x0, int i0,
                            const SimConfig& cfg) {
    std::vector<ControlFn> arms{control};
    EngineCtx ctx = make_ctx(model, util, arms, x0, i0, cfg);
    long units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    Totals t = run_ensemble(ctx, units, 1, cfg.threads);
    return totals_to_result(t, cfg.n_paths);
}

SimResult simulate_wealth(const MarketModel& model, const FeedbackStrategy& strategy,
                          double x0, int i0, const SimConfig& cfg) {
    check_grid_alignment(strategy, cfg);
    ControlFn fn = [&strategy](double t, int regime, double X, std::optional<double> xi) {
        return strategy.at(t, regime, X, xi);
    };
    return simulate_controls(model, util_of(strategy), fn, x0, i0, cfg);
}

namespace {

std::string check_feasible(const FeedbackStrategy& s, const Perturbation& p) {
    const ConstraintSet& theta = s.constraints();
    const Utility u = s.utility();
    switch (p.kind) {
        case Perturbation::Kind::Identity:
            return "";
        case Perturbation::Kind::ScalePi: {
            if (u == Utility::ExpRandom) return "";
            const int m = s.model().m;
            for (size_t i = 0; i < s.pi_cache().size(); ++i) {
                const Mat& P = s.pi_cache()[i];
                const Mat& C = s.c_cache()[i];
                for (int k = 0; k < P.rows(); ++k)
                    for (int j = 0; j * m < P.cols(); ++j) {
                        Vec pi = p.value * P.block(k, j * m, 1, m).transpose();
                        bool ok = (u == Utility::Power || u == Utility::Log)
                                      ? theta.contains(pi, C(k, j), 1e-9)
                                      : theta.contains_pi(pi, 1e-9);
                        if (!ok) return "scaled portfolio leaves the constraint set";
                    }
            }
            return "";
        }
        case Perturbation::Kind::ConstC: {
            if (u == Utility::ExpDet || u == Utility::ExpRandom) return "";
            if (!(p.value > 0.0)) return "constant consumption must be positive";
            const int m = s.model().m;
            for (size_t i = 0; i < s.pi_cache().size(); ++i) {
                const Mat& P = s.pi_cache()[i];
                for (int k = 0; k < P.rows(); ++k)
                    for (int j = 0; j * m < P.cols(); ++j) {
                        Vec pi = P.block(k, j * m, 1, m).transpose();
                        if (!theta.contains(pi, p.value, 1e-9))
                            return "constant consumption leaves the constraint set";
                    }
            }
            return "";
        }
    }
    return "unknown perturbation";
}

} // namespace

PerturbationReport perturbation_test(const MarketModel& model, const FeedbackStrategy& strategy,
                                     const std::vector<Perturbation>& perturbations, double x0,
                                     int i0, const SimConfig& cfg) {
    check_grid_alignment(strategy, cfg);
    ControlFn base = [&strategy](double t, int regime, double X, std::optional<double> xi) {
        return strategy.at(t, regime, X, xi);
    };

    PerturbationReport rep;
    std::vector<ControlFn> arms{base};
    std::vector<int> arm_of_row;
    std::vector<PerturbationRow> rows;
    for (const auto& p : perturbations) {
        PerturbationRow row;
        row.label = p.label();
        std::string why = check_feasible(strategy, p);
        if (!why.empty()) {
            row.rejected = true;
            row.reject_reason = why;
            arm_of_row.push_back(-1);
        } else {
            Perturbation pc = p;
            arms.push_back(
                [base, pc](double t, int regime, double X, std::optional<double> xi) {
                    Control c = base(t, regime, X, xi);
                    if (pc.kind == Perturbation::Kind::ScalePi)
                        c.pi *= pc.value;
                    else if (pc.kind == Perturbation::Kind::ConstC)
                        c.c = pc.value;
                    return c;
                });
            arm_of_row.push_back(static_cast<int>(arms.size()) - 1);
        }
        rows.push_back(std::move(row));
    }

    EngineCtx ctx = make_ctx(model, util_of(strategy), arms, x0, i0, cfg);
    long units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    Totals t = run_ensemble(ctx, units, static_cast<int>(arms.size()), cfg.threads);

    rep.candidate_mean = t.n > 0 ? t.arm_sum[0] / t.n : 0.0;
    rep.candidate_se = totals_to_result(t, cfg.n_paths).se;
    for (size_t r = 0; r < rows.size(); ++r) {
        if (arm_of_row[r] < 0) {
            rep.rows.push_back(rows[r]);
            continue;
        }
        size_t a = static_cast<size_t>(arm_of_row[r]);
        PerturbationRow row = rows[r];
        if (t.n > 0) {
            row.mean = t.arm_sum[a] / t.n;
            row.diff_mean = t.diff_sum[a] / t.n;
            double var = t.n > 1
                             ? std::max(0.0, (t.diff_sumsq[a] -
                                              t.n * row.diff_mean * row.diff_mean) /
                                                 (t.n - 1))
                             : 0.0;
            row.diff_se = std::sqrt(var / t.n);
            row.pass = row.diff_mean <= 3.0 * row.diff_se;
        }
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

std::string dump_paths_csv(const MarketModel& model, const FeedbackStrategy& strategy,
                           double x0, int i0, const SimConfig& cfg, long max_paths) {
    check_grid_alignment(strategy, cfg);
    std::ostringstream os;
    os << "path_id,t,regime,X";
    for (int c = 1; c <= model.m; ++c) os << ",pi_" << c;
    os << ",c\n";
    Recorder rec = [&](long path, double t, int regime, double X, const Control& ctl) {
        os << path << "," << fmt17(t) << "," << (regime + 1) << "," << fmt17(X);
        for (int c = 0; c < model.m; ++c) os << "," << fmt17(ctl.pi[c]);
        os << "," << fmt17(ctl.c) << "\n";
    };
    ControlFn fn = [&strategy](double t, int regime, double X, std::optional<double> xi) {
        return strategy.at(t, regime, X, xi);
    };
    std::vector<ControlFn> arms{fn};
    SimConfig c2 = cfg;
    c2.antithetic = false;
    EngineCtx ctx = make_ctx(model, util_of(strategy), arms, x0, i0, c2);
    ctx.recorder = &rec;
    long n = std::min(max_paths, cfg.n_paths);
    for (long p = 0; p < n; ++p) run_path(ctx, p);
    return os.str();
}

} // namespace rsci
