#pragma once

#include "rsci/strategy.hpp"

#include <cstdint>
#include <functional>

namespace rsci {

// ============================================================================
// Regime-chain, factor and wealth simulation under feedback strategies;
// Monte Carlo estimates of realized utility and perturbation optimality
// tests with common random numbers.
// ============================================================================

/// xoshiro256++ keyed by (seed, path, stream). Path sets are identical
/// regardless of how the ensemble is partitioned across workers.
class PathRng {
public:
    PathRng(uint64_t seed, uint64_t path, uint64_t stream);

    uint64_t next_u64();
    double uniform();              // in (0, 1]
    double normal();               // Box-Muller
    double exponential(double rate);

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

struct SimConfig {
    long n_paths = 10000;
    uint64_t seed = 42;
    double dt = 1e-3;
    bool antithetic = false;
    int threads = 1;
};

struct SimResult {
    double mean = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;    // 99% interval
    double ci_hi = 0.0;
    long n_paths = 0;
    long excluded = 0;     // non-finite paths, reported and excluded
    double terminal_wealth_mean = 0.0;
    double terminal_wealth_min = 0.0;
    double terminal_wealth_max = 0.0;
    long nonpositive_wealth_paths = 0;   // exponential mode diagnostic
    double max_abs_c = 0.0;
    double admissibility_diag_max = 0.0; // heuristic, not a certificate
};

struct RegimePath {
    std::vector<double> times;   // times[0] = 0; jump epochs afterwards
    std::vector<int> states;     // states[j] holds on [times[j], times[j+1])

    int state_at(double t) const;
};

/// Exact continuous-time chain simulation: exponential holding times, next
/// state drawn from the jump distribution row.
RegimePath simulate_chain(const RegimeGenerator& Q, int i0, double T, PathRng& rng);

struct UtilitySpec {
    Utility kind = Utility::Power;
    double gamma = 0.5;
    double beta = 1.0;
};

using ControlFn =
    std::function<Control(double t, int regime, double wealth, std::optional<double> factor)>;

/// Monte Carlo estimate of realized expected utility under an arbitrary
/// feedback control (used directly by tests; simulate_wealth wraps it).
SimResult simulate_controls(const MarketModel& model, const UtilitySpec& util,
                            const ControlFn& control, double x0, int i0,
                            const SimConfig& cfg);

SimResult simulate_wealth(const MarketModel& model, const FeedbackStrategy& strategy,
                          double x0, int i0, const SimConfig& cfg);

struct Perturbation {
    enum class Kind { Identity, ScalePi, ConstC };
    Kind kind = Kind::Identity;
    double value = 1.0;   // scale factor, or the constant consumption

    std::string label() const;
};

struct PerturbationRow {
    std::string label;
    double mean = 0.0;       // MC value of the perturbed arm
    double diff_mean = 0.0;  // perturbed minus candidate (paired)
    double diff_se = 0.0;
    bool pass = false;       // diff_mean <= 3 * diff_se
    bool rejected = false;   // infeasible before simulation
    std::string reject_reason;
};

struct PerturbationReport {
    double candidate_mean = 0.0;
    double candidate_se = 0.0;
    std::vector<PerturbationRow> rows;

    bool all_pass() const;
};

/// Runs candidate and perturbed arms under common random numbers. Infeasible
/// perturbations are rejected before simulation.
PerturbationReport perturbation_test(const MarketModel& model, const FeedbackStrategy& strategy,
                                     const std::vector<Perturbation>& perturbations, double x0,
                                     int i0, const SimConfig& cfg);

/// CSV dump of the first max_paths paths (path_id, t, regime, X, pi, c).
std::string dump_paths_csv(const MarketModel& model, const FeedbackStrategy& strategy,
                           double x0, int i0, const SimConfig& cfg, long max_paths);

} // namespace rsci
