#pragma once

// Test-only oracles, independent of the library's optimization path:
//  - multi-resolution exhaustive lattice search for the Hamiltonian suprema
//  - composite-Simpson quadrature
//  - a deterministic random-instance generator for the oracle-equivalence
//    sweeps

#include "rsci/constraints.hpp"
#include "rsci/market.hpp"

#include <functional>
#include <random>

namespace rsci::testing {

struct OracleResult {
    double inner = 0.0;   // supremum of the inner objective (no prefactor)
    Vec argmax_pi;
    double argmax_c = 0.0;
    bool on_boundary = false;   // best point hit the search box: enlarge it
};

/// Exhaustive lattice search over [lo, hi] (last coordinate is c when with_c),
/// keeping only feasible points, then repeatedly refined around the best
/// point. Concavity of the objectives makes the refinement exact in the
/// limit; on_boundary flags an under-sized initial box.
/// skip_lower_dim: dimension whose lower edge is a genuine feasible-set
/// boundary (the consumption floor), exempt from the boundary flag.
OracleResult lattice_max(const std::function<double(const Vec&, double)>& objective,
                         const std::function<bool(const Vec&, double)>& feasible,
                         const Vec& lo, const Vec& hi, bool with_c,
                         int points_per_dim = 33, int rounds = 8, int skip_lower_dim = -1);

double simpson(const std::function<double(double)>& f, double a, double b, int intervals);

/// Deterministic uniform generator (raw mt19937_64 bits, no distributions).
class TestRng {
public:
    explicit TestRng(uint64_t seed) : g_(seed) {}
    double uniform(double lo, double hi) {
        double u = static_cast<double>(g_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }
    int uniform_int(int n) { return static_cast<int>(g_() % static_cast<uint64_t>(n)); }

private:
    std::mt19937_64 g_;
};

struct HamiltonianInstance {
    ConstraintSet theta;
    CoefficientSet coeffs;
    double scalar = 1.0;   // P (power) or h (log, exp)
    Vec grad;              // Lambda / eta / z
    double gamma = 0.5;
    double beta = 1.0;
};

/// Random instance in validated ranges for the given utility and family.
HamiltonianInstance random_instance(TestRng& rng, Utility util, Family family);

struct OracleCheck {
    double value_impl = 0.0;
    double value_oracle = 0.0;
    double value_gap_rel = 0.0;
    double argmax_objective_gap = 0.0;
    bool boxed = true;   // oracle argmax strictly inside its search box
};

/// Runs the implementation and the lattice oracle on one instance.
OracleCheck oracle_check(const HamiltonianInstance& inst, Utility util);

} // namespace rsci::testing
