#pragma once

#include "rsci/market.hpp"
#include "rsci/types.hpp"

namespace rsci {

// ============================================================================
// Constraint sets Theta (power/log: strategies (pi, c) with c >= 0) and
// Pi (exponential: pi only), and the pointwise Hamiltonian maximizations
// defining the BSDE generators and the optimal feedback controls.
// ============================================================================

enum class Family { Unconstrained, NoShorting, Box, BudgetSimplex, HalfSpace };

std::string family_name(Family f);
Family family_from_name(const std::string& s);

struct ConstraintSet {
    Family family = Family::Unconstrained;
    int m = 1;

    // Box family
    Vec box_lo, box_hi;          // per asset
    double c_lo = 0.0;
    double c_hi = std::numeric_limits<double>::infinity();

    // HalfSpace family: a'pi + a0*c <= beta0 (a0 ignored in exponential mode)
    Vec hs_a;
    double hs_a0 = 0.0;
    double hs_beta0 = 1.0;

    // Declared epsilon with (0, epsilon) in Theta; required by the gamma<0
    // and log modes and used by the bounds constants.
    double epsilon = 1.0;

    bool contains(Eigen::Ref<const Vec> pi, double c, double tol) const;
    bool contains_pi(Eigen::Ref<const Vec> pi, double tol) const;

    // Euclidean projection. c_floor lifts the consumption lower bound
    // (c >= max(0, c_lo, c_floor)); used by the singular utility modes.
    void project(Vec& pi, double& c, double c_floor) const;
    void project_pi(Vec& pi) const;

    // Largest feasible consumption at pi = 0 (+inf when unbounded).
    double sup_c_at_zero_pi() const;
    bool is_singleton() const;
};

/// Value and maximizer of one pointwise Hamiltonian optimization.
struct HamiltonianResult {
    double value = 0.0;       // the generator term f or F (prefactors included)
    Vec argmax_pi;
    double argmax_c = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;       // 0 when a closed form was used
};

/// Requires the mode-specific membership of Assumptions 3.1 / 4.1 / 0-in-Pi.
/// Throws ConfigError when the set does not support the mode.
void check_mode_support(const ConstraintSet& theta, Utility mode, double gamma);

/// f = gamma * sup over Theta of
///     [-(1-gamma)/2 |pi' sigma|^2 P + pi'(P b + sigma Lambda) + c^gamma/gamma - P c].
HamiltonianResult power_hamiltonian(const ConstraintSet& theta, double gamma, double P,
                                    const Vec& Lambda, const CoefficientSet& coeffs,
                                    const HamiltonianResult* warm = nullptr);

/// f = sup over Theta of [-(h/2)|pi' sigma|^2 + pi'(h b + sigma eta) + ln c - h c].
HamiltonianResult log_hamiltonian(const ConstraintSet& theta, double h, const Vec& eta,
                                  const CoefficientSet& coeffs,
                                  const HamiltonianResult* warm = nullptr);

/// F = h * sup over Pi of [-(beta h / 2)|pi' sigma|^2 + pi'(b - beta sigma z)].
HamiltonianResult exp_hamiltonian(const ConstraintSet& Pi, double beta, double h,
                                  const Vec& z, const CoefficientSet& coeffs,
                                  const HamiltonianResult* warm = nullptr);

/// Consumption floor used by the singular modes (gamma<0 and log).
inline double consumption_floor(const ConstraintSet& theta) { return 1e-8 * theta.epsilon; }

} // namespace rsci
