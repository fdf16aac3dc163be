#pragma once

#include "rsci/bsde.hpp"

#include <optional>

namespace rsci {

// ============================================================================
// Feedback controls and value functions built from the solved fields, per the
// verification theorems of each utility case.
// ============================================================================

struct SolvedFields {
    Utility utility = Utility::Power;
    double gamma = 0.5;
    double beta = 1.0;
    RegimeField main;   // power: P; log: P; exp-det: Y; exp-random: P
    RegimeField aux;    // power: unused; log: h; exp-det: h curve; exp-random: h
};

struct Control {
    Vec pi;
    double c = 0.0;
};

struct ValueReport {
    double value = 0.0;
    double main0 = 0.0;   // P0 / P0 / Y0 / P0
    double aux0 = 0.0;    // -  / h0 / h0 / h0
};

class FeedbackStrategy {
public:
    /// Evaluation at (t, regime, wealth, factor): left grid node in time,
    /// linear interpolation in the factor.
    Control at(double t, int regime, double wealth,
               std::optional<double> factor = std::nullopt) const;

    Utility utility() const { return util_; }
    const ConstraintSet& constraints() const { return theta_; }
    const MarketModel& model() const { return model_; }
    const SolvedFields& fields() const { return fields_; }
    const TimeGrid& grid() const { return fields_.main.grid; }

    /// Cached wealth-independent controls (power/log and exp-det pi).
    bool wealth_independent_pi() const {
        return util_ == Utility::Power || util_ == Utility::Log || util_ == Utility::ExpDet;
    }

    /// CSV export: controls per node for the wealth-independent cases, affine
    /// coefficients of wealth for the exponential cases.
    std::string to_csv() const;

    // cached per-node argmax tables (empty in the exp-random case)
    const std::vector<Mat>& pi_cache() const { return pi_cache_; }
    const std::vector<Mat>& c_cache() const { return c_cache_; }

    friend FeedbackStrategy extract_strategy(const MarketModel& model,
                                             const ConstraintSet& theta,
                                             const SolvedFields& fields);

private:
    Utility util_ = Utility::Power;
    double gamma_ = 0.5, beta_ = 1.0;
    ConstraintSet theta_;
    MarketModel model_;
    SolvedFields fields_;
    // caches per regime: (N+1) x (nx*m) argmax tables, (N+1) x nx consumption
    std::vector<Mat> pi_cache_;
    std::vector<Mat> c_cache_;

    Vec cached_pi(int k, int regime, double x) const;
    double cached_c(int k, int regime, double x) const;
};

/// Builds the feedback map from the solved fields; caches the per-node argmax
/// for the wealth-independent cases. Mode mismatches raise ConfigError.
FeedbackStrategy extract_strategy(const MarketModel& model, const ConstraintSet& theta,
                                  const SolvedFields& fields);

/// Analytic value V(x, i0) of the case (factor mode: fields read at the
/// factor's x0). i0 is 0-based. Throws std::domain_error for x <= 0 in the
/// power/log modes.
ValueReport value_at(const MarketModel& model, const SolvedFields& fields, double x, int i0);

} // namespace rsci
