#include "helpers.hpp"

#include "rsci/market.hpp"

#include <doctest.h>

using namespace rsci;
using namespace rsci::testing;

TEST_CASE("well-formed two-regime model validates cleanly") {
    MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.02, 0.06, 0.2, 0.0);
    m.delta_floor = 0.01;
    ValidationReport rep = validate_model(m, AssumptionMode::PowerLog);
    CHECK(rep.passed());
}

TEST_CASE("broken generator row is reported with its regime") {
    MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.02, 0.06, 0.2, 0.0);
    m.generator.q(0, 1) = 0.5;   // row sum -0.5
    ValidationReport rep = validate_model(m, AssumptionMode::PowerLog);
    CHECK_FALSE(rep.passed());
    CHECK(rep.mentions("row sum"));
    CHECK(rep.mentions("regime 1"));
}

TEST_CASE("degenerate sigma fails the ellipticity check") {
    MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.02, 0.06, 0.0, 0.0);
    m.delta_floor = 0.01;
    ValidationReport rep = validate_model(m, AssumptionMode::PowerLog);
    CHECK_FALSE(rep.passed());
    CHECK(rep.mentions("eigenvalue"));
    CHECK(rep.mentions("regime 2"));
}

TEST_CASE("negative off-diagonal generator entry is rejected") {
    MarketModel m = two_regime(-0.5, 0.0, 0.05, 0.2, 0.0, 0.0, 0.05, 0.2, 0.0);
    ValidationReport rep = validate_model(m, AssumptionMode::PowerLog);
    CHECK_FALSE(rep.passed());
    CHECK(rep.mentions("< 0"));
}

TEST_CASE("exp-deterministic mode requires a regime-independent rate") {
    MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.03, 0.06, 0.2, 0.0);
    m.delta_floor = 0.01;
    CHECK(validate_model(m, AssumptionMode::PowerLog).passed());
    ValidationReport rep = validate_model(m, AssumptionMode::ExpDeterministic);
    CHECK_FALSE(rep.passed());
    CHECK(rep.mentions("regime-independent"));
}

TEST_CASE("exp-random mode needs m = n, the factor, and shared mu/sigma") {
    MarketModel m = two_regime(1.0, 0.02, 0.06, 0.2, 0.0, 0.02, 0.08, 0.2, 0.0);
    m.delta_floor = 0.01;
    ValidationReport rep = validate_model(m, AssumptionMode::ExpRandom);
    CHECK_FALSE(rep.passed());
    CHECK(rep.mentions("factor"));
    CHECK(rep.mentions("mu and sigma"));
}

TEST_CASE("coeff_at evaluates steps right-continuously and derives b") {
    MarketModel m = single_regime(0.02, 0.06, 0.2, 0.0);
    // add a second piece from t = 0.5
    CoefficientPiece p2 = m.coefficients.pieces[0][0];
    p2.t_start = 0.5;
    p2.r = 0.04;
    m.coefficients.pieces[0].push_back(p2);

    CHECK(coeff_at(m, 0.5, 0).r == doctest::Approx(0.04));   // right-continuous
    CHECK(coeff_at(m, 0.49999, 0).r == doctest::Approx(0.02));
    CHECK(coeff_at(m, 0.2, 0).b[0] == doctest::Approx(0.04));   // b = mu - r
    // two points inside the same piece agree exactly
    CHECK(coeff_at(m, 0.1, 0).r == coeff_at(m, 0.3, 0).r);
    CHECK(coeff_at(m, 0.1, 0).mu == coeff_at(m, 0.3, 0).mu);
}

TEST_CASE("coeff_at affine factor evaluation") {
    MarketModel m = single_regime(0.02, 0.04, 0.2, 0.0);
    enable_flat_factor(m, 0.3, 1.0, 0.0, 0.1);
    CHECK(coeff_at(m, 0.5, 0, 0.2).mu[0] == doctest::Approx(0.06));
    CHECK(coeff_at(m, 0.5, 0, 0.0).mu[0] == doctest::Approx(0.04));
    // b tracks the affine mu exactly
    auto c = coeff_at(m, 0.5, 0, 0.2);
    CHECK(c.b[0] == c.mu[0] - c.r);
}

TEST_CASE("coeff_at domain errors") {
    MarketModel m = single_regime(0.02, 0.06, 0.2, 0.0);
    CHECK_THROWS_AS(coeff_at(m, -0.1, 0), std::domain_error);
    CHECK_THROWS_AS(coeff_at(m, 1.5, 0), std::domain_error);
    CHECK_THROWS_AS(coeff_at(m, 0.5, 3), std::domain_error);
    CHECK_THROWS_AS(coeff_at(m, 0.5, 0, 0.1), std::domain_error);   // no factor declared
    enable_flat_factor(m, 0.3);
    CHECK_THROWS_AS(coeff_at(m, 0.5, 0), std::domain_error);        // factor value missing
}
