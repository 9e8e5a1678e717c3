#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "psmpc/guarantees.hpp"

using namespace psmpc;

TEST_SUITE("guarantees") {

TEST_CASE("eta for the always-treat terminal policy") {
    const PomdpModel m = builtin_healthcare_model();
    const EtaCertificate cert = compute_eta(m, 3);

    // worst realized transition: stage 1 -> stage 2 under treatment
    const double pathwise = std::pow(0.85, 3) * (0.85 * 8.0 + 4.0);
    CHECK(std::abs(cert.eta_pathwise - pathwise) <= 1e-15);
    CHECK(std::abs(cert.eta_pathwise - 6.63255) <= 1e-9);
    CHECK(cert.eta_pathwise == doctest::Approx(7.0).epsilon(0.1)); // rounds to 7

    // vertex expectations: stage 1 dominates with alpha*1.6 + 4
    const double expected = std::pow(0.85, 3) * (0.85 * 1.6 + 4.0);
    CHECK(std::abs(cert.eta_expected - expected) <= 1e-15);
    CHECK(std::abs(cert.eta_expected - 3.29171) <= 1e-5);

    CHECK(cert.eta_expected <= cert.eta_pathwise);
    CHECK(cert.terminal_action == 3);

    CHECK_THROWS_AS(compute_eta(m, 4), ValidationError);
}

TEST_CASE("free terminal policies have zero slack") {
    PomdpModel m = builtin_healthcare_model();
    m.terminal_cost = {0.0, 0.0, 0.0};
    m.stage_cost[3] = {0.0, 0.0, 0.0};
    m = validate_model(std::move(m));
    const EtaCertificate cert = compute_eta(m, 3);
    CHECK(cert.eta_pathwise == 0.0);
    CHECK(cert.eta_expected == 0.0);
}

TEST_CASE("the expectation estimator never exceeds the pathwise one") {
    testing::ModelGenerator gen(0x57A7);
    for (int i = 0; i < 120; ++i) {
        const PomdpModel m = gen.next();
        const std::size_t action = gen.span(m.n_actions);
        const EtaCertificate cert = compute_eta(m, action);
        CHECK(cert.eta_expected <= cert.eta_pathwise + 1e-15);
        CHECK(cert.eta_expected >= 0.0);
        CHECK(cert.eta_pathwise >= 0.0);
    }
}

TEST_CASE("performance bound arithmetic") {
    const PomdpModel m = builtin_healthcare_model();
    const PolicyArtifact artifact = solve(m);
    const Belief uniform = Belief::uniform(3);

    SUBCASE("published design cost and eta") {
        // the paper-reported pairing: design cost 8.5 with eta 7
        const double bound = 8.5 + 0.85 / 0.15 * 7.0;
        CHECK(std::abs(bound - 48.1667) <= 5e-5);
        CHECK(std::abs(bound - 48.2) <= 0.05);
    }
    SUBCASE("computed route") {
        const EtaCertificate cert = compute_eta(m, 3);
        const PerformanceBound b = compute_bound(m, artifact, uniform, cert.eta_pathwise);
        CHECK(b.design_cost == artifact.evaluate(0, uniform).value);
        CHECK(std::abs(b.bound - (b.design_cost + 0.85 / 0.15 * cert.eta_pathwise)) <=
              1e-12);
        CHECK(b.bound >= b.design_cost);
    }
    SUBCASE("zero eta collapses to the design cost") {
        const PerformanceBound b = compute_bound(m, artifact, uniform, 0.0);
        CHECK(b.bound == b.design_cost);
    }
    SUBCASE("monotone in eta") {
        const PerformanceBound lo = compute_bound(m, artifact, uniform, 1.0);
        const PerformanceBound hi = compute_bound(m, artifact, uniform, 2.0);
        CHECK(hi.bound > lo.bound);
    }
    SUBCASE("eta must be non-negative") {
        CHECK_THROWS_AS(compute_bound(m, artifact, uniform, -0.5), ValidationError);
    }
}

TEST_CASE("stage-value monotonicity holds at the certified eta") {
    const PomdpModel m = builtin_healthcare_model();
    const PolicyArtifact artifact = solve(m);
    const EtaCertificate cert = compute_eta(m, 3);

    const MonotonicityReport pathwise =
        check_value_monotonicity(artifact, cert.eta_pathwise, 2000);
    CHECK_FALSE(pathwise.violation);
    CHECK(pathwise.max_gap <= cert.eta_pathwise + 1e-9);
    CHECK(pathwise.max_gap > 0.0); // the gap is genuinely attained somewhere

    // the tighter expectation-based slack also covers the gap
    const MonotonicityReport expectation =
        check_value_monotonicity(artifact, cert.eta_expected, 2000);
    CHECK_FALSE(expectation.violation);

    // an absurdly small eta must flag
    const MonotonicityReport tiny = check_value_monotonicity(artifact, 1e-6, 500);
    CHECK(tiny.violation);

    // fixed seed, fixed report
    const MonotonicityReport again =
        check_value_monotonicity(artifact, cert.eta_pathwise, 2000);
    CHECK(again.max_gap == pathwise.max_gap);
}

TEST_CASE("monotonicity check rejects a zero-horizon artifact") {
    PomdpModel m = builtin_healthcare_model();
    m.horizon = 0;
    m = validate_model(std::move(m));
    const PolicyArtifact artifact = solve(m);
    CHECK_THROWS_AS(check_value_monotonicity(artifact, 1.0, 10), ValidationError);
}

TEST_CASE("a costless model has zero gap") {
    PomdpModel m = builtin_healthcare_model();
    for (auto& c : m.stage_cost)
        c = {0.0, 0.0, 0.0};
    m.terminal_cost = {0.0, 0.0, 0.0};
    m = validate_model(std::move(m));
    const PolicyArtifact artifact = solve(m);
    const MonotonicityReport report = check_value_monotonicity(artifact, 0.0, 200);
    CHECK(report.max_gap == 0.0);
    CHECK_FALSE(report.violation);
}

TEST_CASE("descent residuals are non-positive at the certified eta") {
    const PomdpModel m = builtin_healthcare_model();
    const PolicyArtifact artifact = solve(m);
    const EtaCertificate cert = compute_eta(m, 3);

    CHECK(check_descent(m, artifact, Belief::uniform(3), cert.eta_pathwise) <= 1e-9);
    CHECK(check_descent(m, artifact, Belief::vertex(3, 2), cert.eta_pathwise) <= 1e-9);
    CHECK(check_descent(m, artifact, Belief::vertex(3, 0), cert.eta_pathwise) <= 1e-9);

    testing::ModelGenerator gen(0xE7A);
    for (int i = 0; i < 100; ++i)
        CHECK(check_descent(m, artifact, gen.belief(3), cert.eta_pathwise) <= 1e-9);

    // the expectation-based slack satisfies the same inequality
    for (int i = 0; i < 100; ++i)
        CHECK(check_descent(m, artifact, gen.belief(3), cert.eta_expected) <= 1e-9);
}

TEST_CASE("descent with zero eta on a costless model is exactly Bellman-tight") {
    PomdpModel m = builtin_healthcare_model();
    for (auto& c : m.stage_cost)
        c = {0.0, 0.0, 0.0};
    m.terminal_cost = {0.0, 0.0, 0.0};
    m = validate_model(std::move(m));
    const PolicyArtifact artifact = solve(m);
    CHECK(check_descent(m, artifact, Belief::uniform(3), 0.0) == 0.0);
}

} // TEST_SUITE
