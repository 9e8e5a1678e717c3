#include "psmpc/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "psmpc/filter.hpp"
#include "psmpc/random.hpp"

namespace psmpc {

EtaCertificate compute_eta(const PomdpModel& model, std::size_t terminal_action) {
    if (terminal_action >= model.n_actions)
        throw ValidationError("terminal action index " + std::to_string(terminal_action + 1) +
                              " out of range (model has " + std::to_string(model.n_actions) +
                              " actions)");
    if (model.horizon == 0)
        throw ValidationError("eta requires a horizon of at least 1");

    const std::size_t a = terminal_action;
    const double scale = std::pow(model.discount, static_cast<double>(model.horizon - 1));
    const Matrix& p = model.transition[a];

    double worst_expected = -std::numeric_limits<double>::infinity();
    double worst_pathwise = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < model.n_states; ++i) {
        const double expected_next = dot(p.row(i), model.terminal_cost);
        worst_expected = std::max(worst_expected,
                                  model.discount * expected_next - model.terminal_cost[i] +
                                      model.stage_cost[a][i]);
        for (std::size_t j = 0; j < model.n_states; ++j) {
            if (p.at(i, j) <= 0.0)
                continue;
            worst_pathwise = std::max(worst_pathwise,
                                      model.discount * model.terminal_cost[j] -
                                          model.terminal_cost[i] + model.stage_cost[a][i]);
        }
    }

    EtaCertificate cert;
    cert.terminal_action = terminal_action;
    cert.eta_expected = scale * std::max(0.0, worst_expected);
    cert.eta_pathwise = scale * std::max(0.0, worst_pathwise);
    std::ostringstream notes;
    notes << "constant terminal policy, vertex enumeration over " << model.n_states
          << " states; pathwise variant maximizes over realized transitions";
    cert.notes = notes.str();
    return cert;
}

PerformanceBound compute_bound(const PomdpModel& model, const PolicyArtifact& artifact,
                               const Belief& pi0, double eta) {
    if (model.discount >= 1.0)
        throw ValidationError("bound requires discount < 1");
    if (eta < 0.0)
        throw ValidationError("eta must be non-negative");
    PerformanceBound b{artifact.evaluate(0, pi0).value, eta, 0.0, pi0};
    b.bound = b.design_cost + model.discount / (1.0 - model.discount) * eta;
    return b;
}

MonotonicityReport check_value_monotonicity(const PolicyArtifact& artifact, double eta,
                                            std::size_t samples, std::uint64_t seed) {
    if (artifact.horizon == 0)
        throw ValidationError("monotonicity check needs a horizon of at least 1 "
                              "(the stage-1 value is undefined otherwise)");
    const std::size_t n = artifact.n_states();

    MonotonicityReport report;
    report.samples = samples;
    report.max_gap = -std::numeric_limits<double>::infinity();
    auto probe = [&](const Belief& b) {
        const double gap = artifact.evaluate(0, b).value - artifact.evaluate(1, b).value;
        report.max_gap = std::max(report.max_gap, gap);
    };
    for (std::size_t i = 0; i < n; ++i)
        probe(Belief::vertex(n, i));
    SimplexSampler sampler(n, seed);
    for (std::size_t s = 0; s < samples; ++s)
        probe(sampler.next());
    report.violation = report.max_gap > eta + 1e-9;
    return report;
}

double check_descent(const PomdpModel& model, const PolicyArtifact& artifact,
                     const Belief& belief, double eta) {
    if (model.constrained())
        throw ValidationError("descent check applies to unconstrained models");
    if (artifact.horizon == 0)
        throw ValidationError("descent check needs a horizon of at least 1");

    const Evaluation greedy = artifact.evaluate(0, belief);
    const auto action = static_cast<std::size_t>(greedy.action);

    double expected_next = 0.0;
    for (std::size_t theta = 0; theta < model.n_observations; ++theta) {
        BeliefUpdateResult r{Belief::uniform(model.n_states), 0.0,
                             Belief::uniform(model.n_states)};
        try {
            r = update(belief, action, theta, model);
        } catch (const ZeroLikelihoodError&) {
            continue; // null event, contributes nothing
        }
        if (r.likelihood < 1e-14)
            continue;
        expected_next += r.likelihood * artifact.evaluate(0, r.posterior).value;
    }

    return dot(belief, model.stage_cost[action]) + model.discount * expected_next -
           greedy.value - model.discount * eta;
}

} // namespace psmpc
