#pragma once

#include <cstdint>
#include <string>

#include "psmpc/model.hpp"
#include "psmpc/solver.hpp"

namespace psmpc {

/// Slack constant eta of the terminal-policy cost-monotonicity condition, for
/// a constant terminal policy (always apply `terminal_action`).
///
/// Both estimators scale by alpha^(N-1) and clamp at zero:
///   eta_expected: max over state vertices i of
///                 alpha*(P(a)c_N)_i - c_N[i] + c(a)[i]
///                 (exact: the condition is linear in the belief, so the
///                 supremum over the simplex sits at a vertex);
///   eta_pathwise: max over transitions (i,j) with p^a_ij > 0 of
///                 alpha*c_N[j] - c_N[i] + c(a)[i]
///                 (the conservative construction from the worst realized
///                 transition; never below eta_expected).
struct EtaCertificate {
    std::size_t terminal_action = 0;
    double eta_pathwise = 0.0;
    double eta_expected = 0.0;
    std::string notes;
};

EtaCertificate compute_eta(const PomdpModel& model, std::size_t terminal_action);

/// Upper bound on the achieved infinite-horizon discounted cost of the
/// receding-horizon controller: design cost plus alpha/(1-alpha) * eta.
struct PerformanceBound {
    double design_cost = 0.0; // stage-0 value at pi0
    double eta = 0.0;
    double bound = 0.0;
    Belief pi0;
};

PerformanceBound compute_bound(const PomdpModel& model, const PolicyArtifact& artifact,
                               const Belief& pi0, double eta);

/// Result of sampling the stage-value gap V0 - V1 over the simplex.
struct MonotonicityReport {
    double max_gap = 0.0;    // max over vertices and samples
    bool violation = false;  // max_gap > eta + 1e-9
    std::size_t samples = 0; // random beliefs tested (plus all vertices)
};

inline constexpr std::uint64_t kMonotonicitySeed = 0x5d0c7e11u;

/// Evaluates V0(pi) - V1(pi) (stage-0 minus stage-1 value) at every simplex
/// vertex and at `samples` uniformly drawn beliefs; flags violation when the
/// maximum exceeds eta. Requires horizon >= 1.
MonotonicityReport check_value_monotonicity(const PolicyArtifact& artifact, double eta,
                                            std::size_t samples,
                                            std::uint64_t seed = kMonotonicitySeed);

/// One-step descent residual at a belief:
///   r = pi.c(a*) + alpha * sum_theta P(theta|pi,a*) V0(T(pi,theta,a*))
///       - V0(pi) - alpha*eta
/// with a* the stage-0 greedy action. Non-positive whenever eta is a valid
/// certificate. Requires an unconstrained model with horizon >= 1.
double check_descent(const PomdpModel& model, const PolicyArtifact& artifact,
                     const Belief& belief, double eta);

} // namespace psmpc
