#pragma once

#include <vector>

#include "psmpc/model.hpp"

namespace psmpc {

/// Result of one measurement update: the posterior belief, the probability
/// of the observation that produced it, and the one-step-ahead prior.
struct BeliefUpdateResult {
    Belief posterior;  // belief after seeing the observation
    double likelihood; // P(observation | belief, action), the Bayes normalizer
    Belief predicted;  // belief after the action, before the observation
};

/// Time update: propagates the belief through the action's transition matrix
/// (row vector times matrix), renormalized.
Belief predict(const Belief& belief, std::size_t action, const PomdpModel& model);

/// Measurement update. posterior_j proportional to
/// sum_i belief_i * P(a)_{ij} * R(a)_{j,obs}; the normalizer is the
/// observation likelihood. Throws ZeroLikelihoodError when the normalizer is
/// at or below 1e-300 (the observation is impossible under this belief).
BeliefUpdateResult update(const Belief& belief, std::size_t action,
                          std::size_t observation, const PomdpModel& model);

/// Distribution of the next observation given belief and action; component
/// theta equals update(belief, action, theta).likelihood.
std::vector<double> observation_distribution(const Belief& belief, std::size_t action,
                                             const PomdpModel& model);

} // namespace psmpc
