#include "psmpc/filter.hpp"

namespace psmpc {

namespace {

void check_action(std::size_t action, const PomdpModel& model) {
    if (action >= model.n_actions)
        throw ValidationError("action index " + std::to_string(action + 1) +
                              " out of range (model has " +
                              std::to_string(model.n_actions) + " actions)");
}

// belief * P(a), unnormalized; summation over source states in index order.
std::vector<double> propagate(const Belief& belief, std::size_t action,
                              const PomdpModel& model) {
    const Matrix& p = model.transition[action];
    std::vector<double> out(model.n_states, 0.0);
    for (std::size_t j = 0; j < model.n_states; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < model.n_states; ++i)
            s += belief[i] * p.at(i, j);
        out[j] = s;
    }
    return out;
}

} // namespace

Belief predict(const Belief& belief, std::size_t action, const PomdpModel& model) {
    check_action(action, model);
    if (belief.size() != model.n_states)
        throw ValidationError("belief dimension does not match the model");
    return Belief(propagate(belief, action, model));
}

BeliefUpdateResult update(const Belief& belief, std::size_t action,
                          std::size_t observation, const PomdpModel& model) {
    check_action(action, model);
    if (observation >= model.n_observations)
        throw ValidationError("observation index " + std::to_string(observation + 1) +
                              " out of range (model has " +
                              std::to_string(model.n_observations) + " observations)");
    if (belief.size() != model.n_states)
        throw ValidationError("belief dimension does not match the model");

    std::vector<double> pred = propagate(belief, action, model);
    const Matrix& r = model.observation[action];
    std::vector<double> unnormalized(model.n_states);
    double normalizer = 0.0;
    for (std::size_t j = 0; j < model.n_states; ++j) {
        unnormalized[j] = pred[j] * r.at(j, observation);
        normalizer += unnormalized[j];
    }
    if (normalizer <= 1e-300)
        throw ZeroLikelihoodError("observation " + std::to_string(observation + 1) +
                                  " has zero likelihood under the current belief and action " +
                                  std::to_string(action + 1));
    for (double& w : unnormalized)
        w /= normalizer;
    return {Belief(std::move(unnormalized)), normalizer, Belief(std::move(pred))};
}

std::vector<double> observation_distribution(const Belief& belief, std::size_t action,
                                             const PomdpModel& model) {
    check_action(action, model);
    if (belief.size() != model.n_states)
        throw ValidationError("belief dimension does not match the model");
    std::vector<double> pred = propagate(belief, action, model);
    const Matrix& r = model.observation[action];
    std::vector<double> dist(model.n_observations, 0.0);
    for (std::size_t theta = 0; theta < model.n_observations; ++theta) {
        double s = 0.0;
        for (std::size_t j = 0; j < model.n_states; ++j)
            s += pred[j] * r.at(j, theta);
        dist[theta] = s;
    }
    return dist;
}

} // namespace psmpc
