#include "psmpc/controller.hpp"

#include <cmath>

#include "psmpc/filter.hpp"

namespace psmpc {

namespace {

Belief checked_initial(const PomdpModel& model, Belief belief) {
    if (belief.size() != model.n_states)
        throw ValidationError("initial belief dimension does not match the model");
    if (const BeliefConstraint* c = model.constraint_at(0); c && !c->satisfied(belief))
        throw InfeasibleError("initial belief violates the stage-0 constraint");
    return belief;
}

} // namespace

Controller::Controller(const PomdpModel& model, Belief initial_belief)
    : model_(model), belief_(checked_initial(model, std::move(initial_belief))) {
    if (model_.horizon == 0)
        throw ValidationError("controller requires a horizon of at least 1");
    if (!model_.constrained())
        artifact_ = std::make_shared<const PolicyArtifact>(solve(model_));
}

Controller::Controller(const PomdpModel& model, std::shared_ptr<const PolicyArtifact> artifact,
                       Belief initial_belief)
    : model_(model), artifact_(std::move(artifact)),
      belief_(checked_initial(model, std::move(initial_belief))) {
    if (model_.horizon == 0)
        throw ValidationError("controller requires a horizon of at least 1");
    if (model_.constrained())
        throw ValidationError("constrained models are driven online, without an artifact");
    if (!artifact_)
        throw ValidationError("artifact must not be null");
    if (artifact_->fingerprint != model_.fingerprint())
        throw ValidationError("artifact fingerprint does not match the model");
}

std::size_t Controller::decide() {
    const Evaluation e = artifact_ ? artifact_->evaluate(0, belief_)
                                   : solve_online(model_, belief_);
    last_action_ = static_cast<std::size_t>(e.action);
    return *last_action_;
}

void Controller::advance(std::size_t observation, std::optional<double> realized_cost) {
    if (!last_action_)
        throw MissingActionError("advance() requires a decide() in the same step");
    const BeliefUpdateResult result = update(belief_, *last_action_, observation, model_);
    belief_ = result.posterior;
    // the new belief is the root of the next decision epoch
    if (const BeliefConstraint* c = model_.constraint_at(0); c && !c->satisfied(belief_))
        throw InfeasibleError("updated belief violates the constraint at step " +
                              std::to_string(step_ + 1));
    if (realized_cost)
        discounted_cost_ += std::pow(model_.discount, static_cast<double>(step_)) *
                            *realized_cost;
    ++step_;
    last_action_.reset();
}

} // namespace psmpc
