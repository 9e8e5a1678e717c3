#pragma once

#include <memory>
#include <optional>

#include "psmpc/model.hpp"
#include "psmpc/solver.hpp"

namespace psmpc {

/// Receding-horizon controller: solve the N-horizon problem once offline,
/// then per step apply the stage-0 policy to the current belief, consume the
/// measured observation and advance the belief with the filter.
///
/// Constrained models are not solved offline (constraints break the
/// piecewise-linear representation); the controller then computes each
/// decision with solve_online on the current belief.
///
/// The decision depends only on the current belief, never on the step count:
/// the closed-loop policy is time-invariant.
class Controller {
  public:
    /// Solves the model (or arms online mode when constrained). Throws
    /// InfeasibleError when constraints are configured and the initial belief
    /// violates them.
    Controller(const PomdpModel& model, Belief initial_belief);

    /// Reuses a pre-solved artifact (unconstrained models only). The artifact
    /// fingerprint must match the model.
    Controller(const PomdpModel& model, std::shared_ptr<const PolicyArtifact> artifact,
               Belief initial_belief);

    /// Chooses the action for the current belief and records it.
    std::size_t decide();

    /// Consumes the observation produced by the last decided action: the
    /// belief moves through the filter, the step count increments, and the
    /// realized cost (when provided by the environment, which alone knows the
    /// true state) is added discounted by alpha^step. Throws
    /// MissingActionError unless decide() ran in this step.
    void advance(std::size_t observation, std::optional<double> realized_cost = {});

    const PomdpModel& model() const { return model_; }
    const Belief& belief() const { return belief_; }
    std::size_t step() const { return step_; }
    double discounted_cost() const { return discounted_cost_; }
    std::optional<std::size_t> last_action() const { return last_action_; }

    /// Null in online-constrained mode.
    const PolicyArtifact* artifact() const { return artifact_.get(); }

  private:
    PomdpModel model_;
    std::shared_ptr<const PolicyArtifact> artifact_; // null => online mode
    Belief belief_;
    std::size_t step_ = 0;
    double discounted_cost_ = 0.0;
    std::optional<std::size_t> last_action_;
};

} // namespace psmpc
