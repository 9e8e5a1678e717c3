#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "psmpc/model.hpp"

namespace psmpc {

/// Action index reported where no decision exists (the terminal stage).
inline constexpr int kNoAction = -1;

/// One linear piece of a piecewise-linear value function together with the
/// action that generated it.
struct ValueVector {
    std::vector<double> gamma;
    int action = kNoAction;

    bool operator==(const ValueVector&) const = default;
};

/// Stage-k value function as a set of vectors; the value at a belief is the
/// minimum of the dot products. Vectors are kept in canonical order (action
/// ascending, then gamma lexicographic) and contain no pointwise-dominated
/// entry.
struct ValueStage {
    std::size_t stage = 0;
    std::vector<ValueVector> vectors;
};

struct Evaluation {
    double value = 0.0;
    int action = kNoAction;
};

/// How backup() trims the cross-sum output.
///   none:      keep every generated vector (deduplicated);
///   pointwise: drop vectors pointwise-dominated by another;
///   envelope:  additionally drop vectors that never attain the lower
///              envelope anywhere on the simplex (exact, LP-based witness
///              test). Default; pointwise dominance alone is far too weak to
///              contain the cross-sum growth even on small models.
enum class PruneMode { none, pointwise, envelope };

struct BackupOptions {
    PruneMode prune = PruneMode::envelope;
    /// Upper bound on |actions| * |next stage vectors|^|observations|; the
    /// backup refuses (CombinatorialBlowupError) beyond it.
    std::uint64_t enumeration_cap = 10'000'000;
};

/// One exact dynamic-programming backup: builds the stage-k vector set from
/// the stage-(k+1) set by cross-sum enumeration over actions and
/// observation-to-vector choice functions, then prunes per the options.
ValueStage backup(const ValueStage& next_stage, const PomdpModel& model,
                  const BackupOptions& options = {});

/// Offline solve output: the value function for every stage 0..N, enough to
/// evaluate the receding-horizon policy and stage-value comparisons.
struct PolicyArtifact {
    std::uint64_t fingerprint = 0;
    double discount = 0.0;
    std::size_t horizon = 0;
    std::vector<ValueStage> stages; // index k = stage k, size horizon+1

    std::size_t n_states() const;

    /// Value and greedy action at a belief for a given stage. Ties break to
    /// the lowest action index, then the lexicographically smallest vector.
    /// The terminal stage reports kNoAction.
    Evaluation evaluate(std::size_t stage, const Belief& belief) const;
};

/// Solves the finite-horizon problem exactly, stages N down to 0. Requires an
/// unconstrained model (constrained problems are solved online per step).
PolicyArtifact solve(const PomdpModel& model, const BackupOptions& options = {});

/// Brute-force value by literal tree recursion over actions and observations;
/// the independent cross-check for solve(). Observation branches with
/// likelihood below 1e-14 contribute nothing. `cap` bounds
/// (|actions|*|observations|)^depth.
Evaluation expectimax_oracle(const PomdpModel& model, const Belief& belief,
                             std::size_t depth, std::uint64_t cap = 10'000'000);

/// Constraint-aware online solve over the model's horizon: an action is
/// admissible at a node only if every positive-likelihood successor belief
/// satisfies the next stage's constraint. Equals expectimax_oracle on
/// unconstrained models. Throws InfeasibleError when some reachable node has
/// no admissible action.
Evaluation solve_online(const PomdpModel& model, const Belief& belief,
                        std::uint64_t cap = 10'000'000);

PolicyArtifact load_artifact(const std::filesystem::path& path);
void save_artifact(const PolicyArtifact& artifact, const std::filesystem::path& path);

} // namespace psmpc
