#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "psmpc/controller.hpp"
#include "psmpc/model.hpp"

namespace psmpc {

/// How the ground-truth initial state is chosen.
struct X0Rule {
    static X0Rule from_belief() { return {}; }
    static X0Rule fixed(std::size_t state) { return {state}; }
    std::optional<std::size_t> fixed_state; // empty: sample from pi0
};

struct TrajectoryStep {
    std::size_t step = 0;
    std::size_t true_state = 0; // state the stage cost was charged in
    Belief belief;              // belief the decision was based on
    std::size_t action = 0;
    std::size_t observation = 0;
    double stage_cost = 0.0;            // realized c_{x}(a)
    double discounted_cumulative = 0.0; // sum of alpha^j * cost_j, j <= step
};

struct TrajectoryRecord {
    std::uint64_t seed = 0; // stream seed of this run
    std::vector<TrajectoryStep> steps;
    std::size_t horizon_simulated = 0;
    double truncated_discounted_cost = 0.0;
};

struct SimulationSummary {
    std::size_t runs = 0;
    std::size_t steps = 0;
    std::uint64_t seed = 0;
    double mean = 0.0; // of truncated discounted cost
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    /// alpha^M * c_max / (1 - alpha): bound on the discarded discounted tail.
    double truncation_tail = 0.0;
    std::optional<double> bound;
    double fraction_within_bound = 0.0; // runs with cost <= bound
    std::vector<std::uint64_t> action_counts; // per action, summed over runs
};

/// A stationary decision rule on beliefs, used for policy comparisons.
using PolicyFn = std::function<std::size_t(const Belief&)>;

/// One closed-loop Monte Carlo run of the receding-horizon controller against
/// a sampled ground-truth chain. Per step: decide on the current belief,
/// charge c_{x}(a), draw the next state from P(a) row x, draw the observation
/// from R(a) row x', advance the filter. One draw stream per run; state and
/// observation draws alternate; x0 (when sampled) consumes the first draw.
TrajectoryRecord simulate(const PomdpModel& model, const Belief& pi0, X0Rule x0_rule,
                          std::size_t steps, std::uint64_t seed,
                          std::shared_ptr<const PolicyArtifact> artifact = nullptr);

/// Like simulate() but with an arbitrary stationary policy; identical draw
/// discipline, so runs with equal seeds see identical randomness.
TrajectoryRecord simulate_policy(const PomdpModel& model, const PolicyFn& policy,
                                 const Belief& pi0, X0Rule x0_rule, std::size_t steps,
                                 std::uint64_t seed);

/// `runs` independent trajectories with per-run seeds derived from the master
/// seed; summary statistics aggregated in run order. `threads` = 0 uses the
/// hardware concurrency; results are identical for every thread count.
SimulationSummary run_batch(const PomdpModel& model, const Belief& pi0, std::size_t runs,
                            std::size_t steps, std::uint64_t seed,
                            std::optional<double> bound = {}, unsigned threads = 0,
                            std::shared_ptr<const PolicyArtifact> artifact = nullptr);

/// Batch with an arbitrary policy, same seed derivation as run_batch: the
/// common-random-numbers comparison harness.
SimulationSummary run_batch_policy(const PomdpModel& model, const PolicyFn& policy,
                                   const Belief& pi0, std::size_t runs, std::size_t steps,
                                   std::uint64_t seed, std::optional<double> bound = {},
                                   unsigned threads = 0);

/// Always plays one action.
PolicyFn constant_policy(std::size_t action);

/// Acts as if the most likely state were certain: solves the fully observed
/// finite-horizon problem (same horizon, discount and costs) and applies its
/// stage-0 decision for argmax(belief). Never probes.
PolicyFn certainty_equivalent_policy(const PomdpModel& model);

/// CSV export: header
/// step,true_state,action,observation,belief_1..belief_n,stage_cost,discounted_cumulative
/// with 1-based state/action/observation indices and full-precision numbers.
void write_trajectory_csv(const TrajectoryRecord& record, std::size_t n_states,
                          const std::filesystem::path& path);

/// JSON export mirroring SimulationSummary.
void write_summary_json(const SimulationSummary& summary, const std::filesystem::path& path);

} // namespace psmpc
