#include "psmpc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

#include "psmpc/filter.hpp"
#include "psmpc/random.hpp"

namespace psmpc {

using nlohmann::json;

namespace {

// One closed-loop run against a sampled ground-truth chain. `decide` is
// called on the belief before each step; `on_advance` lets the SMPC variant
// route the observation through its controller.
template <typename DecideFn, typename AdvanceFn>
TrajectoryRecord run_trajectory(const PomdpModel& model, const Belief& pi0, X0Rule x0_rule,
                                std::size_t steps, std::uint64_t seed, DecideFn&& decide,
                                AdvanceFn&& on_advance) {
    TrajectoryRecord record;
    record.seed = seed;
    record.horizon_simulated = steps;
    record.steps.reserve(steps);

    RandomStream stream(seed);
    std::size_t state = x0_rule.fixed_state
                            ? *x0_rule.fixed_state
                            : stream.sample_index(std::span<const double>(
                                  pi0.weights().data(), pi0.size()));
    if (state >= model.n_states)
        throw ValidationError("fixed initial state out of range");

    Belief belief = pi0;
    double cumulative = 0.0;
    double discount_pow = 1.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const std::size_t action = decide(belief);
        const double cost = model.stage_cost[action][state];
        cumulative += discount_pow * cost;

        const std::size_t next_state = stream.sample_index(model.transition[action].row(state));
        const std::size_t observation =
            stream.sample_index(model.observation[action].row(next_state));

        record.steps.push_back(
            {k, state, belief, action, observation, cost, cumulative});

        belief = on_advance(belief, action, observation, cost);
        state = next_state;
        discount_pow *= model.discount;
    }
    record.truncated_discounted_cost = cumulative;
    return record;
}

double max_stage_cost(const PomdpModel& model) {
    double c = 0.0;
    for (const auto& costs : model.stage_cost)
        for (double x : costs)
            c = std::max(c, x);
    return c;
}

unsigned effective_threads(unsigned requested, std::size_t runs) {
    unsigned t = requested != 0 ? requested : std::thread::hardware_concurrency();
    if (t == 0)
        t = 1;
    return static_cast<unsigned>(std::min<std::size_t>(t, runs));
}

SimulationSummary summarize(const PomdpModel& model,
                            const std::vector<TrajectoryRecord>& trajectories,
                            std::size_t steps, std::uint64_t seed,
                            std::optional<double> bound) {
    SimulationSummary s;
    s.runs = trajectories.size();
    s.steps = steps;
    s.seed = seed;
    s.bound = bound;
    s.action_counts.assign(model.n_actions, 0);
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();

    double sum = 0.0;
    std::size_t within = 0;
    for (const auto& t : trajectories) { // run-index order
        const double c = t.truncated_discounted_cost;
        sum += c;
        s.min = std::min(s.min, c);
        s.max = std::max(s.max, c);
        if (bound && c <= *bound)
            ++within;
        for (const auto& st : t.steps)
            ++s.action_counts[st.action];
    }
    s.mean = sum / static_cast<double>(s.runs);
    double sq = 0.0;
    for (const auto& t : trajectories) {
        const double d = t.truncated_discounted_cost - s.mean;
        sq += d * d;
    }
    s.stddev = s.runs > 1 ? std::sqrt(sq / static_cast<double>(s.runs - 1)) : 0.0;
    s.fraction_within_bound =
        bound ? static_cast<double>(within) / static_cast<double>(s.runs) : 0.0;
    const double tail_unit = std::pow(model.discount, static_cast<double>(steps));
    s.truncation_tail = model.discount < 1.0
                            ? tail_unit * max_stage_cost(model) / (1.0 - model.discount)
                            : std::numeric_limits<double>::infinity();
    return s;
}

template <typename MakeRun>
SimulationSummary batch(const PomdpModel& model, std::size_t runs, std::size_t steps,
                        std::uint64_t seed, std::optional<double> bound, unsigned threads,
                        MakeRun&& make_run) {
    if (runs == 0)
        throw ValidationError("need at least one run");
    std::vector<TrajectoryRecord> trajectories(runs);
    const unsigned t = effective_threads(threads, runs);
    if (t <= 1) {
        for (std::size_t i = 0; i < runs; ++i)
            trajectories[i] = make_run(i);
    } else {
        std::vector<std::thread> workers;
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(t);
        for (unsigned w = 0; w < t; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (std::size_t i = next.fetch_add(1); i < runs; i = next.fetch_add(1))
                        trajectories[i] = make_run(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& worker : workers)
            worker.join();
        for (const auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }
    return summarize(model, trajectories, steps, seed, bound);
}

} // namespace

TrajectoryRecord simulate(const PomdpModel& model, const Belief& pi0, X0Rule x0_rule,
                          std::size_t steps, std::uint64_t seed,
                          std::shared_ptr<const PolicyArtifact> artifact) {
    if (steps == 0)
        throw ValidationError("need at least one simulation step");
    Controller controller = artifact ? Controller(model, std::move(artifact), pi0)
                                     : Controller(model, pi0);
    return run_trajectory(
        model, pi0, x0_rule, steps, seed,
        [&](const Belief&) { return controller.decide(); },
        [&](const Belief&, std::size_t, std::size_t observation, double cost) {
            controller.advance(observation, cost);
            return controller.belief();
        });
}

TrajectoryRecord simulate_policy(const PomdpModel& model, const PolicyFn& policy,
                                 const Belief& pi0, X0Rule x0_rule, std::size_t steps,
                                 std::uint64_t seed) {
    if (steps == 0)
        throw ValidationError("need at least one simulation step");
    return run_trajectory(
        model, pi0, x0_rule, steps, seed,
        [&](const Belief& b) { return policy(b); },
        [&](const Belief& b, std::size_t action, std::size_t observation, double) {
            return update(b, action, observation, model).posterior;
        });
}

SimulationSummary run_batch(const PomdpModel& model, const Belief& pi0, std::size_t runs,
                            std::size_t steps, std::uint64_t seed,
                            std::optional<double> bound, unsigned threads,
                            std::shared_ptr<const PolicyArtifact> artifact) {
    // one shared solve; each run owns its controller and stream
    if (!artifact && !model.constrained())
        artifact = std::make_shared<const PolicyArtifact>(solve(model));
    return batch(model, runs, steps, seed, bound, threads, [&](std::size_t i) {
        const std::uint64_t run_seed = derive_run_seed(seed, i);
        Controller controller = artifact ? Controller(model, artifact, pi0)
                                         : Controller(model, pi0);
        return run_trajectory(
            model, pi0, X0Rule::from_belief(), steps, run_seed,
            [&](const Belief&) { return controller.decide(); },
            [&](const Belief&, std::size_t, std::size_t observation, double cost) {
                controller.advance(observation, cost);
                return controller.belief();
            });
    });
}

SimulationSummary run_batch_policy(const PomdpModel& model, const PolicyFn& policy,
                                   const Belief& pi0, std::size_t runs, std::size_t steps,
                                   std::uint64_t seed, std::optional<double> bound,
                                   unsigned threads) {
    return batch(model, runs, steps, seed, bound, threads, [&](std::size_t i) {
        return simulate_policy(model, policy, pi0, X0Rule::from_belief(), steps,
                               derive_run_seed(seed, i));
    });
}

PolicyFn constant_policy(std::size_t action) {
    return [action](const Belief&) { return action; };
}

PolicyFn certainty_equivalent_policy(const PomdpModel& model) {
    // Finite-horizon DP on the underlying fully observed problem.
    std::vector<double> value = model.terminal_cost;
    std::vector<std::size_t> policy(model.n_states, 0);
    for (std::size_t k = 0; k < model.horizon; ++k) {
        std::vector<double> next(model.n_states);
        for (std::size_t i = 0; i < model.n_states; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_action = 0;
            for (std::size_t a = 0; a < model.n_actions; ++a) {
                const double q = model.stage_cost[a][i] +
                                 model.discount * dot(model.transition[a].row(i), value);
                if (q < best) {
                    best = q;
                    best_action = a;
                }
            }
            next[i] = best;
            policy[i] = best_action;
        }
        value = std::move(next);
    }
    return [policy](const Belief& b) { return policy[b.argmax()]; };
}

namespace {

std::string format_full(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

} // namespace

void write_trajectory_csv(const TrajectoryRecord& record, std::size_t n_states,
                          const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write trajectory file: " + path.string());
    out << "step,true_state,action,observation";
    for (std::size_t i = 1; i <= n_states; ++i)
        out << ",belief_" << i;
    out << ",stage_cost,discounted_cumulative\n";
    for (const auto& s : record.steps) {
        out << s.step << ',' << (s.true_state + 1) << ',' << (s.action + 1) << ','
            << (s.observation + 1);
        for (std::size_t i = 0; i < n_states; ++i)
            out << ',' << format_full(s.belief[i]);
        out << ',' << format_full(s.stage_cost) << ','
            << format_full(s.discounted_cumulative) << '\n';
    }
}

void write_summary_json(const SimulationSummary& summary,
                        const std::filesystem::path& path) {
    json j;
    j["runs"] = summary.runs;
    j["steps"] = summary.steps;
    j["seed"] = summary.seed;
    j["mean"] = summary.mean;
    j["stddev"] = summary.stddev;
    j["min"] = summary.min;
    j["max"] = summary.max;
    j["truncation_tail"] = summary.truncation_tail;
    if (summary.bound) {
        j["bound"] = *summary.bound;
        j["fraction_within_bound"] = summary.fraction_within_bound;
    }
    j["action_counts"] = summary.action_counts;
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write summary file: " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace psmpc
