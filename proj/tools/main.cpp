#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "psmpc/controller.hpp"
#include "psmpc/filter.hpp"
#include "psmpc/guarantees.hpp"
#include "psmpc/model.hpp"
#include "psmpc/simulate.hpp"
#include "psmpc/solver.hpp"

namespace {

using namespace psmpc;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitBlowup = 3;
constexpr int kExitViolation = 4;
constexpr int kExitInfeasible = 5;
constexpr int kExitUsage = 64;

struct Options {
    std::string model = "healthcare";
    std::string out;
    std::string pi0;
    std::optional<long long> horizon;
    std::optional<double> discount;
    unsigned threads = 0;

    // certify
    long long terminal_action = 0; // 1-based on the command line
    std::optional<double> eta_override;
    std::optional<double> design_cost_override;
    std::size_t samples = 10000;

    // simulate
    std::size_t steps = 30;
    std::size_t runs = 1;
    std::uint64_t seed = 1;
    std::string certificate;
    std::string replay;
    std::string artifact;
    std::optional<long long> x0; // 1-based
};

PomdpModel load_with_overrides(const Options& opt) {
    PomdpModel model = resolve_model(opt.model);
    bool changed = false;
    if (opt.horizon) {
        if (*opt.horizon < 0)
            throw ValidationError("horizon must be non-negative");
        model.horizon = static_cast<std::size_t>(*opt.horizon);
        changed = true;
    }
    if (opt.discount) {
        model.discount = *opt.discount;
        changed = true;
    }
    if (changed)
        model = validate_model(std::move(model));
    return model;
}

Belief parse_belief_arg(const std::string& text, std::size_t n_states) {
    if (text == "uniform")
        return Belief::uniform(n_states);
    std::vector<double> w;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        w.push_back(std::stod(item));
    if (w.size() != n_states)
        throw ValidationError("initial belief needs " + std::to_string(n_states) +
                              " comma-separated entries");
    return Belief(std::move(w));
}

Belief initial_belief(const Options& opt, const PomdpModel& model) {
    if (!opt.pi0.empty())
        return parse_belief_arg(opt.pi0, model.n_states);
    return model.default_initial_belief();
}

int cmd_solve(const Options& opt) {
    const PomdpModel model = load_with_overrides(opt);
    const PolicyArtifact artifact = solve(model);
    if (!opt.out.empty())
        save_artifact(artifact, opt.out);
    const Belief pi0 = initial_belief(opt, model);
    const Evaluation e = artifact.evaluate(0, pi0);
    std::cout << "design cost V0(pi0) = " << e.value << "\n"
              << "stage-0 vectors     = " << artifact.stages.front().vectors.size() << "\n";
    if (!opt.out.empty())
        std::cout << "artifact written to " << opt.out << "\n";
    return 0;
}

int cmd_certify(const Options& opt) {
    const PomdpModel model = load_with_overrides(opt);
    if (opt.terminal_action < 1 ||
        static_cast<std::size_t>(opt.terminal_action) > model.n_actions)
        throw ValidationError("terminal action " + std::to_string(opt.terminal_action) +
                              " out of range 1.." + std::to_string(model.n_actions));
    const auto action = static_cast<std::size_t>(opt.terminal_action - 1);

    const EtaCertificate eta = compute_eta(model, action);
    const PolicyArtifact artifact = solve(model);
    const Belief pi0 = initial_belief(opt, model);

    const double eta_used = opt.eta_override.value_or(eta.eta_pathwise);
    const double design = opt.design_cost_override.value_or(artifact.evaluate(0, pi0).value);
    const double bound = design + model.discount / (1.0 - model.discount) * eta_used;

    const MonotonicityReport mono = check_value_monotonicity(artifact, eta_used, opt.samples);

    std::cout << "eta_pathwise        = " << eta.eta_pathwise << "\n"
              << "eta_expected        = " << eta.eta_expected << "\n"
              << "eta used for bound  = " << eta_used << "\n"
              << "design cost V0(pi0) = " << design << "\n"
              << "bound               = " << bound << "\n"
              << "max V0-V1 gap       = " << mono.max_gap << " over " << mono.samples
              << " samples (violation: " << (mono.violation ? "yes" : "no") << ")\n";

    if (!opt.out.empty()) {
        json j;
        j["eta_pathwise"] = eta.eta_pathwise;
        j["eta_expected"] = eta.eta_expected;
        j["terminal_action"] = eta.terminal_action;
        j["design_cost"] = design;
        j["pi0"] = pi0.weights();
        j["bound"] = bound;
        j["alpha"] = model.discount;
        j["horizon"] = model.horizon;
        j["monotonicity_max_gap"] = mono.max_gap;
        j["violation"] = mono.violation;
        std::ofstream file(opt.out);
        if (!file)
            throw Error("cannot write certificate file: " + opt.out);
        file << j.dump(2) << '\n';
        std::cout << "certificate written to " << opt.out << "\n";
    }
    return mono.violation ? kExitViolation : 0;
}

std::optional<double> bound_from_certificate(const std::string& path) {
    if (path.empty())
        return std::nullopt;
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open certificate file: " + path);
    json j;
    try {
        j = json::parse(in);
        return j.at("bound").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("certificate file is malformed: ") + e.what());
    }
}

int cmd_replay(const Options& opt, const PomdpModel& model, const Belief& pi0) {
    std::ifstream in(opt.replay);
    if (!in)
        throw ParseError("cannot open replay file: " + opt.replay);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("replay file is malformed: ") + e.what());
    }
    if (!j.is_array())
        throw ParseError("replay file must be a JSON array of observation indices");

    Controller controller(model, pi0);
    std::ostringstream csv;
    csv << "step,action,observation";
    for (std::size_t i = 1; i <= model.n_states; ++i)
        csv << ",belief_" << i;
    csv << "\n";
    std::size_t step = 0;
    for (const auto& obs_json : j) {
        if (!obs_json.is_number_integer() || obs_json.get<long long>() < 0)
            throw ParseError("replay observations must be non-negative integers");
        const auto obs = obs_json.get<std::size_t>();
        const std::size_t action = controller.decide();
        csv << step << ',' << (action + 1) << ',' << (obs + 1);
        for (std::size_t i = 0; i < model.n_states; ++i) {
            csv << ',' << std::setprecision(17) << controller.belief()[i];
        }
        csv << "\n";
        controller.advance(obs);
        ++step;
    }
    if (opt.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream file(opt.out);
        if (!file)
            throw Error("cannot write replay log: " + opt.out);
        file << csv.str();
        std::cout << "replayed " << step << " observations, log written to " << opt.out
                  << "\n";
    }
    return 0;
}

int cmd_simulate(const Options& opt) {
    const PomdpModel model = load_with_overrides(opt);
    const Belief pi0 = initial_belief(opt, model);

    if (!opt.replay.empty())
        return cmd_replay(opt, model, pi0);

    const std::optional<double> bound = bound_from_certificate(opt.certificate);

    std::shared_ptr<const PolicyArtifact> artifact;
    if (!opt.artifact.empty())
        artifact = std::make_shared<const PolicyArtifact>(load_artifact(opt.artifact));

    if (opt.runs <= 1) {
        X0Rule rule = X0Rule::from_belief();
        if (opt.x0) {
            if (*opt.x0 < 1 || static_cast<std::size_t>(*opt.x0) > model.n_states)
                throw ValidationError("x0 out of range 1.." + std::to_string(model.n_states));
            rule = X0Rule::fixed(static_cast<std::size_t>(*opt.x0 - 1));
        }
        const TrajectoryRecord record =
            simulate(model, pi0, rule, opt.steps, opt.seed, artifact);
        if (!opt.out.empty()) {
            write_trajectory_csv(record, model.n_states, opt.out);
            std::cout << "trajectory written to " << opt.out << "\n";
        }
        std::cout << "truncated discounted cost = " << record.truncated_discounted_cost
                  << " over " << record.horizon_simulated << " steps\n";
        if (bound)
            std::cout << "bound margin              = "
                      << (*bound - record.truncated_discounted_cost) << "\n";
        return 0;
    }

    const SimulationSummary summary =
        run_batch(model, pi0, opt.runs, opt.steps, opt.seed, bound, opt.threads, artifact);
    std::cout << "runs = " << summary.runs << ", steps = " << summary.steps << "\n"
              << "mean truncated discounted cost = " << summary.mean << " (stddev "
              << summary.stddev << ", min " << summary.min << ", max " << summary.max
              << ")\n"
              << "truncation tail bound          = " << summary.truncation_tail << "\n";
    if (bound) {
        std::cout << "bound                          = " << *bound << "\n"
                  << "mean + tail vs bound margin    = "
                  << (*bound - summary.mean - summary.truncation_tail) << "\n"
                  << "fraction of runs within bound  = " << summary.fraction_within_bound
                  << "\n";
    }
    if (!opt.out.empty()) {
        write_summary_json(summary, opt.out);
        std::cout << "summary written to " << opt.out << "\n";
    }
    return 0;
}

int cmd_dump_model(const Options& opt) {
    const PomdpModel model = load_with_overrides(opt);
    if (opt.out.empty()) {
        std::cout << model_to_json_string(model) << "\n";
    } else {
        save_model(model, opt.out);
        std::cout << "model written to " << opt.out << "\n";
    }
    return 0;
}

unsigned threads_from_env() {
    if (const char* env = std::getenv("PSMPC_THREADS")) {
        const long t = std::strtol(env, nullptr, 10);
        if (t > 0)
            return static_cast<unsigned>(t);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::cout << std::setprecision(6);

    CLI::App app{"psmpc: receding-horizon control of finite POMDPs with "
                 "performance certificates"};
    app.require_subcommand(1);
    Options opt;
    opt.threads = threads_from_env();

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--model", opt.model,
                        "model file path, or \"healthcare\" for the builtin example")
            ->capture_default_str();
        cmd->add_option("--horizon", opt.horizon, "override the design horizon N");
        cmd->add_option("--discount", opt.discount, "override the discount factor");
        cmd->add_option("--pi0", opt.pi0,
                        "initial belief: comma-separated weights or \"uniform\"");
    };

    CLI::App* solve_cmd = app.add_subcommand("solve", "solve the finite-horizon problem "
                                                      "and write the policy artifact");
    add_model_flags(solve_cmd);
    solve_cmd->add_option("--out", opt.out, "artifact output path (JSON)");

    CLI::App* certify_cmd =
        app.add_subcommand("certify", "compute eta for a constant terminal policy, the "
                                      "performance bound, and the stage-value "
                                      "monotonicity check");
    add_model_flags(certify_cmd);
    certify_cmd
        ->add_option("--terminal-action", opt.terminal_action,
                     "terminal policy action (1-based)")
        ->required();
    certify_cmd->add_option("--eta", opt.eta_override, "use this eta for the bound");
    certify_cmd->add_option("--design-cost", opt.design_cost_override,
                            "use this design cost for the bound");
    certify_cmd->add_option("--samples", opt.samples,
                            "random beliefs for the monotonicity check")
        ->capture_default_str();
    certify_cmd->add_option("--out", opt.out, "certificate output path (JSON)");

    CLI::App* sim_cmd = app.add_subcommand("simulate", "closed-loop Monte Carlo runs, a "
                                                       "single trajectory, or a replay");
    add_model_flags(sim_cmd);
    sim_cmd->add_option("--steps", opt.steps, "steps per run")->capture_default_str();
    sim_cmd->add_option("--runs", opt.runs, "number of runs")->capture_default_str();
    sim_cmd->add_option("--seed", opt.seed, "master seed")->capture_default_str();
    sim_cmd->add_option("--x0", opt.x0, "fix the true initial state (1-based); "
                                        "default samples from pi0");
    sim_cmd->add_option("--certificate", opt.certificate,
                        "certificate JSON; enables bound-compliance reporting");
    sim_cmd->add_option("--replay", opt.replay,
                        "JSON list of observation indices (0-based) to drive the "
                        "controller deterministically");
    sim_cmd->add_option("--artifact", opt.artifact,
                        "pre-solved policy artifact JSON (skips the offline solve)");
    sim_cmd->add_option("--out", opt.out, "trajectory CSV (single run) or summary JSON "
                                          "(batch) output path");
    sim_cmd->add_option("--threads", opt.threads,
                        "worker threads for batches (default: all cores, or "
                        "PSMPC_THREADS)");

    CLI::App* dump_cmd =
        app.add_subcommand("dump-model", "write a model out as JSON for inspection");
    add_model_flags(dump_cmd);
    dump_cmd->add_option("--out", opt.out, "output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (solve_cmd->parsed())
            return cmd_solve(opt);
        if (certify_cmd->parsed())
            return cmd_certify(opt);
        if (sim_cmd->parsed())
            return cmd_simulate(opt);
        if (dump_cmd->parsed())
            return cmd_dump_model(opt);
    } catch (const CombinatorialBlowupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBlowup;
    } catch (const InfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
