#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psmpc/errors.hpp"

namespace psmpc {

/// Dot product with a fixed summation order (index 0 upward). All value and
/// filter computations in the library go through this so that results are
/// bit-identical regardless of threading.
inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

/// Dense row-major matrix, just large enough for transition/observation
/// tables of finite POMDPs.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<std::vector<double>> to_rows() const;

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// A point on the probability simplex: the information state over the hidden
/// states. Construction renormalizes (divide by the exact computed sum) and
/// rejects entries below -1e-12; entries in [-1e-12, 0) are clamped to zero.
class Belief {
  public:
    explicit Belief(std::vector<double> weights);

    static Belief uniform(std::size_t n);
    static Belief vertex(std::size_t n, std::size_t i);

    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const std::vector<double>& weights() const { return w_; }
    operator std::span<const double>() const { return {w_.data(), w_.size()}; }

    /// Index of the largest entry, lowest index on ties.
    std::size_t argmax() const;

    bool operator==(const Belief&) const = default;

  private:
    std::vector<double> w_;
};

/// Probabilistic state constraint restated on beliefs: a belief satisfies the
/// constraint iff the probability mass on `safe_states` is at least
/// 1 - epsilon (up to a 1e-12 slack absorbing renormalization drift).
struct BeliefConstraint {
    std::vector<std::size_t> safe_states; // strictly increasing, 0-based
    double epsilon = 0.0;                 // in [0, 1)

    double safe_mass(const Belief& b) const {
        double s = 0.0;
        for (std::size_t i : safe_states)
            s += b[i];
        return s;
    }
    bool satisfied(const Belief& b) const {
        return safe_mass(b) >= 1.0 - epsilon - 1e-12;
    }

    bool operator==(const BeliefConstraint&) const = default;
};

/// A finite POMDP: per-action transition and observation probabilities,
/// per-action stage costs, terminal cost, discount and design horizon.
/// Instances are immutable once validated and safe to share across threads.
struct PomdpModel {
    std::string name;
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::size_t n_observations = 0;

    std::vector<Matrix> transition;            // [action], n_states x n_states
    std::vector<Matrix> observation;           // [action], n_states x n_observations
    std::vector<std::vector<double>> stage_cost; // [action], length n_states
    std::vector<double> terminal_cost;         // length n_states
    double discount = 0.0;                     // in [0, 1)
    std::size_t horizon = 0;                   // design horizon N

    std::optional<Belief> initial_belief;

    /// Empty: unconstrained. One entry: the same constraint at every stage.
    /// horizon+1 entries: constraints[k] applies to stage-k beliefs and the
    /// sets must be nested (safe sets shrink, epsilons decrease).
    std::vector<BeliefConstraint> constraints;

    std::vector<std::string> state_names;       // optional labels
    std::vector<std::string> observation_names; // optional labels
    std::vector<std::string> action_names;      // optional labels

    bool constrained() const { return !constraints.empty(); }

    /// Constraint applying to beliefs at stage k of the horizon (nullptr when
    /// unconstrained). Stage 0 is the feasibility requirement on the current
    /// belief.
    const BeliefConstraint* constraint_at(std::size_t stage) const;

    /// Initial belief from the model file, or uniform when unspecified.
    Belief default_initial_belief() const;

    /// Content hash over all numeric and structural fields; identifies the
    /// model a policy artifact was solved for.
    std::uint64_t fingerprint() const;
};

/// Checks every model invariant and returns the validated model, or throws
/// ValidationError naming the first violation (matrix, row, defect).
PomdpModel validate_model(PomdpModel raw);

/// The bundled three-stage disease management example: four actions (skip,
/// appointment, rapid test, treatment), discount 0.85, horizon 4.
PomdpModel builtin_healthcare_model();

/// Resolves "healthcare" to the builtin model, anything else as a file path.
PomdpModel resolve_model(const std::string& name_or_path);

PomdpModel load_model(const std::filesystem::path& path);
void save_model(const PomdpModel& model, const std::filesystem::path& path);

/// Parses a model from JSON text (the same schema as model files).
PomdpModel parse_model_json(std::string_view text);
std::string model_to_json_string(const PomdpModel& model);

} // namespace psmpc
