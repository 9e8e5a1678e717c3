#include "psmpc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace psmpc {

using nlohmann::json;

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c)
            throw ValidationError("matrix rows have inconsistent lengths");
        for (std::size_t j = 0; j < c; ++j)
            m.at(i, j) = rows[i][j];
    }
    return m;
}

std::vector<std::vector<double>> Matrix::to_rows() const {
    std::vector<std::vector<double>> rows(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        rows[i].assign(row(i).begin(), row(i).end());
    return rows;
}

Belief::Belief(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty())
        throw ValidationError("belief must have at least one entry");
    double sum = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        if (!std::isfinite(w_[i]))
            throw ValidationError("belief entry " + std::to_string(i) + " is not finite");
        if (w_[i] < -1e-12)
            throw ValidationError("belief entry " + std::to_string(i) + " is negative (" +
                                  std::to_string(w_[i]) + ")");
        if (w_[i] < 0.0)
            w_[i] = 0.0;
        sum += w_[i];
    }
    if (sum <= 0.0)
        throw ValidationError("belief has zero total mass");
    // renormalize only when outside the invariant tolerance: construction is
    // then idempotent and already-normalized weights round-trip bit-exactly
    if (std::abs(sum - 1.0) > 1e-12)
        for (double& w : w_)
            w /= sum;
}

Belief Belief::uniform(std::size_t n) {
    return Belief(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Belief Belief::vertex(std::size_t n, std::size_t i) {
    std::vector<double> w(n, 0.0);
    w.at(i) = 1.0;
    return Belief(std::move(w));
}

std::size_t Belief::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < w_.size(); ++i)
        if (w_[i] > w_[best])
            best = i;
    return best;
}

const BeliefConstraint* PomdpModel::constraint_at(std::size_t stage) const {
    if (constraints.empty())
        return nullptr;
    if (constraints.size() == 1)
        return &constraints.front();
    return &constraints.at(std::min(stage, constraints.size() - 1));
}

Belief PomdpModel::default_initial_belief() const {
    return initial_belief ? *initial_belief : Belief::uniform(n_states);
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
}

void fnv_u64(std::uint64_t& h, std::uint64_t v) { fnv_bytes(h, &v, sizeof v); }

void fnv_double(std::uint64_t& h, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    fnv_u64(h, bits);
}

void fnv_matrix(std::uint64_t& h, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (double x : m.row(i))
            fnv_double(h, x);
}

} // namespace

std::uint64_t PomdpModel::fingerprint() const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    fnv_bytes(h, name.data(), name.size());
    fnv_u64(h, n_states);
    fnv_u64(h, n_actions);
    fnv_u64(h, n_observations);
    fnv_u64(h, horizon);
    fnv_double(h, discount);
    for (std::size_t a = 0; a < n_actions; ++a) {
        fnv_matrix(h, transition[a]);
        fnv_matrix(h, observation[a]);
        for (double c : stage_cost[a])
            fnv_double(h, c);
    }
    for (double c : terminal_cost)
        fnv_double(h, c);
    if (initial_belief)
        for (double w : initial_belief->weights())
            fnv_double(h, w);
    for (const auto& c : constraints) {
        for (std::size_t s : c.safe_states)
            fnv_u64(h, s);
        fnv_double(h, c.epsilon);
    }
    return h;
}

namespace {

void check_stochastic_rows(const Matrix& m, std::size_t expected_cols,
                           const std::string& label, std::size_t action) {
    const std::string where = label + "(" + std::to_string(action + 1) + ")";
    if (m.cols() != expected_cols)
        throw ValidationError(where + " has " + std::to_string(m.cols()) +
                              " columns, expected " + std::to_string(expected_cols));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double p = m.at(i, j);
            if (!std::isfinite(p) || p < 0.0)
                throw ValidationError(where + " row " + std::to_string(i + 1) +
                                      " has a negative probability at column " +
                                      std::to_string(j + 1));
            sum += p;
        }
        const double defect = sum - 1.0;
        if (std::abs(defect) > 1e-9) {
            std::ostringstream os;
            os << where << " row " << (i + 1) << " sums to " << sum
               << " (defect " << defect << ", tolerance 1e-9)";
            throw ValidationError(os.str());
        }
    }
}

} // namespace

PomdpModel validate_model(PomdpModel raw) {
    if (raw.n_states == 0)
        throw ValidationError("model must have at least one state");
    if (raw.n_actions == 0)
        throw ValidationError("model must have at least one action");
    if (raw.n_observations == 0)
        throw ValidationError("model must have at least one observation");

    if (raw.transition.size() != raw.n_actions)
        throw ValidationError("expected one transition matrix per action");
    if (raw.observation.size() != raw.n_actions)
        throw ValidationError("expected one observation matrix per action");
    if (raw.stage_cost.size() != raw.n_actions)
        throw ValidationError("expected one stage cost vector per action");

    for (std::size_t a = 0; a < raw.n_actions; ++a) {
        if (raw.transition[a].rows() != raw.n_states)
            throw ValidationError("transition(" + std::to_string(a + 1) + ") has " +
                                  std::to_string(raw.transition[a].rows()) +
                                  " rows, expected " + std::to_string(raw.n_states));
        check_stochastic_rows(raw.transition[a], raw.n_states, "transition", a);
        if (raw.observation[a].rows() != raw.n_states)
            throw ValidationError("observation(" + std::to_string(a + 1) + ") has " +
                                  std::to_string(raw.observation[a].rows()) +
                                  " rows, expected " + std::to_string(raw.n_states));
        check_stochastic_rows(raw.observation[a], raw.n_observations, "observation", a);
        if (raw.stage_cost[a].size() != raw.n_states)
            throw ValidationError("stage cost of action " + std::to_string(a + 1) +
                                  " has length " + std::to_string(raw.stage_cost[a].size()) +
                                  ", expected " + std::to_string(raw.n_states));
        for (std::size_t i = 0; i < raw.n_states; ++i) {
            const double c = raw.stage_cost[a][i];
            if (!std::isfinite(c) || c < 0.0)
                throw ValidationError("stage cost of action " + std::to_string(a + 1) +
                                      ", state " + std::to_string(i + 1) +
                                      " must be finite and non-negative");
        }
    }

    if (raw.terminal_cost.size() != raw.n_states)
        throw ValidationError("terminal cost has length " +
                              std::to_string(raw.terminal_cost.size()) + ", expected " +
                              std::to_string(raw.n_states));
    for (std::size_t i = 0; i < raw.n_states; ++i) {
        const double c = raw.terminal_cost[i];
        if (!std::isfinite(c) || c < 0.0)
            throw ValidationError("terminal cost of state " + std::to_string(i + 1) +
                                  " must be finite and non-negative");
    }

    if (!std::isfinite(raw.discount) || raw.discount < 0.0 || raw.discount >= 1.0)
        throw ValidationError("discount must be < 1 (and >= 0), got " +
                              std::to_string(raw.discount));

    if (raw.initial_belief && raw.initial_belief->size() != raw.n_states)
        throw ValidationError("initial belief has dimension " +
                              std::to_string(raw.initial_belief->size()) + ", expected " +
                              std::to_string(raw.n_states));

    if (!raw.constraints.empty() && raw.constraints.size() != 1 &&
        raw.constraints.size() != raw.horizon + 1)
        throw ValidationError("constraint list must have 1 or horizon+1 entries, got " +
                              std::to_string(raw.constraints.size()));
    for (std::size_t k = 0; k < raw.constraints.size(); ++k) {
        auto& c = raw.constraints[k];
        if (!std::isfinite(c.epsilon) || c.epsilon < 0.0 || c.epsilon >= 1.0)
            throw ValidationError("constraint epsilon must lie in [0, 1)");
        std::sort(c.safe_states.begin(), c.safe_states.end());
        c.safe_states.erase(std::unique(c.safe_states.begin(), c.safe_states.end()),
                            c.safe_states.end());
        if (c.safe_states.empty())
            throw ValidationError("constraint safe state set must not be empty");
        if (c.safe_states.back() >= raw.n_states)
            throw ValidationError("constraint safe state index " +
                                  std::to_string(c.safe_states.back()) + " out of range");
    }
    for (std::size_t k = 0; k + 1 < raw.constraints.size(); ++k) {
        // Later constraint sets must be contained in earlier ones: safe sets
        // shrink and epsilons decrease.
        const auto& outer = raw.constraints[k];
        const auto& inner = raw.constraints[k + 1];
        const bool subset = std::includes(outer.safe_states.begin(), outer.safe_states.end(),
                                          inner.safe_states.begin(), inner.safe_states.end());
        if (!subset || inner.epsilon > outer.epsilon)
            throw ValidationError("per-stage constraints must be nested: stage " +
                                  std::to_string(k + 1) +
                                  " must tighten stage " + std::to_string(k));
    }

    auto check_names = [&](std::vector<std::string>& names, std::size_t n,
                           const char* what) {
        if (!names.empty() && names.size() != n)
            throw ValidationError(std::string(what) + " name list has wrong length");
    };
    check_names(raw.state_names, raw.n_states, "state");
    check_names(raw.observation_names, raw.n_observations, "observation");
    check_names(raw.action_names, raw.n_actions, "action");

    return raw;
}

PomdpModel builtin_healthcare_model() {
    const double third = 1.0 / 3.0;
    PomdpModel m;
    m.name = "healthcare";
    m.n_states = 3;
    m.n_actions = 4;
    m.n_observations = 3;
    m.state_names = {"stage1", "stage2", "stage3"};
    m.observation_names = {"result1", "result2", "result3"};
    m.action_names = {"skip", "appointment", "rapid_test", "treatment"};

    const Matrix drift = Matrix::from_rows({{0.80, 0.20, 0.00},
                                            {0.00, 0.90, 0.10},
                                            {0.00, 0.00, 1.00}});
    const Matrix coarse_obs = Matrix::from_rows({{0.40, 0.30, 0.30},
                                                 {0.30, 0.40, 0.30},
                                                 {0.30, 0.30, 0.40}});

    // skip: disease drifts, no information
    m.transition.push_back(drift);
    m.observation.push_back(Matrix::from_rows(
        {{third, third, third}, {third, third, third}, {third, third, third}}));
    m.stage_cost.push_back({0.0, 5.0, 5.0});

    // appointment: disease drifts, coarse assessment
    m.transition.push_back(drift);
    m.observation.push_back(coarse_obs);
    m.stage_cost.push_back({1.0, 1.0, 1.0});

    // rapid test: state frozen, sharp assessment
    m.transition.push_back(Matrix::identity(3));
    m.observation.push_back(Matrix::from_rows({{0.90, 0.05, 0.05},
                                               {0.05, 0.90, 0.05},
                                               {0.05, 0.05, 0.90}}));
    m.stage_cost.push_back({4.0, 3.0, 4.0});

    // treatment: recovery from stage 2 possible, progression blocked
    m.transition.push_back(Matrix::from_rows({{0.80, 0.20, 0.00},
                                              {0.75, 0.25, 0.00},
                                              {0.00, 0.00, 1.00}}));
    m.observation.push_back(coarse_obs);
    m.stage_cost.push_back({4.0, 2.0, 4.0});

    m.terminal_cost = {0.0, 8.0, 60.0};
    m.discount = 0.85;
    m.horizon = 4;
    return validate_model(std::move(m));
}

PomdpModel resolve_model(const std::string& name_or_path) {
    if (name_or_path == "healthcare")
        return builtin_healthcare_model();
    return load_model(name_or_path);
}

namespace {

json require_field(const json& j, const char* field) {
    auto it = j.find(field);
    if (it == j.end())
        throw ParseError(std::string("model file is missing field \"") + field + "\"");
    return *it;
}

std::vector<double> as_double_vector(const json& j, const char* field) {
    if (!j.is_array())
        throw ParseError(std::string("field \"") + field + "\" must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number())
            throw ParseError(std::string("field \"") + field + "\" must contain only numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Matrix as_matrix(const json& j, const char* field) {
    if (!j.is_array())
        throw ParseError(std::string("field \"") + field + "\" must be an array of rows");
    std::vector<std::vector<double>> rows;
    rows.reserve(j.size());
    for (const auto& r : j)
        rows.push_back(as_double_vector(r, field));
    return Matrix::from_rows(rows);
}

PomdpModel model_from_json(const json& j) {
    PomdpModel m;
    m.name = require_field(j, "name").get<std::string>();
    for (const auto& s : require_field(j, "states"))
        m.state_names.push_back(s.get<std::string>());
    for (const auto& s : require_field(j, "observations"))
        m.observation_names.push_back(s.get<std::string>());
    m.n_states = m.state_names.size();
    m.n_observations = m.observation_names.size();

    m.discount = require_field(j, "discount").get<double>();
    const json horizon = require_field(j, "horizon");
    if (!horizon.is_number_integer() || horizon.get<long long>() < 0)
        throw ParseError("field \"horizon\" must be a non-negative integer");
    m.horizon = horizon.get<std::size_t>();

    for (const auto& a : require_field(j, "actions")) {
        m.action_names.push_back(require_field(a, "name").get<std::string>());
        m.transition.push_back(as_matrix(require_field(a, "transition"), "transition"));
        m.observation.push_back(as_matrix(require_field(a, "observation"), "observation"));
        m.stage_cost.push_back(as_double_vector(require_field(a, "cost"), "cost"));
    }
    m.n_actions = m.action_names.size();

    m.terminal_cost = as_double_vector(require_field(j, "terminal_cost"), "terminal_cost");

    if (auto it = j.find("initial_belief"); it != j.end() && !it->is_null())
        m.initial_belief = Belief(as_double_vector(*it, "initial_belief"));

    auto parse_constraint = [](const json& c) {
        BeliefConstraint out;
        for (const auto& s : require_field(c, "safe_states")) {
            if (!s.is_number_integer() || s.get<long long>() < 0)
                throw ParseError("constraint safe_states must be non-negative integers");
            out.safe_states.push_back(s.get<std::size_t>());
        }
        out.epsilon = require_field(c, "epsilon").get<double>();
        return out;
    };
    if (auto it = j.find("constraint"); it != j.end() && !it->is_null()) {
        if (it->is_array())
            for (const auto& c : *it)
                m.constraints.push_back(parse_constraint(c));
        else
            m.constraints.push_back(parse_constraint(*it));
    }

    return validate_model(std::move(m));
}

json model_to_json(const PomdpModel& m) {
    json j;
    j["name"] = m.name;
    json states = json::array();
    for (std::size_t i = 0; i < m.n_states; ++i)
        states.push_back(m.state_names.empty() ? "s" + std::to_string(i + 1)
                                               : m.state_names[i]);
    j["states"] = states;
    json obs = json::array();
    for (std::size_t i = 0; i < m.n_observations; ++i)
        obs.push_back(m.observation_names.empty() ? "y" + std::to_string(i + 1)
                                                  : m.observation_names[i]);
    j["observations"] = obs;
    j["discount"] = m.discount;
    j["horizon"] = m.horizon;
    if (m.initial_belief)
        j["initial_belief"] = m.initial_belief->weights();
    json actions = json::array();
    for (std::size_t a = 0; a < m.n_actions; ++a) {
        json ja;
        ja["name"] = m.action_names.empty() ? "a" + std::to_string(a + 1)
                                            : m.action_names[a];
        ja["transition"] = m.transition[a].to_rows();
        ja["observation"] = m.observation[a].to_rows();
        ja["cost"] = m.stage_cost[a];
        actions.push_back(std::move(ja));
    }
    j["actions"] = std::move(actions);
    j["terminal_cost"] = m.terminal_cost;
    if (!m.constraints.empty()) {
        auto one = [](const BeliefConstraint& c) {
            json jc;
            jc["safe_states"] = c.safe_states;
            jc["epsilon"] = c.epsilon;
            return jc;
        };
        if (m.constraints.size() == 1) {
            j["constraint"] = one(m.constraints.front());
        } else {
            json arr = json::array();
            for (const auto& c : m.constraints)
                arr.push_back(one(c));
            j["constraint"] = std::move(arr);
        }
    }
    return j;
}

} // namespace

PomdpModel parse_model_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

std::string model_to_json_string(const PomdpModel& model) {
    return model_to_json(model).dump(2);
}

PomdpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open model file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_json(buf.str());
}

void save_model(const PomdpModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write model file: " + path.string());
    out << model_to_json_string(model) << '\n';
}

} // namespace psmpc
