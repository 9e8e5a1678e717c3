#include "psmpc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "psmpc/filter.hpp"

namespace psmpc {

using nlohmann::json;

namespace {

constexpr double kLikelihoodFloor = 1e-14; // branches below this contribute 0
constexpr double kDropTolerance = 1e-12;   // certified envelope slack per drop

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool canonical_less(const ValueVector& a, const ValueVector& b) {
    if (a.action != b.action)
        return a.action < b.action;
    return lex_less(a.gamma, b.gamma);
}

// w <= v componentwise and w != v.
bool dominates(const std::vector<double>& w, const std::vector<double>& v) {
    bool strict = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > v[i])
            return false;
        if (w[i] < v[i])
            strict = true;
    }
    return strict;
}

// Canonical sort, exact-duplicate removal (lowest action wins), pointwise
// dominance filter.
std::vector<ValueVector> pointwise_prune(std::vector<ValueVector> vecs) {
    std::sort(vecs.begin(), vecs.end(), canonical_less);
    std::vector<ValueVector> unique;
    unique.reserve(vecs.size());
    for (auto& v : vecs) {
        const bool dup = std::any_of(unique.begin(), unique.end(), [&](const ValueVector& u) {
            return u.gamma == v.gamma;
        });
        if (!dup)
            unique.push_back(std::move(v));
    }
    std::vector<ValueVector> kept;
    kept.reserve(unique.size());
    for (std::size_t i = 0; i < unique.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < unique.size() && !dominated; ++j)
            if (j != i && dominates(unique[j].gamma, unique[i].gamma))
                dominated = true;
        if (!dominated)
            kept.push_back(std::move(unique[i]));
    }
    return kept;
}

// Certified upper bound on max_pi min_w pi.(w - v) over the belief simplex:
// the matrix game with payoff (w - v)_i is solved by simplex on the dual of
// the positive-shift LP (all-slack starting basis, Bland's rule), and the
// resulting minimizer strategy q is re-evaluated exactly:
//     value <= max_i sum_w q_w (w - v)_i.
// A candidate is discarded only when this exact bound is at most
// kDropTolerance, so pruning can never lower the stored envelope by more; a
// failed or imprecise solve merely keeps a useless vector.
double envelope_improvement_upper(const std::vector<double>& v,
                                  const std::vector<const std::vector<double>*>& W) {
    const std::size_t n = v.size();
    const std::size_t m = W.size();

    double min_entry = std::numeric_limits<double>::infinity();
    for (const auto* w : W)
        for (std::size_t i = 0; i < n; ++i)
            min_entry = std::min(min_entry, (*w)[i] - v[i]);
    const double shift = 1.0 - min_entry;

    // maximize sum(y) s.t. for each state row i: sum_c M[i][c] y_c <= 1, y >= 0
    // where M[i][c] = (W[c] - v)[i] + shift >= 1.
    const std::size_t cols = m + n; // y variables then slacks
    std::vector<std::vector<double>> t(n, std::vector<double>(cols + 1, 0.0));
    std::vector<std::size_t> basis(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c)
            t[i][c] = (*W[c])[i] - v[i] + shift;
        t[i][m + i] = 1.0;
        t[i][cols] = 1.0;
        basis[i] = m + i;
    }
    std::vector<double> cost(cols, 0.0);
    for (std::size_t c = 0; c < m; ++c)
        cost[c] = 1.0;

    const double tol = 1e-11;
    const std::size_t max_iter = 20 * (n + m) + 100;
    const std::size_t dantzig_iters = 4 * (n + m) + 50; // then Bland, which cannot cycle
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::size_t enter = cols;
        if (iter < dantzig_iters) {
            double best_cost = tol;
            for (std::size_t c = 0; c < cols; ++c) {
                if (cost[c] > best_cost) {
                    best_cost = cost[c];
                    enter = c;
                }
            }
        } else {
            for (std::size_t c = 0; c < cols; ++c) {
                if (cost[c] > tol) {
                    enter = c;
                    break;
                }
            }
        }
        if (enter == cols)
            break;
        std::size_t leave = n;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (t[i][enter] > tol) {
                const double ratio = t[i][cols] / t[i][enter];
                if (leave == n || ratio < best_ratio - 1e-15 ||
                    (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
        }
        if (leave == n)
            break; // numerically unbounded; q so far still yields a valid bound
        const double pivot = t[leave][enter];
        for (double& x : t[leave])
            x /= pivot;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == leave)
                continue;
            const double f = t[i][enter];
            if (f == 0.0)
                continue;
            for (std::size_t c = 0; c <= cols; ++c)
                t[i][c] -= f * t[leave][c];
        }
        const double f = cost[enter];
        for (std::size_t c = 0; c < cols; ++c)
            cost[c] -= f * t[leave][c];
        basis[leave] = enter;
    }

    std::vector<double> q(m, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (basis[i] < m && t[i][cols] > 0.0) {
            q[basis[i]] = t[i][cols];
            total += t[i][cols];
        }
    }
    if (total <= 0.0)
        return std::numeric_limits<double>::infinity(); // no certificate: keep
    double upper = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t c = 0; c < m; ++c)
            if (q[c] > 0.0)
                row += (q[c] / total) * ((*W[c])[i] - v[i]);
        upper = std::max(upper, row);
    }
    return upper;
}

// Exact envelope filter. First pass keeps every candidate not certified
// useless against the set kept so far (can only over-keep); the reverse
// sweep then removes members certified useless against the rest. Both
// directions preserve the pointwise-minimum envelope to kDropTolerance.
std::vector<ValueVector> envelope_prune(std::vector<ValueVector> vecs) {
    std::vector<ValueVector> cands = pointwise_prune(std::move(vecs));
    if (cands.size() <= 1)
        return cands;

    const std::size_t n = cands.front().gamma.size();
    std::vector<double> coord_min(n, std::numeric_limits<double>::infinity());

    std::vector<ValueVector> kept;
    kept.reserve(cands.size());
    std::vector<const std::vector<double>*> refs;
    for (auto& v : cands) {
        bool wins_vertex = false; // strictly best at some simplex vertex: no LP needed
        for (std::size_t i = 0; i < n; ++i)
            wins_vertex |= v.gamma[i] < coord_min[i];
        if (!kept.empty() && !wins_vertex &&
            envelope_improvement_upper(v.gamma, refs) <= kDropTolerance)
            continue;
        for (std::size_t i = 0; i < n; ++i)
            coord_min[i] = std::min(coord_min[i], v.gamma[i]);
        kept.push_back(std::move(v));
        refs.push_back(&kept.back().gamma);
    }

    std::vector<bool> alive(kept.size(), true);
    for (std::size_t idx = kept.size(); idx-- > 0;) {
        std::vector<const std::vector<double>*> others;
        for (std::size_t j = 0; j < kept.size(); ++j)
            if (alive[j] && j != idx)
                others.push_back(&kept[j].gamma);
        if (others.empty())
            break;
        if (envelope_improvement_upper(kept[idx].gamma, others) <= kDropTolerance)
            alive[idx] = false;
    }
    std::vector<ValueVector> out;
    for (std::size_t j = 0; j < kept.size(); ++j)
        if (alive[j])
            out.push_back(std::move(kept[j]));
    return out;
}

std::vector<ValueVector> prune(std::vector<ValueVector> vecs, PruneMode mode) {
    switch (mode) {
    case PruneMode::none:
        std::sort(vecs.begin(), vecs.end(), canonical_less);
        return vecs;
    case PruneMode::pointwise:
        return pointwise_prune(std::move(vecs));
    case PruneMode::envelope:
        return envelope_prune(std::move(vecs));
    }
    return vecs;
}

} // namespace

ValueStage backup(const ValueStage& next_stage, const PomdpModel& model,
                  const BackupOptions& options) {
    if (next_stage.stage == 0)
        throw ValidationError("cannot back up below stage 0");
    if (next_stage.vectors.empty())
        throw ValidationError("next stage has no value vectors");
    for (const auto& v : next_stage.vectors)
        if (v.gamma.size() != model.n_states)
            throw ValidationError("value vector dimension does not match the model");

    const double predicted = static_cast<double>(model.n_actions) *
        std::pow(static_cast<double>(next_stage.vectors.size()),
                 static_cast<double>(model.n_observations));
    if (predicted > static_cast<double>(options.enumeration_cap)) {
        std::ostringstream os;
        os << "cross-sum enumeration needs " << predicted << " vectors, cap is "
           << options.enumeration_cap << "; use the online solver";
        throw CombinatorialBlowupError(os.str());
    }

    const std::size_t n = model.n_states;
    std::vector<ValueVector> result;
    for (std::size_t a = 0; a < model.n_actions; ++a) {
        const Matrix& p = model.transition[a];
        const Matrix& r = model.observation[a];

        // partial cross-sums over observations, pruned after each one
        std::vector<ValueVector> partial;
        partial.push_back({std::vector<double>(n, 0.0), static_cast<int>(a)});
        for (std::size_t theta = 0; theta < model.n_observations; ++theta) {
            // projections g(i) = sum_j p_ij r_jtheta gamma'(j)
            std::vector<std::vector<double>> proj;
            proj.reserve(next_stage.vectors.size());
            for (const auto& nv : next_stage.vectors) {
                std::vector<double> g(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        s += p.at(i, j) * r.at(j, theta) * nv.gamma[j];
                    g[i] = s;
                }
                proj.push_back(std::move(g));
            }
            std::vector<ValueVector> sums;
            sums.reserve(partial.size() * proj.size());
            for (const auto& s : partial) {
                for (const auto& g : proj) {
                    ValueVector combined{s.gamma, static_cast<int>(a)};
                    for (std::size_t i = 0; i < n; ++i)
                        combined.gamma[i] += g[i];
                    sums.push_back(std::move(combined));
                }
            }
            partial = prune(std::move(sums), options.prune);
        }
        for (auto& s : partial) {
            ValueVector v{std::vector<double>(n), static_cast<int>(a)};
            for (std::size_t i = 0; i < n; ++i)
                v.gamma[i] = model.stage_cost[a][i] + model.discount * s.gamma[i];
            result.push_back(std::move(v));
        }
    }

    ValueStage out;
    out.stage = next_stage.stage - 1;
    out.vectors = prune(std::move(result), options.prune);
    return out;
}

std::size_t PolicyArtifact::n_states() const {
    return stages.empty() || stages.front().vectors.empty()
               ? 0
               : stages.front().vectors.front().gamma.size();
}

Evaluation PolicyArtifact::evaluate(std::size_t stage, const Belief& belief) const {
    if (stage >= stages.size())
        throw ValidationError("stage " + std::to_string(stage) +
                              " out of range for horizon " + std::to_string(horizon));
    const ValueStage& vs = stages[stage];
    Evaluation best;
    bool first = true;
    for (const auto& v : vs.vectors) {
        if (v.gamma.size() != belief.size())
            throw ValidationError("belief dimension does not match this artifact");
        const double value = dot(belief, v.gamma);
        if (first || value < best.value) {
            best = {value, v.action};
            first = false;
        }
    }
    if (first)
        throw ValidationError("artifact stage has no value vectors");
    return best;
}

PolicyArtifact solve(const PomdpModel& model, const BackupOptions& options) {
    if (model.constrained())
        throw ValidationError("constrained models have no offline solve; use the online solver");

    PolicyArtifact artifact;
    artifact.fingerprint = model.fingerprint();
    artifact.discount = model.discount;
    artifact.horizon = model.horizon;
    artifact.stages.resize(model.horizon + 1);

    ValueStage terminal;
    terminal.stage = model.horizon;
    terminal.vectors.push_back({model.terminal_cost, kNoAction});
    artifact.stages[model.horizon] = std::move(terminal);

    for (std::size_t k = model.horizon; k-- > 0;)
        artifact.stages[k] = backup(artifact.stages[k + 1], model, options);
    return artifact;
}

namespace {

struct Successor {
    double likelihood = 0.0;
    std::vector<double> posterior; // empty when likelihood is below the floor
};

// Same arithmetic as filter update(): predicted from the belief, posterior
// proportional to predicted * observation column, in fixed index order.
std::vector<Successor> successors(const PomdpModel& model, const Belief& belief,
                                  std::size_t action) {
    const std::size_t n = model.n_states;
    const Matrix& p = model.transition[action];
    const Matrix& r = model.observation[action];
    std::vector<double> pred(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += belief[i] * p.at(i, j);
        pred[j] = s;
    }
    std::vector<Successor> out(model.n_observations);
    for (std::size_t theta = 0; theta < model.n_observations; ++theta) {
        std::vector<double> un(n);
        double norm = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            un[j] = pred[j] * r.at(j, theta);
            norm += un[j];
        }
        out[theta].likelihood = norm;
        if (norm >= kLikelihoodFloor) {
            for (double& w : un)
                w /= norm;
            out[theta].posterior = std::move(un);
        }
    }
    return out;
}

// Shared recursion for the brute-force value and the constraint-aware online
// solve: identical arithmetic, so the two coincide exactly on unconstrained
// models. `stage` indexes the constraint schedule; `remaining` counts
// decision steps left.
Evaluation expectimax_rec(const PomdpModel& model, const Belief& belief,
                          std::size_t remaining, std::size_t stage,
                          bool use_constraints) {
    if (remaining == 0)
        return {dot(belief, model.terminal_cost), kNoAction};

    Evaluation best;
    bool found = false;
    for (std::size_t a = 0; a < model.n_actions; ++a) {
        auto succ = successors(model, belief, a);

        if (use_constraints) {
            const BeliefConstraint* next = model.constraint_at(stage + 1);
            bool admissible = true;
            if (next) {
                for (const auto& s : succ) {
                    if (s.likelihood < kLikelihoodFloor)
                        continue;
                    if (!next->satisfied(Belief(s.posterior))) {
                        admissible = false;
                        break;
                    }
                }
            }
            if (!admissible)
                continue;
        }

        double q = dot(belief, model.stage_cost[a]);
        double acc = 0.0;
        for (const auto& s : succ) {
            if (s.likelihood < kLikelihoodFloor)
                continue;
            acc += s.likelihood *
                   expectimax_rec(model, Belief(s.posterior), remaining - 1, stage + 1,
                                  use_constraints)
                       .value;
        }
        q += model.discount * acc;
        if (!found || q < best.value) {
            best = {q, static_cast<int>(a)};
            found = true;
        }
    }
    if (!found)
        throw InfeasibleError("no admissible action at stage " + std::to_string(stage) +
                              ": every action leads to a constraint-violating belief");
    return best;
}

void check_tree_cap(const PomdpModel& model, std::size_t depth, std::uint64_t cap) {
    const double size = std::pow(
        static_cast<double>(model.n_actions) * static_cast<double>(model.n_observations),
        static_cast<double>(depth));
    if (size > static_cast<double>(cap))
        throw CombinatorialBlowupError("expectimax tree of depth " + std::to_string(depth) +
                                       " exceeds the cap of " + std::to_string(cap) +
                                       " nodes");
}

} // namespace

Evaluation expectimax_oracle(const PomdpModel& model, const Belief& belief,
                             std::size_t depth, std::uint64_t cap) {
    if (belief.size() != model.n_states)
        throw ValidationError("belief dimension does not match the model");
    check_tree_cap(model, depth, cap);
    return expectimax_rec(model, belief, depth, 0, false);
}

Evaluation solve_online(const PomdpModel& model, const Belief& belief, std::uint64_t cap) {
    if (belief.size() != model.n_states)
        throw ValidationError("belief dimension does not match the model");
    check_tree_cap(model, model.horizon, cap);
    return expectimax_rec(model, belief, model.horizon, 0, true);
}

namespace {

std::string fingerprint_to_hex(std::uint64_t fp) {
    std::ostringstream os;
    os << std::hex << fp;
    return os.str();
}

std::uint64_t fingerprint_from_hex(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

} // namespace

void save_artifact(const PolicyArtifact& artifact, const std::filesystem::path& path) {
    json j;
    j["fingerprint"] = fingerprint_to_hex(artifact.fingerprint);
    j["discount"] = artifact.discount;
    j["horizon"] = artifact.horizon;
    json stages = json::array();
    for (const auto& st : artifact.stages) {
        json js;
        js["stage"] = st.stage;
        json vecs = json::array();
        for (const auto& v : st.vectors)
            vecs.push_back({{"gamma", v.gamma}, {"action", v.action}});
        js["vectors"] = std::move(vecs);
        stages.push_back(std::move(js));
    }
    j["stages"] = std::move(stages);

    std::ofstream out(path);
    if (!out)
        throw Error("cannot write artifact file: " + path.string());
    out << j.dump(2) << '\n';
}

PolicyArtifact load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open artifact file: " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("artifact file is not valid JSON: ") + e.what());
    }
    try {
        PolicyArtifact artifact;
        artifact.fingerprint = fingerprint_from_hex(j.at("fingerprint").get<std::string>());
        artifact.discount = j.at("discount").get<double>();
        artifact.horizon = j.at("horizon").get<std::size_t>();
        artifact.stages.resize(artifact.horizon + 1);
        std::vector<bool> seen(artifact.horizon + 1, false);
        for (const auto& js : j.at("stages")) {
            ValueStage st;
            st.stage = js.at("stage").get<std::size_t>();
            if (st.stage >= artifact.stages.size())
                throw ParseError("artifact stage index out of range");
            for (const auto& jv : js.at("vectors")) {
                ValueVector v;
                v.gamma = jv.at("gamma").get<std::vector<double>>();
                v.action = jv.at("action").get<int>();
                st.vectors.push_back(std::move(v));
            }
            if (st.vectors.empty())
                throw ParseError("artifact stage has no vectors");
            std::sort(st.vectors.begin(), st.vectors.end(), canonical_less);
            seen[st.stage] = true;
            artifact.stages[st.stage] = std::move(st);
        }
        for (std::size_t k = 0; k < seen.size(); ++k)
            if (!seen[k])
                throw ParseError("artifact is missing stage " + std::to_string(k));
        return artifact;
    } catch (const json::exception& e) {
        throw ParseError(std::string("artifact file is malformed: ") + e.what());
    }
}

} // namespace psmpc
